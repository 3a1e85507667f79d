#include "qstir/propagation.hpp"

#include "qstir/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace qstir {

namespace {

void check_unitary(UnitaryRecord& rec) {
    rec.unitarity_defect = unitarity_defect(rec.U);
    if (!(rec.unitarity_defect <= kUnitarityLimit)) {
        std::ostringstream os;
        os << "propagator lost unitarity: defect " << rec.unitarity_defect;
        throw NumericalError(os.str());
    }
}

}  // namespace

Generator hamiltonian_generator(const SystemSpec& spec, const DrivingProtocol& proto) {
    return [spec, proto](double t) { return hamiltonian(spec, proto, t); };
}

UnitaryRecord integrate(const Generator& generator, Eigen::Index dim, double t0, double t1,
                        const PropagationOptions& opts, const StepObserver& observer) {
    if (!(opts.dt_max > 0.0)) throw std::invalid_argument("integrate: dt_max must be positive");
    if (!(t1 >= t0)) throw std::invalid_argument("integrate: t1 must not precede t0");

    UnitaryRecord rec;
    rec.U = identity(dim);
    rec.t0 = t0;
    rec.t1 = t1;

    const double span = t1 - t0;
    if (span == 0.0) return rec;

    auto emit = [&](const Substep& s, const EigenSystem& es, const CMat& step) {
        if (observer) observer(s, es, rec.U);
        rec.U = step * rec.U;
        rec.grid.push_back(s);
        ++rec.steps;
    };

    if (!opts.adaptive) {
        const auto n = static_cast<std::size_t>(std::ceil(span / opts.dt_max - 1e-9));
        const double dt = span / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double t = t0 + static_cast<double>(k) * dt;
            const EigenSystem es = eig_hermitian(generator(t + 0.5 * dt));
            emit({t, dt}, es, expm_skew(es, dt));
        }
        check_unitary(rec);
        return rec;
    }

    const double end_slack = 1e-13 * std::max(1.0, std::abs(t1));
    double t = t0;
    double dt = std::min(opts.dt_max, span);
    while (t1 - t > end_slack) {
        const bool last = dt >= t1 - t;
        if (last) dt = t1 - t;

        const EigenSystem full = eig_hermitian(generator(t + 0.5 * dt));
        const EigenSystem first = eig_hermitian(generator(t + 0.25 * dt));
        const EigenSystem second = eig_hermitian(generator(t + 0.75 * dt));
        const CMat u_first = expm_skew(first, 0.5 * dt);
        const CMat u_second = expm_skew(second, 0.5 * dt);
        const double err = (expm_skew(full, dt) - u_second * u_first).norm();

        double factor = err > 0.0 ? 0.9 * std::cbrt(opts.tol / err) : 2.0;
        if (err <= opts.tol) {
            emit({t, 0.5 * dt}, first, u_first);
            emit({t + 0.5 * dt, 0.5 * dt}, second, u_second);
            t = last ? t1 : t + dt;
            dt = std::min(opts.dt_max, dt * std::clamp(factor, 0.2, 2.0));
        } else {
            ++rec.rejected;
            dt *= std::clamp(factor, 0.2, 0.9);
            if (dt < opts.dt_min) {
                std::ostringstream os;
                os << "step size " << dt << " below " << opts.dt_min << " at t=" << t;
                throw StepUnderflow(os.str());
            }
        }
    }
    check_unitary(rec);
    return rec;
}

UnitaryRecord replay(const Generator& generator, Eigen::Index dim, const StepGrid& grid, const StepObserver& observer) {
    UnitaryRecord rec;
    rec.U = identity(dim);
    if (grid.empty()) return rec;
    rec.t0 = grid.front().t;
    rec.t1 = grid.back().t + grid.back().dt;
    rec.grid = grid;
    for (const Substep& s : grid) {
        const EigenSystem es = eig_hermitian(generator(s.t + 0.5 * s.dt));
        if (observer) observer(s, es, rec.U);
        rec.U = expm_skew(es, s.dt) * rec.U;
    }
    rec.steps = grid.size();
    check_unitary(rec);
    return rec;
}

UnitaryRecord propagate(const SystemSpec& spec, const DrivingProtocol& proto, double t0, double t1,
                        const PropagationOptions& opts) {
    spec.validate();
    if (!proto.contains(t0) || !proto.contains(t1)) throw TimeOutOfRange("propagation window outside protocol");
    return integrate(hamiltonian_generator(spec, proto), spec.sites, t0, t1, opts);
}

std::vector<double> uniform_grid(double t0, double t1, std::size_t points) {
    if (points < 2) throw std::invalid_argument("uniform_grid: need at least two points");
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(points - 1);
    g.back() = t1;
    return g;
}

double relevant_gap(const SystemSpec& spec, const DrivingProtocol& proto, double t) {
    const EigenSystem es = eig_hermitian(hamiltonian(spec, proto, t));
    const auto n = es.dim();
    return es.values(n - 1) - es.values(n - 2);
}

AdiabaticFrame adiabatic_frame(const SystemSpec& spec, const DrivingProtocol& proto, const std::vector<double>& grid) {
    if (grid.size() < 3) throw std::invalid_argument("adiabatic_frame: grid needs at least three points");
    if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("adiabatic_frame: grid must be sorted");

    AdiabaticFrame frame;
    frame.spec = spec;
    frame.protocol = proto;
    frame.times = grid;
    const int n = spec.sites;

    std::array<int, 3> perm{0, 1, 2};
    std::vector<std::array<int, 3>> perms;
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.begin() + n));

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const EigenSystem es = eig_hermitian(hamiltonian(spec, proto, grid[i]));
        if (i == 0) {
            frame.levels.push_back(es.values);
            frame.states.push_back(es.vectors);
            continue;
        }
        const CMat& prev = frame.states.back();
        const CMat overlaps = prev.adjoint() * es.vectors;  // (branch, new index)

        // Choose the assignment with the largest worst-case overlap.
        double best_score = -1.0;
        std::array<int, 3> best{0, 1, 2};
        for (const auto& p : perms) {
            double worst = 1.0;
            for (int k = 0; k < n; ++k) worst = std::min(worst, std::abs(overlaps(k, p[k])));
            if (worst > best_score) {
                best_score = worst;
                best = p;
            }
        }
        if (best_score < kBranchOverlapMin) {
            std::ostringstream os;
            os << "overlap " << best_score << " between t=" << grid[i - 1] << " and t=" << grid[i]
               << "; refine the grid";
            throw BranchAmbiguity(os.str());
        }
        frame.min_overlap = std::min(frame.min_overlap, best_score);

        RVec levels(n);
        CMat states(n, n);
        for (int k = 0; k < n; ++k) {
            const cplx ov = overlaps(k, best[k]);
            levels(k) = es.values(best[k]);
            states.col(k) = es.vectors.col(best[k]) * (std::conj(ov) / std::abs(ov));
        }
        frame.levels.push_back(levels);
        frame.states.push_back(states);
    }

    // Branch holding |0⟩ initially, and its crossing partner.
    const CMat& first = frame.states.front();
    CVec plus = CVec::Zero(n);
    if (n == 2) {
        plus(1) = 1.0;
    } else {
        plus(1) = plus(2) = 1.0 / std::numbers::sqrt2;
    }
    int occ = 0;
    int part = 0;
    for (int k = 0; k < n; ++k) {
        if (std::abs(first(0, k)) > std::abs(first(0, occ))) occ = k;
        if (std::abs(plus.dot(first.col(k))) > std::abs(plus.dot(first.col(part)))) part = k;
    }
    if (part == occ) part = (occ + 1) % n;
    frame.occupied = occ;
    frame.partner = part;

    // Crossing times: strict local minima of the relevant gap, refined by Brent.
    std::vector<double> gap(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const RVec sorted = [&] {
            RVec v = frame.levels[i];
            std::sort(v.data(), v.data() + v.size());
            return v;
        }();
        gap[i] = sorted(n - 1) - sorted(n - 2);
    }
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        if (gap[i] < gap[i - 1] && gap[i] <= gap[i + 1]) {
            auto f = [&](double t) { return relevant_gap(spec, proto, t); };
            const auto r = boost::math::tools::brent_find_minima(f, grid[i - 1], grid[i + 1], 52);
            frame.crossing_times.push_back(r.first);
        }
    }
    return frame;
}

UnitaryRecord adiabatic_propagator(const AdiabaticFrame& frame, std::size_t index) {
    if (frame.times.empty()) throw std::invalid_argument("adiabatic_propagator: empty frame");
    if (index >= frame.times.size()) index = frame.times.size() - 1;
    const auto n = frame.levels.front().size();

    RVec theta = RVec::Zero(n);
    for (std::size_t i = 1; i <= index; ++i)
        theta += 0.5 * (frame.times[i] - frame.times[i - 1]) * (frame.levels[i] + frame.levels[i - 1]);

    CVec phases(n);
    for (Eigen::Index k = 0; k < n; ++k) phases(k) = std::polar(1.0, -theta(k));

    UnitaryRecord rec;
    rec.U = frame.states[index] * phases.asDiagonal() * frame.states.front().adjoint();
    rec.t0 = frame.times.front();
    rec.t1 = frame.times[index];
    rec.steps = index;
    rec.unitarity_defect = unitarity_defect(rec.U);
    return rec;
}

namespace {

void check_reduction(const AdiabaticFrame& frame) {
    if (frame.spec.sites != 3) return;
    double lower_gap = std::numeric_limits<double>::infinity();
    double coupling = 0.0;
    for (std::size_t i = 0; i < frame.times.size(); ++i) {
        const RVec& e = frame.levels[i];
        std::vector<double> v(e.data(), e.data() + e.size());
        std::sort(v.begin(), v.end());
        lower_gap = std::min(lower_gap, v[1] - v[0]);
        const double t = frame.times[i];
        coupling = std::max({coupling, std::abs(frame.protocol.c1(t)), std::abs(frame.protocol.c2(t))});
    }
    if (lower_gap < 10.0 * coupling) {
        std::ostringstream os;
        os << "third level approaches the crossing pair (gap " << lower_gap << " vs coupling " << coupling << ")";
        throw ReductionInvalid(os.str());
    }
}

double integrate_gap(const AdiabaticFrame& frame, double a, double b) {
    if (b <= a) return 0.0;
    auto f = [&](double t) { return relevant_gap(frame.spec, frame.protocol, t); };
    double error = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-12, &error);
}

}  // namespace

double PhaseRecord::relative_phase() const {
    if (crossing_phases.size() < 2) return 0.0;
    return crossing_phases[1] - crossing_phases[0];
}

double dynamical_phase_at(const AdiabaticFrame& frame, double t) {
    check_reduction(frame);
    const double t0 = frame.times.front();
    double phi = 0.0;
    double a = t0;
    for (std::size_t i = 1; i < frame.times.size() && a < t; ++i) {
        const double b = std::min(t, frame.times[i]);
        phi += integrate_gap(frame, a, b);
        a = b;
    }
    return phi;
}

PhaseRecord dynamical_phase(const AdiabaticFrame& frame) {
    check_reduction(frame);
    PhaseRecord rec;
    rec.times = frame.times;
    rec.phi.assign(frame.times.size(), 0.0);
    for (std::size_t i = 1; i < frame.times.size(); ++i)
        rec.phi[i] = rec.phi[i - 1] + integrate_gap(frame, frame.times[i - 1], frame.times[i]);

    rec.crossing_times = frame.crossing_times;
    for (double tc : frame.crossing_times) {
        const auto it = std::upper_bound(frame.times.begin(), frame.times.end(), tc);
        const auto i = static_cast<std::size_t>(std::distance(frame.times.begin(), it)) - 1;
        rec.crossing_phases.push_back(rec.phi[i] + integrate_gap(frame, frame.times[i], tc));
    }
    return rec;
}

FloquetStates floquet_decompose(const CMat& U) {
    const Eigen::Index n = U.rows();
    const CMat one = identity(n);

    // Cayley transform K = i(1 − W)(1 + W)⁻¹ of W = e^{−iβ}U is Hermitian with
    // eigenvalues tan(α/2), a monotone map of the eigenphases. β keeps −1 out
    // of the spectrum of W.
    double best_beta = 0.0;
    double best_margin = -1.0;
    for (int k = 0; k < 16; ++k) {
        const double beta = 2.0 * std::numbers::pi * k / 16.0;
        const CMat M = one + std::polar(1.0, -beta) * U;
        const CMat MtM = 0.5 * (M.adjoint() * M + (M.adjoint() * M).adjoint());
        const double margin = eig_hermitian(MtM).values(0);
        if (margin > best_margin) {
            best_margin = margin;
            best_beta = beta;
        }
    }
    const CMat W = std::polar(1.0, -best_beta) * U;
    CMat K = cplx{0.0, 1.0} * (one - W) * (one + W).inverse();
    K = (0.5 * (K + K.adjoint())).eval();
    const EigenSystem es = eig_hermitian(K);

    FloquetStates fs;
    fs.phases.resize(n);
    fs.eigenvalues.resize(n);
    fs.vectors.resize(n, n);
    std::vector<std::pair<double, Eigen::Index>> order;
    for (Eigen::Index k = 0; k < n; ++k) {
        const CVec v = es.vectors.col(k);
        const cplx e = v.dot(U * v);
        order.emplace_back(std::arg(e), k);
    }
    std::sort(order.begin(), order.end());
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index k = order[j].second;
        fs.vectors.col(j) = es.vectors.col(k);
        fs.eigenvalues(j) = fs.vectors.col(j).dot(U * fs.vectors.col(j));
        fs.phases(j) = order[j].first;
    }
    return fs;
}

FloquetStates floquet_states(const SystemSpec& spec, const DrivingProtocol& proto, const PropagationOptions& opts) {
    UnitaryRecord period = propagate(spec, proto, proto.t_start, proto.t_end, opts);
    FloquetStates fs = floquet_decompose(period.U);
    fs.period = std::move(period);
    return fs;
}

}  // namespace qstir
