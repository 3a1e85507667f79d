#include "qstir/counting.hpp"

#include "qstir/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace qstir {

namespace {

// φ(ω) = ∫₀^dt e^{iωs} ds, with a series near ω·dt = 0.
cplx phase_integral(double omega, double dt) {
    const double x = omega * dt;
    if (std::abs(x) < 1e-3) {
        const cplx ix{0.0, x};
        return dt * (1.0 + ix / 2.0 + ix * ix / 6.0 + ix * ix * ix / 24.0 + ix * ix * ix * ix / 120.0);
    }
    return (std::polar(1.0, x) - 1.0) / cplx{0.0, omega};
}

CMat hermitize(const CMat& A) { return 0.5 * (A + A.adjoint()); }

template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < count; i += threads) body(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double midpoint(const Substep& s) { return s.t + 0.5 * s.dt; }

CMat current_mid(const SystemSpec& spec, const DrivingProtocol& proto, const Substep& s, Bond bond) {
    const double t = midpoint(s);
    return current_at(spec, proto.c1(t), spec.sites == 3 ? proto.c2(t) : 0.0, bond);
}

}  // namespace

CVec site_state(int sites, int index) {
    if (index < 0 || index >= sites) throw std::invalid_argument("site_state: index out of range");
    CVec v = CVec::Zero(sites);
    v(index) = 1.0;
    return v;
}

CMat step_current_integral(const EigenSystem& es, const CMat& current, double dt) {
    const CMat rotated = es.vectors.adjoint() * current * es.vectors;
    CMat weighted(rotated.rows(), rotated.cols());
    for (Eigen::Index k = 0; k < rotated.rows(); ++k)
        for (Eigen::Index l = 0; l < rotated.cols(); ++l)
            weighted(k, l) = rotated(k, l) * phase_integral(es.values(k) - es.values(l), dt);
    return hermitize(es.vectors * weighted * es.vectors.adjoint());
}

ChargeRun accumulate_charges(const SystemSpec& spec, const DrivingProtocol& proto, const std::vector<Bond>& bonds,
                             double t0, double t1, const PropagationOptions& opts) {
    spec.validate();
    for (Bond b : bonds)
        if (b == Bond::ZeroTwo && spec.sites != 3) throw InvalidBond("a two-site system has only the 0->1 bond");
    if (!proto.contains(t0) || !proto.contains(t1)) throw TimeOutOfRange("charge window outside protocol");

    ChargeRun run;
    std::vector<CMat> sums(bonds.size(), CMat::Zero(spec.sites, spec.sites));
    auto observer = [&](const Substep& s, const EigenSystem& es, const CMat& U) {
        for (std::size_t b = 0; b < bonds.size(); ++b) {
            const CMat X = step_current_integral(es, current_mid(spec, proto, s, bonds[b]), s.dt);
            sums[b] += U.adjoint() * X * U;
        }
    };
    run.propagator = integrate(hamiltonian_generator(spec, proto), spec.sites, t0, t1, opts, observer);
    for (std::size_t b = 0; b < bonds.size(); ++b) {
        ChargeMatrix cm;
        cm.Q = hermitize(sums[b]);
        cm.t0 = t0;
        cm.t1 = t1;
        cm.steps = run.propagator.steps;
        run.charges.push_back(std::move(cm));
    }
    return run;
}

ChargeMatrix charge_matrix(const SystemSpec& spec, const DrivingProtocol& proto, Bond bond, double t0, double t1,
                           const PropagationOptions& opts, bool estimate_error) {
    ChargeMatrix cm = accumulate_charges(spec, proto, {bond}, t0, t1, opts).charges.front();
    if (estimate_error) {
        PropagationOptions fine = opts;
        fine.dt_max *= 0.5;
        fine.tol /= 8.0;
        const ChargeMatrix ref = accumulate_charges(spec, proto, {bond}, t0, t1, fine).charges.front();
        cm.discretization_error = (cm.Q - ref.Q).norm();
    }
    return cm;
}

CountingResult counting_stats(const ChargeMatrix& Qm, const CVec& psi0, int k_max) {
    if (psi0.size() != Qm.Q.rows()) throw std::invalid_argument("counting_stats: state dimension mismatch");
    const double norm2 = psi0.squaredNorm();
    if (std::abs(norm2 - 1.0) > kNormTol) {
        std::ostringstream os;
        os << "‖ψ‖² = " << norm2;
        throw UnnormalizedState(os.str());
    }
    if (hermiticity_defect(Qm.Q) > 1e-10 && Qm.Q.norm() > 0.0)
        throw NonHermitian("charge matrix defect " + std::to_string(hermiticity_defect(Qm.Q)));

    const EigenSystem es = eig_hermitian(hermitize(Qm.Q));
    CountingResult res;
    for (Eigen::Index i = 0; i < es.dim(); ++i)
        res.spectrum.push_back({es.values(i), std::norm(es.vectors.col(i).dot(psi0))});

    res.moments.assign(static_cast<std::size_t>(std::max(k_max, 2)) + 1, 0.0);
    for (const auto& sp : res.spectrum) {
        double power = 1.0;
        for (auto& m : res.moments) {
            m += sp.weight * power;
            power *= sp.charge;
        }
    }
    res.mean = res.moments[1];
    double var = res.moments[2] - res.mean * res.mean;

    const CVec q_psi = Qm.Q * psi0;
    const double direct_mean = psi0.dot(q_psi).real();
    const double direct_var = q_psi.squaredNorm() - direct_mean * direct_mean;
    if (std::abs(direct_mean - res.mean) > 1e-9 || std::abs(direct_var - var) > 1e-9) {
        std::ostringstream os;
        os << "spectral and direct moments disagree: mean " << res.mean << " vs " << direct_mean << ", variance "
           << var << " vs " << direct_var;
        throw NumericalError(os.str());
    }
    if (var < 0.0) {
        if (var < -1e-10) throw NumericalError("negative variance " + std::to_string(var));
        res.notes.push_back("variance " + std::to_string(var) + " clipped to 0");
        var = 0.0;
    }
    res.variance = var;
    res.moments.resize(static_cast<std::size_t>(std::max(k_max, 0)) + 1);
    return res;
}

ChargeMatrix to_adiabatic_initial(const ChargeMatrix& Qm, const AdiabaticFrame& frame) {
    ChargeMatrix out = Qm;
    const CMat& V = frame.states.front();
    out.Q = hermitize(V.adjoint() * Qm.Q * V);
    out.basis = "adiabatic_initial";
    return out;
}

ChargeDecomposition q_parallel_perp(const ChargeMatrix& Qm, const AdiabaticFrame& frame) {
    const ChargeMatrix ad = Qm.basis == "adiabatic_initial" ? Qm : to_adiabatic_initial(Qm, frame);
    const int a = frame.occupied;
    const int b = frame.partner;

    ChargeDecomposition d;
    d.adiabatic = ad.Q;
    d.parallel = ad.Q(a, a).real();
    d.perpendicular = ad.Q(a, b) / cplx{0.0, 1.0};
    for (int m = 0; m < ad.Q.rows(); ++m)
        if (m != a && m != b) d.third_level += std::norm(ad.Q(a, m));

    // Identities for the initial state = adiabatic level a.
    const CountingResult stats = counting_stats(ad, site_state(static_cast<int>(ad.Q.rows()), a), 2);
    const double perp2 = std::norm(d.perpendicular);
    if (std::abs(stats.mean - d.parallel) > 1e-9 || std::abs(stats.variance - perp2 - d.third_level) > 1e-9)
        throw NumericalError("charge decomposition identities violated");
    if (d.third_level > 0.01 * perp2 + 1e-8) {
        std::ostringstream os;
        os << "third level carries fluctuation weight " << d.third_level << " against |Q_perp|^2 = " << perp2;
        throw ReductionInvalid(os.str());
    }
    return d;
}

cplx characteristic_function(const SystemSpec& spec, const DrivingProtocol& proto, Bond bond, const CVec& psi0,
                             const StepGrid& grid, double r) {
    const double s = 0.5 * r;
    auto counting_generator = [&](double sign) {
        return [&, sign](double t) {
            const CMat I = current_at(spec, proto.c1(t), spec.sites == 3 ? proto.c2(t) : 0.0, bond);
            return CMat(hamiltonian_at(spec, proto.u(t), proto.c1(t), spec.sites == 3 ? proto.c2(t) : 0.0) -
                        sign * s * I);
        };
    };
    const CVec plus = replay(counting_generator(+1.0), spec.sites, grid).U * psi0;
    const CVec minus = replay(counting_generator(-1.0), spec.sites, grid).U * psi0;
    return minus.dot(plus);
}

std::vector<double> symmetric_grid(double half_width, std::size_t points) {
    if (points < 3 || points % 2 == 0) throw std::invalid_argument("symmetric_grid: need an odd count >= 3");
    std::vector<double> g(points);
    const auto centre = static_cast<std::ptrdiff_t>(points / 2);
    const double step = half_width / static_cast<double>(centre);
    for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(static_cast<std::ptrdiff_t>(i) - centre) * step;
    return g;
}

std::vector<double> conjugate_q_grid(const std::vector<double>& r_grid) {
    const std::size_t n = r_grid.size();
    if (n < 3 || n % 2 == 0) throw std::invalid_argument("conjugate_q_grid: need an odd-length r grid");
    const double dr = (r_grid.back() - r_grid.front()) / static_cast<double>(n - 1);
    const double dq = 2.0 * std::numbers::pi / (static_cast<double>(n) * dr);
    return symmetric_grid(dq * static_cast<double>(n / 2), n);
}

double fcs_taper(double r, double r_max, double fraction) {
    const double x = std::abs(r);
    if (fraction <= 0.0) return x <= r_max ? 1.0 : 0.0;
    const double flat = (1.0 - fraction) * r_max;
    if (x <= flat) return 1.0;
    if (x >= r_max) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * (x - flat) / (fraction * r_max));
    return c * c;
}

QuasiDistribution fcs_quasi(const SystemSpec& spec, const DrivingProtocol& proto, Bond bond, const CVec& psi0,
                            const std::vector<double>& r_grid, const std::vector<double>& q_grid,
                            const FcsOptions& opts) {
    const std::size_t n = r_grid.size();
    if (n < 3) throw std::invalid_argument("fcs_quasi: r grid too short");
    const double dr = (r_grid.back() - r_grid.front()) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(r_grid[i] + r_grid[n - 1 - i]) > 1e-12 * std::max(1.0, std::abs(r_grid[i])))
            throw std::invalid_argument("fcs_quasi: r grid must be symmetric about 0");
        if (i > 0 && std::abs(r_grid[i] - r_grid[i - 1] - dr) > 1e-9 * dr)
            throw std::invalid_argument("fcs_quasi: r grid must be uniform");
    }
    if (q_grid.size() < 2) throw std::invalid_argument("fcs_quasi: Q grid too short");
    double q_max = 0.0;
    for (double q : q_grid) q_max = std::max(q_max, std::abs(q));
    if (dr > std::numbers::pi / q_max * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "r spacing " << dr << " exceeds the Nyquist bound pi/Q_max = " << std::numbers::pi / q_max;
        throw GridTooCoarse(os.str());
    }

    QuasiDistribution qd;
    qd.r_grid = r_grid;
    qd.q_grid = q_grid;

    // Reference pass: the step grid and the naive P(Q) share one discretization.
    ChargeRun ref = accumulate_charges(spec, proto, {bond}, proto.t_start, proto.t_end, opts.prop);
    const StepGrid& grid = ref.propagator.grid;
    qd.steps = grid.size();
    qd.spectral = counting_stats(ref.charges.front(), psi0, 4);

    qd.chi.assign(n, cplx{});
    parallel_for(n, opts.threads,
                 [&](std::size_t i) { qd.chi[i] = characteristic_function(spec, proto, bond, psi0, grid, r_grid[i]); });

    // Moments from untapered χ at r = 0, ±h, ±2h, ±3h.
    const double h = opts.fd_step;
    std::array<cplx, 7> f;
    parallel_for(7, opts.threads, [&](std::size_t j) {
        const double r = (static_cast<double>(j) - 3.0) * h;
        f[j] = characteristic_function(spec, proto, bond, psi0, grid, r);
    });
    auto at = [&](int k) { return f[static_cast<std::size_t>(k + 3)]; };
    const cplx d1 = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
    const cplx d2 = (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h);
    const cplx d3 = (-at(3) + 8.0 * at(2) - 13.0 * at(1) + 13.0 * at(-1) - 8.0 * at(-2) + at(-3)) / (8.0 * h * h * h);
    const cplx d4 = (-at(3) + 12.0 * at(2) - 39.0 * at(1) + 56.0 * at(0) - 39.0 * at(-1) + 12.0 * at(-2) - at(-3)) /
                    (6.0 * h * h * h * h);
    const cplx mi{0.0, -1.0};
    qd.raw_moments = {at(0).real(), (mi * d1).real(), (mi * mi * d2).real(), (mi * mi * mi * d3).real(),
                      (mi * mi * mi * mi * d4).real()};
    qd.mean = qd.raw_moments[1];
    qd.variance = qd.raw_moments[2] - qd.mean * qd.mean;

    if (std::abs(qd.mean - qd.spectral.mean) > opts.moment_tol ||
        std::abs(qd.variance - qd.spectral.variance) > opts.moment_tol) {
        std::ostringstream os;
        os << "counting-field moments (" << qd.mean << ", " << qd.variance << ") disagree with spectral ("
           << qd.spectral.mean << ", " << qd.spectral.variance << ")";
        throw GridTooCoarse(os.str());
    }

    const double r_max = r_grid.back();
    qd.p0.assign(q_grid.size(), 0.0);
    for (std::size_t j = 0; j < q_grid.size(); ++j) {
        cplx acc{};
        for (std::size_t i = 0; i < n; ++i)
            acc += fcs_taper(r_grid[i], r_max, opts.taper_fraction) * qd.chi[i] * std::polar(1.0, -q_grid[j] * r_grid[i]);
        acc *= dr / (2.0 * std::numbers::pi);
        qd.p0[j] = acc.real();
        qd.max_imaginary = std::max(qd.max_imaginary, std::abs(acc.imag()));
    }
    const double dq = (q_grid.back() - q_grid.front()) / static_cast<double>(q_grid.size() - 1);
    for (double p : qd.p0) qd.normalization += p * dq;
    return qd;
}

ContinuityReport continuity_check(const SystemSpec& spec, const DrivingProtocol& proto, const CVec& psi0,
                                  const PropagationOptions& opts) {
    if (spec.sites != 3) throw ConfigError("continuity check needs three sites");
    if (std::abs(psi0.squaredNorm() - 1.0) > kNormTol) throw UnnormalizedState("continuity check");

    ContinuityReport rep;
    const double n0_initial = std::norm(psi0(0));
    double q01 = 0.0;
    double q02 = 0.0;
    auto observer = [&](const Substep& s, const EigenSystem& es, const CMat& U) {
        const CVec psi = U * psi0;
        q01 += psi.dot(step_current_integral(es, current_mid(spec, proto, s, Bond::ZeroOne), s.dt) * psi).real();
        q02 += psi.dot(step_current_integral(es, current_mid(spec, proto, s, Bond::ZeroTwo), s.dt) * psi).real();
        const CVec after = expm_skew(es, s.dt) * psi;
        const double n0 = std::norm(after(0));
        rep.max_defect = std::max(rep.max_defect, std::abs(q01 + q02 - (n0_initial - n0)));
        rep.final_n0 = n0;
    };
    const UnitaryRecord rec = integrate(hamiltonian_generator(spec, proto), spec.sites, proto.t_start, proto.t_end,
                                        opts, observer);
    rep.final_q01 = q01;
    rep.final_q02 = q02;
    rep.steps = rec.steps;
    return rep;
}

SpreadingSeries multi_cycle_spreading(const SystemSpec& spec, const DrivingProtocol& cycle, const CVec& psi0,
                                      int n_cycles, Bond bond, const PropagationOptions& opts) {
    if (n_cycles < 8) throw std::invalid_argument("multi_cycle_spreading: need at least 8 cycles");
    ChargeRun one = accumulate_charges(spec, cycle, {bond}, cycle.t_start, cycle.t_end, opts);

    SpreadingSeries out;
    out.one_cycle = one.charges.front();
    out.period = one.propagator.U;

    ChargeMatrix acc = out.one_cycle;
    CMat power = out.period;  // U^n after n cycles
    for (int n = 1; n <= n_cycles; ++n) {
        if (n > 1) {
            acc.Q = hermitize(acc.Q + power.adjoint() * out.one_cycle.Q * power);
            power = out.period * power;
        }
        acc.t1 = cycle.t_start + n * cycle.duration();
        const CountingResult stats = counting_stats(acc, psi0, 2);
        out.points.push_back({n, stats.mean, std::sqrt(stats.variance)});
    }
    return out;
}

CVec floquet_preparation(const FloquetStates& fs, const CVec& reference) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < fs.vectors.cols(); ++k)
        if (std::abs(fs.vectors.col(k).dot(reference)) > std::abs(fs.vectors.col(best).dot(reference))) best = k;
    return fs.vectors.col(best);
}

}  // namespace qstir
