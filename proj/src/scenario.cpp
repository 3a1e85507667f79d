#include "qstir/scenario.hpp"

#include "qstir/analytic.hpp"
#include "qstir/errors.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

namespace qstir {

namespace fs = std::filesystem;

// ---- experiments ----

LZRun lz_transition(double c, double exponent, double u_span, double ramp_fraction, const PropagationOptions& opts) {
    if (!(exponent > 0.0)) throw ConfigError("LZ exponent must be positive");
    LZRun run;
    run.exponent = exponent;
    run.c = c;
    run.udot = 2.0 * std::numbers::pi * c * c / exponent;
    run.u_span = u_span;
    const SystemSpec spec = SystemSpec::two_site();
    const DrivingProtocol proto = make_protocol(spec, LinearRampLZ{c, run.udot, u_span, 1.0, ramp_fraction});
    const UnitaryRecord rec = propagate(spec, proto, proto.t_start, proto.t_end, opts);
    run.p_numeric = std::norm(rec.U(0, 0));
    run.p_lz = analytic::lz_probability({c, run.udot});
    run.rel_err = std::abs(run.p_numeric - run.p_lz) / run.p_lz;
    run.steps = rec.steps;
    return run;
}

SinglePathRun single_path(double c, double p_lz, double u_span, double ramp_fraction, const PropagationOptions& opts) {
    if (!(p_lz > 0.0 && p_lz < 1.0)) throw ConfigError("target P_LZ must lie in (0, 1)");
    SinglePathRun run;
    run.p_lz = p_lz;
    run.udot = -2.0 * std::numbers::pi * c * c / std::log(p_lz);
    const SystemSpec spec = SystemSpec::two_site();
    const DrivingProtocol proto = make_protocol(spec, LinearRampLZ{c, run.udot, u_span, 1.0, ramp_fraction});
    const ChargeRun charges = accumulate_charges(spec, proto, {Bond::ZeroOne}, proto.t_start, proto.t_end, opts);
    const ChargeMatrix& Q = charges.charges.front();
    run.p = std::norm(charges.propagator.U(1, 0));
    run.stats = counting_stats(Q, site_state(2, 0), 4);
    run.steps = charges.propagator.steps;

    const AdiabaticFrame frame = adiabatic_frame(spec, proto, uniform_grid(proto.t_start, proto.t_end, 4001));
    const ChargeDecomposition d = q_parallel_perp(Q, frame);
    run.q_parallel = d.parallel;
    run.q_perp = std::abs(d.perpendicular);
    return run;
}

DoublePathRun double_path(const LinearRampLZ& ramp, const PropagationOptions& opts) {
    const SystemSpec spec = SystemSpec::three_site();
    const DrivingProtocol proto = make_protocol(spec, ramp);
    const ChargeRun charges = accumulate_charges(spec, proto, {Bond::ZeroOne}, proto.t_start, proto.t_end, opts);
    const CountingResult stats = counting_stats(charges.charges.front(), site_state(3, 0), 2);
    DoublePathRun run;
    run.lambda = ramp.lambda;
    run.p = 1.0 - std::norm(charges.propagator.U(0, 0));
    run.p_lz = analytic::lz_probability({ramp.c, ramp.udot});
    run.mean = stats.mean;
    run.variance = stats.variance;
    run.steps = charges.propagator.steps;
    return run;
}

CycleRun stir_cycle_run(const StirCycle& cycle, const PropagationOptions& opts, bool with_phase) {
    const SystemSpec spec = SystemSpec::three_site();
    const DrivingProtocol proto = make_protocol(spec, cycle);
    const ChargeRun charges = accumulate_charges(spec, proto, {Bond::ZeroOne}, proto.t_start, proto.t_end, opts);
    const CVec psi0 = site_state(3, 0);

    CycleRun run;
    run.params = cycle;
    run.period = proto.duration();
    run.stats = counting_stats(charges.charges.front(), psi0, 4);
    run.mean = run.stats.mean;
    run.variance = run.stats.variance;
    run.residual = 1.0 - std::norm(charges.propagator.U(0, 0));
    run.steps = charges.propagator.steps;
    run.continuity_defect = continuity_check(spec, proto, psi0, opts).max_defect;
    run.p_lz = analytic::lz_probability({cycle.c_eff, cycle.udot});
    if (with_phase) {
        const auto points = static_cast<std::size_t>(std::clamp(proto.duration() / 0.25, 2001.0, 200001.0));
        const AdiabaticFrame frame = adiabatic_frame(spec, proto, uniform_grid(proto.t_start, proto.t_end, points));
        run.phi = dynamical_phase(frame).relative_phase();
    }
    return run;
}

ProportionalFit fit_proportional(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("fit_proportional: size mismatch");
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    ProportionalFit f;
    f.a = sxx > 0.0 ? sxy / sxx : 0.0;
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ss_res += std::pow(y[i] - f.a * x[i], 2);
        ss_tot += std::pow(y[i] - mean, 2);
    }
    f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return f;
}

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_linear: need two or more points");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

}  // namespace qstir

namespace qstir {

namespace {

struct Context {
    const Config& config;
    double scale;  // multiplies every tolerance
    ScenarioResult out;

    void check(std::string name, double predicted, std::string oracle, double measured, double tol, bool relative) {
        out.report.checks.push_back(
            make_check(std::move(name), predicted, std::move(oracle), measured, tol * scale, relative));
    }
    void upper(std::string name, double limit, std::string oracle, double measured) {
        out.report.checks.push_back(make_bound(std::move(name), limit * scale, std::move(oracle), measured));
    }
    // Floors close to 1 (R², fidelities) loosen through their distance from 1.
    void lower_unit(std::string name, double limit, std::string oracle, double measured) {
        out.report.checks.push_back(
            make_floor(std::move(name), 1.0 - (1.0 - limit) * scale, std::move(oracle), measured));
    }
    void observe(std::string name, double value, std::string detail) {
        out.report.observations.push_back({std::move(name), value, std::move(detail)});
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

template <class T>
T preset_as(const Config& config, const char* scenario) {
    const ProtocolPreset p = config.preset();
    if (const auto* v = std::get_if<T>(&p)) return *v;
    throw ConfigError(std::string(scenario) + " needs protocol.kind = " + preset_kind(ProtocolPreset{T{}}));
}

std::vector<double> sorted_levels(const RVec& v) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end());
    return s;
}

double sorted_position(const RVec& v, int branch) {
    int pos = 0;
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (v(k) < v(branch) || (v(k) == v(branch) && k < branch)) ++pos;
    return pos;
}

Bond parse_bond(const Config& config) {
    const std::string b = config.get_string("experiment.bond", "01");
    if (b == "01") return Bond::ZeroOne;
    if (b == "02") return Bond::ZeroTwo;
    throw ConfigError("experiment.bond must be 01 or 02");
}

double lz_window(const LinearRampLZ& p) { return std::max(p.u_span, 40.0 * p.c); }

// ---- levels ----
void run_levels(Context& ctx) {
    const SystemSpec spec = ctx.config.system();
    const DrivingProtocol proto = make_protocol(spec, ctx.config.preset());
    const int points = ctx.config.get_int("experiment.grid_points", 2001);
    if (points < 2) throw ConfigError("experiment.grid_points must be at least 2");
    const AdiabaticFrame frame =
        adiabatic_frame(spec, proto, uniform_grid(proto.t_start, proto.t_end, static_cast<std::size_t>(points)));

    Table levels{"levels", {"t [1/J]", "u [J]", "E_low [J]"}, {}};
    if (spec.sites == 3) levels.columns.push_back("E_mid [J]");
    levels.columns.insert(levels.columns.end(), {"E_high [J]", "occupied_level [1]"});
    for (std::size_t i = 0; i < frame.times.size(); ++i) {
        const double t = frame.times[i];
        std::vector<double> row{t, proto.u(t)};
        for (double e : sorted_levels(frame.levels[i])) row.push_back(e);
        row.push_back(sorted_position(frame.levels[i], frame.occupied));
        levels.add(std::move(row));
    }

    Table crossings{"crossings", {"t [1/J]", "gap [J]", "gap_predicted [J]"}, {}};
    double min_gap = std::numeric_limits<double>::quiet_NaN();
    double predicted_gap = std::numeric_limits<double>::quiet_NaN();
    for (double tc : frame.crossing_times) {
        const double gap = relevant_gap(spec, proto, tc);
        const double c = spec.sites == 3 ? effective_coupling(proto.c1(tc), proto.c2(tc)) : proto.c1(tc);
        crossings.add({tc, gap, 2.0 * std::abs(c)});
        ctx.check("gap at t=" + fmt(tc), 2.0 * std::abs(c), "2 * effective_coupling", gap, 0.05, true);
        if (!(gap >= min_gap)) {
            min_gap = gap;
            predicted_gap = 2.0 * std::abs(c);
        }
    }
    if (!proto.nominal_crossings.empty())
        ctx.check("crossing count", static_cast<double>(proto.nominal_crossings.size()), "protocol construction",
                  static_cast<double>(frame.crossing_times.size()), 0.0, false);
    ctx.observe("min_branch_overlap", frame.min_overlap, "smallest consecutive eigenvector overlap on the grid");
    ctx.out.tables = {levels, crossings};
    ctx.out.summary = {static_cast<double>(frame.crossing_times.size()), min_gap, predicted_gap};
}

// ---- lz-sweep ----
void run_lz_sweep(Context& ctx) {
    if (ctx.config.system().sites != 2) throw ConfigError("lz-sweep runs on two sites");
    const LinearRampLZ p = preset_as<LinearRampLZ>(ctx.config, "lz-sweep");
    const PropagationOptions opts = ctx.config.numerics();
    const auto exponents = ctx.config.get_list("experiment.exponents", {0.5, 1.0, 2.0, 3.0, 4.0});
    Table t{"lz_sweep", {"exponent [1]", "udot [J^2]", "p_numeric [1]", "p_lz [1]", "rel_err [1]", "steps [1]"}, {}};
    double worst = 0.0;
    for (double x : exponents) {
        const LZRun r = lz_transition(p.c, x, lz_window(p), p.ramp_fraction, opts);
        t.add({x, r.udot, r.p_numeric, r.p_lz, r.rel_err, static_cast<double>(r.steps)});
        ctx.check("P_LZ at 2pi c^2/udot=" + fmt(x), r.p_lz, "analytic::lz_probability", r.p_numeric, 0.05, true);
        worst = std::max(worst, r.rel_err);
    }
    ctx.out.tables = {t};
    ctx.out.summary = {static_cast<double>(exponents.size()), worst};
}

// ---- single-path ----
void run_single_path(Context& ctx) {
    if (ctx.config.system().sites != 2) throw ConfigError("single-path runs on two sites");
    const LinearRampLZ p = preset_as<LinearRampLZ>(ctx.config, "single-path");
    const PropagationOptions opts = ctx.config.numerics();
    const auto transfers = ctx.config.get_list("experiment.transfers", {0.25, 0.5, 0.9});
    Table t{"single_path",
            {"p_target [1]", "p_lz [1]", "udot [J^2]", "p [1]", "q_minus [particles]", "q_plus [particles]",
             "w_minus [1]", "w_plus [1]", "m1 [particles]", "m2 [particles^2]", "m3 [particles^3]",
             "m4 [particles^4]", "variance [particles^2]", "q_perp [particles]"},
            {}};
    double eig_err = 0.0;
    double weight_err = 0.0;
    double corr_err = 0.0;
    for (double target : transfers) {
        if (!(target > 0.0 && target < 1.0)) throw ConfigError("experiment.transfers must lie in (0, 1)");
        const SinglePathRun r = single_path(p.c, 1.0 - target, lz_window(p), p.ramp_fraction, opts);
        const auto& sp = r.stats.spectrum;
        const auto& m = r.stats.moments;
        t.add({target, r.p_lz, r.udot, r.p, sp[0].charge, sp[1].charge, sp[0].weight, sp[1].weight, m[1], m[2], m[3],
               m[4], r.stats.variance, r.q_perp});

        const std::string tag = " at p=" + fmt(target);
        const auto ep = analytic::single_path_eigenpairs(r.p);
        ctx.check("Q+" + tag, ep.q_plus, "analytic::single_path_eigenpairs", sp[1].charge, 1e-3, false);
        ctx.check("Q-" + tag, ep.q_minus, "analytic::single_path_eigenpairs", sp[0].charge, 1e-3, false);
        ctx.check("w+" + tag, ep.w_plus, "analytic::single_path_eigenpairs", sp[1].weight, 1e-3, false);
        ctx.check("w-" + tag, ep.w_minus, "analytic::single_path_eigenpairs", sp[0].weight, 1e-3, false);
        for (int k = 1; k <= 4; ++k)
            ctx.check("<Q^" + std::to_string(k) + ">" + tag, analytic::single_path_moments(r.p, k),
                      "analytic::single_path_moments", m[static_cast<std::size_t>(k)], 1e-3, false);
        eig_err = std::max({eig_err, std::abs(sp[1].charge - ep.q_plus), std::abs(sp[0].charge - ep.q_minus)});
        weight_err = std::max({weight_err, std::abs(sp[1].weight - ep.w_plus), std::abs(sp[0].weight - ep.w_minus)});

        if (r.p_lz >= 0.05 && r.p_lz <= 0.6) {
            const auto pred = analytic::double_path_moments(1.0, 1.0 - r.p_lz);
            ctx.check("mean = 1-P_LZ" + tag, pred.mean, "analytic::double_path_moments(1, 1-P_LZ)", r.stats.mean,
                      0.02, true);
            ctx.check("variance = P_LZ(1-P_LZ)" + tag, pred.variance, "analytic::double_path_moments(1, 1-P_LZ)",
                      r.stats.variance, 0.02, true);
            ctx.check("|Q_perp|" + tag, std::sqrt(pred.variance), "sqrt((1-P_LZ) P_LZ)", r.q_perp, 0.02, true);
            corr_err = std::max({corr_err, std::abs(r.stats.mean / pred.mean - 1.0),
                                 std::abs(r.stats.variance / pred.variance - 1.0)});
        }
    }
    ctx.out.tables = {t};
    ctx.out.summary = {static_cast<double>(transfers.size()), eig_err, weight_err, corr_err};
}

// ---- double-path ----
void run_double_path(Context& ctx) {
    if (ctx.config.system().sites != 3) throw ConfigError("double-path runs on three sites");
    const LinearRampLZ base = preset_as<LinearRampLZ>(ctx.config, "double-path");
    const PropagationOptions opts = ctx.config.numerics();
    const auto lambdas = ctx.config.get_list("experiment.lambdas", {-0.7, 0.3, 0.5, 1.0, 1.7});
    Table t{"double_path",
            {"lambda [1]", "p [1]", "mean [particles]", "variance [particles^2]", "mean_predicted [particles]",
             "variance_predicted [particles^2]", "variance_classical [particles^2]"},
            {}};
    double mean_err = 0.0;
    double var_err = 0.0;
    for (double lambda : lambdas) {
        LinearRampLZ ramp = base;
        ramp.lambda = lambda;
        const DoublePathRun r = double_path(ramp, opts);
        const auto pred = analytic::double_path_moments(lambda, r.p);
        double classical = std::numeric_limits<double>::quiet_NaN();
        if (lambda * r.p >= 0.0 && lambda * r.p <= 1.0)
            classical = analytic::classical_double_path_variance(lambda, r.p);
        t.add({lambda, r.p, r.mean, r.variance, pred.mean, pred.variance, classical});

        const std::string tag = " at lambda=" + fmt(lambda);
        ctx.lower_unit("deep-adiabatic p" + tag, 0.999, "protocol regime", r.p);
        ctx.check("mean" + tag, pred.mean, "analytic::double_path_moments", r.mean, 0.01, true);
        ctx.check("variance" + tag, pred.variance, "analytic::double_path_moments", r.variance,
                  std::max(0.05 * pred.variance, 1e-4), false);
        if (lambda == 0.5) {
            ctx.upper("variance far below the classical 1/4" + tag, 1e-4, "analytic::double_path_moments",
                      r.variance);
            ctx.observe("classical variance" + tag, classical, "two-outcome estimate, for contrast");
        }
        mean_err = std::max(mean_err, std::abs(r.mean / pred.mean - 1.0));
        var_err = std::max(var_err, std::abs(r.variance - pred.variance));
    }
    ctx.out.tables = {t};
    ctx.out.summary = {static_cast<double>(lambdas.size()), mean_err, var_err};
}

// ---- stir-cycle ----
void run_stir_cycle(Context& ctx) {
    if (ctx.config.system().sites != 3) throw ConfigError("stir-cycle runs on three sites");
    const StirCycle cycle = preset_as<StirCycle>(ctx.config, "stir-cycle");
    const PropagationOptions opts = ctx.config.numerics();
    const CycleRun r = stir_cycle_run(cycle, opts, true);
    StirCycle slow = cycle;
    slow.udot *= 0.5;
    slow.dwell *= 2.0;
    const CycleRun r2 = stir_cycle_run(slow, opts, false);

    const double q = analytic::stirring_charge(cycle.lambda_ccw, cycle.lambda_cw);
    const double var_pred = analytic::stirring_variance({cycle.lambda_ccw, cycle.lambda_cw, r.phi, r.p_lz});
    const double res_pred = analytic::residual_occupation(r.phi, r.p_lz);

    Table spectrum{"stir_cycle_spectrum", {"charge [particles]", "weight [1]"}, {}};
    for (const auto& sp : r.stats.spectrum) spectrum.add({sp.charge, sp.weight});
    Table summary{"stir_cycle",
                  {"lambda_ccw [1]", "lambda_cw [1]", "period [1/J]", "mean [particles]",
                   "mean_doubled_duration [particles]", "variance [particles^2]", "residual [1]", "phi [rad]",
                   "p_lz [1]", "variance_predicted [particles^2]", "residual_predicted [1]",
                   "continuity_defect [particles]"},
                  {}};
    summary.add({cycle.lambda_ccw, cycle.lambda_cw, r.period, r.mean, r2.mean, r.variance, r.residual, r.phi, r.p_lz,
                 var_pred, res_pred, r.continuity_defect});

    const double scale = std::max({std::abs(q), std::abs(cycle.lambda_ccw), std::abs(cycle.lambda_cw)});
    ctx.check("charge per cycle", q, "analytic::stirring_charge", r.mean, 0.05 * (q != 0.0 ? std::abs(q) : scale),
              false);
    ctx.check("charge per cycle at doubled duration", r.mean, "duration independence", r2.mean,
              0.02 * std::max(std::abs(r.mean), 1e-12), false);
    ctx.upper("continuity defect", kContinuityTol, "charge continuity across site 0", r.continuity_defect);
    ctx.observe("variance vs interference estimate", r.variance - var_pred,
                "measured minus |l_ccw + l_cw e^{i phi}|^2 P_LZ at the measured phase");
    ctx.observe("residual occupation vs interference estimate", r.residual - res_pred,
                "measured minus 4 sin^2(phi/2) P_LZ at the measured phase");
    ctx.out.tables = {summary, spectrum};
    ctx.out.summary = {r.mean, q, r.variance, r.residual, r.phi, var_pred, res_pred, r.continuity_defect};
}

// ---- fcs ----
void run_fcs(Context& ctx) {
    const SystemSpec spec = ctx.config.system();
    const DrivingProtocol proto = make_protocol(spec, ctx.config.preset());
    const FcsOptions opts = ctx.config.fcs_options();
    const Bond bond = parse_bond(ctx.config);
    const int site = ctx.config.get_int("experiment.initial_site", 0);
    if (site < 0 || site >= spec.sites) throw ConfigError("experiment.initial_site out of range");
    const int points = ctx.config.get_int("experiment.r_points", 201);
    const double r_max = ctx.config.get_double("experiment.r_max", 20.0);
    if (points < 3 || points % 2 == 0) throw ConfigError("experiment.r_points must be odd and at least 3");
    if (!(r_max > 0.0)) throw ConfigError("experiment.r_max must be positive");

    const auto r_grid = symmetric_grid(r_max, static_cast<std::size_t>(points));
    const auto q_grid = conjugate_q_grid(r_grid);
    const QuasiDistribution qd = fcs_quasi(spec, proto, bond, site_state(spec.sites, site), r_grid, q_grid, opts);

    Table chi{"fcs_chi", {"r [1/particles]", "chi_re [1]", "chi_im [1]", "taper [1]"}, {}};
    for (std::size_t i = 0; i < r_grid.size(); ++i)
        chi.add({r_grid[i], qd.chi[i].real(), qd.chi[i].imag(), fcs_taper(r_grid[i], r_max, opts.taper_fraction)});
    Table p0{"fcs_p0", {"Q [particles]", "P0 [1/particles]"}, {}};
    for (std::size_t j = 0; j < q_grid.size(); ++j) p0.add({q_grid[j], qd.p0[j]});
    Table spectrum{"fcs_spectrum", {"charge [particles]", "weight [1]"}, {}};
    for (const auto& sp : qd.spectral.spectrum) spectrum.add({sp.charge, sp.weight});
    Table moments{"fcs_moments", {"k [1]", "quasi [particles^k]", "spectral [particles^k]"}, {}};
    for (int k = 0; k <= 4; ++k)
        moments.add({static_cast<double>(k), qd.raw_moments[static_cast<std::size_t>(k)],
                     qd.spectral.moments[static_cast<std::size_t>(k)]});

    const std::size_t mid = r_grid.size() / 2;
    double reality = 0.0;
    for (std::size_t i = 0; i < r_grid.size(); ++i)
        reality = std::max(reality, std::abs(qd.chi[i] - std::conj(qd.chi[r_grid.size() - 1 - i])));
    ctx.check("chi(0)", 1.0, "normalization of the state", qd.chi[mid].real(), 1e-10, false);
    ctx.upper("|chi(-r) - conj chi(r)|", 1e-10, "reality of P0", reality);
    ctx.check("integral of P0", 1.0, "normalization", qd.normalization, 1e-6, false);
    ctx.check("first moment", qd.spectral.mean, "spectral P(Q)", qd.mean, opts.moment_tol, false);
    ctx.check("variance", qd.spectral.variance, "spectral P(Q)", qd.variance, opts.moment_tol, false);
    ctx.observe("third moment difference", qd.raw_moments[3] - qd.spectral.moments[3], "quasi minus spectral");
    ctx.observe("fourth moment difference", qd.raw_moments[4] - qd.spectral.moments[4], "quasi minus spectral");
    ctx.observe("most negative P0", *std::min_element(qd.p0.begin(), qd.p0.end()), "quasi-distribution values");
    ctx.observe("largest discarded imaginary part", qd.max_imaginary, "Fourier sum");
    ctx.out.tables = {chi, p0, spectrum, moments};
    ctx.out.summary = {qd.mean,           qd.variance,      qd.spectral.mean,
                       qd.spectral.variance, qd.normalization, qd.raw_moments[3] - qd.spectral.moments[3],
                       qd.raw_moments[4] - qd.spectral.moments[4]};
}

// ---- multi-cycle ----
void run_multi_cycle(Context& ctx) {
    if (ctx.config.system().sites != 3) throw ConfigError("multi-cycle runs on three sites");
    const StirCycle cycle = preset_as<StirCycle>(ctx.config, "multi-cycle");
    const PropagationOptions opts = ctx.config.numerics();
    const int cycles = ctx.config.get_int("experiment.cycles", 16);
    if (cycles < 8) throw ConfigError("experiment.cycles must be at least 8");
    const std::string prep = ctx.config.get_string("experiment.preparation", "generic");

    const SystemSpec spec = SystemSpec::three_site();
    const DrivingProtocol proto = make_protocol(spec, cycle);
    CVec psi0;
    if (prep == "generic") {
        psi0 = CVec::Zero(3);
        psi0(0) = psi0(1) = 1.0 / std::numbers::sqrt2;
    } else if (prep == "floquet") {
        psi0 = floquet_preparation(floquet_states(spec, proto, opts), site_state(3, 0));
    } else if (prep == "site0") {
        psi0 = site_state(3, 0);
    } else {
        throw ConfigError("experiment.preparation must be generic, floquet or site0");
    }

    const SpreadingSeries series = multi_cycle_spreading(spec, proto, psi0, cycles, Bond::ZeroOne, opts);
    Table t{"multi_cycle", {"n [cycles]", "mean [particles]", "std [particles]"}, {}};
    std::vector<double> n;
    std::vector<double> mean;
    std::vector<double> sd;
    for (const auto& pt : series.points) {
        t.add({static_cast<double>(pt.n), pt.mean, pt.stddev});
        n.push_back(pt.n);
        mean.push_back(pt.mean);
        sd.push_back(pt.stddev);
    }
    const LinearFit sfit = fit_linear(n, sd);
    const LinearFit mfit = fit_linear(n, mean);
    const double ratio = sd.front() > 0.0 ? *std::max_element(sd.begin(), sd.end()) / sd.front()
                                          : std::numeric_limits<double>::infinity();
    if (prep == "generic") {
        ctx.lower_unit("linear growth of std (R^2)", 0.99, "linear spreading over cycles", sfit.r2);
        ctx.out.report.checks.push_back(make_floor("std growth slope", 0.0, "linear spreading over cycles", sfit.slope));
    } else {
        ctx.upper("std bounded by 3x its one-cycle value", 3.0, "Floquet-state suppression", ratio);
        const double q = analytic::stirring_charge(cycle.lambda_ccw, cycle.lambda_cw);
        ctx.check("mean slope per cycle", q, "analytic::stirring_charge", mfit.slope, 0.05 * std::abs(q), false);
    }
    ctx.observe("std slope", sfit.slope, "least-squares slope of std vs n");
    ctx.observe("max std / one-cycle std", ratio, "");
    ctx.out.tables = {t};
    ctx.out.summary = {sfit.slope, sfit.r2, ratio, mfit.slope};
}

}  // namespace

std::vector<std::string> summary_columns(const std::string& scenario) {
    std::vector<std::string> c;
    if (scenario == "levels") c = {"crossings [1]", "min_gap [J]", "gap_predicted [J]"};
    else if (scenario == "lz-sweep") c = {"points [1]", "max_rel_err [1]"};
    else if (scenario == "single-path")
        c = {"points [1]", "max_eigen_err [particles]", "max_weight_err [1]", "max_correspondence_rel_err [1]"};
    else if (scenario == "double-path") c = {"points [1]", "max_mean_rel_err [1]", "max_variance_err [particles^2]"};
    else if (scenario == "stir-cycle")
        c = {"mean [particles]",        "mean_predicted [particles]", "variance [particles^2]",
             "residual [1]",            "phi [rad]",                  "variance_predicted [particles^2]",
             "residual_predicted [1]", "continuity_defect [particles]"};
    else if (scenario == "fcs")
        c = {"mean [particles]", "variance [particles^2]", "spectral_mean [particles]",
             "spectral_variance [particles^2]", "normalization [1]", "m3_difference [particles^3]",
             "m4_difference [particles^4]"};
    else if (scenario == "multi-cycle")
        c = {"std_slope [particles]", "std_r2 [1]", "max_std_ratio [1]", "mean_slope [particles]"};
    else throw ConfigError("unknown scenario '" + scenario + "'");
    c.push_back("checks_failed [1]");
    return c;
}

ScenarioResult run_scenario(const Config& config, double tolerance_scale) {
    if (!(tolerance_scale > 0.0)) throw ConfigError("tolerance scale must be positive");
    Context ctx{config, tolerance_scale, {}};
    const std::string s = config.scenario();
    ctx.out.report.scenario = s;
    ctx.out.report.config_hash = config.hash();
    if (s == "levels") run_levels(ctx);
    else if (s == "lz-sweep") run_lz_sweep(ctx);
    else if (s == "single-path") run_single_path(ctx);
    else if (s == "double-path") run_double_path(ctx);
    else if (s == "stir-cycle") run_stir_cycle(ctx);
    else if (s == "fcs") run_fcs(ctx);
    else if (s == "multi-cycle") run_multi_cycle(ctx);
    else throw ConfigError("unknown scenario '" + s + "'");
    ctx.out.summary.push_back(static_cast<double>(ctx.out.report.failures()));
    if (tolerance_scale != 1.0) ctx.out.report.notes.push_back("tolerances scaled by " + fmt(tolerance_scale));
    return std::move(ctx.out);
}

Report run_and_write(const Config& config, const fs::path& out_dir, const std::optional<fs::path>& report_path,
                     double tolerance_scale) {
    ScenarioResult r = run_scenario(config, tolerance_scale);
    for (const auto& t : r.tables) r.report.artifacts.push_back(write_csv(out_dir, t).filename().string());
    write_atomic(report_path.value_or(out_dir / "report.json"), r.report.to_json().dump(2) + "\n");
    return r.report;
}

namespace {

std::string axis_unit(const std::string& key) {
    static const std::vector<std::pair<std::string, std::string>> units = {
        {"protocol.c", "J"},         {"protocol.udot", "J^2"},       {"protocol.u_span", "J"},
        {"protocol.dwell", "1/J"},   {"protocol.u", "J"},            {"protocol.c1", "J"},
        {"protocol.c2", "J"},        {"protocol.duration", "1/J"},   {"numerics.dt_max", "1/J"},
        {"experiment.r_max", "1/particles"}};
    for (const auto& [k, u] : units)
        if (k == key) return u;
    return "1";
}

}  // namespace

SweepResult sweep(const Config& config, const SweepSpec& spec, double tolerance_scale, unsigned threads) {
    const std::string key = config.resolve_key(spec.axis);
    const std::string scenario = config.scenario();
    SweepResult result;
    result.table.name = "sweep_" + scenario;
    result.table.columns = {key.substr(key.find('.') + 1) + " [" + axis_unit(key) + "]"};
    for (const auto& c : summary_columns(scenario)) result.table.columns.push_back(c);

    const std::size_t n = spec.values.size();
    std::vector<std::optional<ScenarioResult>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t i) {
        try {
            Config c = config;
            c.set(key, format_number(spec.values[i]));
            slots[i] = run_scenario(c, tolerance_scale);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n; i += threads) work(i);
            });
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row{spec.values[i]};
        row.insert(row.end(), slots[i]->summary.begin(), slots[i]->summary.end());
        result.table.add(std::move(row));
        result.reports.push_back(std::move(slots[i]->report));
    }
    return result;
}

}  // namespace qstir
