#include "qstir/model.hpp"

#include "qstir/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace qstir {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

void validate(const LinearRampLZ& p) {
    require(std::isfinite(p.c) && std::isfinite(p.lambda), "linear ramp: non-finite coupling");
    require(p.udot > 0.0 && std::isfinite(p.udot), "linear ramp: udot must be positive");
    require(p.u_span > 0.0 && std::isfinite(p.u_span), "linear ramp: u_span must be positive");
    require(p.ramp_fraction >= 0.0 && p.ramp_fraction <= 0.5, "linear ramp: ramp_fraction must lie in [0, 0.5]");
}

void validate(const StirCycle& p) {
    require(std::isfinite(p.c_eff) && std::isfinite(p.lambda_ccw) && std::isfinite(p.lambda_cw),
            "stir cycle: non-finite coupling or splitting ratio");
    require(p.udot > 0.0 && std::isfinite(p.udot), "stir cycle: udot must be positive");
    require(p.u_span > 0.0 && p.u_span < 2.0, "stir cycle: u_span must lie in (0, 2)");
    require(p.dwell >= 0.0 && std::isfinite(p.dwell), "stir cycle: dwell must be non-negative");
    require(p.ramp_fraction >= 0.0 && p.ramp_fraction <= 0.5, "stir cycle: ramp_fraction must lie in [0, 0.5]");
}

void validate(const ConstantDrive& p) {
    require(std::isfinite(p.u) && std::isfinite(p.c1) && std::isfinite(p.c2), "constant drive: non-finite parameter");
    require(p.duration > 0.0 && std::isfinite(p.duration), "constant drive: duration must be positive");
}

double clamp01(double s) { return std::clamp(s, 0.0, 1.0); }

}  // namespace

void SystemSpec::validate() const {
    if (sites != 2 && sites != 3) throw ConfigError("sites must be 2 or 3");
}

bool DrivingProtocol::contains(double t) const {
    const double slack = 1e-9 * std::max({1.0, std::abs(t_start), std::abs(t_end)});
    return t >= t_start - slack && t <= t_end + slack;
}

std::optional<double> DrivingProtocol::small_coupling_warning(int samples) const {
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = t_start + duration() * i / std::max(1, samples - 1);
        worst = std::max({worst, std::abs(c1(t)), std::abs(c2(t))});
    }
    if (worst > kSmallCouplingWarn) return worst;
    return std::nullopt;
}

std::string preset_kind(const ProtocolPreset& preset) {
    struct Visitor {
        std::string operator()(const LinearRampLZ&) const { return "linear-ramp-lz"; }
        std::string operator()(const StirCycle&) const { return "stir-cycle"; }
        std::string operator()(const ConstantDrive&) const { return "constant"; }
    };
    return std::visit(Visitor{}, preset);
}

double tukey_envelope(double s, double ramp) {
    s = clamp01(s);
    if (ramp <= 0.0) return 1.0;
    const double edge = std::min(s, 1.0 - s);
    if (edge >= ramp) return 1.0;
    const double x = std::sin(0.5 * std::numbers::pi * edge / ramp);
    return x * x;
}

DrivingProtocol make_protocol(const SystemSpec& spec, const ProtocolPreset& preset) {
    spec.validate();
    DrivingProtocol proto;
    proto.preset = preset;
    const double root2 = std::numbers::sqrt2;

    if (const auto* lz = std::get_if<LinearRampLZ>(&preset)) {
        validate(*lz);
        if (spec.sites == 2 && lz->lambda != 1.0)
            throw ConfigError("linear ramp: a splitting ratio other than 1 needs three sites");
        const LinearRampLZ p = *lz;
        const double T = 2.0 * p.u_span / p.udot;
        const double w1 = spec.sites == 2 ? 1.0 : root2 * p.lambda;
        const double w2 = spec.sites == 2 ? 0.0 : root2 * (1.0 - p.lambda);
        proto.u = [p](double t) { return 1.0 - p.u_span + p.udot * t; };
        proto.c1 = [p, T, w1](double t) { return w1 * p.c * tukey_envelope(t / T, p.ramp_fraction); };
        proto.c2 = [p, T, w2](double t) { return w2 * p.c * tukey_envelope(t / T, p.ramp_fraction); };
        proto.t_start = 0.0;
        proto.t_end = T;
        proto.half_cycle_lambdas = {p.lambda};
        proto.nominal_crossings = {0.5 * T};
        std::ostringstream os;
        os << "linear-ramp-lz(c=" << p.c << ", udot=" << p.udot << ", lambda=" << p.lambda << ")";
        proto.label = os.str();
    } else if (const auto* sc = std::get_if<StirCycle>(&preset)) {
        validate(*sc);
        if (spec.sites != 3) throw ConfigError("stir cycle needs three sites");
        const StirCycle p = *sc;
        const double half = 2.0 * p.u_span / p.udot;
        const double back = half + p.dwell;
        // Phase of the cycle: sweep up on [0, half), dwell, sweep down on [back, back+half].
        auto u = [p, half, back](double t) {
            if (t < half) return 1.0 - p.u_span + p.udot * t;
            if (t < back) return 1.0 + p.u_span;
            return 1.0 + p.u_span - p.udot * (t - back);
        };
        auto coupling = [p, half, back, root2](double t, bool first) {
            double s = 0.0;
            double lambda = 0.0;
            if (t < half) {
                s = t / half;
                lambda = p.lambda_ccw;
            } else if (t < back) {
                return 0.0;
            } else {
                s = (t - back) / half;
                lambda = p.lambda_cw;
            }
            const double weight = first ? lambda : 1.0 - lambda;
            return root2 * weight * p.c_eff * tukey_envelope(s, p.ramp_fraction);
        };
        proto.u = u;
        proto.c1 = [coupling](double t) { return coupling(t, true); };
        proto.c2 = [coupling](double t) { return coupling(t, false); };
        proto.t_start = 0.0;
        proto.t_end = back + half;
        proto.half_cycle_lambdas = {p.lambda_ccw, p.lambda_cw};
        proto.nominal_crossings = {0.5 * half, back + 0.5 * half};
        std::ostringstream os;
        os << "stir-cycle(c=" << p.c_eff << ", lambda_ccw=" << p.lambda_ccw << ", lambda_cw=" << p.lambda_cw
           << ", udot=" << p.udot << ", dwell=" << p.dwell << ")";
        proto.label = os.str();
    } else {
        const auto& cd = std::get<ConstantDrive>(preset);
        validate(cd);
        if (spec.sites == 2 && cd.c2 != 0.0) throw ConfigError("constant drive: c2 must be 0 on two sites");
        const ConstantDrive p = cd;
        proto.u = [p](double) { return p.u; };
        proto.c1 = [p](double) { return p.c1; };
        proto.c2 = [p](double) { return p.c2; };
        proto.t_start = 0.0;
        proto.t_end = p.duration;
        proto.label = "constant";
    }
    return proto;
}

CMat hamiltonian_at(const SystemSpec& spec, double u, double c1, double c2) {
    if (spec.sites == 2) {
        CMat H(2, 2);
        H << u, c1, c1, 1.0;
        return H;
    }
    CMat H(3, 3);
    H << u, c1, c2,
         c1, 0.0, 1.0,
         c2, 1.0, 0.0;
    return H;
}

CMat current_at(const SystemSpec& spec, double c1, double c2, Bond bond) {
    const cplx i{0.0, 1.0};
    CMat I = CMat::Zero(spec.sites, spec.sites);
    if (bond == Bond::ZeroOne) {
        I(0, 1) = i * c1;
        I(1, 0) = -i * c1;
    } else {
        if (spec.sites != 3) throw InvalidBond("a two-site system has only the 0->1 bond");
        I(0, 2) = i * c2;
        I(2, 0) = -i * c2;
    }
    return I;
}

CMat hamiltonian(const SystemSpec& spec, const DrivingProtocol& proto, double t) {
    spec.validate();
    if (!proto.contains(t)) {
        std::ostringstream os;
        os << "t=" << t << " outside [" << proto.t_start << ", " << proto.t_end << "]";
        throw TimeOutOfRange(os.str());
    }
    return hamiltonian_at(spec, proto.u(t), proto.c1(t), spec.sites == 3 ? proto.c2(t) : 0.0);
}

CMat current_operator(const SystemSpec& spec, const DrivingProtocol& proto, double t, Bond bond) {
    spec.validate();
    if (bond == Bond::ZeroTwo && spec.sites != 3) throw InvalidBond("a two-site system has only the 0->1 bond");
    if (!proto.contains(t)) throw TimeOutOfRange("current requested outside the protocol window");
    return current_at(spec, proto.c1(t), spec.sites == 3 ? proto.c2(t) : 0.0, bond);
}

double splitting_ratio(double c1, double c2) {
    const double sum = c1 + c2;
    if (sum == 0.0 || std::abs(sum) <= 1e-15 * std::max(std::abs(c1), std::abs(c2)))
        throw DegenerateSplit("c1 + c2 vanishes; the effective coupling is zero");
    return c1 / sum;
}

double effective_coupling(double c1, double c2) { return (c1 + c2) / std::numbers::sqrt2; }

AdiabaticityReport adiabaticity_report(const SystemSpec& spec, const DrivingProtocol& proto) {
    spec.validate();
    AdiabaticityReport rep;
    rep.t_p = proto.duration();

    const int samples = 4001;
    const double h = rep.t_p / (samples - 1);
    auto f = [&](double t) { return proto.u(t) - 1.0; };
    double prev_t = proto.t_start;
    double prev = f(prev_t);
    for (int i = 1; i < samples; ++i) {
        const double t = proto.t_start + i * h;
        const double cur = f(t);
        if ((prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0)) {
            double root = t;
            if (cur != 0.0) {
                auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(1.0, std::abs(a)); };
                const auto bracket = boost::math::tools::bisect(f, prev_t, t, tol);
                root = 0.5 * (bracket.first + bracket.second);
            }
            CrossingEstimate x;
            x.time = root;
            const double dh = std::min(1e-4 * rep.t_p, 0.25 * h);
            const double ta = std::max(proto.t_start, root - dh);
            const double tb = std::min(proto.t_end, root + dh);
            x.udot = (proto.u(tb) - proto.u(ta)) / (tb - ta);
            x.c_eff = spec.sites == 2 ? std::abs(proto.c1(root))
                                      : std::abs(effective_coupling(proto.c1(root), proto.c2(root)));
            x.p_lz = x.udot == 0.0 ? 1.0 : std::exp(-2.0 * std::numbers::pi * x.c_eff * x.c_eff / std::abs(x.udot));
            x.t_lz = x.udot == 0.0 ? rep.t_p : x.c_eff / std::abs(x.udot);
            rep.crossings.push_back(x);
        }
        prev_t = t;
        prev = cur;
    }
    if (rep.crossings.empty()) throw NoCrossing("u(t) never crosses 1 on [" + std::to_string(proto.t_start) + ", " +
                                                std::to_string(proto.t_end) + "]");

    rep.p_lz = 0.0;
    for (const auto& x : rep.crossings) {
        rep.p_lz = std::max(rep.p_lz, x.p_lz);
        rep.t_lz = std::max(rep.t_lz, x.t_lz);
    }

    const int level_samples = 201;
    double spacing = 0.0;
    for (int i = 0; i < level_samples; ++i) {
        const double t = proto.t_start + rep.t_p * i / (level_samples - 1);
        const EigenSystem es = eig_hermitian(hamiltonian(spec, proto, t));
        spacing += (es.values(es.dim() - 1) - es.values(0)) / static_cast<double>(es.dim() - 1);
    }
    rep.omega = spacing / level_samples;
    rep.p_fgr = std::exp(-rep.omega * rep.t_p);
    rep.fgr_below_lz = rep.p_fgr <= 0.1 * rep.p_lz;
    rep.lz_small = rep.p_lz <= 0.1;
    rep.time_scales_separated = rep.t_p >= 10.0 * rep.t_lz * (1.0 - 1e-12);
    return rep;
}

}  // namespace qstir
