// model.hpp: 2-site and 3-site Hamiltonians, bond currents and driving protocols.
//
// Basis order is (|0⟩, |1⟩, |2⟩). Site 0 carries the driven potential u(t);
// the 1–2 hopping is the reference amplitude and fixes the unit of energy.
// Currents are positive when particles leave site 0.

#pragma once

#include "qstir/linalg.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace qstir {

struct SystemSpec {
    int sites = 3;

    static SystemSpec two_site() { return {2}; }
    static SystemSpec three_site() { return {3}; }
    void validate() const;
};

enum class Bond { ZeroOne, ZeroTwo };

// Couplings above this magnitude violate the small-coupling regime; the check
// is soft (DrivingProtocol::small_coupling_warnings).
inline constexpr double kSmallCouplingWarn = 0.2;

// u(t) raised linearly through the crossing at u = 1, placed mid-protocol.
// `c` is the effective coupling of the reduced problem; on three sites it is
// split as c1 = √2·λ·c, c2 = √2·(1−λ)·c. The couplings switch on and off with
// raised-cosine edges of fractional length ramp_fraction (0 for a sudden switch).
struct LinearRampLZ {
    double c = 0.1;
    double udot = 0.01;
    double u_span = 4.0;  // |u − 1| reached at both ends
    double lambda = 1.0;
    double ramp_fraction = 0.25;
};

// One stirring period: u swept 1−Δ → 1+Δ with splitting ratio λ_ccw, an
// optional dwell at u = 1+Δ with couplings off, then swept back with λ_cw.
// Couplings share a flat-topped raised-cosine envelope in each sweep, so they
// vanish at every sweep boundary.
struct StirCycle {
    double c_eff = 0.05;
    double lambda_ccw = 1.0;
    double lambda_cw = 0.0;
    double udot = 0.005;
    double dwell = 0.0;
    double u_span = 0.5;
    double ramp_fraction = 0.25;
};

// Time-independent parameters held for `duration`.
struct ConstantDrive {
    double u = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double duration = 1.0;
};

using ProtocolPreset = std::variant<LinearRampLZ, StirCycle, ConstantDrive>;

std::string preset_kind(const ProtocolPreset& preset);

struct DrivingProtocol {
    std::function<double(double)> u;
    std::function<double(double)> c1;
    std::function<double(double)> c2;
    double t_start = 0.0;
    double t_end = 0.0;
    std::string label;

    std::optional<ProtocolPreset> preset;  // empty for custom protocols
    std::vector<double> half_cycle_lambdas;
    std::vector<double> nominal_crossings;  // times where u(t) = 1 by construction

    [[nodiscard]] double duration() const { return t_end - t_start; }
    [[nodiscard]] bool contains(double t) const;
    // Max |c1|,|c2| sampled on the protocol window, when above kSmallCouplingWarn.
    [[nodiscard]] std::optional<double> small_coupling_warning(int samples = 1001) const;
};

DrivingProtocol make_protocol(const SystemSpec& spec, const ProtocolPreset& preset);

// Raised-cosine edges of fractional width `ramp` on s ∈ [0,1], flat top of 1.
double tukey_envelope(double s, double ramp);

CMat hamiltonian(const SystemSpec& spec, const DrivingProtocol& proto, double t);
CMat current_operator(const SystemSpec& spec, const DrivingProtocol& proto, double t, Bond bond);

// Parameter-level builders (no range checks), shared by the propagators.
CMat hamiltonian_at(const SystemSpec& spec, double u, double c1, double c2);
CMat current_at(const SystemSpec& spec, double c1, double c2, Bond bond);

double splitting_ratio(double c1, double c2);
double effective_coupling(double c1, double c2);

struct CrossingEstimate {
    double time = 0.0;
    double c_eff = 0.0;
    double udot = 0.0;
    double p_lz = 1.0;
    double t_lz = 0.0;  // c/|u̇|
};

struct AdiabaticityReport {
    std::vector<CrossingEstimate> crossings;
    double p_lz = 1.0;         // worst crossing
    double omega = 0.0;        // time-averaged mean level spacing
    double t_p = 0.0;          // protocol duration
    double p_fgr = 1.0;        // e^{−Ω t_p}
    double t_lz = 0.0;         // longest crossing time scale
    bool fgr_below_lz = false;  // P_FGR ≤ 0.1·P_LZ
    bool lz_small = false;      // P_LZ ≤ 0.1
    bool time_scales_separated = false;  // t_p ≥ 10·t_LZ

    [[nodiscard]] bool adiabatic() const { return fgr_below_lz && lz_small; }
};

// Throws NoCrossing when u(t) − 1 never changes sign on the protocol window.
AdiabaticityReport adiabaticity_report(const SystemSpec& spec, const DrivingProtocol& proto);

}  // namespace qstir
