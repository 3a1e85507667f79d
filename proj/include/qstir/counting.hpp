// counting.hpp: transported-charge operator and its counting statistics.
//
// Q = ∫ U(t)†·I(t)·U(t) dt is accumulated on the integrator's own sub-steps.
// Within a sub-step the generator is constant, so the current's Heisenberg
// integral is done in closed form in the generator's eigenbasis; the discrete
// dynamics then obeys charge continuity to rounding error.

#pragma once

#include "qstir/linalg.hpp"
#include "qstir/model.hpp"
#include "qstir/propagation.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace qstir {

struct ChargeMatrix {
    CMat Q;
    std::string basis = "site";  // "site" or "adiabatic_initial"
    double t0 = 0.0;
    double t1 = 0.0;
    std::size_t steps = 0;
    double discretization_error = -1.0;  // ‖Q − Q(tol/8, dt_max/2)‖_F when estimated, else −1
};

// Closed-form ∫₀^dt e^{iHs} I e^{−iHs} ds for constant H given by `es`.
CMat step_current_integral(const EigenSystem& es, const CMat& current, double dt);

struct ChargeRun {
    UnitaryRecord propagator;
    std::vector<ChargeMatrix> charges;  // one per requested bond
};

ChargeRun accumulate_charges(const SystemSpec& spec, const DrivingProtocol& proto, const std::vector<Bond>& bonds,
                             double t0, double t1, const PropagationOptions& opts = {});

ChargeMatrix charge_matrix(const SystemSpec& spec, const DrivingProtocol& proto, Bond bond, double t0, double t1,
                           const PropagationOptions& opts = {}, bool estimate_error = false);

struct SpectralPoint {
    double charge = 0.0;
    double weight = 0.0;
};

struct CountingResult {
    double mean = 0.0;
    double variance = 0.0;
    std::vector<SpectralPoint> spectrum;  // ascending charge
    std::vector<double> moments;          // ⟨Q^k⟩, k = 0..k_max
    std::vector<std::string> notes;
};

inline constexpr double kNormTol = 1e-10;

CountingResult counting_stats(const ChargeMatrix& Qm, const CVec& psi0, int k_max = 4);

// Q in the basis of the initial adiabatic states of `frame` (columns in branch order).
ChargeMatrix to_adiabatic_initial(const ChargeMatrix& Qm, const AdiabaticFrame& frame);

struct ChargeDecomposition {
    double parallel = 0.0;   // Q∥ = Q_aa
    cplx perpendicular;      // Q⊥ with Q_ab = i·Q⊥
    double third_level = 0.0;  // Σ |Q_am|² over levels outside the crossing pair
    CMat adiabatic;          // full Q in the initial adiabatic basis
};

// a = frame.occupied, b = frame.partner. Throws ReductionInvalid when the
// third level carries more than 1% of the fluctuation weight.
ChargeDecomposition q_parallel_perp(const ChargeMatrix& Qm, const AdiabaticFrame& frame);

struct FcsOptions {
    PropagationOptions prop;
    double taper_fraction = 0.5;  // raised-cosine fraction of the r-window
    double fd_step = 0.01;        // finite-difference step for χ derivatives
    double moment_tol = 1e-4;
    unsigned threads = 0;         // 0: hardware concurrency
};

struct QuasiDistribution {
    std::vector<double> r_grid;
    std::vector<cplx> chi;
    std::vector<double> q_grid;
    std::vector<double> p0;
    double normalization = 0.0;        // Σ P₀ ΔQ
    double max_imaginary = 0.0;        // largest |Im| discarded from the Fourier sum
    std::array<double, 5> raw_moments{};  // (−i)^k χ^(k)(0), untapered
    double mean = 0.0;
    double variance = 0.0;
    CountingResult spectral;           // naive P(Q) from the same discretization
    std::size_t steps = 0;
};

// Characteristic function χ(r) = ⟨ψ₋|ψ₊⟩ with ψ± propagated under H ∓ (r/2)·I on
// the reference step grid.
cplx characteristic_function(const SystemSpec& spec, const DrivingProtocol& proto, Bond bond, const CVec& psi0,
                             const StepGrid& grid, double r);

// Q grid conjugate to a symmetric odd-length r grid: normalization is exact.
std::vector<double> conjugate_q_grid(const std::vector<double>& r_grid);
std::vector<double> symmetric_grid(double half_width, std::size_t points);

double fcs_taper(double r, double r_max, double fraction);

QuasiDistribution fcs_quasi(const SystemSpec& spec, const DrivingProtocol& proto, Bond bond, const CVec& psi0,
                            const std::vector<double>& r_grid, const std::vector<double>& q_grid,
                            const FcsOptions& opts = {});

struct ContinuityReport {
    double max_defect = 0.0;
    double final_q01 = 0.0;
    double final_q02 = 0.0;
    double final_n0 = 0.0;
    std::size_t steps = 0;
};

inline constexpr double kContinuityTol = 1e-8;

// max_t |⟨Q₀→₁⟩(t) + ⟨Q₀→₂⟩(t) − (n₀(0) − n₀(t))| over the sub-step boundaries.
ContinuityReport continuity_check(const SystemSpec& spec, const DrivingProtocol& proto, const CVec& psi0,
                                  const PropagationOptions& opts = {});

struct SpreadingPoint {
    int n = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct SpreadingSeries {
    std::vector<SpreadingPoint> points;
    ChargeMatrix one_cycle;
    CMat period;
};

SpreadingSeries multi_cycle_spreading(const SystemSpec& spec, const DrivingProtocol& cycle, const CVec& psi0,
                                      int n_cycles, Bond bond = Bond::ZeroOne, const PropagationOptions& opts = {});

// Floquet eigenvector with the largest overlap with `reference`.
CVec floquet_preparation(const FloquetStates& fs, const CVec& reference);

CVec site_state(int sites, int index);

}  // namespace qstir
