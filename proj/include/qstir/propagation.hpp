// propagation.hpp: time evolution of the few-level system.
//
// The integrator is the exponential midpoint rule, U ← exp(−i·H(t+dt/2)·dt)·U,
// exactly unitary per step. Step size is controlled by comparing one full step
// against two half steps; accepted steps keep the two halves. Every accepted
// sub-step is recorded so the same discretization can be replayed with a
// different generator (counting fields) or observed (charge accumulation).

#pragma once

#include "qstir/linalg.hpp"
#include "qstir/model.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace qstir {

struct PropagationOptions {
    double dt_max = 0.1;
    double tol = 1e-10;  // per-step local error, ‖U_full − U_halves‖_F
    bool adaptive = true;
    double dt_min = 1e-12;
};

struct Substep {
    double t = 0.0;
    double dt = 0.0;
};
using StepGrid = std::vector<Substep>;

struct UnitaryRecord {
    CMat U;
    double t0 = 0.0;
    double t1 = 0.0;
    std::size_t steps = 0;     // accepted sub-steps
    std::size_t rejected = 0;  // rejected trial steps
    double unitarity_defect = 0.0;
    StepGrid grid;
};

// Hermitian generator evaluated at time t.
using Generator = std::function<CMat(double)>;

// Called once per accepted sub-step with the eigensystem of the midpoint
// generator and the propagator at the start of the sub-step.
using StepObserver = std::function<void(const Substep&, const EigenSystem&, const CMat& U_before)>;

inline constexpr double kUnitarityLimit = 1e-10;

UnitaryRecord integrate(const Generator& generator, Eigen::Index dim, double t0, double t1,
                        const PropagationOptions& opts, const StepObserver& observer = {});

UnitaryRecord replay(const Generator& generator, Eigen::Index dim, const StepGrid& grid,
                     const StepObserver& observer = {});

UnitaryRecord propagate(const SystemSpec& spec, const DrivingProtocol& proto, double t0, double t1,
                        const PropagationOptions& opts = {});

Generator hamiltonian_generator(const SystemSpec& spec, const DrivingProtocol& proto);

// Instantaneous eigenbasis tracked by continuation along a time grid.
// Branch k is the k-th level (ascending) at times.front(); afterwards each
// branch follows maximal overlap and its phase is rotated so that consecutive
// states have real positive overlap.
struct AdiabaticFrame {
    SystemSpec spec;
    DrivingProtocol protocol;
    std::vector<double> times;
    std::vector<RVec> levels;   // levels[i](k): energy of branch k at times[i]
    std::vector<CMat> states;   // states[i].col(k): branch k at times[i]
    int occupied = 0;           // branch holding |0⟩ at the first time
    int partner = 1;            // the branch it crosses (|+⟩ on three sites)
    std::vector<double> crossing_times;
    double min_overlap = 1.0;
};

inline constexpr double kBranchOverlapMin = 0.999;

std::vector<double> uniform_grid(double t0, double t1, std::size_t points);

// Throws BranchAmbiguity when a consecutive overlap drops below kBranchOverlapMin.
AdiabaticFrame adiabatic_frame(const SystemSpec& spec, const DrivingProtocol& proto, const std::vector<double>& grid);

// Gap between the two upper levels (the pair that meets near u = 1).
double relevant_gap(const SystemSpec& spec, const DrivingProtocol& proto, double t);

// Zero-order adiabatic propagator Σ_n |n(t)⟩ exp(−i∫E_n) ⟨n(t₀)| at times[index]
// (the last grid time by default).
UnitaryRecord adiabatic_propagator(const AdiabaticFrame& frame, std::size_t index = static_cast<std::size_t>(-1));

struct PhaseRecord {
    std::vector<double> times;
    std::vector<double> phi;             // Φ(t) − Φ(t₀)
    std::vector<double> crossing_times;  // t₁, t₂, ...
    std::vector<double> crossing_phases; // φ₁, φ₂, ...
    [[nodiscard]] double relative_phase() const;  // φ₂ − φ₁ (0 with fewer than two crossings)
};

// Φ(t) = ∫ relevant_gap dt′ by adaptive Gauss–Kronrod between grid points.
// Throws ReductionInvalid when the third level is not well separated.
PhaseRecord dynamical_phase(const AdiabaticFrame& frame);
double dynamical_phase_at(const AdiabaticFrame& frame, double t);

struct FloquetStates {
    RVec phases;       // quasi-energy phases arg(e_k) ∈ (−π, π], ascending
    CVec eigenvalues;  // Rayleigh quotients ⟨v|U|v⟩
    CMat vectors;
    UnitaryRecord period;
};

FloquetStates floquet_decompose(const CMat& U);
FloquetStates floquet_states(const SystemSpec& spec, const DrivingProtocol& proto_one_period,
                             const PropagationOptions& opts = {});

}  // namespace qstir
