// scenario.hpp: named experiments and the scenario runner behind the CLI.

#pragma once

#include "qstir/config.hpp"
#include "qstir/counting.hpp"
#include "qstir/output.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qstir {

// Diabatic survival |⟨0|U|0⟩|² after a 2-site linear sweep with 2πc²/u̇ = exponent.
struct LZRun {
    double exponent = 0.0;
    double c = 0.0;
    double udot = 0.0;
    double u_span = 0.0;
    double p_numeric = 0.0;
    double p_lz = 0.0;
    double rel_err = 0.0;
    std::size_t steps = 0;
};
LZRun lz_transition(double c, double exponent, double u_span, double ramp_fraction, const PropagationOptions& opts);

// 2-site sweep tuned to a target P_LZ, counted on the 0→1 bond from |0⟩.
struct SinglePathRun {
    double p_lz = 0.0;  // target, exp(−2πc²/u̇)
    double udot = 0.0;
    double p = 0.0;     // measured transfer |⟨1|U|0⟩|²
    CountingResult stats;
    double q_parallel = 0.0;
    double q_perp = 0.0;  // |Q⊥|
    std::size_t steps = 0;
};
SinglePathRun single_path(double c, double p_lz, double u_span, double ramp_fraction, const PropagationOptions& opts);

// 3-site sweep with splitting ratio λ, counted on the 0→1 bond from |0⟩.
struct DoublePathRun {
    double lambda = 0.0;
    double p = 0.0;  // 1 − |⟨0|U|0⟩|²
    double p_lz = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    std::size_t steps = 0;
};
DoublePathRun double_path(const LinearRampLZ& ramp, const PropagationOptions& opts);

struct CycleRun {
    StirCycle params;
    double period = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double residual = 0.0;  // 1 − |⟨0|U|0⟩|²
    double phi = 0.0;       // φ₂ − φ₁ from the dynamical phase
    double p_lz = 0.0;
    double continuity_defect = 0.0;
    CountingResult stats;
    std::size_t steps = 0;
};
CycleRun stir_cycle_run(const StirCycle& cycle, const PropagationOptions& opts, bool with_phase = true);

// Least-squares y ≈ a·x (through the origin), with R² about the mean of y.
struct ProportionalFit {
    double a = 0.0;
    double r2 = 0.0;
};
ProportionalFit fit_proportional(const std::vector<double>& x, const std::vector<double>& y);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

struct ScenarioResult {
    std::vector<Table> tables;
    Report report;
    std::vector<double> summary;  // one row matching summary_columns(scenario)
};

// Column names of the per-run summary row; fixed for each scenario.
std::vector<std::string> summary_columns(const std::string& scenario);

ScenarioResult run_scenario(const Config& config, double tolerance_scale = 1.0);

// Runs the scenario, writes its tables under `out_dir` and the report (if a
// path is given, else <out_dir>/report.json).
Report run_and_write(const Config& config, const std::filesystem::path& out_dir,
                     const std::optional<std::filesystem::path>& report_path, double tolerance_scale = 1.0);

// One scenario run per value of `sweep.axis`, merged in value order into a
// table of (axis, summary columns). Runs concurrently; an empty value list
// yields the header only.
struct SweepResult {
    Table table;
    std::vector<Report> reports;
};
SweepResult sweep(const Config& config, const SweepSpec& spec, double tolerance_scale = 1.0, unsigned threads = 0);

}  // namespace qstir
