// qstir: run a named scenario from an INI configuration.
//
// Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
// 3 numerical failure.

#include "qstir/config.hpp"
#include "qstir/errors.hpp"
#include "qstir/output.hpp"
#include "qstir/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace {

void print_summary(const qstir::Report& r) {
    for (const auto& c : r.checks)
        std::printf("%s  %-48s measured %.10g  predicted %.10g (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.measured, c.predicted, c.oracle.c_str());
    for (const auto& o : r.observations) std::printf("note  %-48s %.10g  %s\n", o.name.c_str(), o.value, o.detail.c_str());
    std::printf("%zu checks, %zu failed\n", r.checks.size(), r.failures());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counting statistics of driven 2-site and 3-site systems"};
    std::string config_path;
    std::string out_dir;
    std::string scenario;
    std::string sweep_text;
    std::string report_path;
    double tolerance_scale = 1.0;
    app.add_option("--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (default: output.dir or ./out)");
    app.add_option("--scenario", scenario, "scenario name, overrides the configuration");
    app.add_option("--sweep", sweep_text, "AXIS=start:stop:count");
    app.add_option("--tolerance-scale", tolerance_scale, "multiplies every check tolerance")
        ->check(CLI::PositiveNumber);
    app.add_option("--report", report_path, "report path (default: <out>/report.json)");
    app.set_version_flag("--version", std::string("qstir ") + qstir::kEngineVersion);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        qstir::Config config = qstir::Config::load(config_path);
        if (!scenario.empty()) config.set_scenario(scenario);
        const fs::path out = out_dir.empty() ? fs::path(config.get_string("output.dir", "out")) : fs::path(out_dir);
        std::optional<fs::path> report;
        if (!report_path.empty()) report = report_path;
        else if (config.has("output.report")) report = config.get_string("output.report", "");

        qstir::Report result;
        if (sweep_text.empty()) {
            result = qstir::run_and_write(config, out, report, tolerance_scale);
        } else {
            const qstir::SweepSpec spec = qstir::parse_sweep(sweep_text);
            const auto threads = static_cast<unsigned>(config.fcs_options().threads);
            qstir::SweepResult sw = qstir::sweep(config, spec, tolerance_scale, threads);
            result.scenario = config.scenario();
            result.config_hash = config.hash();
            result.notes.push_back("sweep over " + spec.axis);
            for (std::size_t i = 0; i < sw.reports.size(); ++i) {
                const std::string tag = spec.axis + "=" + qstir::format_number(spec.values[i]) + ": ";
                for (auto c : sw.reports[i].checks) {
                    c.name = tag + c.name;
                    result.checks.push_back(std::move(c));
                }
                for (auto o : sw.reports[i].observations) {
                    o.name = tag + o.name;
                    result.observations.push_back(std::move(o));
                }
            }
            result.artifacts.push_back(qstir::write_csv(out, sw.table).filename().string());
            qstir::write_atomic(report.value_or(out / "report.json"), result.to_json().dump(2) + "\n");
        }
        print_summary(result);
        return result.passed() ? 0 : 1;
    } catch (const qstir::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const qstir::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
