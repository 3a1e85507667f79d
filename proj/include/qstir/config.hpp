// config.hpp: flat INI scenario configuration.
//
//   scenario = stir-cycle
//   [system]      sites
//   [protocol]    kind (linear-ramp-lz | stir-cycle | constant) and its parameters
//   [numerics]    dt_max, tol, threads, fd_step, taper_fraction
//   [experiment]  scenario-specific lists and grids
//   [output]      dir, report
//
// Unknown sections or keys are rejected. Lists are comma-separated.

#pragma once

#include "qstir/counting.hpp"
#include "qstir/model.hpp"
#include "qstir/propagation.hpp"

#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qstir {

inline const std::vector<std::string> kScenarios = {"levels", "lz-sweep",   "single-path", "double-path",
                                                    "stir-cycle", "fcs", "multi-cycle"};

class Config {
public:
    static Config load(const std::string& path);
    static Config parse(const std::string& text);

    [[nodiscard]] std::string scenario() const;
    void set_scenario(const std::string& name);

    [[nodiscard]] SystemSpec system() const;
    [[nodiscard]] ProtocolPreset preset() const;
    [[nodiscard]] PropagationOptions numerics() const;
    [[nodiscard]] FcsOptions fcs_options() const;

    [[nodiscard]] double get_double(const std::string& key, double fallback) const;
    [[nodiscard]] int get_int(const std::string& key, int fallback) const;
    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
    [[nodiscard]] std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
    [[nodiscard]] bool has(const std::string& key) const;

    // `key` is "section.name"; a bare name resolves to the unique section
    // declaring it. Returns the resolved key.
    std::string set(const std::string& key, const std::string& value);
    [[nodiscard]] std::string resolve_key(const std::string& key) const;

    // FNV-1a over the canonical "section.key=value" listing, hex encoded.
    [[nodiscard]] std::string hash() const;
    [[nodiscard]] std::string canonical() const;

private:
    boost::property_tree::ptree tree_;
    void validate() const;
};

// "AXIS=start:stop:count" → axis and values (count 0 gives an empty list).
struct SweepSpec {
    std::string axis;
    std::vector<double> values;
};
SweepSpec parse_sweep(const std::string& text);

}  // namespace qstir
