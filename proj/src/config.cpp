#include "qstir/config.hpp"

#include "qstir/errors.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace qstir {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"system", {"sites"}},
        {"protocol",
         {"kind", "c", "udot", "lambda", "lambda_ccw", "lambda_cw", "u_span", "dwell", "ramp_fraction", "u", "c1",
          "c2", "duration"}},
        {"numerics", {"dt_max", "tol", "threads", "fd_step", "taper_fraction", "moment_tol"}},
        {"experiment",
         {"exponents", "transfers", "lambdas", "cycles", "preparation", "r_max", "r_points", "q_max", "grid_points",
          "bond", "initial_site"}},
        {"output", {"dir", "report"}},
    };
    return s;
}

double to_double(const std::string& key, const std::string& text) {
    const std::string t = boost::trim_copy(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": '" + text + "' is not a number");
    }
    if (used != t.size() || !std::isfinite(v)) throw ConfigError(key + ": '" + text + "' is not a finite number");
    return v;
}

}  // namespace

Config Config::load(const std::string& path) {
    Config c;
    try {
        pt::read_ini(path, c.tree_);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    c.validate();
    return c;
}

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    try {
        pt::read_ini(in, c.tree_);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    c.validate();
    return c;
}

void Config::validate() const {
    for (const auto& [name, node] : tree_) {
        if (node.empty()) {
            if (name != "scenario") throw ConfigError("unknown top-level key '" + name + "'");
            continue;
        }
        const auto it = schema().find(name);
        if (it == schema().end()) throw ConfigError("unknown section [" + name + "]");
        for (const auto& [key, value] : node) {
            (void)value;
            if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
        }
    }
    if (has("scenario")) {
        const auto s = scenario();
        if (std::find(kScenarios.begin(), kScenarios.end(), s) == kScenarios.end())
            throw ConfigError("unknown scenario '" + s + "'");
    }
}

bool Config::has(const std::string& key) const { return static_cast<bool>(tree_.get_optional<std::string>(key)); }

std::string Config::scenario() const {
    const auto s = tree_.get_optional<std::string>("scenario");
    if (!s) throw ConfigError("no scenario given");
    return boost::trim_copy(*s);
}

void Config::set_scenario(const std::string& name) {
    if (std::find(kScenarios.begin(), kScenarios.end(), name) == kScenarios.end())
        throw ConfigError("unknown scenario '" + name + "'");
    tree_.put("scenario", name);
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto s = tree_.get_optional<std::string>(key);
    return s ? to_double(key, *s) : fallback;
}

int Config::get_int(const std::string& key, int fallback) const {
    const double v = get_double(key, fallback);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + " must be an integer");
    return static_cast<int>(v);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto s = tree_.get_optional<std::string>(key);
    return s ? boost::trim_copy(*s) : fallback;
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
    const auto s = tree_.get_optional<std::string>(key);
    if (!s) return fallback;
    std::vector<std::string> parts;
    boost::split(parts, *s, boost::is_any_of(","));
    std::vector<double> out;
    for (const auto& p : parts)
        if (!boost::trim_copy(p).empty()) out.push_back(to_double(key, p));
    return out;
}

std::string Config::resolve_key(const std::string& key) const {
    if (key.find('.') != std::string::npos) {
        const auto dot = key.find('.');
        const auto it = schema().find(key.substr(0, dot));
        if (it == schema().end() || !it->second.count(key.substr(dot + 1)))
            throw ConfigError("unknown key '" + key + "'");
        return key;
    }
    std::string found;
    for (const auto& [section, keys] : schema()) {
        if (keys.count(key)) {
            if (!found.empty()) throw ConfigError("key '" + key + "' is ambiguous; qualify it with a section");
            found = section + "." + key;
        }
    }
    if (found.empty()) throw ConfigError("unknown key '" + key + "'");
    return found;
}

std::string Config::set(const std::string& key, const std::string& value) {
    const std::string full = resolve_key(key);
    tree_.put(full, value);
    return full;
}

SystemSpec Config::system() const {
    const int sites = get_int("system.sites", 3);
    if (sites != 2 && sites != 3) throw ConfigError("system.sites must be 2 or 3");
    return {sites};
}

ProtocolPreset Config::preset() const {
    const std::string kind = get_string("protocol.kind", "");
    if (kind == "linear-ramp-lz") {
        LinearRampLZ p;
        p.c = get_double("protocol.c", p.c);
        p.udot = get_double("protocol.udot", p.udot);
        p.u_span = get_double("protocol.u_span", p.u_span);
        p.lambda = get_double("protocol.lambda", p.lambda);
        p.ramp_fraction = get_double("protocol.ramp_fraction", p.ramp_fraction);
        return p;
    }
    if (kind == "stir-cycle") {
        StirCycle p;
        p.c_eff = get_double("protocol.c", p.c_eff);
        p.lambda_ccw = get_double("protocol.lambda_ccw", p.lambda_ccw);
        p.lambda_cw = get_double("protocol.lambda_cw", p.lambda_cw);
        p.udot = get_double("protocol.udot", p.udot);
        p.dwell = get_double("protocol.dwell", p.dwell);
        p.u_span = get_double("protocol.u_span", p.u_span);
        p.ramp_fraction = get_double("protocol.ramp_fraction", p.ramp_fraction);
        return p;
    }
    if (kind == "constant") {
        ConstantDrive p;
        p.u = get_double("protocol.u", p.u);
        p.c1 = get_double("protocol.c1", p.c1);
        p.c2 = get_double("protocol.c2", p.c2);
        p.duration = get_double("protocol.duration", p.duration);
        return p;
    }
    throw ConfigError("protocol.kind must be linear-ramp-lz, stir-cycle or constant (got '" + kind + "')");
}

PropagationOptions Config::numerics() const {
    PropagationOptions o;
    o.dt_max = get_double("numerics.dt_max", o.dt_max);
    o.tol = get_double("numerics.tol", o.tol);
    if (!(o.dt_max > 0.0)) throw ConfigError("numerics.dt_max must be positive");
    if (!(o.tol > 0.0)) throw ConfigError("numerics.tol must be positive");
    return o;
}

FcsOptions Config::fcs_options() const {
    FcsOptions f;
    f.prop = numerics();
    f.taper_fraction = get_double("numerics.taper_fraction", f.taper_fraction);
    f.fd_step = get_double("numerics.fd_step", f.fd_step);
    f.moment_tol = get_double("numerics.moment_tol", f.moment_tol);
    const int threads = get_int("numerics.threads", 0);
    if (threads < 0) throw ConfigError("numerics.threads must be non-negative");
    f.threads = static_cast<unsigned>(threads);
    if (!(f.taper_fraction >= 0.0 && f.taper_fraction <= 1.0))
        throw ConfigError("numerics.taper_fraction must lie in [0, 1]");
    if (!(f.fd_step > 0.0)) throw ConfigError("numerics.fd_step must be positive");
    if (!(f.moment_tol > 0.0)) throw ConfigError("numerics.moment_tol must be positive");
    return f;
}

std::string Config::canonical() const {
    std::map<std::string, std::string> flat;
    for (const auto& [name, node] : tree_) {
        if (node.empty()) {
            flat[name] = boost::trim_copy(node.data());
            continue;
        }
        for (const auto& [key, value] : node) flat[name + "." + key] = boost::trim_copy(value.data());
    }
    std::string out;
    for (const auto& [k, v] : flat) out += k + "=" + v + "\n";
    return out;
}

std::string Config::hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SweepSpec parse_sweep(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("sweep must look like AXIS=start:stop:count");
    SweepSpec s;
    s.axis = text.substr(0, eq);
    std::vector<std::string> parts;
    boost::split(parts, text.substr(eq + 1), boost::is_any_of(":"));
    if (parts.size() != 3) throw ConfigError("sweep must look like AXIS=start:stop:count");
    const double a = to_double("sweep start", parts[0]);
    const double b = to_double("sweep stop", parts[1]);
    const double n = to_double("sweep count", parts[2]);
    if (n < 0 || n != std::floor(n)) throw ConfigError("sweep count must be a non-negative integer");
    const auto count = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < count; ++i)
        s.values.push_back(count == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    return s;
}

}  // namespace qstir
