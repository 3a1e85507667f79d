#include "qstir/output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace qstir {

namespace fs = std::filesystem;

void Table::add(std::vector<double> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("table '" + name + "': row of " + std::to_string(row.size()) + " values for " +
                                    std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(row));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds −0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void validate_table(const Table& t) {
    if (t.columns.empty()) throw std::invalid_argument("table '" + t.name + "' has no columns");
    for (const auto& c : t.columns) {
        const auto open = c.find(" [");
        if (open == std::string::npos || c.back() != ']' || c.find(',') != std::string::npos)
            throw std::invalid_argument("column '" + c + "' lacks a unit annotation");
    }
    for (const auto& r : t.rows)
        if (r.size() != t.columns.size()) throw std::invalid_argument("ragged row in table '" + t.name + "'");
}

std::string to_csv(const Table& t) {
    validate_table(t);
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_number(r[i]);
        out += '\n';
    }
    return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

fs::path write_csv(const fs::path& dir, const Table& t) {
    const fs::path path = dir / (t.name + ".csv");
    write_atomic(path, to_csv(t));
    return path;
}

Check make_check(std::string name, double predicted, std::string oracle, double measured, double tolerance,
                 bool relative) {
    Check c{std::move(name), predicted, std::move(oracle), measured, tolerance, relative ? "relative" : "absolute", false};
    const double bound = relative ? tolerance * std::abs(predicted) : tolerance;
    c.pass = std::isfinite(measured) && std::abs(measured - predicted) <= bound;
    return c;
}

Check make_bound(std::string name, double limit, std::string oracle, double measured) {
    Check c{std::move(name), limit, std::move(oracle), measured, 0.0, "upper_bound", false};
    c.pass = std::isfinite(measured) && measured <= limit;
    return c;
}

Check make_floor(std::string name, double limit, std::string oracle, double measured) {
    Check c{std::move(name), limit, std::move(oracle), measured, 0.0, "lower_bound", false};
    c.pass = std::isfinite(measured) && measured >= limit;
    return c;
}

bool Report::passed() const { return failures() == 0; }

std::size_t Report::failures() const {
    std::size_t n = 0;
    for (const auto& c : checks) n += c.pass ? 0 : 1;
    return n;
}

namespace {

nlohmann::json number(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

}  // namespace

nlohmann::json Report::to_json() const {
    nlohmann::json j;
    j["engine"] = "qstir";
    j["engine_version"] = kEngineVersion;
    j["scenario"] = scenario;
    j["config_hash"] = config_hash;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
        j["checks"].push_back({{"name", c.name},
                               {"predicted", number(c.predicted)},
                               {"oracle", c.oracle},
                               {"measured", number(c.measured)},
                               {"tolerance", number(c.tolerance)},
                               {"tolerance_kind", c.kind},
                               {"pass", c.pass}});
    }
    j["observations"] = nlohmann::json::array();
    for (const auto& o : observations)
        j["observations"].push_back({{"name", o.name}, {"value", number(o.value)}, {"detail", o.detail}});
    j["artifacts"] = artifacts;
    j["notes"] = notes;
    j["totals"] = {{"declared", checks.size()},
                   {"passed", checks.size() - failures()},
                   {"failed", failures()}};
    j["pass"] = passed();
    return j;
}

}  // namespace qstir
