// output.hpp: CSV tables, verification checks and the JSON report.
//
// CSV dialect: comma separated, header row, every column name carries a unit
// in brackets ("t [1/J]"), values printed with 17 significant digits.
// Files are written to a temporary sibling and renamed into place.

#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace qstir {

inline constexpr const char* kEngineVersion = QSTIR_VERSION;

struct Table {
    std::string name;  // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row);
};

std::string format_number(double v);
std::string to_csv(const Table& t);
// Throws std::invalid_argument on a column without a unit annotation or a ragged row.
void validate_table(const Table& t);

void write_atomic(const std::filesystem::path& path, const std::string& content);
std::filesystem::path write_csv(const std::filesystem::path& dir, const Table& t);

struct Check {
    std::string name;
    double predicted = 0.0;
    std::string oracle;  // analytic function or identity the prediction comes from
    double measured = 0.0;
    double tolerance = 0.0;
    std::string kind;  // absolute, relative, upper_bound, lower_bound
    bool pass = false;
};

// |measured − predicted| ≤ tol (absolute) or ≤ tol·|predicted| (relative).
Check make_check(std::string name, double predicted, std::string oracle, double measured, double tolerance,
                 bool relative);
// One-sided bound: measured ≤ limit.
Check make_bound(std::string name, double limit, std::string oracle, double measured);
// One-sided bound: measured ≥ limit.
Check make_floor(std::string name, double limit, std::string oracle, double measured);

struct Observation {
    std::string name;
    double value = 0.0;
    std::string detail;
};

struct Report {
    std::string scenario;
    std::string config_hash;
    std::vector<Check> checks;
    std::vector<Observation> observations;
    std::vector<std::string> artifacts;
    std::vector<std::string> notes;

    [[nodiscard]] bool passed() const;
    [[nodiscard]] std::size_t failures() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

}  // namespace qstir
