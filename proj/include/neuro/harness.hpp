#pragma once

// Experiment runner: declared parameters, resolved configurations, grids,
// CSV tables with '#' header comments, and the experiment registry.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "neuro/numerics.hpp"

namespace neuro::harness {

/// Bad keys, bad values, unknown experiments, unwritable output.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Environment variable that overrides the output directory.
inline constexpr const char* output_dir_variable = "NEURO_OUTPUT_DIR";

/// Version string baked in at configure time (git describe when available).
std::string version();

/// "start:stop:step", endpoints included within half a step, or a single
/// number. Throws ConfigError on malformed input or a step of the wrong sign.
std::vector<double> parse_grid(const std::string& text);

/// Comma-separated numbers.
std::vector<double> parse_list(const std::string& text);

struct Parameter {
    std::string key;
    std::string default_value;
    std::string help;
};

using Settings = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; blank lines and lines starting with '#' are skipped.
Settings read_config_file(std::istream& in);
Settings load_config_file(const std::filesystem::path& path);

/// Values for a fixed set of declared keys. Unknown keys are rejected.
class Config {
public:
    explicit Config(std::vector<Parameter> declared);

    void set(const std::string& key, const std::string& value);
    void apply(const Settings& settings);

    const std::string& text(const std::string& key) const;
    double real(const std::string& key) const;
    /// Non-negative integer; accepts forms like 1e5.
    std::size_t count(const std::string& key) const;
    std::uint64_t seed() const;
    bool flag(const std::string& key) const;
    std::vector<double> grid(const std::string& key) const;
    std::vector<double> list(const std::string& key) const;

    /// Every declared key with its resolved value, in declaration order.
    Settings resolved() const;
    const std::vector<Parameter>& parameters() const { return declared_; }

private:
    std::size_t index(const std::string& key) const;

    std::vector<Parameter> declared_;
    std::vector<std::string> values_;
};

/// Shortest round-trip decimal form.
std::string format_number(double x);

struct Table {
    Table() = default;
    explicit Table(std::vector<std::string> header) : columns(std::move(header)) {}

    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    Settings footer;  ///< written after the body as '# key = value'

    template <typename... Cells>
    void add(const Cells&... cells) {
        std::vector<std::string> row{cell(cells)...};
        add_row(std::move(row));
    }
    void add_row(std::vector<std::string> row);
    template <typename T>
    void note(const std::string& key, const T& value) {
        footer.emplace_back(key, cell(value));
    }

    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(double x) { return format_number(x); }
    static std::string cell(bool b) { return b ? "1" : "0"; }
    template <typename T>
        requires std::is_integral_v<T>
    static std::string cell(T v) {
        return std::to_string(v);
    }
};

/// Outcome of an acceptance criterion attached to an experiment.
struct CheckLine {
    int criterion = 0;
    bool pass = false;
    std::string detail;
};

struct Experiment {
    std::string name;
    std::string summary;
    std::vector<Parameter> parameters;  ///< `seed` and `output` are added by the registry
    std::function<Table(const Config&)> run;
    std::vector<int> criteria;  ///< acceptance criteria evaluated by --check
};

/// All registered experiments, in a fixed order.
const std::vector<Experiment>& experiments();
/// Throws ConfigError for an unknown name.
const Experiment& find_experiment(const std::string& name);

/// A config holding the experiment's declared keys plus seed and output.
Config make_config(const Experiment& experiment);

/// Quotes a cell containing commas, quotes or newlines.
std::string csv_field(const std::string& cell);

/// Header comments (version, experiment, resolved config), column line,
/// rows, footer comments.
void write_csv(std::ostream& out, const Experiment& experiment, const Config& config, const Table& table);

/// The non-comment lines of a CSV file, joined with newlines.
std::string csv_body(const std::string& csv);

/// `output` when set (relative paths resolve against the output
/// directory), else <output dir>/<experiment>.csv. "-" means stdout. The
/// output directory is the environment override or the working directory.
std::filesystem::path output_path(const Experiment& experiment, const Config& config);

}  // namespace neuro::harness
