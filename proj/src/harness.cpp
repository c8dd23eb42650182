#include "neuro/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#ifndef NEURO_VERSION
#define NEURO_VERSION "unknown"
#endif

namespace neuro::harness {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError(what + ": '" + text + "' is not a number");
    return v;
}

}  // namespace

std::string version() { return NEURO_VERSION; }

std::vector<double> parse_grid(const std::string& text) {
    const auto first = text.find(':');
    if (first == std::string::npos) return {to_double(text, "grid")};
    const auto second = text.find(':', first + 1);
    if (second == std::string::npos || text.find(':', second + 1) != std::string::npos)
        throw ConfigError("grid '" + text + "' must be start:stop:step");
    const double start = to_double(text.substr(0, first), "grid start");
    const double stop = to_double(text.substr(first + 1, second - first - 1), "grid stop");
    const double step = to_double(text.substr(second + 1), "grid step");
    if (step == 0.0 || (stop - start) * step < 0.0)
        throw ConfigError("grid '" + text + "': step does not lead from start to stop");
    const double span = (stop - start) / step;
    const auto n = static_cast<std::size_t>(std::floor(span + 0.5));
    if (n > 1000000) throw ConfigError("grid '" + text + "' has too many points");
    std::vector<double> values(n + 1);
    // 12 significant digits: 0.005 * 6 comes out as 0.03.
    char buf[32];
    for (std::size_t i = 0; i <= n; ++i) {
        std::snprintf(buf, sizeof buf, "%.12g", start + static_cast<double>(i) * step);
        values[i] = std::strtod(buf, nullptr);
    }
    return values;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) values.push_back(to_double(item, "list"));
    if (values.empty()) throw ConfigError("empty list");
    return values;
}

Settings read_config_file(std::istream& in) {
    Settings settings;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
        std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
        settings.emplace_back(std::move(key), trim(t.substr(eq + 1)));
    }
    return settings;
}

Settings load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return read_config_file(in);
}

Config::Config(std::vector<Parameter> declared) : declared_(std::move(declared)) {
    for (std::size_t i = 0; i < declared_.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (declared_[i].key == declared_[j].key) throw ConfigError("duplicate parameter " + declared_[i].key);
    for (const auto& p : declared_) values_.push_back(p.default_value);
}

std::size_t Config::index(const std::string& key) const {
    for (std::size_t i = 0; i < declared_.size(); ++i)
        if (declared_[i].key == key) return i;
    std::string known;
    for (const auto& p : declared_) known += (known.empty() ? "" : ", ") + p.key;
    throw ConfigError("unknown key '" + key + "' (known: " + known + ")");
}

void Config::set(const std::string& key, const std::string& value) { values_[index(key)] = value; }

void Config::apply(const Settings& settings) {
    for (const auto& [k, v] : settings) set(k, v);
}

const std::string& Config::text(const std::string& key) const { return values_[index(key)]; }

double Config::real(const std::string& key) const { return to_double(text(key), key); }

std::size_t Config::count(const std::string& key) const {
    const double v = real(key);
    if (v < 0.0 || v != std::floor(v) || v > 9.0e15) throw ConfigError(key + " must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

std::uint64_t Config::seed() const {
    const std::string t = trim(text("seed"));
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError("seed must be a non-negative integer");
    return v;
}

bool Config::flag(const std::string& key) const {
    const std::string& t = text(key);
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off") return false;
    throw ConfigError(key + " must be true or false");
}

std::vector<double> Config::grid(const std::string& key) const { return parse_grid(text(key)); }

std::vector<double> Config::list(const std::string& key) const { return parse_list(text(key)); }

Settings Config::resolved() const {
    Settings s;
    for (std::size_t i = 0; i < declared_.size(); ++i) s.emplace_back(declared_[i].key, values_[i]);
    return s;
}

std::string format_number(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

void Table::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size())
        throw std::logic_error("table row has " + std::to_string(row.size()) + " cells, expected " +
                               std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

const Experiment& find_experiment(const std::string& name) {
    for (const auto& e : experiments())
        if (e.name == name) return e;
    throw ConfigError("unknown experiment '" + name + "'");
}

Config make_config(const Experiment& experiment) {
    std::vector<Parameter> params = experiment.parameters;
    params.push_back({"seed", "1", "random seed"});
    params.push_back({"output", "", "CSV path, '-' for stdout; default <output dir>/<experiment>.csv"});
    return Config(std::move(params));
}

std::string csv_field(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string quoted = "\"";
    for (char ch : cell) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return quoted + '"';
}

void write_csv(std::ostream& out, const Experiment& experiment, const Config& config, const Table& table) {
    out << "# neuro " << version() << '\n';
    out << "# experiment = " << experiment.name << '\n';
    for (const auto& [k, v] : config.resolved()) out << "# " << k << " = " << v << '\n';
    for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << csv_field(table.columns[c]);
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_field(row[c]);
        out << '\n';
    }
    for (const auto& [k, v] : table.footer) out << "# " << k << " = " << v << '\n';
}

std::string csv_body(const std::string& csv) {
    std::stringstream in(csv);
    std::string line, body;
    while (std::getline(in, line))
        if (line.empty() || line[0] != '#') body += line + '\n';
    return body;
}

std::filesystem::path output_path(const Experiment& experiment, const Config& config) {
    const std::string& chosen = config.text("output");
    if (chosen == "-") return "-";
    std::filesystem::path dir = ".";
    if (const char* env = std::getenv(output_dir_variable); env && *env) dir = env;
    if (chosen.empty()) return dir / (experiment.name + ".csv");
    const std::filesystem::path p(chosen);
    return p.is_absolute() ? p : dir / p;
}

}  // namespace neuro::harness
