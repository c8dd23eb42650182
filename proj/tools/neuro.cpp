// Command-line runner for the registered experiments.
//
//   neuro --list
//   neuro <experiment> [--config FILE] [--check] [--key value | --key=value ...]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neuro/acceptance.hpp"
#include "neuro/harness.hpp"

namespace h = neuro::harness;

namespace {

h::Settings parse_overrides(const std::vector<std::string>& args) {
    h::Settings out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0 || a.size() < 3) throw h::ConfigError("unexpected argument '" + a + "'");
        const std::string body = a.substr(2);
        if (const auto eq = body.find('='); eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= args.size()) throw h::ConfigError("missing value for --" + body);
            out.emplace_back(body, args[++i]);
        }
    }
    return out;
}

void list_experiments(std::ostream& out) {
    for (const auto& e : h::experiments()) {
        out << e.name << "  " << e.summary << '\n';
        const auto config = h::make_config(e);
        for (const auto& p : config.parameters())
            out << "    --" << p.key << " (default '" << p.default_value << "')  " << p.help << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Run an experiment and write its table as CSV"};
    app.allow_extras();
    std::string name, config_file;
    bool check = false, list = false;
    app.add_option("experiment", name, "experiment name (see --list)");
    app.add_option("--config", config_file, "file of 'key = value' lines; flags override it");
    app.add_flag("--check", check, "evaluate the acceptance criteria attached to the experiment");
    app.add_flag("--list", list, "list experiments and their parameters");
    app.add_flag_function(
        "--version", [](std::int64_t) { throw CLI::Success(); }, "print the version");
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success&) {
        std::cout << "neuro " << h::version() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (list) {
            list_experiments(std::cout);
            return 0;
        }
        if (name.empty()) throw h::ConfigError("no experiment given; try --list");
        const auto& experiment = h::find_experiment(name);
        auto config = h::make_config(experiment);
        if (!config_file.empty()) config.apply(h::load_config_file(config_file));
        config.apply(parse_overrides(app.remaining()));

        const h::Table table = experiment.run(config);
        const auto path = h::output_path(experiment, config);
        if (path == "-") {
            h::write_csv(std::cout, experiment, config, table);
        } else {
            if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
            std::ofstream out(path);
            if (!out) throw h::ConfigError("cannot write " + path.string());
            h::write_csv(out, experiment, config, table);
            std::cerr << "wrote " << path.string() << '\n';
        }

        if (!check) return 0;
        if (experiment.criteria.empty()) std::cerr << "no acceptance criteria attached to " << name << '\n';
        bool ok = true;
        for (int id : experiment.criteria) {
            const auto r = neuro::acceptance::check(id, config.seed());
            std::cout << neuro::acceptance::format(r) << '\n';
            ok = ok && r.pass;
        }
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "neuro: " << e.what() << '\n';
        return 2;
    }
}
