#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

#include "neuro/harness.hpp"

using namespace neuro::harness;

namespace {

std::string run_csv(const std::string& name, const Settings& overrides) {
    const auto& e = find_experiment(name);
    auto c = make_config(e);
    c.apply(overrides);
    std::ostringstream out;
    write_csv(out, e, c, e.run(c));
    return out.str();
}

}  // namespace

TEST_CASE("grid endpoints are inclusive within half a step") {
    const auto g = parse_grid("0.05:0.30:0.05");
    REQUIRE(g.size() == 6);
    CHECK(g.front() == 0.05);
    CHECK(g.back() == 0.3);
    CHECK(parse_grid("0:1:0.3").size() == 4);   // 0.9 then 1.2 is within half a step of 1
    CHECK(parse_grid("0:1:0.45").size() == 3);  // 1.35 overshoots by more than half a step
    CHECK(parse_grid("0:0.7:0.4").size() == 3);
    CHECK(parse_grid("1:0:-0.5") == std::vector<double>{1.0, 0.5, 0.0});
    CHECK(parse_grid("0.005:0.16:0.005")[5] == 0.03);
    CHECK(parse_grid("2.5") == std::vector<double>{2.5});
}

TEST_CASE("malformed grids and lists are rejected") {
    CHECK_THROWS_AS(parse_grid("0:1"), ConfigError);
    CHECK_THROWS_AS(parse_grid("0:1:0"), ConfigError);
    CHECK_THROWS_AS(parse_grid("0:1:-0.1"), ConfigError);
    CHECK_THROWS_AS(parse_grid("a:1:0.1"), ConfigError);
    CHECK_THROWS_AS(parse_grid("0:1:0.1:2"), ConfigError);
    CHECK(parse_list("2,4, 6") == std::vector<double>{2, 4, 6});
    CHECK_THROWS_AS(parse_list(""), ConfigError);
    CHECK_THROWS_AS(parse_list("1,x"), ConfigError);
}

TEST_CASE("config file lines, comments and overrides") {
    std::istringstream in("# comment\n\nN = 500\n  trials=20  \n");
    const auto s = read_config_file(in);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == std::pair<std::string, std::string>{"N", "500"});
    CHECK(s[1] == std::pair<std::string, std::string>{"trials", "20"});

    std::istringstream bad("no equals sign\n");
    CHECK_THROWS_AS(read_config_file(bad), ConfigError);

    auto c = make_config(find_experiment("hopfield-error"));
    c.apply(s);
    c.set("N", "700");  // a later flag wins over the file
    CHECK(c.count("N") == 700);
    CHECK(c.count("trials") == 20);
    CHECK(c.seed() == 1);
}

TEST_CASE("unknown keys and bad values are rejected") {
    auto c = make_config(find_experiment("hopfield-error"));
    CHECK_THROWS_AS(c.set("no-such-key", "1"), ConfigError);
    c.set("N", "-3");
    CHECK_THROWS_AS(c.count("N"), ConfigError);
    c.set("N", "1e3");
    CHECK(c.count("N") == 1000);
    c.set("N", "2.5");
    CHECK_THROWS_AS(c.count("N"), ConfigError);
    c.set("trials", "many");
    CHECK_THROWS_AS(c.real("trials"), ConfigError);
    CHECK_THROWS_AS(find_experiment("nope"), ConfigError);

    auto m = make_config(find_experiment("train-mlp"));
    m.set("nesterov", "maybe");
    CHECK_THROWS_AS(m.flag("nesterov"), ConfigError);
}

TEST_CASE("every experiment is registered with unique keys") {
    for (const char* name :
         {"hopfield-error", "steady-error", "phase-diagram", "mixed-order-parameter", "anneal-tsp", "anneal-queens",
          "anneal-digest", "train-mlp", "xor-pruning", "gradient-audit", "oja", "sanger", "kohonen-density",
          "kohonen-map", "cover", "rbf-xor", "arp-toy"}) {
        CAPTURE(name);
        const auto c = make_config(find_experiment(name));
        std::set<std::string> keys;
        for (const auto& p : c.parameters()) CHECK(keys.insert(p.key).second);
        CHECK(keys.contains("seed"));
        CHECK(keys.contains("output"));
    }
}

TEST_CASE("CSV header carries version, experiment and every resolved key") {
    const std::string csv = run_csv("steady-error", {{"alpha-grid", "0.05:0.1:0.05"}});
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# neuro " + version());
    std::getline(in, line);
    CHECK(line == "# experiment = steady-error");
    std::getline(in, line);
    CHECK(line == "# alpha-grid = 0.05:0.1:0.05");
    std::getline(in, line);
    CHECK(line == "# seed = 1");
    std::getline(in, line);
    CHECK(line == "# output = ");
    std::getline(in, line);
    CHECK(line == "alpha,p_one_step,p_steady,m1");
    CHECK(csv.find("# alpha_c = ") != std::string::npos);
    CHECK(csv_body(csv).find('#') == std::string::npos);
}

TEST_CASE("cells with commas are quoted") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("same seed gives a byte-identical body") {
    const Settings small{{"trials", "300"}, {"alpha-grid", "0.1:0.2:0.1"}, {"N", "200"}};
    const auto a = csv_body(run_csv("hopfield-error", small));
    CHECK(a == csv_body(run_csv("hopfield-error", small)));
    Settings other = small;
    other.emplace_back("seed", "2");
    CHECK(a != csv_body(run_csv("hopfield-error", other)));

    const Settings queens{{"runs", "2"}, {"k", "6"}};
    CHECK(run_csv("anneal-queens", queens) == run_csv("anneal-queens", queens));
    const Settings toy{{"seeds", "2"}, {"steps", "2000"}};
    CHECK(csv_body(run_csv("arp-toy", toy)) == csv_body(run_csv("arp-toy", toy)));
}

TEST_CASE("output path honours the environment override") {
    const auto& e = find_experiment("cover");
    auto c = make_config(e);
    ::unsetenv(output_dir_variable);
    CHECK(output_path(e, c) == std::filesystem::path(".") / "cover.csv");
    ::setenv(output_dir_variable, "/tmp/neuro-out", 1);
    CHECK(output_path(e, c) == std::filesystem::path("/tmp/neuro-out/cover.csv"));
    c.set("output", "sub/x.csv");
    CHECK(output_path(e, c) == std::filesystem::path("/tmp/neuro-out/sub/x.csv"));
    c.set("output", "/abs/y.csv");
    CHECK(output_path(e, c) == std::filesystem::path("/abs/y.csv"));
    c.set("output", "-");
    CHECK(output_path(e, c) == std::filesystem::path("-"));
    ::unsetenv(output_dir_variable);
}

TEST_CASE("footer values follow the body") {
    const std::string csv = run_csv("cover", {{"m-max", "3"}, {"p-max", "6"}, {"mc-trials", "50"}});
    const auto body_end = csv.rfind("\n3,6,");
    REQUIRE(body_end != std::string::npos);
    CHECK(csv.find("# max_abs_mean_n_minus_2m = ", body_end) != std::string::npos);
    CHECK(csv.find("# mc_exact = 0.5", body_end) != std::string::npos);
    CHECK(csv.find("\n2,4,2,0.5\n") != std::string::npos);  // P(2m, m) = 1/2
}

TEST_CASE("experiment-level validation") {
    CHECK_THROWS_AS(run_csv("oja", {{"data", "mystery"}}), ConfigError);
    CHECK_THROWS_AS(run_csv("sanger", {{"units", "5"}}), ConfigError);
    CHECK_THROWS_AS(run_csv("kohonen-map", {{"shape", "circle"}}), ConfigError);
    CHECK_THROWS_AS(run_csv("rbf-xor", {{"centers", "random"}}), ConfigError);
    CHECK_THROWS_AS(run_csv("acceptance", {{"criteria", "15"}}), ConfigError);
}
