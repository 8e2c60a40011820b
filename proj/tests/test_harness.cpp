#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mfg/harness.hpp"

using namespace mfg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("mfg_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json minimal_exact(const std::string& env, const std::string& out) {
    json j;
    j["environment"] = {{"name", env}};
    j["solver"] = "exact";
    j["out"] = out;
    return j;
}

}  // namespace

TEST_CASE("configs are validated key by key") {
    json ok = minimal_exact("identity", "x");
    REQUIRE_NOTHROW(parse_run_config(ok));

    json j = ok;
    j["mystery"] = 1;
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'mystery'") &&
                            Catch::Matchers::ContainsSubstring("unknown key"));

    j = ok;
    j.erase("environment");
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'environment'"));

    j = ok;
    j["environment"]["name"] = "warpdrive";
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'environment.name'") &&
                            Catch::Matchers::ContainsSubstring("warpdrive"));

    j = ok;
    j["solver"] = "magic";
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'solver'"));

    j = ok;
    j["seed"] = -4;
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'seed'"));

    j = ok;
    j["seed"] = 1.5;
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("expected an integer"));

    j = ok;
    j["threads"] = 0;
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);

    // preset environments accept no parameters
    j = ok;
    j["environment"]["params"] = {{"n", 5}};
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'environment.params.n'"));

    // the cyber environment validates its parameter names and ranges
    j = minimal_exact("cyber", "x");
    j["environment"]["params"] = {{"g7", 0.1}};
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'environment.params.g7'"));

    j = ok;
    j["exact"] = {{"eps", -1.0}};
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'exact.eps'"));

    j = ok;
    j["exact"] = {{"soften_tau", "warm"}};
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("expected a number"));
}

TEST_CASE("learner settings flow from the rhpg block") {
    json j;
    j["environment"] = {{"name", "twostate"}};
    j["solver"] = "rhpg";
    j["seed"] = 99;
    j["threads"] = 2;
    j["rhpg"] = {{"agents_per_type", 250},
                 {"inner_tol", 1e-4},
                 {"outer_tol", 0.03},
                 {"max_inner", 123},
                 {"max_outer", 7},
                 {"a_exponent", 0.8},
                 {"step_scale", 0.4},
                 {"warm_start", true},
                 {"damping", 0.25},
                 {"feature_map", "action1_bias"},
                 {"trace_stride", 10},
                 {"batch_size", 16}};
    RunConfig cfg = parse_run_config(j);
    REQUIRE(cfg.learner.agents_per_type == std::vector<int>{250, 250});
    REQUIRE(cfg.learner.inner_tol == 1e-4);
    REQUIRE(cfg.learner.outer_tol == 0.03);
    REQUIRE(cfg.learner.max_inner == 123);
    REQUIRE(cfg.learner.max_outer == 7);
    REQUIRE(cfg.learner.schedule.a_exponent == 0.8);
    REQUIRE(cfg.learner.schedule.scale == 0.4);
    REQUIRE(cfg.learner.warm_start);
    REQUIRE(cfg.learner.damping == 0.25);
    REQUIRE(cfg.learner.feature_map == "action1_bias");
    REQUIRE(cfg.learner.trace_stride == 10);
    REQUIRE(cfg.learner.batch_size == 16);
    // seed and threads propagate from the top level
    REQUIRE(cfg.learner.seed == 99);
    REQUIRE(cfg.learner.threads == 2);

    j["rhpg"]["agents_per_type"] = json::array({100, 400});
    cfg = parse_run_config(j);
    REQUIRE(cfg.learner.agents_per_type == std::vector<int>{100, 400});

    j["rhpg"]["agents_per_type"] = "many";
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'rhpg.agents_per_type'"));

    j["rhpg"] = {{"burnin", 5}};
    REQUIRE_THROWS_WITH(parse_run_config(j),
                        Catch::Matchers::ContainsSubstring("'rhpg.burnin'"));
}

TEST_CASE("config files are loaded and bad ones rejected") {
    auto dir = fresh_dir("cfgfile");
    auto path = dir / "run.json";
    {
        std::ofstream out(path);
        out << minimal_exact("identity", (dir / "out").string()).dump();
    }
    REQUIRE_NOTHROW(parse_run_config_file(path.string()));
    REQUIRE_THROWS_AS(parse_run_config_file((dir / "absent.json").string()), ConfigError);
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    REQUIRE_THROWS_WITH(parse_run_config_file(path.string()),
                        Catch::Matchers::ContainsSubstring("invalid JSON"));
}

TEST_CASE("the config hash ignores the output directory but not the seed") {
    RunConfig a = parse_run_config(minimal_exact("identity", "out_a"));
    RunConfig b = parse_run_config(minimal_exact("identity", "out_b"));
    REQUIRE(config_hash(a) == config_hash(b));
    json j = minimal_exact("identity", "out_a");
    j["seed"] = 2;
    RunConfig c = parse_run_config(j);
    REQUIRE(config_hash(a) != config_hash(c));
}

TEST_CASE("environment registry lists the bundled games") {
    std::vector<std::string> names;
    for (const auto& e : env_registry()) names.push_back(e.name);
    REQUIRE(names == std::vector<std::string>{"cyber", "twostate", "contracting", "identity"});
    for (const auto& e : env_registry()) REQUIRE_FALSE(e.description.empty());
    REQUIRE_THROWS_AS(find_env("void"), ConfigError);
    auto m = find_env("cyber").build(json{{"n", 4}, {"gamma", 0.8}});
    REQUIRE(m.grid(0).size() == 5);
    REQUIRE(m.gamma().gamma == 0.8);
}

TEST_CASE("an exact run writes the full artifact set") {
    auto dir = fresh_dir("exact_run");
    json j = minimal_exact("identity", (dir / "run").string());
    j["seed"] = 7;
    RunConfig cfg = parse_run_config(j);
    REQUIRE(run_config(cfg) == 0);

    for (const char* f : {"trace.csv", "policy.csv", "populations.csv", "report.json"})
        REQUIRE(fs::exists(dir / "run" / f));

    json report = json::parse(slurp(dir / "run" / "report.json"));
    REQUIRE(report["seed"] == 7);
    REQUIRE(report["status"] == "converged");
    REQUIRE(report["solver"] == "exact");
    REQUIRE(report["config_hash"] == config_hash(cfg));
    REQUIRE(report["residual"].get<double>() < 1e-12);
    REQUIRE(report["iterations"] == 1);
    REQUIRE(report["wall_time_sec"].get<double>() >= 0.0);
    REQUIRE(report["contraction"]["contracts"] == true);
    REQUIRE(report["contraction"]["c2_hat"].get<double>() == 0.0);

    auto trace = iodetail::read_csv(dir / "run" / "trace.csv");
    REQUIRE(trace.header ==
            std::vector<std::string>{"outer_iter", "residual", "mean_0", "mean_1"});
    REQUIRE(trace.rows.size() == 1);

    auto pol = iodetail::read_csv(dir / "run" / "policy.csv");
    REQUIRE(pol.header == std::vector<std::string>{"type", "state", "p0", "p1"});
    REQUIRE(pol.rows.size() == 6);  // 2 types x 3 states

    auto pops = iodetail::read_csv(dir / "run" / "populations.csv");
    REQUIRE(pops.header == std::vector<std::string>{"type", "state", "mass"});
    REQUIRE(pops.rows.size() == 6);
    for (const auto& row : pops.rows)
        REQUIRE(std::stod(row[2]) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("a learning run records parameters and an inner/outer trace") {
    auto dir = fresh_dir("rl_run");
    json j;
    j["environment"] = {{"name", "identity"}};
    j["solver"] = "rhpg";
    j["seed"] = 11;
    j["out"] = (dir / "run").string();
    j["rhpg"] = {{"agents_per_type", 4000}, {"max_inner", 30}, {"inner_patience", 3},
                 {"max_outer", 10},         {"outer_tol", 0.05}};
    RunConfig cfg = parse_run_config(j);
    REQUIRE(run_config(cfg) == 0);

    json report = json::parse(slurp(dir / "run" / "report.json"));
    REQUIRE(report["status"] == "converged");
    REQUIRE(report["thetas"].size() == 2);
    for (const auto& th : report["thetas"])
        for (const auto& v : th) REQUIRE(v.get<double>() == 0.0);

    auto trace = iodetail::read_csv(dir / "run" / "trace.csv");
    REQUIRE(trace.col("phase") == 0);
    REQUIRE(trace.col("qhat") >= 0);
    REQUIRE(trace.col("theta_0") >= 0);
    bool inner = false, outer = false;
    for (const auto& row : trace.rows) {
        if (row[0] == "inner") inner = true;
        if (row[0] == "outer") outer = true;
    }
    REQUIRE(inner);
    REQUIRE(outer);
}

TEST_CASE("cap exhaustion still produces artifacts and exit code 3") {
    auto dir = fresh_dir("cap_run");
    json j = minimal_exact("twostate", (dir / "run").string());
    j["exact"] = {{"eps", 1e-13}, {"max_outer", 1}};
    RunConfig cfg = parse_run_config(j);
    REQUIRE(run_config(cfg) == 3);
    REQUIRE(fs::exists(dir / "run" / "report.json"));
    json report = json::parse(slurp(dir / "run" / "report.json"));
    REQUIRE(report["status"] == "cap_exhausted");
}

TEST_CASE("identical runs compare to zero and mismatched grids refuse") {
    auto dir = fresh_dir("compare");
    json j = minimal_exact("twostate", (dir / "a").string());
    j["seed"] = 21;
    run_config(parse_run_config(j));
    j["out"] = (dir / "b").string();
    run_config(parse_run_config(j));

    std::stringstream out;
    REQUIRE(compare_runs((dir / "a").string(), (dir / "b").string(), out,
                         (dir / "cmp").string()) == 0);
    json rep = json::parse(out.str());
    REQUIRE(rep["population_joint_w1"].get<double>() == 0.0);
    REQUIRE(rep["policy_sup_diff"].get<double>() == 0.0);
    REQUIRE(fs::exists(dir / "cmp" / "compare.json"));
    REQUIRE(fs::exists(dir / "cmp" / "residuals.csv"));
    auto restab = iodetail::read_csv(dir / "cmp" / "residuals.csv");
    REQUIRE(restab.header == std::vector<std::string>{"iter", "residual_a", "residual_b"});
    REQUIRE_FALSE(restab.rows.empty());

    json other = minimal_exact("identity", (dir / "c").string());
    run_config(parse_run_config(other));
    std::stringstream sink;
    REQUIRE_THROWS_WITH(compare_runs((dir / "a").string(), (dir / "c").string(), sink),
                        Catch::Matchers::ContainsSubstring("grid mismatch"));
}

TEST_CASE("plot extraction produces tidy series") {
    auto dir = fresh_dir("plotdata");
    json j = minimal_exact("twostate", (dir / "run").string());
    run_config(parse_run_config(j));

    auto polp = (dir / "pol.csv").string();
    REQUIRE(plotdata((dir / "run").string(), "policy", polp) == 0);
    auto pol = iodetail::read_csv(polp);
    REQUIRE(pol.header == std::vector<std::string>{"x", "series", "value"});
    REQUIRE(pol.rows.size() == 4);  // 2 types x 2 states
    REQUIRE(pol.rows[0][1] == "type0_p0");

    auto resp = (dir / "res.csv").string();
    REQUIRE(plotdata((dir / "run").string(), "residual", resp) == 0);
    auto res = iodetail::read_csv(resp);
    REQUIRE_FALSE(res.rows.empty());
    for (const auto& row : res.rows) REQUIRE(row[1] == "residual");

    auto meanp = (dir / "mean.csv").string();
    REQUIRE(plotdata((dir / "run").string(), "mean_state", meanp) == 0);
    auto mean = iodetail::read_csv(meanp);
    REQUIRE(mean.rows.size() == res.rows.size() * 2);  // one series per type

    REQUIRE_THROWS_WITH(plotdata((dir / "run").string(), "sparkline", polp),
                        Catch::Matchers::ContainsSubstring("'kind'"));
}

TEST_CASE("repeated runs of one config are byte identical") {
    auto dir = fresh_dir("determinism");
    json j;
    j["environment"] = {{"name", "twostate"}};
    j["solver"] = "rhpg";
    j["seed"] = 4242;
    j["rhpg"] = {{"agents_per_type", 300}, {"max_inner", 40}, {"max_outer", 3},
                 {"outer_tol", 1e-9},      {"feature_map", "action1_bias"}};
    j["out"] = (dir / "a").string();
    run_config(parse_run_config(j));
    j["out"] = (dir / "b").string();
    run_config(parse_run_config(j));

    for (const char* f : {"trace.csv", "policy.csv", "populations.csv"})
        REQUIRE(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("numbers are written with twelve significant digits") {
    REQUIRE(detail::fmt12(1.0 / 3.0) == "0.333333333333");
    REQUIRE(detail::fmt12(0.0) == "0");
    REQUIRE(detail::fmt12(1.0) == "1");
    REQUIRE(detail::fmt12(-2.5e-9) == "-2.5e-09");
    // round trip keeps 12 digits of agreement
    double v = 0.12345678901234;
    REQUIRE(std::stod(detail::fmt12(v)) == Catch::Approx(v).epsilon(1e-11));
}
