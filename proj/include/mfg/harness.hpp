#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfg/core.hpp"
#include "mfg/cyber.hpp"
#include "mfg/detail/format.hpp"
#include "mfg/env.hpp"
#include "mfg/exact.hpp"
#include "mfg/policy.hpp"
#include "mfg/rl.hpp"

namespace mfg {

using nlohmann::json;

// Raised for anything wrong with a run configuration; key() names the
// offending entry so the CLI diagnostic can point at it.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error("config error at '" + key + "': " + what),
          key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

namespace cfgdetail {

inline std::string join_key(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) { ok = true; break; }
        if (!ok) throw ConfigError(join_key(path, it.key()), "unknown key");
    }
}

inline const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline double as_double(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError(key, "expected a number");
    return v.get<double>();
}

inline long as_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    return v.get<long>();
}

inline bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
    return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError(key, "expected a string");
    return v.get<std::string>();
}

inline double num_or(const json& obj, const std::string& path, const std::string& key,
                     double def) {
    const json* v = find(obj, key);
    return v ? as_double(*v, join_key(path, key)) : def;
}

inline long int_or(const json& obj, const std::string& path, const std::string& key,
                   long def) {
    const json* v = find(obj, key);
    return v ? as_int(*v, join_key(path, key)) : def;
}

inline bool bool_or(const json& obj, const std::string& path, const std::string& key,
                    bool def) {
    const json* v = find(obj, key);
    return v ? as_bool(*v, join_key(path, key)) : def;
}

inline std::string str_or(const json& obj, const std::string& path,
                          const std::string& key, const std::string& def) {
    const json* v = find(obj, key);
    return v ? as_string(*v, join_key(path, key)) : def;
}

}  // namespace cfgdetail

struct EnvEntry {
    std::string name;
    std::string description;
    std::function<GameModel(const json& params)> build;
};

inline const std::vector<EnvEntry>& env_registry() {
    static const std::vector<EnvEntry> entries = [] {
        std::vector<EnvEntry> v;
        v.push_back({"cyber",
                     "two-type attack/defense game on {0,1/n,...,1}; reset or drift dynamics,"
                     " mean-gap coupled rewards",
                     [](const json& p) {
                         cfgdetail::check_keys(p, "environment.params",
                                               {"n", "g1", "g2", "lambda1", "lambda2", "gamma",
                                                "damage_scale"});
                         CyberParams cp;
                         cp.n = static_cast<int>(cfgdetail::int_or(p, "environment.params", "n", cp.n));
                         cp.g1 = cfgdetail::num_or(p, "environment.params", "g1", cp.g1);
                         cp.g2 = cfgdetail::num_or(p, "environment.params", "g2", cp.g2);
                         cp.lambda1 = cfgdetail::num_or(p, "environment.params", "lambda1", cp.lambda1);
                         cp.lambda2 = cfgdetail::num_or(p, "environment.params", "lambda2", cp.lambda2);
                         cp.gamma = cfgdetail::num_or(p, "environment.params", "gamma", cp.gamma);
                         cp.damage_scale =
                             cfgdetail::num_or(p, "environment.params", "damage_scale", cp.damage_scale);
                         try {
                             cp.validate();
                         } catch (const std::exception& e) {
                             throw ConfigError("environment.params", e.what());
                         }
                         return make_cyber_env(cp);
                     }});
        auto preset = [](const char* name, const char* descr) {
            std::string n = name;
            return EnvEntry{n, descr, [n](const json& p) {
                                cfgdetail::check_keys(p, "environment.params", {});
                                return make_test_env(n);
                            }};
        };
        v.push_back(preset("twostate",
                           "2-state 2-action population-independent pair; linear-algebra oracles"));
        v.push_back(preset("contracting",
                           "3-state pair with weak linear coupling; satisfies the contraction condition"));
        v.push_back(preset("identity", "identity dynamics, zero reward; every profile stationary"));
        return v;
    }();
    return entries;
}

inline const EnvEntry& find_env(const std::string& name) {
    for (const EnvEntry& e : env_registry())
        if (e.name == name) return e;
    throw ConfigError("environment.name", "unknown environment '" + name + "'");
}

struct RunConfig {
    std::string environment;
    json env_params = json::object();
    std::string solver;  // "exact" | "rhpg"
    std::uint64_t seed = 1;
    std::string out_dir = "run_out";
    int threads = 1;

    double exact_eps = 1e-9;
    int exact_max_outer = 200;
    double value_tol = 1e-10;
    double soften_tau = 0.0;
    bool contraction_check = true;

    LearnerConfig learner;
};

inline RunConfig parse_run_config(const json& root) {
    using namespace cfgdetail;
    if (!root.is_object()) throw ConfigError("", "top level must be an object");
    check_keys(root, "", {"environment", "solver", "seed", "out", "threads", "exact", "rhpg"});

    RunConfig cfg;
    const json* env = find(root, "environment");
    if (!env) throw ConfigError("environment", "missing");
    if (!env->is_object()) throw ConfigError("environment", "expected an object");
    check_keys(*env, "environment", {"name", "params"});
    const json* name = find(*env, "name");
    if (!name) throw ConfigError("environment.name", "missing");
    cfg.environment = as_string(*name, "environment.name");
    if (const json* p = find(*env, "params")) {
        if (!p->is_object()) throw ConfigError("environment.params", "expected an object");
        cfg.env_params = *p;
    }
    find_env(cfg.environment).build(cfg.env_params);  // full eager validation

    const json* solver = find(root, "solver");
    if (!solver) throw ConfigError("solver", "missing");
    cfg.solver = as_string(*solver, "solver");
    if (cfg.solver != "exact" && cfg.solver != "rhpg")
        throw ConfigError("solver", "must be \"exact\" or \"rhpg\"");

    long seed = int_or(root, "", "seed", 1);
    if (seed < 0) throw ConfigError("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.out_dir = str_or(root, "", "out", cfg.out_dir);
    long threads = int_or(root, "", "threads", 1);
    if (threads < 1) throw ConfigError("threads", "must be >= 1");
    cfg.threads = static_cast<int>(threads);

    if (const json* ex = find(root, "exact")) {
        if (!ex->is_object()) throw ConfigError("exact", "expected an object");
        check_keys(*ex, "exact",
                   {"eps", "max_outer", "value_tol", "soften_tau", "contraction_check"});
        cfg.exact_eps = num_or(*ex, "exact", "eps", cfg.exact_eps);
        cfg.exact_max_outer =
            static_cast<int>(int_or(*ex, "exact", "max_outer", cfg.exact_max_outer));
        cfg.value_tol = num_or(*ex, "exact", "value_tol", cfg.value_tol);
        cfg.soften_tau = num_or(*ex, "exact", "soften_tau", cfg.soften_tau);
        cfg.contraction_check = bool_or(*ex, "exact", "contraction_check", cfg.contraction_check);
        if (!(cfg.exact_eps > 0)) throw ConfigError("exact.eps", "must be > 0");
        if (cfg.exact_max_outer < 1) throw ConfigError("exact.max_outer", "must be >= 1");
        if (!(cfg.value_tol > 0)) throw ConfigError("exact.value_tol", "must be > 0");
        if (cfg.soften_tau < 0) throw ConfigError("exact.soften_tau", "must be >= 0");
    }

    if (const json* rl = find(root, "rhpg")) {
        if (!rl->is_object()) throw ConfigError("rhpg", "expected an object");
        check_keys(*rl, "rhpg",
                   {"agents_per_type", "inner_tol", "outer_tol", "max_inner", "max_outer",
                    "inner_patience", "outer_patience", "a_exponent", "step_scale",
                    "warm_start", "damping", "feature_map", "trace_stride", "batch_size"});
        LearnerConfig& lc = cfg.learner;
        if (const json* n = find(*rl, "agents_per_type")) {
            lc.agents_per_type.clear();
            if (n->is_number_integer()) {
                lc.agents_per_type.assign(2, static_cast<int>(n->get<long>()));
            } else if (n->is_array()) {
                for (const json& e : *n)
                    lc.agents_per_type.push_back(
                        static_cast<int>(as_int(e, "rhpg.agents_per_type")));
            } else {
                throw ConfigError("rhpg.agents_per_type", "expected an integer or a list");
            }
        }
        lc.inner_tol = num_or(*rl, "rhpg", "inner_tol", lc.inner_tol);
        lc.outer_tol = num_or(*rl, "rhpg", "outer_tol", lc.outer_tol);
        lc.max_inner = static_cast<int>(int_or(*rl, "rhpg", "max_inner", lc.max_inner));
        lc.max_outer = static_cast<int>(int_or(*rl, "rhpg", "max_outer", lc.max_outer));
        lc.inner_patience =
            static_cast<int>(int_or(*rl, "rhpg", "inner_patience", lc.inner_patience));
        lc.outer_patience =
            static_cast<int>(int_or(*rl, "rhpg", "outer_patience", lc.outer_patience));
        lc.schedule.a_exponent = num_or(*rl, "rhpg", "a_exponent", lc.schedule.a_exponent);
        lc.schedule.scale = num_or(*rl, "rhpg", "step_scale", lc.schedule.scale);
        lc.warm_start = bool_or(*rl, "rhpg", "warm_start", lc.warm_start);
        lc.damping = num_or(*rl, "rhpg", "damping", lc.damping);
        lc.feature_map = str_or(*rl, "rhpg", "feature_map", lc.feature_map);
        lc.trace_stride = int_or(*rl, "rhpg", "trace_stride", lc.trace_stride);
        lc.batch_size = static_cast<int>(int_or(*rl, "rhpg", "batch_size", lc.batch_size));
    }
    cfg.learner.seed = cfg.seed;
    cfg.learner.threads = cfg.threads;
    return cfg;
}

inline RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    json root;
    try {
        in >> root;
    } catch (const std::exception& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    return parse_run_config(root);
}

// Canonical full-form echo of a config; the hash is taken over everything
// except the output directory.
inline json echo_config(const RunConfig& cfg) {
    json j;
    j["environment"] = {{"name", cfg.environment}, {"params", cfg.env_params}};
    j["solver"] = cfg.solver;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out_dir;
    j["threads"] = cfg.threads;
    j["exact"] = {{"eps", cfg.exact_eps},
                  {"max_outer", cfg.exact_max_outer},
                  {"value_tol", cfg.value_tol},
                  {"soften_tau", cfg.soften_tau},
                  {"contraction_check", cfg.contraction_check}};
    const LearnerConfig& lc = cfg.learner;
    j["rhpg"] = {{"agents_per_type", lc.agents_per_type},
                 {"inner_tol", lc.inner_tol},
                 {"outer_tol", lc.outer_tol},
                 {"max_inner", lc.max_inner},
                 {"max_outer", lc.max_outer},
                 {"inner_patience", lc.inner_patience},
                 {"outer_patience", lc.outer_patience},
                 {"a_exponent", lc.schedule.a_exponent},
                 {"step_scale", lc.schedule.scale},
                 {"warm_start", lc.warm_start},
                 {"damping", lc.damping},
                 {"feature_map", lc.feature_map},
                 {"trace_stride", lc.trace_stride},
                 {"batch_size", lc.batch_size}};
    return j;
}

inline std::string config_hash(const RunConfig& cfg) {
    json j = echo_config(cfg);
    j.erase("out");
    return detail::hex64(detail::fnv1a(j.dump()));
}

namespace iodetail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << content;
}

inline std::vector<int> union_action_values(const std::vector<TabularPolicy>& pols) {
    std::vector<int> vals;
    for (const TabularPolicy& p : pols)
        for (int v : p.actions.actions)
            if (std::find(vals.begin(), vals.end(), v) == vals.end()) vals.push_back(v);
    std::sort(vals.begin(), vals.end());
    return vals;
}

inline std::string policy_csv(const std::vector<TabularPolicy>& pols) {
    std::vector<int> vals = union_action_values(pols);
    std::vector<std::string> head = {"type", "state"};
    for (int v : vals) head.push_back("p" + detail::fmt_int(v));
    std::string out = detail::csv_join(head);
    for (std::size_t j = 0; j < pols.size(); ++j) {
        const TabularPolicy& p = pols[j];
        for (int s = 0; s < p.grid.size(); ++s) {
            std::vector<std::string> row = {detail::fmt_int(static_cast<long long>(j)),
                                            detail::fmt12(p.grid.value(s))};
            for (int v : vals) {
                bool found = false;
                for (int k = 0; k < p.actions.size(); ++k)
                    if (p.actions.at(k) == v) {
                        row.push_back(detail::fmt12(p.at(s)[static_cast<std::size_t>(k)]));
                        found = true;
                        break;
                    }
                if (!found) row.push_back("");
            }
            out += detail::csv_join(row);
        }
    }
    return out;
}

inline std::string populations_csv(const Populations& z) {
    std::string out = detail::csv_join({"type", "state", "mass"});
    for (std::size_t j = 0; j < z.size(); ++j)
        for (int s = 0; s < z[j].grid.size(); ++s)
            out += detail::csv_join({detail::fmt_int(static_cast<long long>(j)),
                                     detail::fmt12(z[j].grid.value(s)),
                                     detail::fmt12(z[j].mass[static_cast<std::size_t>(s)])});
    return out;
}

inline std::string exact_trace_csv(const std::vector<ExactTraceRow>& rows, int num_types) {
    std::vector<std::string> head = {"outer_iter", "residual"};
    for (int j = 0; j < num_types; ++j) head.push_back("mean_" + detail::fmt_int(j));
    std::string out = detail::csv_join(head);
    for (const ExactTraceRow& r : rows) {
        std::vector<std::string> row = {detail::fmt_int(r.outer_iter),
                                        detail::fmt12(r.residual)};
        for (double m : r.means) row.push_back(detail::fmt12(m));
        out += detail::csv_join(row);
    }
    return out;
}

inline std::string rl_trace_csv(const std::vector<RlTraceRow>& rows, int num_types,
                                int theta_dim) {
    std::vector<std::string> head = {"phase", "m", "k", "type", "residual", "qhat"};
    for (int j = 0; j < num_types; ++j) head.push_back("mean_" + detail::fmt_int(j));
    for (int i = 0; i < theta_dim; ++i) head.push_back("theta_" + detail::fmt_int(i));
    std::string out = detail::csv_join(head);
    for (const RlTraceRow& r : rows) {
        std::vector<std::string> row;
        if (r.outer) {
            row = {"outer", detail::fmt_int(r.m), "", "", detail::fmt12(r.residual), ""};
            for (int j = 0; j < num_types; ++j)
                row.push_back(j < static_cast<int>(r.means.size())
                                  ? detail::fmt12(r.means[static_cast<std::size_t>(j)])
                                  : "");
            for (int i = 0; i < theta_dim; ++i) row.push_back("");
        } else {
            row = {"inner", detail::fmt_int(r.m), detail::fmt_int(r.k),
                   detail::fmt_int(r.type), "", detail::fmt12(r.qhat)};
            for (int j = 0; j < num_types; ++j) row.push_back("");
            for (int i = 0; i < theta_dim; ++i)
                row.push_back(i < static_cast<int>(r.theta.size())
                                  ? detail::fmt12(r.theta[static_cast<std::size_t>(i)])
                                  : "");
        }
        out += detail::csv_join(row);
    }
    return out;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline Csv read_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
    Csv csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (first) {
            csv.header = std::move(cells);
            first = false;
        } else {
            csv.rows.push_back(std::move(cells));
        }
    }
    return csv;
}

}  // namespace iodetail

// Executes a parsed configuration: builds the environment, runs the chosen
// solver, writes trace.csv / policy.csv / populations.csv / report.json into
// the output directory. Returns 0 on convergence, 3 on cap exhaustion.
inline int run_config(const RunConfig& cfg) {
    GameModel model = find_env(cfg.environment).build(cfg.env_params);
    int nj = model.num_types();
    std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);

    json report;
    report["seed"] = cfg.seed;
    report["config_hash"] = config_hash(cfg);
    report["config"] = echo_config(cfg);
    report["environment"] = cfg.environment;
    report["solver"] = cfg.solver;

    auto t0 = std::chrono::steady_clock::now();
    SolveStatus status;
    if (cfg.solver == "exact") {
        Populations z0;
        for (int j = 0; j < nj; ++j)
            z0.push_back(PopulationDistribution::uniform(model.grid(j)));
        ExactOptions opt;
        opt.value_tol = cfg.value_tol;
        opt.soften_tau = cfg.soften_tau;
        opt.threads = cfg.threads;
        ExactResult res = solve_fixed_point(model, z0, cfg.exact_eps, cfg.exact_max_outer, opt);
        status = res.profile.status;
        iodetail::write_file(out / "trace.csv", iodetail::exact_trace_csv(res.trace, nj));
        iodetail::write_file(out / "policy.csv", iodetail::policy_csv(res.profile.policies));
        iodetail::write_file(out / "populations.csv",
                             iodetail::populations_csv(res.profile.populations));
        report["iterations"] = res.profile.iterations;
        report["residual"] = res.profile.residual;
        report["means"] = population_means(res.profile.populations);
        report["contraction"] = nullptr;
        if (cfg.contraction_check && model.has_kernel()) {
            try {
                ContractionReport cr = lemma1_constants(
                    model, default_zsamples(model, res.iterates), cfg.value_tol, cfg.soften_tau);
                report["contraction"] = {{"c1_hat", cr.c1_hat}, {"c2_hat", cr.c2_hat},
                                         {"d1_hat", cr.d1_hat}, {"d2", cr.d2},
                                         {"d3", cr.d3},         {"d", cr.d()},
                                         {"contracts", cr.contracts}};
            } catch (const std::exception& e) {
                report["contraction"] = {{"error", e.what()}};
            }
        }
    } else {
        PopulationSimulator sim(model);
        RlResult res = rhpg_mmfe(sim, cfg.learner);
        status = res.profile.status;
        int dim = 0;
        for (const PolicyParams& t : res.profile.thetas) dim = std::max(dim, t.dim());
        iodetail::write_file(out / "trace.csv", iodetail::rl_trace_csv(res.trace, nj, dim));
        iodetail::write_file(out / "policy.csv", iodetail::policy_csv(res.profile.policies));
        iodetail::write_file(out / "populations.csv",
                             iodetail::populations_csv(res.profile.populations));
        report["iterations"] = res.profile.iterations;
        report["residual"] = res.profile.residual;
        report["means"] = population_means(res.profile.populations);
        json thetas = json::array();
        for (const PolicyParams& t : res.profile.thetas) thetas.push_back(t.theta);
        report["thetas"] = thetas;
    }
    auto t1 = std::chrono::steady_clock::now();
    report["status"] = to_string(status);
    report["wall_time_sec"] = std::chrono::duration<double>(t1 - t0).count();
    iodetail::write_file(out / "report.json", report.dump(2) + "\n");
    return status == SolveStatus::converged ? 0 : 3;
}

namespace iodetail {

struct LoadedRun {
    Populations populations;
    Csv policy;
    std::vector<std::pair<long, double>> residuals;  // (iteration, residual)
};

inline LoadedRun load_run(const std::filesystem::path& dir) {
    LoadedRun run;
    Csv pops = read_csv(dir / "populations.csv");
    int ct = pops.col("type"), cs = pops.col("state"), cm = pops.col("mass");
    if (ct < 0 || cs < 0 || cm < 0)
        throw std::runtime_error("populations.csv in '" + dir.string() + "' lacks type/state/mass");
    std::vector<std::vector<double>> mass;
    for (const auto& row : pops.rows) {
        std::size_t j = std::stoul(row[static_cast<std::size_t>(ct)]);
        if (j >= mass.size()) mass.resize(j + 1);
        mass[j].push_back(std::stod(row[static_cast<std::size_t>(cm)]));
    }
    for (auto& m : mass) {
        StateGrid g(static_cast<int>(m.size()) - 1);
        run.populations.push_back(PopulationDistribution(g, m));
    }
    run.policy = read_csv(dir / "policy.csv");

    Csv trace = read_csv(dir / "trace.csv");
    if (trace.col("outer_iter") >= 0) {
        int ci = trace.col("outer_iter"), cr = trace.col("residual");
        for (const auto& row : trace.rows)
            run.residuals.push_back({std::stol(row[static_cast<std::size_t>(ci)]),
                                     std::stod(row[static_cast<std::size_t>(cr)])});
    } else if (trace.col("phase") >= 0) {
        int cp = trace.col("phase"), cm2 = trace.col("m"), cr = trace.col("residual");
        for (const auto& row : trace.rows)
            if (row[static_cast<std::size_t>(cp)] == "outer")
                run.residuals.push_back({std::stol(row[static_cast<std::size_t>(cm2)]),
                                         std::stod(row[static_cast<std::size_t>(cr)])});
    } else {
        throw std::runtime_error("trace.csv in '" + dir.string() + "' has an unknown schema");
    }
    return run;
}

}  // namespace iodetail

// Compares two finished runs (by output directory): joint W1 between final
// populations, sup-norm between policy tables, per-iteration residuals.
// Writes compare.json and residuals.csv into out_dir when given.
inline int compare_runs(const std::string& dir_a, const std::string& dir_b,
                        std::ostream& os, const std::string& out_dir = "") {
    iodetail::LoadedRun a = iodetail::load_run(dir_a);
    iodetail::LoadedRun b = iodetail::load_run(dir_b);
    if (a.populations.size() != b.populations.size())
        throw std::runtime_error("grid mismatch: different type counts");
    for (std::size_t j = 0; j < a.populations.size(); ++j)
        if (!(a.populations[j].grid == b.populations[j].grid))
            throw std::runtime_error("grid mismatch: type " + detail::fmt_int(static_cast<long long>(j)));

    double pop_w1 = joint_w1(a.populations, b.populations);

    if (a.policy.header != b.policy.header ||
        a.policy.rows.size() != b.policy.rows.size())
        throw std::runtime_error("grid mismatch: policy tables have different shapes");
    double pol_sup = 0.0;
    for (std::size_t r = 0; r < a.policy.rows.size(); ++r)
        for (std::size_t c = 2; c < a.policy.header.size(); ++c) {
            const std::string& va = a.policy.rows[r][c];
            const std::string& vb = b.policy.rows[r][c];
            if (va.empty() || vb.empty()) continue;
            pol_sup = std::max(pol_sup, std::abs(std::stod(va) - std::stod(vb)));
        }

    json rep;
    rep["population_joint_w1"] = pop_w1;
    rep["policy_sup_diff"] = pol_sup;
    rep["iterations"] = {a.residuals.size(), b.residuals.size()};
    os << rep.dump(2) << "\n";

    std::string restab = detail::csv_join({"iter", "residual_a", "residual_b"});
    std::size_t nmax = std::max(a.residuals.size(), b.residuals.size());
    for (std::size_t i = 0; i < nmax; ++i) {
        std::vector<std::string> row = {detail::fmt_int(static_cast<long long>(i + 1))};
        row.push_back(i < a.residuals.size() ? detail::fmt12(a.residuals[i].second) : "");
        row.push_back(i < b.residuals.size() ? detail::fmt12(b.residuals[i].second) : "");
        restab += detail::csv_join(row);
    }
    if (!out_dir.empty()) {
        std::filesystem::path out(out_dir);
        std::filesystem::create_directories(out);
        iodetail::write_file(out / "compare.json", rep.dump(2) + "\n");
        iodetail::write_file(out / "residuals.csv", restab);
    }
    return 0;
}

// Tidy (x, series, value) extraction from one run directory.
// kind "policy": P(lowest action) per state per type, from policy.csv.
// kind "residual": residual per outer iteration, from trace.csv.
// kind "mean_state": per-type mean per outer iteration, from trace.csv.
inline int plotdata(const std::string& run_dir, const std::string& kind,
                    const std::string& out_path) {
    namespace iod = iodetail;
    std::filesystem::path dir(run_dir);
    std::string out = detail::csv_join({"x", "series", "value"});
    if (kind == "policy") {
        iod::Csv pol = iod::read_csv(dir / "policy.csv");
        int ct = pol.col("type"), cs = pol.col("state");
        if (ct < 0 || cs < 0) throw std::runtime_error("policy.csv lacks type/state columns");
        int cprob = -1;
        for (std::size_t c = 0; c < pol.header.size(); ++c)
            if (pol.header[c].size() > 1 && pol.header[c][0] == 'p') {
                cprob = static_cast<int>(c);
                break;
            }
        if (cprob < 0) throw std::runtime_error("policy.csv has no probability columns");
        for (const auto& row : pol.rows) {
            if (row[static_cast<std::size_t>(cprob)].empty()) continue;
            out += detail::csv_join({row[static_cast<std::size_t>(cs)],
                                     "type" + row[static_cast<std::size_t>(ct)] + "_" +
                                         pol.header[static_cast<std::size_t>(cprob)],
                                     row[static_cast<std::size_t>(cprob)]});
        }
    } else if (kind == "residual" || kind == "mean_state") {
        iod::Csv trace = iod::read_csv(dir / "trace.csv");
        bool exact = trace.col("outer_iter") >= 0;
        int ci = exact ? trace.col("outer_iter") : trace.col("m");
        int cp = trace.col("phase");
        for (const auto& row : trace.rows) {
            if (!exact && (cp < 0 || row[static_cast<std::size_t>(cp)] != "outer")) continue;
            if (kind == "residual") {
                int cr = trace.col("residual");
                out += detail::csv_join({row[static_cast<std::size_t>(ci)], "residual",
                                         row[static_cast<std::size_t>(cr)]});
            } else {
                for (std::size_t c = 0; c < trace.header.size(); ++c)
                    if (trace.header[c].rfind("mean_", 0) == 0)
                        out += detail::csv_join({row[static_cast<std::size_t>(ci)],
                                                 "type" + trace.header[c].substr(5),
                                                 row[c]});
            }
        }
    } else {
        throw ConfigError("kind", "unknown plotdata kind '" + kind + "'");
    }
    iodetail::write_file(out_path, out);
    return 0;
}

}  // namespace mfg
