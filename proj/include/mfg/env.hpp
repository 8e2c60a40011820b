#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfg/core.hpp"

namespace mfg {

using Populations = std::vector<PopulationDistribution>;

inline std::vector<double> population_means(const Populations& z) {
    std::vector<double> m(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) m[j] = z[j].mean();
    return m;
}

// Dynamics of one agent type. transition/reward take the state index, the
// action index into the type's ActionSet, and the full population profile.
// transition may be absent (sampler-only model); sampler maps a uniform draw
// u in (0,1] to a next-state index and is an optional fast path.
struct TypeModel {
    StateGrid grid{1};
    ActionSet actions{{0}};
    std::function<std::vector<double>(int, int, const Populations&)> transition;
    std::function<double(int, int, const Populations&)> reward;
    std::function<int(int, int, const Populations&, double)> sampler;
};

// Immutable J-type game. Evaluation is pure and safe to share across threads.
class GameModel {
public:
    GameModel(std::string name, std::vector<TypeModel> types, DiscountFactor gamma,
              double r_max)
        : name_(std::move(name)), types_(std::move(types)), gamma_(gamma),
          r_max_(r_max) {
        if (types_.size() < 2)
            throw std::invalid_argument("GameModel: at least 2 agent types required");
        if (!(r_max_ >= 0.0))
            throw std::invalid_argument("GameModel: R_max must be non-negative");
        for (const TypeModel& t : types_)
            if (!t.reward)
                throw std::invalid_argument("GameModel: every type needs a reward function");
    }

    const std::string& name() const { return name_; }
    int num_types() const { return static_cast<int>(types_.size()); }
    const TypeModel& type(int j) const { return types_.at(static_cast<std::size_t>(j)); }
    const StateGrid& grid(int j) const { return type(j).grid; }
    const ActionSet& actions(int j) const { return type(j).actions; }
    DiscountFactor gamma() const { return gamma_; }
    double r_max() const { return r_max_; }

    // True when every type exposes its kernel explicitly.
    bool has_kernel() const {
        for (const TypeModel& t : types_)
            if (!t.transition) return false;
        return true;
    }

    std::vector<double> transition_row(int j, int x, int a, const Populations& z) const {
        const TypeModel& t = type(j);
        if (!t.transition)
            throw std::runtime_error("oracle requires full model");
        std::vector<double> row = t.transition(x, a, z);
        validate_row(row, t.grid.size());
        return row;
    }

    double reward(int j, int x, int a, const Populations& z) const {
        return type(j).reward(x, a, z);
    }

    // u in (0,1] selects the next state; prefers the sampler hook.
    int sample_next_state(int j, int x, int a, const Populations& z, double u) const {
        const TypeModel& t = type(j);
        if (t.sampler) return t.sampler(x, a, z, u);
        std::vector<double> row = transition_row(j, x, a, z);
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < row.size(); ++i) {
            cum += row[i];
            if (u <= cum + 1e-15) return static_cast<int>(i);
        }
        return static_cast<int>(row.size()) - 1;
    }

    static void validate_row(const std::vector<double>& row, int n_states) {
        if (static_cast<int>(row.size()) != n_states)
            throw std::runtime_error("transition row has wrong length");
        double sum = 0.0;
        for (double p : row) {
            if (!(p >= 0.0))
                throw std::runtime_error("transition row has a negative entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::runtime_error("transition row does not sum to 1");
    }

private:
    std::string name_;
    std::vector<TypeModel> types_;
    DiscountFactor gamma_;
    double r_max_;
};

// Table-driven small instance. Kernel rows may depend linearly on the other
// type's population mean: row = (1-w)*lo + w*hi with
// w = clamp(coupling_slope * mean(z_other), 0, 1). Rewards may carry a linear
// coupling term reward_coupling[j][a] * (mean(z_other) - 1/2).
struct TestEnvSpec {
    std::string name;
    int num_types = 2;
    int n = 1;
    std::vector<int> action_values = {0, 1};
    double gamma = 0.9;
    std::vector<std::vector<std::vector<std::vector<double>>>> kernel_lo;  // [j][a][x][x']
    std::vector<std::vector<std::vector<std::vector<double>>>> kernel_hi;  // same shape or empty
    double coupling_slope = 0.0;
    std::vector<std::vector<std::vector<double>>> base_reward;  // [j][a][x]
    std::vector<std::vector<double>> reward_coupling;           // [j][a] or empty

    bool has_kernel_coupling() const { return !kernel_hi.empty() && coupling_slope != 0.0; }

    // Entrywise Lipschitz constant of the kernel in the joint population W1.
    double declared_c2() const {
        if (!has_kernel_coupling()) return 0.0;
        double maxdiff = 0.0;
        for (std::size_t j = 0; j < kernel_lo.size(); ++j)
            for (std::size_t a = 0; a < kernel_lo[j].size(); ++a)
                for (std::size_t x = 0; x < kernel_lo[j][a].size(); ++x)
                    for (std::size_t y = 0; y < kernel_lo[j][a][x].size(); ++y)
                        maxdiff = std::max(maxdiff, std::abs(kernel_hi[j][a][x][y] -
                                                             kernel_lo[j][a][x][y]));
        return coupling_slope * maxdiff;
    }

    double bound_r_max() const {
        double b = 0.0;
        for (std::size_t j = 0; j < base_reward.size(); ++j)
            for (std::size_t a = 0; a < base_reward[j].size(); ++a) {
                double rc = reward_coupling.empty() ? 0.0 : std::abs(reward_coupling[j][a]);
                for (double r : base_reward[j][a])
                    b = std::max(b, std::abs(r) + 0.5 * rc);
            }
        return b;
    }
};

namespace detail {

inline void check_tables(const TestEnvSpec& s) {
    auto fail = [&s](const std::string& what) {
        throw std::invalid_argument("malformed tables in test env '" + s.name + "': " + what);
    };
    if (s.num_types < 2) fail("fewer than 2 types");
    if (s.n < 1) fail("grid needs at least 1 subdivision");
    int ns = s.n + 1;
    int na = static_cast<int>(s.action_values.size());
    auto check_kernel = [&](const std::vector<std::vector<std::vector<std::vector<double>>>>& k,
                            const char* which) {
        if (static_cast<int>(k.size()) != s.num_types) fail(std::string(which) + ": type count");
        for (const auto& per_type : k) {
            if (static_cast<int>(per_type.size()) != na) fail(std::string(which) + ": action count");
            for (const auto& per_action : per_type) {
                if (static_cast<int>(per_action.size()) != ns) fail(std::string(which) + ": row count");
                for (const auto& row : per_action) {
                    if (static_cast<int>(row.size()) != ns) fail(std::string(which) + ": row length");
                    double sum = 0.0;
                    for (double p : row) {
                        if (!(p >= 0.0)) fail(std::string(which) + ": negative entry");
                        sum += p;
                    }
                    if (std::abs(sum - 1.0) > 1e-12) fail(std::string(which) + ": row not summing to 1");
                }
            }
        }
    };
    check_kernel(s.kernel_lo, "kernel_lo");
    if (!s.kernel_hi.empty()) check_kernel(s.kernel_hi, "kernel_hi");
    if (static_cast<int>(s.base_reward.size()) != s.num_types) fail("base_reward: type count");
    for (const auto& per_type : s.base_reward) {
        if (static_cast<int>(per_type.size()) != na) fail("base_reward: action count");
        for (const auto& per_action : per_type)
            if (static_cast<int>(per_action.size()) != ns) fail("base_reward: state count");
    }
    if (!s.reward_coupling.empty()) {
        if (static_cast<int>(s.reward_coupling.size()) != s.num_types)
            fail("reward_coupling: type count");
        for (const auto& per_type : s.reward_coupling)
            if (static_cast<int>(per_type.size()) != na) fail("reward_coupling: action count");
    }
}

}  // namespace detail

inline GameModel make_test_env(const TestEnvSpec& spec) {
    detail::check_tables(spec);
    std::vector<TypeModel> types;
    types.reserve(static_cast<std::size_t>(spec.num_types));
    for (int j = 0; j < spec.num_types; ++j) {
        TypeModel t;
        t.grid = StateGrid(spec.n);
        t.actions = ActionSet(spec.action_values);
        int other = (j + 1) % spec.num_types;
        auto lo = spec.kernel_lo[static_cast<std::size_t>(j)];
        bool coupled = spec.has_kernel_coupling();
        std::vector<std::vector<std::vector<double>>> hi;
        if (coupled) hi = spec.kernel_hi[static_cast<std::size_t>(j)];
        double slope = spec.coupling_slope;
        t.transition = [lo, hi, coupled, slope, other](int x, int a, const Populations& z) {
            const std::vector<double>& r0 = lo[static_cast<std::size_t>(a)][static_cast<std::size_t>(x)];
            if (!coupled) return r0;
            double w = slope * z[static_cast<std::size_t>(other)].mean();
            w = std::min(1.0, std::max(0.0, w));
            const std::vector<double>& r1 = hi[static_cast<std::size_t>(a)][static_cast<std::size_t>(x)];
            std::vector<double> row(r0.size());
            for (std::size_t i = 0; i < row.size(); ++i)
                row[i] = (1.0 - w) * r0[i] + w * r1[i];
            return row;
        };
        auto br = spec.base_reward[static_cast<std::size_t>(j)];
        std::vector<double> rc;
        if (!spec.reward_coupling.empty()) rc = spec.reward_coupling[static_cast<std::size_t>(j)];
        t.reward = [br, rc, other](int x, int a, const Populations& z) {
            double r = br[static_cast<std::size_t>(a)][static_cast<std::size_t>(x)];
            if (!rc.empty())
                r += rc[static_cast<std::size_t>(a)] *
                     (z[static_cast<std::size_t>(other)].mean() - 0.5);
            return r;
        };
        types.push_back(std::move(t));
    }
    return GameModel(spec.name, std::move(types), DiscountFactor(spec.gamma),
                     spec.bound_r_max());
}

// 2-state, 2-action, population-independent instance. Its values, gradients
// and the population map all admit direct linear-algebra oracles.
inline TestEnvSpec twostate_spec() {
    TestEnvSpec s;
    s.name = "twostate";
    s.num_types = 2;
    s.n = 1;
    s.gamma = 0.9;
    std::vector<std::vector<std::vector<double>>> kernel = {
        {{0.8, 0.2}, {0.6, 0.4}},   // action 0 rows per state
        {{0.3, 0.7}, {0.1, 0.9}}};  // action 1 rows per state
    std::vector<std::vector<double>> reward = {{0.5, 0.1}, {-0.2, 0.8}};  // [a][x]
    s.kernel_lo = {kernel, kernel};
    s.base_reward = {reward, reward};
    return s;
}

// 3-state instance built to satisfy the contraction condition with a wide
// margin: action 0 strictly dominant for every population profile, a weak
// linear kernel coupling, and x-independent rows so values stay flat.
inline TestEnvSpec contracting_spec() {
    TestEnvSpec s;
    s.name = "contracting";
    s.num_types = 2;
    s.n = 2;
    s.gamma = 0.9;
    std::vector<double> q0_lo = {0.7, 0.2, 0.1};
    std::vector<double> q1_lo = {0.1, 0.2, 0.7};
    std::vector<double> q0_hi = {0.6, 0.3, 0.1};
    std::vector<double> q1_hi = {0.1, 0.3, 0.6};
    auto rows = [](const std::vector<double>& q) {
        return std::vector<std::vector<double>>(3, q);
    };
    std::vector<std::vector<std::vector<double>>> lo = {rows(q0_lo), rows(q1_lo)};
    std::vector<std::vector<std::vector<double>>> hi = {rows(q0_hi), rows(q1_hi)};
    s.kernel_lo = {lo, lo};
    s.kernel_hi = {hi, hi};
    s.coupling_slope = 0.25;
    auto flat = [](double v) { return std::vector<double>(3, v); };
    s.base_reward = {{flat(-0.10), flat(-0.40)}, {flat(-0.12), flat(-0.42)}};
    s.reward_coupling = {{0.0, 0.1}, {0.0, 0.1}};
    return s;
}

// Identity dynamics and zero reward: every population profile is stationary.
inline TestEnvSpec identity_spec() {
    TestEnvSpec s;
    s.name = "identity";
    s.num_types = 2;
    s.n = 2;
    s.gamma = 0.9;
    std::vector<std::vector<double>> eye = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    std::vector<std::vector<std::vector<double>>> k = {eye, eye};
    s.kernel_lo = {k, k};
    auto flat = [](double v) { return std::vector<double>(3, v); };
    s.base_reward = {{flat(0.0), flat(0.0)}, {flat(0.0), flat(0.0)}};
    return s;
}

inline GameModel make_test_env(const std::string& preset) {
    if (preset == "twostate") return make_test_env(twostate_spec());
    if (preset == "contracting") return make_test_env(contracting_spec());
    if (preset == "identity") return make_test_env(identity_spec());
    throw std::invalid_argument("make_test_env: unknown preset '" + preset + "'");
}

}  // namespace mfg
