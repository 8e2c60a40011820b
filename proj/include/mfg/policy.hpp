#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfg/core.hpp"

namespace mfg {

// Weight vector of a linear-feature Boltzmann policy for one agent type.
struct PolicyParams {
    std::vector<double> theta;
    int type_index = 0;

    PolicyParams() = default;
    PolicyParams(std::vector<double> t, int j) : theta(std::move(t)), type_index(j) {}

    static PolicyParams zeros(int dim, int j) {
        return PolicyParams(std::vector<double>(static_cast<std::size_t>(dim), 0.0), j);
    }

    int dim() const { return static_cast<int>(theta.size()); }

    bool finite() const {
        for (double t : theta)
            if (!std::isfinite(t)) return false;
        return true;
    }
};

// Named catalog of feature vectors f_i(x, a). The logit of the policy is
// h(x, a, theta) = sum_i theta_i f_i(x, a).
class FeatureMap {
public:
    using Feature = std::function<double(double x, int action)>;

    FeatureMap(std::string name, std::vector<Feature> features)
        : name_(std::move(name)), features_(std::move(features)) {
        if (features_.empty())
            throw std::invalid_argument("FeatureMap: no features");
    }

    const std::string& name() const { return name_; }
    int dim() const { return static_cast<int>(features_.size()); }

    std::vector<double> eval(double x, int action) const {
        std::vector<double> f(features_.size());
        for (std::size_t i = 0; i < features_.size(); ++i)
            f[i] = features_[i](x, action);
        return f;
    }

    // Two-parameter form used by the cyber experiment:
    // f1 = x * 1{a=1}, f2 = (1-x) * 1{a=1}. Action 0 is then taken with
    // probability 1 / (1 + exp(theta1*x + theta2*(1-x))).
    static FeatureMap cyber2() {
        return FeatureMap("cyber2",
                          {[](double x, int a) { return a == 1 ? x : 0.0; },
                           [](double x, int a) { return a == 1 ? 1.0 - x : 0.0; }});
    }

    // Single state-independent logit on action 1.
    static FeatureMap action1_bias() {
        return FeatureMap("action1_bias",
                          {[](double, int a) { return a == 1 ? 1.0 : 0.0; }});
    }

    // One weight per grid state controlling the logit of action 1; spans all
    // state-dependent two-action policies.
    static FeatureMap state_onehot_action1(const StateGrid& grid) {
        std::vector<Feature> fs;
        fs.reserve(static_cast<std::size_t>(grid.size()));
        for (int s = 0; s < grid.size(); ++s) {
            double xs = grid.value(s);
            double half_gap = 0.5 * grid.spacing();
            fs.push_back([xs, half_gap](double x, int a) {
                return (a == 1 && std::abs(x - xs) < half_gap) ? 1.0 : 0.0;
            });
        }
        return FeatureMap("state_onehot_action1", std::move(fs));
    }

    static FeatureMap by_name(const std::string& name, const StateGrid& grid) {
        if (name == "cyber2") return cyber2();
        if (name == "action1_bias") return action1_bias();
        if (name == "state_onehot_action1") return state_onehot_action1(grid);
        throw std::invalid_argument("FeatureMap: unknown catalog entry '" + name + "'");
    }

private:
    std::string name_;
    std::vector<Feature> features_;
};

// Softmax of h(x, a, theta) over the action set.
inline std::vector<double> boltzmann_probs(const PolicyParams& theta,
                                           const FeatureMap& fmap,
                                           const ActionSet& actions, double x) {
    if (!theta.finite())
        throw std::invalid_argument("invalid policy parameters");
    if (theta.dim() != fmap.dim())
        throw std::invalid_argument("boltzmann_probs: theta dim != feature dim");
    std::vector<double> h(static_cast<std::size_t>(actions.size()));
    for (int k = 0; k < actions.size(); ++k) {
        std::vector<double> f = fmap.eval(x, actions.at(k));
        double s = 0.0;
        for (int i = 0; i < theta.dim(); ++i)
            s += theta.theta[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)];
        h[static_cast<std::size_t>(k)] = s;
    }
    double hmax = h[0];
    for (double v : h) hmax = std::max(hmax, v);
    double zsum = 0.0;
    std::vector<double> p(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
        p[k] = std::exp(h[k] - hmax);
        zsum += p[k];
    }
    for (double& v : p) v /= zsum;
    return p;
}

// Score function for the Boltzmann class:
// grad log pi(a|x) = f(x,a) - sum_b pi(b|x) f(x,b).
inline std::vector<double> grad_log_policy(const PolicyParams& theta,
                                           const FeatureMap& fmap,
                                           const ActionSet& actions, double x,
                                           int action) {
    int k_taken = actions.index_of(action);  // throws if not in set
    std::vector<double> probs = boltzmann_probs(theta, fmap, actions, x);
    std::vector<double> g = fmap.eval(x, actions.at(k_taken));
    for (int k = 0; k < actions.size(); ++k) {
        std::vector<double> f = fmap.eval(x, actions.at(k));
        for (int i = 0; i < fmap.dim(); ++i)
            g[static_cast<std::size_t>(i)] -=
                probs[static_cast<std::size_t>(k)] * f[static_cast<std::size_t>(i)];
    }
    return g;
}

// Explicit action distribution per grid state.
struct TabularPolicy {
    StateGrid grid;
    ActionSet actions;
    std::vector<std::vector<double>> probs;  // [state][action index]

    TabularPolicy() = default;
    TabularPolicy(StateGrid g, ActionSet a)
        : grid(g), actions(std::move(a)),
          probs(static_cast<std::size_t>(g.size()),
                std::vector<double>(static_cast<std::size_t>(actions.size()), 0.0)) {}

    const std::vector<double>& at(int state_index) const {
        return probs[static_cast<std::size_t>(state_index)];
    }
};

inline TabularPolicy tabulate_boltzmann(const PolicyParams& theta,
                                        const FeatureMap& fmap,
                                        const ActionSet& actions,
                                        const StateGrid& grid) {
    TabularPolicy pi(grid, actions);
    for (int s = 0; s < grid.size(); ++s)
        pi.probs[static_cast<std::size_t>(s)] =
            boltzmann_probs(theta, fmap, actions, grid.value(s));
    return pi;
}

// D(pi, pi') = sup over grid states of W1 between the action distributions.
inline double policy_distance(const TabularPolicy& a, const TabularPolicy& b) {
    if (!(a.grid == b.grid) || a.actions.actions != b.actions.actions)
        throw std::invalid_argument("policy_distance: incompatible policies");
    double d = 0.0;
    for (int s = 0; s < a.grid.size(); ++s)
        d = std::max(d, w1_actions(a.actions, a.at(s), b.at(s)));
    return d;
}

inline double policy_distance(const PolicyParams& ta, const PolicyParams& tb,
                              const FeatureMap& fmap, const ActionSet& actions,
                              const StateGrid& grid) {
    return policy_distance(tabulate_boltzmann(ta, fmap, actions, grid),
                           tabulate_boltzmann(tb, fmap, actions, grid));
}

}  // namespace mfg
