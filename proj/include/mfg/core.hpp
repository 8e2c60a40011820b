#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfg {

// Evenly spaced state grid {0, 1/n, ..., 1}. States are addressed by index;
// value(i) maps to the scalar state in [0, 1].
struct StateGrid {
    int n = 1;  // number of subdivisions; n+1 grid points

    StateGrid() = default;
    explicit StateGrid(int subdivisions) : n(subdivisions) {
        if (n < 1) throw std::invalid_argument("StateGrid: n must be >= 1");
    }

    int size() const { return n + 1; }
    double value(int i) const { return static_cast<double>(i) / n; }
    double spacing() const { return 1.0 / n; }

    std::vector<double> points() const {
        std::vector<double> p(size());
        for (int i = 0; i < size(); ++i) p[i] = value(i);
        return p;
    }

    friend bool operator==(const StateGrid& a, const StateGrid& b) {
        return a.n == b.n;
    }
};

// Discrete ordered action set coded as integers. The gap between the two
// closest actions feeds the contraction constants.
struct ActionSet {
    std::vector<int> actions;

    ActionSet() = default;
    explicit ActionSet(std::vector<int> a) : actions(std::move(a)) {
        if (actions.empty()) throw std::invalid_argument("ActionSet: empty");
        for (std::size_t i = 0; i + 1 < actions.size(); ++i)
            if (actions[i] >= actions[i + 1])
                throw std::invalid_argument("ActionSet: actions must be strictly increasing");
    }

    int size() const { return static_cast<int>(actions.size()); }
    int at(int k) const { return actions[static_cast<std::size_t>(k)]; }

    int index_of(int action) const {
        for (int k = 0; k < size(); ++k)
            if (actions[static_cast<std::size_t>(k)] == action) return k;
        throw std::invalid_argument("ActionSet: action " + std::to_string(action) +
                                    " not in set");
    }

    // Smallest gap between distinct actions; 1 for a singleton set.
    double min_gap() const {
        if (size() < 2) return 1.0;
        double g = std::numeric_limits<double>::infinity();
        for (int k = 0; k + 1 < size(); ++k)
            g = std::min(g, static_cast<double>(actions[k + 1] - actions[k]));
        return g;
    }
};

struct DiscountFactor {
    double gamma = 0.9;

    DiscountFactor() = default;
    explicit DiscountFactor(double g) : gamma(g) {
        if (!(g > 0.0 && g < 1.0))
            throw std::invalid_argument("DiscountFactor: gamma must be in (0,1)");
    }
};

// Probability vector over one type's state grid.
struct PopulationDistribution {
    StateGrid grid;
    std::vector<double> mass;

    PopulationDistribution() = default;
    PopulationDistribution(StateGrid g, std::vector<double> m)
        : grid(g), mass(std::move(m)) {
        validate();
    }

    static PopulationDistribution uniform(StateGrid g) {
        std::vector<double> m(static_cast<std::size_t>(g.size()),
                              1.0 / g.size());
        return PopulationDistribution(g, std::move(m));
    }

    static PopulationDistribution point_mass(StateGrid g, int state_index) {
        if (state_index < 0 || state_index >= g.size())
            throw std::invalid_argument("point_mass: state index out of range");
        std::vector<double> m(static_cast<std::size_t>(g.size()), 0.0);
        m[static_cast<std::size_t>(state_index)] = 1.0;
        return PopulationDistribution(g, std::move(m));
    }

    void validate() const {
        if (static_cast<int>(mass.size()) != grid.size())
            throw std::invalid_argument("PopulationDistribution: length != n+1");
        double sum = 0.0;
        for (double m : mass) {
            if (!(m >= 0.0))
                throw std::invalid_argument("PopulationDistribution: negative mass");
            sum += m;
        }
        if (std::abs(sum - 1.0) > 1e-12 * std::max(1.0, sum) + 1e-12)
            throw std::invalid_argument("PopulationDistribution: mass does not sum to 1");
    }

    // E[x] with states embedded in [0, 1].
    double mean() const {
        double s = 0.0;
        for (int i = 0; i < grid.size(); ++i)
            s += grid.value(i) * mass[static_cast<std::size_t>(i)];
        return s;
    }
};

// W1 on the line via the CDF formula: spacing * sum_k |F_p(k) - F_q(k)|.
inline double w1_distance(const PopulationDistribution& p,
                          const PopulationDistribution& q) {
    if (!(p.grid == q.grid))
        throw std::invalid_argument("w1_distance: grid mismatch");
    double cdf_diff = 0.0, acc = 0.0;
    for (int k = 0; k < p.grid.size() - 1; ++k) {
        cdf_diff += p.mass[static_cast<std::size_t>(k)] -
                    q.mass[static_cast<std::size_t>(k)];
        acc += std::abs(cdf_diff);
    }
    return acc * p.grid.spacing();
}

// Joint metric over type tuples: sum of per-type W1 distances.
inline double joint_w1(const std::vector<PopulationDistribution>& zs,
                       const std::vector<PopulationDistribution>& ws) {
    if (zs.size() != ws.size())
        throw std::invalid_argument("joint_w1: type count mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < zs.size(); ++j) s += w1_distance(zs[j], ws[j]);
    return s;
}

// W1 between two distributions over the same ordered action set, ground
// metric |a - a'|.
inline double w1_actions(const ActionSet& actions, const std::vector<double>& p,
                         const std::vector<double>& q) {
    if (static_cast<int>(p.size()) != actions.size() ||
        static_cast<int>(q.size()) != actions.size())
        throw std::invalid_argument("w1_actions: length mismatch");
    double cdf_diff = 0.0, acc = 0.0;
    for (int k = 0; k + 1 < actions.size(); ++k) {
        cdf_diff += p[static_cast<std::size_t>(k)] - q[static_cast<std::size_t>(k)];
        acc += std::abs(cdf_diff) *
               static_cast<double>(actions.at(k + 1) - actions.at(k));
    }
    return acc;
}

}  // namespace mfg
