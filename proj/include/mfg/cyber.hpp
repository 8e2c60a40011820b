#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/env.hpp"

namespace mfg {

// Two-type security game on the grid {0, 1/n, ..., 1}: type 0 defends, type 1
// attacks. The state is the compromised (resp. penetrated) fraction. Action 0
// resets it to zero at a flat cost; action 1 lets it drift upward uniformly.
// Types interact only through the gap between the population means.
struct CyberParams {
    int n = 10;
    double g1 = 0.2;
    double g2 = 0.1;
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double gamma = 0.9;
    // Calibration factor on the damage terms (which are measured in grid
    // steps). With the defaults the effective own-damage slope is
    // damage_scale*g1 = 0.06 per step, which puts the reset/drift switch of
    // the discounted tradeoff mid-grid: drifting stays optimal at states
    // <= 0.4 and resetting takes over at >= 0.5. Much below ~0.25 drifting
    // dominates everywhere; much above ~0.35 resetting does, and the
    // threshold structure this game is built around disappears.
    double damage_scale = 0.3;

    void validate() const {
        if (n < 1) throw std::invalid_argument("CyberParams: n must be >= 1");
        if (g1 < 0 || g2 < 0 || lambda1 < 0 || lambda2 < 0)
            throw std::invalid_argument("CyberParams: coefficients must be >= 0");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("CyberParams: gamma must lie in (0,1)");
        if (!(damage_scale > 0.0))
            throw std::invalid_argument("CyberParams: damage_scale must be > 0");
    }

    double r_max() const {
        return damage_scale * (g1 * n + g2 * n * n) + std::max(lambda1, lambda2);
    }
};

// Action 0: point mass at state 0. Action 1: uniform over {x, x+1/n, ..., 1}.
// Identical for both types; independent of the populations.
inline std::vector<double> cyber_transition(int /*type_index*/, int x, int a,
                                            const Populations& /*z*/,
                                            const CyberParams& p) {
    std::vector<double> row(static_cast<std::size_t>(p.n + 1), 0.0);
    if (a == 0) {
        row[0] = 1.0;
    } else {
        int count = p.n - x + 1;
        double mass = 1.0 / count;
        for (int i = x; i <= p.n; ++i) row[static_cast<std::size_t>(i)] = mass;
    }
    return row;
}

// Per-period cost: state damage, a penalty when ahead-of-the-other-type mean
// pressure applies, and a flat charge for playing action 0. State and mean
// gap enter in grid steps, scaled by damage_scale (see CyberParams).
inline double cyber_reward(int type_index, int x, int a, const Populations& z,
                           const CyberParams& p) {
    double steps = static_cast<double>(x);
    double own = p.n * z[static_cast<std::size_t>(type_index)].mean();
    double other = p.n * z[static_cast<std::size_t>(1 - type_index)].mean();
    double pressure = std::max(own - other, 0.0);
    double cost_flat = (type_index == 0 ? p.lambda1 : p.lambda2);
    return -p.damage_scale * (p.g1 * steps + p.g2 * steps * pressure) -
           (a == 0 ? cost_flat : 0.0);
}

inline GameModel make_cyber_env(const CyberParams& p = CyberParams{}) {
    p.validate();
    std::vector<TypeModel> types;
    for (int j = 0; j < 2; ++j) {
        TypeModel t;
        t.grid = StateGrid(p.n);
        t.actions = ActionSet({0, 1});
        t.transition = [j, p](int x, int a, const Populations& z) {
            return cyber_transition(j, x, a, z, p);
        };
        t.reward = [j, p](int x, int a, const Populations& z) {
            return cyber_reward(j, x, a, z, p);
        };
        int n = p.n;
        t.sampler = [n](int x, int a, const Populations&, double u) {
            if (a == 0) return 0;
            int count = n - x + 1;
            int k = static_cast<int>(u * count);
            if (k >= count) k = count - 1;
            return x + k;
        };
        types.push_back(std::move(t));
    }
    return GameModel("cyber", std::move(types), DiscountFactor(p.gamma), p.r_max());
}

}  // namespace mfg
