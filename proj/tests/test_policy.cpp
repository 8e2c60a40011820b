#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfg/policy.hpp"
#include "mfg/rng.hpp"

using namespace mfg;

TEST_CASE("zero weights give the uniform policy") {
    ActionSet acts({0, 1});
    auto fmap = FeatureMap::cyber2();
    auto theta = PolicyParams::zeros(fmap.dim(), 0);
    for (double x : {0.0, 0.3, 1.0}) {
        auto p = boltzmann_probs(theta, fmap, acts, x);
        REQUIRE(p[0] == Catch::Approx(0.5));
        REQUIRE(p[1] == Catch::Approx(0.5));
    }
}

TEST_CASE("two-feature logit matches its closed form") {
    ActionSet acts({0, 1});
    auto fmap = FeatureMap::cyber2();
    PolicyParams theta({1.5, -0.8}, 0);
    for (double x : {0.0, 0.25, 0.6, 1.0}) {
        double logit = 1.5 * x + (-0.8) * (1.0 - x);
        double p0 = 1.0 / (1.0 + std::exp(logit));
        auto p = boltzmann_probs(theta, fmap, acts, x);
        REQUIRE(p[0] == Catch::Approx(p0).epsilon(1e-12));
        REQUIRE(p[0] + p[1] == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("large weights saturate without overflow") {
    ActionSet acts({0, 1});
    auto fmap = FeatureMap::action1_bias();
    PolicyParams hot({800.0}, 0);
    auto p = boltzmann_probs(hot, fmap, acts, 0.5);
    REQUIRE(p[1] == Catch::Approx(1.0));
    REQUIRE(p[0] >= 0.0);
    PolicyParams cold({-800.0}, 0);
    auto q = boltzmann_probs(cold, fmap, acts, 0.5);
    REQUIRE(q[0] == Catch::Approx(1.0));
}

TEST_CASE("non-finite weights are rejected") {
    ActionSet acts({0, 1});
    auto fmap = FeatureMap::action1_bias();
    PolicyParams bad({std::nan("")}, 0);
    REQUIRE_THROWS_WITH(boltzmann_probs(bad, fmap, acts, 0.0),
                        Catch::Matchers::ContainsSubstring("invalid policy parameters"));
    PolicyParams inf({std::numeric_limits<double>::infinity()}, 0);
    REQUIRE_THROWS_AS(boltzmann_probs(inf, fmap, acts, 0.0),
                      std::invalid_argument);
    // dimension mismatch is also a construction error
    PolicyParams wrong({0.1, 0.2}, 0);
    REQUIRE_THROWS_AS(boltzmann_probs(wrong, fmap, acts, 0.0),
                      std::invalid_argument);
}

TEST_CASE("score function matches finite differences of log pi") {
    ActionSet acts({0, 1});
    StateGrid grid(5);
    Rng rng(31);
    auto check = [&](const FeatureMap& fmap) {
        for (int trial = 0; trial < 40; ++trial) {
            std::vector<double> t(static_cast<std::size_t>(fmap.dim()));
            for (auto& v : t) v = 2.0 * rng.uniform01() - 1.0;
            PolicyParams theta(t, 0);
            double x = grid.value(static_cast<int>(rng.uniform01() * grid.size()) % grid.size());
            int k = rng.uniform01() < 0.5 ? 0 : 1;
            int a = acts.at(k);

            auto g = grad_log_policy(theta, fmap, acts, x, a);
            double eps = 1e-5;
            for (int i = 0; i < fmap.dim(); ++i) {
                PolicyParams up = theta, dn = theta;
                up.theta[static_cast<std::size_t>(i)] += eps;
                dn.theta[static_cast<std::size_t>(i)] -= eps;
                double lp_up = std::log(
                    boltzmann_probs(up, fmap, acts, x)[static_cast<std::size_t>(k)]);
                double lp_dn = std::log(
                    boltzmann_probs(dn, fmap, acts, x)[static_cast<std::size_t>(k)]);
                double fd = (lp_up - lp_dn) / (2.0 * eps);
                REQUIRE(g[static_cast<std::size_t>(i)] == Catch::Approx(fd).margin(1e-6));
            }
        }
    };
    check(FeatureMap::cyber2());
    check(FeatureMap::state_onehot_action1(grid));
}

TEST_CASE("score function averages to zero under the policy") {
    ActionSet acts({0, 1});
    auto fmap = FeatureMap::cyber2();
    PolicyParams theta({0.7, -1.2}, 0);
    for (double x : {0.0, 0.4, 1.0}) {
        auto probs = boltzmann_probs(theta, fmap, acts, x);
        std::vector<double> avg(static_cast<std::size_t>(fmap.dim()), 0.0);
        for (int k = 0; k < acts.size(); ++k) {
            auto g = grad_log_policy(theta, fmap, acts, x, acts.at(k));
            for (int i = 0; i < fmap.dim(); ++i)
                avg[static_cast<std::size_t>(i)] +=
                    probs[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(i)];
        }
        for (double v : avg) REQUIRE(std::abs(v) < 1e-12);
    }
    REQUIRE_THROWS_AS(grad_log_policy(theta, fmap, acts, 0.5, 9),
                      std::invalid_argument);
}

TEST_CASE("one-hot state features pick out exactly one grid point") {
    StateGrid grid(4);
    auto fmap = FeatureMap::state_onehot_action1(grid);
    REQUIRE(fmap.dim() == grid.size());
    for (int s = 0; s < grid.size(); ++s) {
        auto f1 = fmap.eval(grid.value(s), 1);
        auto f0 = fmap.eval(grid.value(s), 0);
        for (int i = 0; i < fmap.dim(); ++i) {
            REQUIRE(f1[static_cast<std::size_t>(i)] == (i == s ? 1.0 : 0.0));
            REQUIRE(f0[static_cast<std::size_t>(i)] == 0.0);
        }
    }
    // per-state weights act independently
    ActionSet acts({0, 1});
    std::vector<double> t(static_cast<std::size_t>(grid.size()), 0.0);
    t[2] = 3.0;
    PolicyParams theta(t, 0);
    auto p_hit = boltzmann_probs(theta, fmap, acts, grid.value(2));
    auto p_miss = boltzmann_probs(theta, fmap, acts, grid.value(1));
    REQUIRE(p_hit[1] == Catch::Approx(1.0 / (1.0 + std::exp(-3.0))));
    REQUIRE(p_miss[1] == Catch::Approx(0.5));
}

TEST_CASE("feature catalog resolves names and rejects unknown ones") {
    StateGrid grid(3);
    REQUIRE(FeatureMap::by_name("cyber2", grid).dim() == 2);
    REQUIRE(FeatureMap::by_name("action1_bias", grid).dim() == 1);
    REQUIRE(FeatureMap::by_name("state_onehot_action1", grid).dim() == 4);
    REQUIRE_THROWS_AS(FeatureMap::by_name("nope", grid), std::invalid_argument);
}

TEST_CASE("policy distance is the worst-state action distance") {
    StateGrid grid(1);
    ActionSet acts({0, 1});
    TabularPolicy a(grid, acts), b(grid, acts);
    a.probs = {{1.0, 0.0}, {0.3, 0.7}};
    b.probs = {{0.0, 1.0}, {0.3, 0.7}};
    // states differ only at x=0, where the action gap is full
    REQUIRE(policy_distance(a, b) == Catch::Approx(1.0));

    b.probs = {{0.9, 0.1}, {0.1, 0.9}};
    REQUIRE(policy_distance(a, b) == Catch::Approx(0.2));

    TabularPolicy wrong(StateGrid(2), acts);
    REQUIRE_THROWS_AS(policy_distance(a, wrong), std::invalid_argument);
}

TEST_CASE("tabulation agrees with pointwise evaluation") {
    StateGrid grid(6);
    ActionSet acts({0, 1});
    auto fmap = FeatureMap::cyber2();
    PolicyParams theta({-2.0, 1.1}, 0);
    auto tab = tabulate_boltzmann(theta, fmap, acts, grid);
    for (int s = 0; s < grid.size(); ++s) {
        auto p = boltzmann_probs(theta, fmap, acts, grid.value(s));
        REQUIRE(tab.at(s)[0] == p[0]);
        REQUIRE(tab.at(s)[1] == p[1]);
    }
    // parameter overload matches tabular overload
    PolicyParams other({0.5, 0.5}, 0);
    double d1 = policy_distance(theta, other, fmap, acts, grid);
    double d2 = policy_distance(tab, tabulate_boltzmann(other, fmap, acts, grid));
    REQUIRE(d1 == d2);
}
