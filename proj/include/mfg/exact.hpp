#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/detail/linalg.hpp"
#include "mfg/env.hpp"
#include "mfg/policy.hpp"

namespace mfg {

struct ValueTable {
    int type_index = 0;
    std::vector<double> values;                 // V per state
    std::vector<std::vector<double>> qvalues;   // [state][action index]
};

enum class SolveStatus { converged, cap_exhausted };

inline const char* to_string(SolveStatus s) {
    return s == SolveStatus::converged ? "converged" : "cap_exhausted";
}

// Stationary profile: per-type policies and populations plus the residual of
// the last consistency check. thetas is filled by the gradient learner only.
struct EquilibriumProfile {
    std::vector<TabularPolicy> policies;
    Populations populations;
    double residual = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::converged;
    std::vector<PolicyParams> thetas;
};

// d2 and d3 come from closed forms; the _hat values are empirical estimates
// over the sampled population profiles and are only as good as the sample.
struct ContractionReport {
    double c1_hat = 0.0;
    double c2_hat = 0.0;
    double d1_hat = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
    bool contracts = false;

    double d() const { return d1_hat * d2 + d3; }
};

struct ExactOptions {
    double value_tol = 1e-10;
    double soften_tau = 0.0;  // 0 = greedy; > 0 = softmax(Q/tau) policies
    int threads = 1;
};

struct ExactTraceRow {
    int outer_iter = 0;
    double residual = 0.0;
    std::vector<double> means;
};

struct ExactResult {
    EquilibriumProfile profile;
    std::vector<ExactTraceRow> trace;
    std::vector<Populations> iterates;  // z_0, z_1, ..., fuels the diagnostics
};

namespace detail {

struct FrozenMdp {
    std::vector<std::vector<std::vector<double>>> rows;  // [state][action][state']
    std::vector<std::vector<double>> rewards;            // [state][action]
};

inline FrozenMdp freeze(const GameModel& m, int j, const Populations& z) {
    const StateGrid& grid = m.grid(j);
    const ActionSet& acts = m.actions(j);
    FrozenMdp f;
    f.rows.resize(static_cast<std::size_t>(grid.size()));
    f.rewards.resize(static_cast<std::size_t>(grid.size()));
    for (int x = 0; x < grid.size(); ++x) {
        auto& rx = f.rows[static_cast<std::size_t>(x)];
        auto& cx = f.rewards[static_cast<std::size_t>(x)];
        rx.resize(static_cast<std::size_t>(acts.size()));
        cx.resize(static_cast<std::size_t>(acts.size()));
        for (int a = 0; a < acts.size(); ++a) {
            rx[static_cast<std::size_t>(a)] = m.transition_row(j, x, a, z);
            cx[static_cast<std::size_t>(a)] = m.reward(j, x, a, z);
        }
    }
    return f;
}

inline std::vector<double> greedy_row(const std::vector<double>& q, double tau) {
    std::vector<double> p(q.size(), 0.0);
    if (tau > 0.0) {
        double qmax = *std::max_element(q.begin(), q.end());
        double sum = 0.0;
        for (std::size_t a = 0; a < q.size(); ++a) {
            p[a] = std::exp((q[a] - qmax) / tau);
            sum += p[a];
        }
        for (double& v : p) v /= sum;
        return p;
    }
    double qmax = *std::max_element(q.begin(), q.end());
    for (std::size_t a = 0; a < q.size(); ++a)
        if (q[a] >= qmax - 1e-9) {  // ties resolve to the lowest action index
            p[a] = 1.0;
            return p;
        }
    return p;
}

}  // namespace detail

// Value iteration on the type-j MDP with populations frozen at z. The stop
// rule sup|dV| < tol(1-gamma)/(2 gamma) makes the values tol-accurate; the
// returned policy is greedy (lowest index on ties) or softened when tau > 0.
inline std::pair<ValueTable, TabularPolicy> best_response(const GameModel& m, int j,
                                                          const Populations& z,
                                                          double tol,
                                                          double soften_tau = 0.0) {
    if (!(tol > 0.0)) throw std::invalid_argument("best_response: tol must be > 0");
    const StateGrid& grid = m.grid(j);
    const ActionSet& acts = m.actions(j);
    detail::FrozenMdp f = detail::freeze(m, j, z);
    double gamma = m.gamma().gamma;
    double stop = tol * (1.0 - gamma) / (2.0 * gamma);

    std::vector<double> v(static_cast<std::size_t>(grid.size()), 0.0);
    std::vector<std::vector<double>> q(
        static_cast<std::size_t>(grid.size()),
        std::vector<double>(static_cast<std::size_t>(acts.size()), 0.0));
    for (long iter = 0; iter < 5000000; ++iter) {
        double delta = 0.0;
        std::vector<double> vn(v.size());
        for (int x = 0; x < grid.size(); ++x) {
            double best = -1e300;
            for (int a = 0; a < acts.size(); ++a) {
                const std::vector<double>& row =
                    f.rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
                double ev = 0.0;
                for (std::size_t i = 0; i < row.size(); ++i) ev += row[i] * v[i];
                double qv = f.rewards[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)] +
                            gamma * ev;
                q[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)] = qv;
                best = std::max(best, qv);
            }
            vn[static_cast<std::size_t>(x)] = best;
            delta = std::max(delta, std::abs(best - v[static_cast<std::size_t>(x)]));
        }
        v = std::move(vn);
        if (delta < stop) break;
        if (iter + 1 == 5000000)
            throw std::runtime_error("best_response: value iteration failed to converge");
    }

    ValueTable vt;
    vt.type_index = j;
    vt.values = v;
    vt.qvalues = q;
    TabularPolicy pi(grid, acts);
    for (int x = 0; x < grid.size(); ++x)
        pi.probs[static_cast<std::size_t>(x)] =
            detail::greedy_row(q[static_cast<std::size_t>(x)], soften_tau);
    return {std::move(vt), std::move(pi)};
}

// V for a fixed policy via the linear system (I - gamma P_pi) V = r_pi.
inline std::vector<double> policy_evaluation(const GameModel& m, int j,
                                             const TabularPolicy& pi,
                                             const Populations& z) {
    const StateGrid& grid = m.grid(j);
    const ActionSet& acts = m.actions(j);
    if (static_cast<int>(pi.probs.size()) != grid.size())
        throw std::invalid_argument("policy_evaluation: policy not defined on all states");
    detail::FrozenMdp f = detail::freeze(m, j, z);
    double gamma = m.gamma().gamma;
    std::size_t ns = static_cast<std::size_t>(grid.size());
    std::vector<std::vector<double>> a(ns, std::vector<double>(ns, 0.0));
    std::vector<double> b(ns, 0.0);
    for (std::size_t x = 0; x < ns; ++x) {
        a[x][x] = 1.0;
        for (int k = 0; k < acts.size(); ++k) {
            double pk = pi.probs[x][static_cast<std::size_t>(k)];
            if (pk == 0.0) continue;
            b[x] += pk * f.rewards[x][static_cast<std::size_t>(k)];
            const std::vector<double>& row = f.rows[x][static_cast<std::size_t>(k)];
            for (std::size_t y = 0; y < ns; ++y) a[x][y] -= gamma * pk * row[y];
        }
    }
    return detail::solve_linear(std::move(a), std::move(b));
}

// Q(x,a) = r(x,a,z) + gamma * E_row[V].
inline std::vector<std::vector<double>> q_from_values(const GameModel& m, int j,
                                                      const std::vector<double>& v,
                                                      const Populations& z) {
    const StateGrid& grid = m.grid(j);
    const ActionSet& acts = m.actions(j);
    double gamma = m.gamma().gamma;
    std::vector<std::vector<double>> q(
        static_cast<std::size_t>(grid.size()),
        std::vector<double>(static_cast<std::size_t>(acts.size()), 0.0));
    for (int x = 0; x < grid.size(); ++x)
        for (int a = 0; a < acts.size(); ++a) {
            std::vector<double> row = m.transition_row(j, x, a, z);
            double ev = 0.0;
            for (std::size_t i = 0; i < row.size(); ++i) ev += row[i] * v[i];
            q[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)] =
                m.reward(j, x, a, z) + gamma * ev;
        }
    return q;
}

// One step of the population-consistency map for type j:
// z'(x') = sum_x sum_a tau(x'|x,a,z) pi(a|x) z_j(x).
inline PopulationDistribution population_step(const GameModel& m, int j,
                                              const TabularPolicy& pi,
                                              const Populations& z) {
    const StateGrid& grid = m.grid(j);
    const ActionSet& acts = m.actions(j);
    if (static_cast<int>(pi.probs.size()) != grid.size())
        throw std::invalid_argument("population_step: policy not defined on all states");
    const PopulationDistribution& zj = z[static_cast<std::size_t>(j)];
    std::vector<double> out(static_cast<std::size_t>(grid.size()), 0.0);
    for (int x = 0; x < grid.size(); ++x) {
        double mass = zj.mass[static_cast<std::size_t>(x)];
        if (mass == 0.0) continue;
        for (int a = 0; a < acts.size(); ++a) {
            double pa = pi.probs[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
            if (pa == 0.0) continue;
            std::vector<double> row = m.transition_row(j, x, a, z);
            double w = mass * pa;
            for (std::size_t y = 0; y < row.size(); ++y) out[y] += w * row[y];
        }
    }
    double sum = 0.0;
    for (double v : out) sum += v;
    if (std::abs(sum - 1.0) > 1e-10)
        throw std::runtime_error("population_step: output left the simplex");
    for (double& v : out) v /= sum;
    return PopulationDistribution(grid, std::move(out));
}

// Full map Gamma: best responses per type at z, then the population step per
// type, population arguments kept at the pre-response z.
inline std::pair<Populations, std::vector<TabularPolicy>> gamma_map(
    const GameModel& m, const Populations& z, double tol, double soften_tau = 0.0,
    int threads = 1) {
    int nj = m.num_types();
    std::vector<TabularPolicy> pols(static_cast<std::size_t>(nj));
    if (threads > 1 && nj > 1) {
        std::vector<std::exception_ptr> errs(static_cast<std::size_t>(nj));
        std::vector<std::thread> pool;
        for (int j = 0; j < nj; ++j)
            pool.emplace_back([&, j] {
                try {
                    pols[static_cast<std::size_t>(j)] =
                        best_response(m, j, z, tol, soften_tau).second;
                } catch (...) {
                    errs[static_cast<std::size_t>(j)] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    } else {
        for (int j = 0; j < nj; ++j)
            pols[static_cast<std::size_t>(j)] = best_response(m, j, z, tol, soften_tau).second;
    }
    Populations next;
    next.reserve(static_cast<std::size_t>(nj));
    for (int j = 0; j < nj; ++j)
        next.push_back(population_step(m, j, pols[static_cast<std::size_t>(j)], z));
    return {std::move(next), std::move(pols)};
}

// Fixed-point iteration z <- Gamma(z) until joint_w1(z, Gamma(z)) < eps.
// Cap exhaustion is a flagged status, not an error.
inline ExactResult solve_fixed_point(const GameModel& m, const Populations& z0,
                                     double eps, int max_outer,
                                     const ExactOptions& opt = {}) {
    if (!(eps > 0.0)) throw std::invalid_argument("solve_fixed_point: eps must be > 0");
    if (max_outer < 1) throw std::invalid_argument("solve_fixed_point: max_outer must be >= 1");
    ExactResult res;
    Populations z = z0;
    res.iterates.push_back(z);
    for (int it = 1; it <= max_outer; ++it) {
        auto [znext, pols] = gamma_map(m, z, opt.value_tol, opt.soften_tau, opt.threads);
        double residual = joint_w1(z, znext);
        res.trace.push_back({it, residual, population_means(znext)});
        res.iterates.push_back(znext);
        res.profile.policies = std::move(pols);
        res.profile.populations = znext;
        res.profile.residual = residual;
        res.profile.iterations = it;
        if (residual < eps) {
            res.profile.status = SolveStatus::converged;
            return res;
        }
        z = std::move(znext);
    }
    res.profile.status = SolveStatus::cap_exhausted;
    return res;
}

// Empirical contraction diagnostics over sampled population profiles. c1 and
// the Lipschitz estimates scan every unordered pair; d2, d3 use the closed
// forms with the states embedded in [0,1].
inline ContractionReport lemma1_constants(const GameModel& m,
                                          const std::vector<Populations>& zsamples,
                                          double value_tol = 1e-10,
                                          double soften_tau = 0.0) {
    if (zsamples.empty())
        throw std::invalid_argument("lemma1_constants: no population samples");
    int nj = m.num_types();

    ContractionReport rep;
    for (const Populations& z : zsamples)
        for (int j = 0; j < nj; ++j)
            for (int x = 0; x < m.grid(j).size(); ++x)
                for (int a = 0; a < m.actions(j).size(); ++a)
                    for (double p : m.transition_row(j, x, a, z))
                        rep.c1_hat = std::max(rep.c1_hat, p);

    std::vector<std::vector<TabularPolicy>> brs(zsamples.size());
    for (std::size_t s = 0; s < zsamples.size(); ++s)
        for (int j = 0; j < nj; ++j)
            brs[s].push_back(best_response(m, j, zsamples[s], value_tol, soften_tau).second);

    bool any_pair = false;
    for (std::size_t s = 0; s < zsamples.size(); ++s)
        for (std::size_t t = s + 1; t < zsamples.size(); ++t) {
            double dz = joint_w1(zsamples[s], zsamples[t]);
            if (dz < 1e-15) continue;
            any_pair = true;
            for (int j = 0; j < nj; ++j) {
                for (int x = 0; x < m.grid(j).size(); ++x)
                    for (int a = 0; a < m.actions(j).size(); ++a) {
                        std::vector<double> rs = m.transition_row(j, x, a, zsamples[s]);
                        std::vector<double> rt = m.transition_row(j, x, a, zsamples[t]);
                        for (std::size_t i = 0; i < rs.size(); ++i)
                            rep.c2_hat = std::max(rep.c2_hat, std::abs(rs[i] - rt[i]) / dz);
                    }
                double dpol = policy_distance(brs[s][static_cast<std::size_t>(j)],
                                              brs[t][static_cast<std::size_t>(j)]);
                rep.d1_hat = std::max(rep.d1_hat, dpol / dz);
            }
        }
    if (!any_pair) throw std::runtime_error("degenerate sample");

    double max_diam = 0.0;
    int max_states = 0;
    double min_gap = 1e300;
    for (int j = 0; j < nj; ++j) {
        const StateGrid& g = m.grid(j);
        max_diam = std::max(max_diam, g.value(g.size() - 1) - g.value(0));
        max_states = std::max(max_states, g.size());
        min_gap = std::min(min_gap, static_cast<double>(m.actions(j).min_gap()));
    }
    rep.d2 = max_diam * max_states * rep.c1_hat / min_gap;
    rep.d3 = max_diam * rep.c2_hat / 2.0;
    rep.contracts = rep.d() < 1.0;
    return rep;
}

// Population-profile sample set for the diagnostics: run iterates plus, per
// type, one adjacent mass shift of the last profile so single-type pairs with
// |mean difference| equal to W1 are present.
inline std::vector<Populations> default_zsamples(const GameModel& m,
                                                 const std::vector<Populations>& iterates) {
    if (iterates.empty())
        throw std::invalid_argument("default_zsamples: no iterates");
    std::vector<Populations> out;
    for (const Populations& z : iterates) {
        bool dup = false;
        for (const Populations& seen : out)
            if (joint_w1(seen, z) < 1e-15) { dup = true; break; }
        if (!dup) out.push_back(z);
        if (out.size() >= 8) break;
    }
    const Populations& last = iterates.back();
    for (int j = 0; j < m.num_types(); ++j) {
        Populations pert = last;
        std::vector<double> mass = pert[static_cast<std::size_t>(j)].mass;
        std::size_t imax = 0;
        for (std::size_t i = 1; i < mass.size(); ++i)
            if (mass[i] > mass[imax]) imax = i;
        double delta = std::min(0.05, mass[imax]);
        std::size_t dst = imax + 1 < mass.size() ? imax + 1 : imax - 1;
        mass[imax] -= delta;
        mass[dst] += delta;
        pert[static_cast<std::size_t>(j)] =
            PopulationDistribution(m.grid(j), std::move(mass));
        out.push_back(std::move(pert));
    }
    return out;
}

}  // namespace mfg
