#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/env.hpp"
#include "mfg/exact.hpp"
#include "mfg/policy.hpp"
#include "mfg/rng.hpp"

namespace mfg {

// Sampling-only access to a GameModel: next states and rewards, no kernel.
class PopulationSimulator {
public:
    explicit PopulationSimulator(const GameModel& m) : model_(&m) {}

    int num_types() const { return model_->num_types(); }
    const StateGrid& grid(int j) const { return model_->grid(j); }
    const ActionSet& actions(int j) const { return model_->actions(j); }
    double gamma() const { return model_->gamma().gamma; }
    double r_max() const { return model_->r_max(); }
    const std::string& env_name() const { return model_->name(); }

    // Takes action index a at state index x; the reward is charged at the
    // pre-transition state.
    std::pair<int, double> sample_next(int j, int x, int a, const Populations& z,
                                       Rng& rng) const {
        double r = model_->reward(j, x, a, z);
        int xn = model_->sample_next_state(j, x, a, z, rng.uniform01());
        return {xn, r};
    }

    // Same draw as sample_next without evaluating the reward; consumes one
    // uniform, so streams line up with sample_next call for call.
    int sample_state(int j, int x, int a, const Populations& z, Rng& rng) const {
        return model_->sample_next_state(j, x, a, z, rng.uniform01());
    }

    double reward(int j, int x, int a, const Populations& z) const {
        return model_->reward(j, x, a, z);
    }

private:
    const GameModel* model_;
};

// alpha_k = scale * k^(-a_exponent); the exponent range keeps sum(alpha)
// divergent and sum(alpha^2) finite.
struct StepSchedule {
    double a_exponent = 0.7;
    double scale = 1.0;

    void validate() const {
        if (!(a_exponent > 0.5 && a_exponent < 1.0))
            throw std::invalid_argument("StepSchedule: a_exponent must lie in (1/2, 1)");
        if (!(scale > 0.0))
            throw std::invalid_argument("StepSchedule: scale must be > 0");
    }

    double alpha(long k) const {
        return scale * std::pow(static_cast<double>(k), -a_exponent);
    }
};

struct LearnerConfig {
    std::uint64_t seed = 1;
    std::vector<int> agents_per_type = {100, 100};
    double inner_tol = 1e-5;
    double outer_tol = 0.05;
    int max_inner = 5000;
    int max_outer = 50;
    int inner_patience = 10;
    int outer_patience = 1;
    StepSchedule schedule;
    bool warm_start = false;   // carry theta and the step index across outers
    double damping = 0.0;      // z <- (1-damping) z' + damping z
    std::string feature_map = "cyber2";
    int threads = 1;
    long trace_stride = 1;
    // Estimates averaged per update. 1 reproduces the plain single-sample
    // scheme; larger values cut the estimator variance by 1/batch_size, which
    // the saturating Boltzmann policies need to escape noise-dominated drift.
    int batch_size = 1;

    void validate(int num_types) const {
        if (static_cast<int>(agents_per_type.size()) != num_types)
            throw std::invalid_argument("LearnerConfig: agents_per_type size != type count");
        for (int n : agents_per_type)
            if (n < 1) throw std::invalid_argument("LearnerConfig: agent counts must be >= 1");
        if (!(inner_tol > 0.0) || !(outer_tol > 0.0))
            throw std::invalid_argument("LearnerConfig: tolerances must be > 0");
        if (max_inner < 1 || max_outer < 1)
            throw std::invalid_argument("LearnerConfig: iteration caps must be >= 1");
        if (inner_patience < 1 || outer_patience < 1)
            throw std::invalid_argument("LearnerConfig: patience must be >= 1");
        if (!(damping >= 0.0 && damping < 1.0))
            throw std::invalid_argument("LearnerConfig: damping must lie in [0,1)");
        if (threads < 1) throw std::invalid_argument("LearnerConfig: threads must be >= 1");
        if (trace_stride < 1) throw std::invalid_argument("LearnerConfig: trace_stride must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("LearnerConfig: batch_size must be >= 1");
        schedule.validate();
    }
};

namespace detail {

// Core of the Q estimator with the action distributions pre-tabulated.
inline double est_q_tab(const PopulationSimulator& sim, int j, int x0, int a0,
                        const TabularPolicy& tab, const Populations& z, Rng& rng) {
    double gamma = sim.gamma();
    double q = std::sqrt(gamma);
    long t_stop = rng.geometric(q);
    int x = x0;
    int a = a0;
    double qhat = 0.0;
    double w = 1.0;
    for (long t = 0;; ++t) {
        auto [xn, r] = sim.sample_next(j, x, a, z, rng);
        qhat += w * r;
        if (t == t_stop) break;
        w *= q;
        x = xn;
        a = rng.categorical(tab.probs[static_cast<std::size_t>(x)]);
    }
    return qhat;
}

}  // namespace detail

// Unbiased Q estimate: rollout of geometric length T with
// P(T=t) = (1-sqrt(gamma)) gamma^(t/2), rewards weighted by gamma^(t/2).
inline double est_q(const PopulationSimulator& sim, int j, int x0, int a0,
                    const PolicyParams& theta, const FeatureMap& fmap,
                    const Populations& z, Rng& rng) {
    TabularPolicy tab = tabulate_boltzmann(theta, fmap, sim.actions(j), sim.grid(j));
    return detail::est_q_tab(sim, j, x0, a0, tab, z, rng);
}

// Single-sample estimate of the policy gradient: start x0 ~ z_j, walk a
// Geometric(1-gamma) number of steps, then Qhat * grad log pi / (1-gamma) at
// the stopping state-action. Unbiased for exact_gradient.
inline std::vector<double> pg_gradient_sample(const PopulationSimulator& sim, int j,
                                              const PolicyParams& theta,
                                              const FeatureMap& fmap,
                                              const Populations& z, Rng& rng,
                                              double* qhat_out = nullptr) {
    const StateGrid& grid = sim.grid(j);
    const ActionSet& acts = sim.actions(j);
    TabularPolicy tab = tabulate_boltzmann(theta, fmap, acts, grid);
    int x = rng.categorical(z[static_cast<std::size_t>(j)].mass);
    int a = rng.categorical(tab.probs[static_cast<std::size_t>(x)]);
    long t_stop = rng.geometric(sim.gamma());
    for (long t = 0; t < t_stop; ++t) {
        x = sim.sample_next(j, x, a, z, rng).first;
        a = rng.categorical(tab.probs[static_cast<std::size_t>(x)]);
    }
    double qhat = detail::est_q_tab(sim, j, x, a, tab, z, rng);
    if (qhat_out) *qhat_out = qhat;
    std::vector<double> g =
        grad_log_policy(theta, fmap, acts, grid.value(x), acts.at(a));
    double s = qhat / (1.0 - sim.gamma());
    for (double& v : g) v *= s;
    return g;
}

// One stochastic-approximation update theta_{k+1} = theta_k + alpha_k * ghat.
inline PolicyParams pg_step(const PopulationSimulator& sim, int j,
                            const PolicyParams& theta, const FeatureMap& fmap,
                            const Populations& z, long k, const LearnerConfig& cfg,
                            Rng& rng, double* qhat_out = nullptr) {
    if (k < 1) throw std::invalid_argument("pg_step: k must be >= 1");
    std::vector<double> g = pg_gradient_sample(sim, j, theta, fmap, z, rng, qhat_out);
    double alpha = cfg.schedule.alpha(k);
    PolicyParams next = theta;
    for (std::size_t i = 0; i < g.size(); ++i) next.theta[i] += alpha * g[i];
    return next;
}

// Model-based gradient oracle: occupancy propagated through the kernel,
// Q from exact policy evaluation, truncated once the discounted tail is
// below 1e-8. Test use only.
inline std::vector<double> exact_gradient(const GameModel& model, int j,
                                          const PolicyParams& theta,
                                          const FeatureMap& fmap, const Populations& z,
                                          int horizon_truncation = -1) {
    if (!model.has_kernel())
        throw std::runtime_error("oracle requires full model");
    const StateGrid& grid = model.grid(j);
    const ActionSet& acts = model.actions(j);
    double gamma = model.gamma().gamma;

    int h = horizon_truncation;
    if (h < 0) {
        double tail = model.r_max() / (1.0 - gamma);
        h = 0;
        while (tail > 1e-8 && h < 100000) {
            tail *= gamma;
            ++h;
        }
    }

    TabularPolicy tab = tabulate_boltzmann(theta, fmap, acts, grid);
    std::vector<double> v = policy_evaluation(model, j, tab, z);
    std::vector<std::vector<double>> q = q_from_values(model, j, v, z);

    std::size_t ns = static_cast<std::size_t>(grid.size());
    std::vector<std::vector<double>> p_pi(ns, std::vector<double>(ns, 0.0));
    std::vector<std::vector<std::vector<double>>> grads(ns);
    for (std::size_t x = 0; x < ns; ++x) {
        grads[x].resize(static_cast<std::size_t>(acts.size()));
        for (int a = 0; a < acts.size(); ++a) {
            std::vector<double> row = model.transition_row(j, static_cast<int>(x), a, z);
            double pa = tab.probs[x][static_cast<std::size_t>(a)];
            for (std::size_t y = 0; y < ns; ++y) p_pi[x][y] += pa * row[y];
            grads[x][static_cast<std::size_t>(a)] = grad_log_policy(
                theta, fmap, acts, grid.value(static_cast<int>(x)), acts.at(a));
        }
    }

    std::vector<double> occ = z[static_cast<std::size_t>(j)].mass;
    std::vector<double> g(static_cast<std::size_t>(fmap.dim()), 0.0);
    double disc = 1.0;
    for (int t = 0;; ++t) {
        for (std::size_t x = 0; x < ns; ++x) {
            double wx = occ[x];
            if (wx == 0.0) continue;
            for (int a = 0; a < acts.size(); ++a) {
                double w = disc * wx * tab.probs[x][static_cast<std::size_t>(a)] *
                           q[x][static_cast<std::size_t>(a)];
                if (w == 0.0) continue;
                const std::vector<double>& gl = grads[x][static_cast<std::size_t>(a)];
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * gl[i];
            }
        }
        if (t == h) break;
        std::vector<double> next(ns, 0.0);
        for (std::size_t x = 0; x < ns; ++x) {
            if (occ[x] == 0.0) continue;
            for (std::size_t y = 0; y < ns; ++y) next[y] += occ[x] * p_pi[x][y];
        }
        occ = std::move(next);
        disc *= gamma;
    }
    return g;
}

// One synchronous step of the mean-field flow with N_j simulated agents per
// type: each agent is drawn from z_j, acts once, and lands in the empirical
// next-state histogram.
inline Populations empirical_population_update(const PopulationSimulator& sim,
                                               const std::vector<PolicyParams>& thetas,
                                               const std::vector<FeatureMap>& fmaps,
                                               const Populations& z,
                                               const std::vector<int>& counts,
                                               Rng& rng) {
    int nj = sim.num_types();
    if (static_cast<int>(thetas.size()) != nj || static_cast<int>(fmaps.size()) != nj ||
        static_cast<int>(counts.size()) != nj || static_cast<int>(z.size()) != nj)
        throw std::invalid_argument("empirical_population_update: per-type sizes disagree");
    Populations out;
    out.reserve(static_cast<std::size_t>(nj));
    for (int j = 0; j < nj; ++j) {
        if (counts[static_cast<std::size_t>(j)] < 1)
            throw std::invalid_argument("empirical_population_update: agent count must be >= 1");
        const StateGrid& grid = sim.grid(j);
        TabularPolicy tab = tabulate_boltzmann(thetas[static_cast<std::size_t>(j)],
                                               fmaps[static_cast<std::size_t>(j)],
                                               sim.actions(j), grid);
        std::vector<double> mass(static_cast<std::size_t>(grid.size()), 0.0);
        int n = counts[static_cast<std::size_t>(j)];
        double unit = 1.0 / n;
        for (int i = 0; i < n; ++i) {
            int x = rng.categorical(z[static_cast<std::size_t>(j)].mass);
            int a = rng.categorical(tab.probs[static_cast<std::size_t>(x)]);
            int xn = sim.sample_next(j, x, a, z, rng).first;
            mass[static_cast<std::size_t>(xn)] += unit;
        }
        out.push_back(PopulationDistribution(grid, std::move(mass)));
    }
    return out;
}

struct RlTraceRow {
    bool outer = false;
    int m = 0;
    long k = 0;
    int type = 0;
    double residual = 0.0;
    double qhat = 0.0;
    std::vector<double> means;  // outer rows only
    std::vector<double> theta;  // inner rows only
};

struct RlResult {
    EquilibriumProfile profile;
    std::vector<RlTraceRow> trace;
};

// Outer loop: per-type policy-gradient inner loops against frozen populations,
// then the empirical population update, repeated until the joint W1 step size
// stays under outer_tol. Populations start uniform; theta restarts at zero
// each outer pass unless warm_start carries it (with the step index) forward.
inline RlResult rhpg_mmfe(const PopulationSimulator& sim, const LearnerConfig& cfg,
                          const std::vector<FeatureMap>& fmaps) {
    int nj = sim.num_types();
    cfg.validate(nj);
    if (static_cast<int>(fmaps.size()) != nj)
        throw std::invalid_argument("rhpg_mmfe: one feature map per type required");

    Populations z;
    std::vector<PolicyParams> thetas;
    for (int j = 0; j < nj; ++j) {
        z.push_back(PopulationDistribution::uniform(sim.grid(j)));
        thetas.push_back(PolicyParams::zeros(fmaps[static_cast<std::size_t>(j)].dim(), j));
    }
    Rng base(cfg.seed);
    std::vector<long> global_k(static_cast<std::size_t>(nj), 0);

    RlResult res;
    int outer_ok = 0;
    int m_done = 0;
    SolveStatus status = SolveStatus::cap_exhausted;

    for (int m = 1; m <= cfg.max_outer; ++m) {
        m_done = m;
        std::vector<std::vector<RlTraceRow>> inner_rows(static_cast<std::size_t>(nj));
        std::vector<std::exception_ptr> errs(static_cast<std::size_t>(nj));

        // Mean of batch_size gradient estimates, each on its own substream so
        // the ordered reduction is identical for every thread count. The
        // policy table and the grad-log table are shared by the whole batch;
        // each sample follows the same draw order as pg_gradient_sample.
        auto batch_gradient = [&](int j, long k_eff, const PolicyParams& theta,
                                  double* qhat_out) {
            std::size_t js = static_cast<std::size_t>(j);
            const StateGrid& grid = sim.grid(j);
            const ActionSet& acts = sim.actions(j);
            TabularPolicy tab = tabulate_boltzmann(theta, fmaps[js], acts, grid);
            std::size_t dim = static_cast<std::size_t>(fmaps[js].dim());
            std::size_t ns = static_cast<std::size_t>(grid.size());
            std::size_t na = static_cast<std::size_t>(acts.size());
            std::vector<double> glog(ns * na * dim);
            for (std::size_t x = 0; x < ns; ++x)
                for (std::size_t a = 0; a < na; ++a) {
                    auto gl = grad_log_policy(theta, fmaps[js], acts,
                                              grid.value(static_cast<int>(x)),
                                              acts.at(static_cast<int>(a)));
                    std::copy(gl.begin(), gl.end(),
                              glog.begin() + static_cast<std::ptrdiff_t>((x * na + a) * dim));
                }

            // z is frozen for the whole inner phase, so rewards reduce to a
            // lookup table.
            std::vector<double> rtab(ns * na);
            for (std::size_t x = 0; x < ns; ++x)
                for (std::size_t a = 0; a < na; ++a)
                    rtab[x * na + a] = sim.reward(j, static_cast<int>(x),
                                                  static_cast<int>(a), z);

            std::size_t nb = static_cast<std::size_t>(cfg.batch_size);
            std::vector<double> flat(nb * dim);
            std::vector<double> qs(nb, 0.0);
            double gamma = sim.gamma();
            double root_gamma = std::sqrt(gamma);
            double inv = 1.0 / (1.0 - gamma);
            auto fill = [&](std::size_t lo, std::size_t hi) {
                for (std::size_t b = lo; b < hi; ++b) {
                    Rng r = base.sub(3,
                                     (static_cast<std::uint64_t>(m) << 8) |
                                         static_cast<std::uint64_t>(j),
                                     static_cast<std::uint64_t>(k_eff),
                                     static_cast<std::uint64_t>(b));
                    int x = r.categorical(z[js].mass);
                    int a = r.categorical(tab.probs[static_cast<std::size_t>(x)]);
                    long t_stop = r.geometric(gamma);
                    for (long t = 0; t < t_stop; ++t) {
                        x = sim.sample_state(j, x, a, z, r);
                        a = r.categorical(tab.probs[static_cast<std::size_t>(x)]);
                    }
                    // est_q_tab unrolled against the reward table
                    long q_stop = r.geometric(root_gamma);
                    int qx = x;
                    int qa = a;
                    double qhat = 0.0;
                    double w = 1.0;
                    for (long t = 0;; ++t) {
                        double rew = rtab[static_cast<std::size_t>(qx) * na +
                                          static_cast<std::size_t>(qa)];
                        int xn = sim.sample_state(j, qx, qa, z, r);
                        qhat += w * rew;
                        if (t == q_stop) break;
                        w *= root_gamma;
                        qx = xn;
                        qa = r.categorical(tab.probs[static_cast<std::size_t>(qx)]);
                    }
                    qs[b] = qhat;
                    double s = qhat * inv;
                    const double* gl = &glog[(static_cast<std::size_t>(x) * na +
                                              static_cast<std::size_t>(a)) *
                                             dim];
                    for (std::size_t i = 0; i < dim; ++i) flat[b * dim + i] = s * gl[i];
                }
            };
            int nt = std::min<int>(cfg.threads, static_cast<int>(nb));
            if (nt > 1) {
                std::vector<std::thread> pool;
                std::size_t chunk = (nb + static_cast<std::size_t>(nt) - 1) /
                                    static_cast<std::size_t>(nt);
                for (int t = 0; t < nt; ++t) {
                    std::size_t lo = static_cast<std::size_t>(t) * chunk;
                    std::size_t hi = std::min(nb, lo + chunk);
                    if (lo < hi) pool.emplace_back(fill, lo, hi);
                }
                for (auto& th : pool) th.join();
            } else {
                fill(0, nb);
            }
            std::vector<double> g(dim, 0.0);
            double q = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                for (std::size_t i = 0; i < dim; ++i) g[i] += flat[b * dim + i];
                q += qs[b];
            }
            for (double& v : g) v /= static_cast<double>(nb);
            if (qhat_out) *qhat_out = q / static_cast<double>(nb);
            return g;
        };

        auto run_type = [&](int j) {
            try {
                std::size_t js = static_cast<std::size_t>(j);
                Rng stream = base.sub(1, static_cast<std::uint64_t>(m),
                                      static_cast<std::uint64_t>(j), 0);
                if (!cfg.warm_start) thetas[js] = PolicyParams::zeros(fmaps[js].dim(), j);
                int consec = 0;
                for (long k = 1; k <= cfg.max_inner; ++k) {
                    long k_eff = cfg.warm_start ? ++global_k[js] : k;
                    double qhat = 0.0;
                    PolicyParams next;
                    if (cfg.batch_size == 1) {
                        next = pg_step(sim, j, thetas[js], fmaps[js], z, k_eff, cfg, stream,
                                       &qhat);
                    } else {
                        std::vector<double> g = batch_gradient(j, k_eff, thetas[js], &qhat);
                        double alpha = cfg.schedule.alpha(k_eff);
                        next = thetas[js];
                        for (std::size_t i = 0; i < g.size(); ++i)
                            next.theta[i] += alpha * g[i];
                    }
                    double dn = 0.0;
                    for (int i = 0; i < next.dim(); ++i) {
                        double d = next.theta[static_cast<std::size_t>(i)] -
                                   thetas[js].theta[static_cast<std::size_t>(i)];
                        dn += d * d;
                    }
                    dn = std::sqrt(dn);
                    thetas[js] = std::move(next);
                    bool last = k == cfg.max_inner;
                    if (dn < cfg.inner_tol) {
                        if (++consec >= cfg.inner_patience) last = true;
                    } else {
                        consec = 0;
                    }
                    if (k == 1 || last || k % cfg.trace_stride == 0) {
                        RlTraceRow row;
                        row.outer = false;
                        row.m = m;
                        row.k = k;
                        row.type = j;
                        row.qhat = qhat;
                        row.theta = thetas[js].theta;
                        inner_rows[js].push_back(std::move(row));
                    }
                    if (last) break;
                }
            } catch (...) {
                errs[static_cast<std::size_t>(j)] = std::current_exception();
            }
        };

        // Batched updates thread across the batch instead of across types.
        if (cfg.threads > 1 && nj > 1 && cfg.batch_size == 1) {
            std::vector<std::thread> pool;
            for (int j = 0; j < nj; ++j) pool.emplace_back(run_type, j);
            for (auto& t : pool) t.join();
        } else {
            for (int j = 0; j < nj; ++j) run_type(j);
        }
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
        for (auto& rows : inner_rows)
            for (auto& row : rows) res.trace.push_back(std::move(row));

        Rng pop_stream = base.sub(2, static_cast<std::uint64_t>(m), 0, 0);
        Populations znew = empirical_population_update(sim, thetas, fmaps, z,
                                                       cfg.agents_per_type, pop_stream);
        if (cfg.damping > 0.0) {
            for (int j = 0; j < nj; ++j) {
                std::size_t js = static_cast<std::size_t>(j);
                std::vector<double> mixed(znew[js].mass.size());
                for (std::size_t i = 0; i < mixed.size(); ++i)
                    mixed[i] = (1.0 - cfg.damping) * znew[js].mass[i] +
                               cfg.damping * z[js].mass[i];
                znew[js] = PopulationDistribution(sim.grid(j), std::move(mixed));
            }
        }
        double residual = joint_w1(znew, z);
        RlTraceRow orow;
        orow.outer = true;
        orow.m = m;
        orow.residual = residual;
        orow.means = population_means(znew);
        res.trace.push_back(std::move(orow));
        z = std::move(znew);

        if (residual < cfg.outer_tol) {
            if (++outer_ok >= cfg.outer_patience) {
                status = SolveStatus::converged;
                break;
            }
        } else {
            outer_ok = 0;
        }
    }

    res.profile.populations = z;
    res.profile.thetas = thetas;
    for (int j = 0; j < nj; ++j)
        res.profile.policies.push_back(
            tabulate_boltzmann(thetas[static_cast<std::size_t>(j)],
                               fmaps[static_cast<std::size_t>(j)], sim.actions(j),
                               sim.grid(j)));
    res.profile.residual = res.trace.empty() ? 0.0 : res.trace.back().residual;
    res.profile.iterations = m_done;
    res.profile.status = status;
    return res;
}

inline RlResult rhpg_mmfe(const PopulationSimulator& sim, const LearnerConfig& cfg) {
    std::vector<FeatureMap> fmaps;
    for (int j = 0; j < sim.num_types(); ++j)
        fmaps.push_back(FeatureMap::by_name(cfg.feature_map, sim.grid(j)));
    return rhpg_mmfe(sim, cfg, fmaps);
}

}  // namespace mfg
