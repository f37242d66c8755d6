#include "mdlcal/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mdlcal/decomposition.hpp"
#include "mdlcal/parallel.hpp"

namespace mdlcal {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Exact line search for a concave phi with phi'(0) > 0 on [0, hi]: bisect the
// sign change of the directional derivative. Working on the derivative keeps
// resolution near the optimum, where objective differences sink below double
// precision. Returns a step with phi(step) >= phi(0).
template <typename DPhi>
double derivative_line_search(DPhi&& dphi, double hi) {
    if (dphi(hi) >= 0.0) return hi;
    double lo = 0.0;
    double top = hi;
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + top);
        if (dphi(mid) >= 0.0) {
            lo = mid;
        } else {
            top = mid;
        }
    }
    return lo;
}

Predictor random_predictor(const FeatureSpace& xs, std::size_t m, SplitMix64& rng) {
    std::vector<Forecast> fs;
    fs.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) fs.emplace_back(rng.next_simplex(m));
    return Predictor(xs, std::move(fs));
}

}  // namespace

double expected_gen_entropy(const FiniteJoint& q, const ProperLoss& pl) {
    return chunked_sum(q.n(), [&](std::size_t i) {
        const auto row = q.row(i);
        double mass = 0.0;
        for (double x : row) mass += x;
        if (mass <= kMassFloor) return 0.0;
        std::vector<double> cond(q.m());
        for (std::size_t y = 0; y < q.m(); ++y) cond[y] = row[y] / mass;
        return mass * pl.entropy(Forecast(std::move(cond)));
    });
}

std::vector<double> entropy_supergradient(const FiniteJoint& q, const ProperLoss& pl) {
    std::vector<double> g(q.n() * q.m());
    const Forecast fallback = y_marginal(q);
    parallel_for(q.n(), [&](std::size_t i) {
        const auto row = q.row(i);
        double mass = 0.0;
        for (double x : row) mass += x;
        Forecast eta = fallback;
        if (mass > kMassFloor) {
            std::vector<double> cond(q.m());
            for (std::size_t y = 0; y < q.m(); ++y) cond[y] = row[y] / mass;
            eta = Forecast(std::move(cond));
        }
        for (std::size_t y = 0; y < q.m(); ++y) g[i * q.m() + y] = pl.loss(y, eta);
    });
    return g;
}

SolveResult solve_max_entropy(const Envelope& env, const ProperLoss& pl,
                              const SolverOptions& opts) {
    if (opts.max_iters < 1) throw Error("solver needs max_iters >= 1");

    // Iterates are tracked as convex combinations of the atoms the oracle has
    // returned; away steps shift weight off a bad atom without leaving the
    // envelope.
    std::vector<std::vector<double>> atoms;
    std::vector<double> weights;
    std::map<std::vector<double>, std::size_t> atom_index;

    auto upsert_atom = [&](const std::vector<double>& probs) {
        auto [it, inserted] = atom_index.try_emplace(probs, atoms.size());
        if (inserted) {
            atoms.push_back(probs);
            weights.push_back(0.0);
        }
        return it->second;
    };

    const FiniteJoint start = env.initial_point();
    upsert_atom(start.probs());
    weights[0] = 1.0;

    auto combine = [&]() {
        std::vector<double> acc(atoms[0].size(), 0.0);
        for (std::size_t a = 0; a < atoms.size(); ++a) {
            if (weights[a] == 0.0) continue;
            for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += weights[a] * atoms[a][c];
        }
        return FiniteJoint(env.x_space(), env.y_space(), std::move(acc));
    };

    FiniteJoint q = start;
    double value = expected_gen_entropy(q, pl);

    SolveResult res{q, bayes_predictor(q), value, 0, std::numeric_limits<double>::infinity(),
                    false, {value}};

    for (std::size_t t = 0; t < opts.max_iters; ++t) {
        const auto g = entropy_supergradient(q, pl);
        const FiniteJoint s = env.linear_oracle(g);
        const double q_score = dot(g, q.probs());
        const double gap = dot(g, s.probs()) - q_score;
        res.duality_gap = gap;
        if (gap <= opts.gap_tol) {
            res.converged = true;
            break;
        }

        // Worst active atom under the current gradient (lowest index on ties).
        std::size_t away = atoms.size();
        double away_score = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < atoms.size(); ++a) {
            if (weights[a] <= 0.0) continue;
            const double sc = dot(g, atoms[a]);
            if (sc < away_score) {
                away_score = sc;
                away = a;
            }
        }
        const double away_gain = q_score - away_score;

        const bool fw_step = gap >= away_gain || weights[away] >= 1.0 - 1e-15;

        std::vector<double> dir(q.probs().size());
        double gamma_cap;
        if (fw_step) {
            const auto& sp = s.probs();
            const auto& qp = q.probs();
            for (std::size_t c = 0; c < dir.size(); ++c) dir[c] = sp[c] - qp[c];
            gamma_cap = 1.0;
        } else {
            const auto& ap = atoms[away];
            const auto& qp = q.probs();
            for (std::size_t c = 0; c < dir.size(); ++c) dir[c] = qp[c] - ap[c];
            // Capped: enormous away steps amplify cancellation noise in dir.
            gamma_cap = std::min(weights[away] / (1.0 - weights[away]), 1e6);
        }

        auto at = [&](double gamma) {
            std::vector<double> cand(q.probs());
            for (std::size_t c = 0; c < cand.size(); ++c) cand[c] += gamma * dir[c];
            return FiniteJoint(env.x_space(), env.y_space(), std::move(cand));
        };
        auto dphi = [&](double gamma) {
            return dot(entropy_supergradient(at(gamma), pl), dir);
        };

        double gamma = 0.0;
        if (!opts.line_search && fw_step) {
            const double fixed = 2.0 / static_cast<double>(t + 2);
            if (expected_gen_entropy(at(fixed), pl) >= value) gamma = fixed;
        }
        if (gamma == 0.0) gamma = derivative_line_search(dphi, gamma_cap);
        if (gamma <= 0.0) {
            // No ascent along the chosen direction; the gap certificate is the
            // honest report of how far we are.
            res.converged = gap <= opts.gap_tol;
            break;
        }

        if (fw_step) {
            const std::size_t idx = upsert_atom(s.probs());
            for (auto& w : weights) w *= (1.0 - gamma);
            weights[idx] += gamma;
        } else {
            for (auto& w : weights) w *= (1.0 + gamma);
            weights[away] -= gamma;
            if (weights[away] < 1e-16) weights[away] = 0.0;
        }
        // Renormalize and rebuild the iterate from its atoms: no drift.
        double wtotal = 0.0;
        for (double w : weights) wtotal += w;
        for (auto& w : weights) w /= wtotal;
        q = combine();
        value = expected_gen_entropy(q, pl);
        res.trace.push_back(value);
    }

    res.q_star = q;
    res.h_star = bayes_predictor(q);
    res.value = value;
    res.iterations = res.trace.size() - 1;  // accepted steps
    return res;
}

SaddleCertificate verify_saddle(const Envelope& env, const SolveResult& res, const ProperLoss& pl,
                                std::size_t probes, std::uint64_t seed) {
    SplitMix64 rng(seed);
    const double pivot = risk(res.q_star, res.h_star, pl);

    std::vector<FiniteJoint> tested_q = env.extreme_members(std::max<std::size_t>(probes, 8), rng);
    for (std::size_t i = 0; i < probes; ++i) tested_q.push_back(env.random_member(rng));

    double left = std::numeric_limits<double>::infinity();
    std::size_t left_witness = 0;
    for (std::size_t i = 0; i < tested_q.size(); ++i) {
        const double slack = pivot - risk(tested_q[i], res.h_star, pl);
        if (slack < left) {
            left = slack;
            left_witness = i;
        }
    }

    std::vector<Predictor> tested_h;
    tested_h.push_back(bayes_predictor(res.q_star));
    {
        SplitMix64 hrng(seed ^ 0x517CC1B727220A95ULL);
        const auto extremes = env.extreme_members(std::max<std::size_t>(probes, 8), hrng);
        for (const auto& e : extremes) tested_h.push_back(bayes_predictor(e));
        for (std::size_t i = 0; i < probes; ++i) {
            tested_h.push_back(random_predictor(env.x_space(), env.m(), hrng));
        }
    }

    double right = std::numeric_limits<double>::infinity();
    std::size_t right_witness = 0;
    for (std::size_t i = 0; i < tested_h.size(); ++i) {
        const double slack = risk(res.q_star, tested_h[i], pl) - pivot;
        if (slack < right) {
            right = slack;
            right_witness = i;
        }
    }

    return SaddleCertificate{left, right, tested_q[left_witness], tested_h[right_witness]};
}

SolveResult minimax_game(const ConvexHullEnvelope& env, const ProperLoss& pl,
                         std::size_t rounds) {
    if (rounds < 1) throw Error("minimax_game needs rounds >= 1");
    const std::size_t k = env.num_vertices();
    const double scale = std::max(pl.bound(), 1e-12);
    const double step = std::sqrt(8.0 * std::log(std::max<double>(static_cast<double>(k), 2.0)) /
                                  static_cast<double>(rounds));

    std::vector<double> w(k, 1.0 / static_cast<double>(k));
    std::vector<double> w_avg(k, 0.0);
    std::vector<double> payoff(k);
    SolveResult res{env.initial_point(), bayes_predictor(env.initial_point()), 0.0, 0, 0.0,
                    false, {}};
    res.trace.reserve(rounds);

    for (std::size_t t = 0; t < rounds; ++t) {
        const FiniteJoint mixture = mix(env.vertices(), w);
        const Predictor response = bayes_predictor(mixture);
        parallel_for(k, [&](std::size_t i) {
            payoff[i] = risk(env.vertices()[i], response, pl);
        });

        for (std::size_t i = 0; i < k; ++i) w_avg[i] += w[i];

        double zmax = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) zmax = std::max(zmax, payoff[i]);
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            w[i] *= std::exp(step * (payoff[i] - zmax) / scale);
            total += w[i];
        }
        for (auto& x : w) x /= total;

        std::vector<double> running(w_avg);
        for (auto& x : running) x /= static_cast<double>(t + 1);
        res.trace.push_back(expected_gen_entropy(mix(env.vertices(), running), pl));
    }

    for (auto& x : w_avg) x /= static_cast<double>(rounds);
    res.q_star = mix(env.vertices(), w_avg);
    res.h_star = bayes_predictor(res.q_star);
    res.value = expected_gen_entropy(res.q_star, pl);
    res.iterations = rounds;

    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        worst = std::max(worst, risk(env.vertices()[i], res.h_star, pl));
    }
    res.duality_gap = worst - res.value;
    res.converged = true;
    return res;
}

namespace reference {

double expected_gen_entropy(const FiniteJoint& q, const ProperLoss& pl) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.n(); ++i) {
        const auto row = q.row(i);
        double mass = 0.0;
        for (double x : row) mass += x;
        if (mass <= kMassFloor) continue;
        std::vector<double> cond(q.m());
        for (std::size_t y = 0; y < q.m(); ++y) cond[y] = row[y] / mass;
        acc += mass * pl.entropy(Forecast(std::move(cond)));
    }
    return acc;
}

}  // namespace reference

}  // namespace mdlcal
