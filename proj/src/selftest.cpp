#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "mdlcal/audit.hpp"
#include "mdlcal/decision.hpp"
#include "mdlcal/decomposition.hpp"
#include "mdlcal/envelope.hpp"
#include "mdlcal/io.hpp"
#include "mdlcal/rng.hpp"
#include "mdlcal/scenario.hpp"
#include "mdlcal/solver.hpp"

namespace mdlcal {

namespace {

FeatureSpace make_xspace(std::size_t n) {
    std::vector<std::string> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back("x" + std::to_string(i));
    return FeatureSpace(pts);
}

LabelSpace make_yspace(std::size_t m) {
    std::vector<std::string> ls;
    for (std::size_t y = 0; y < m; ++y) ls.push_back("y" + std::to_string(y));
    return LabelSpace(ls);
}

FiniteJoint random_joint(std::size_t n, std::size_t m, SplitMix64& rng) {
    std::vector<double> cells(n * m);
    double total = 0.0;
    for (auto& c : cells) {
        c = rng.next_exp();
        total += c;
    }
    for (auto& c : cells) c /= total;
    return FiniteJoint(make_xspace(n), make_yspace(m), std::move(cells));
}

// Forecast entries bounded away from the log-loss clip region.
Forecast random_interior_forecast(std::size_t m, SplitMix64& rng) {
    auto v = rng.next_simplex(m);
    for (auto& x : v) x = 0.98 * x + 0.02 / static_cast<double>(m);
    return Forecast(std::move(v));
}

Predictor random_interior_predictor(std::size_t n, std::size_t m, SplitMix64& rng) {
    std::vector<Forecast> fs;
    for (std::size_t i = 0; i < n; ++i) fs.push_back(random_interior_forecast(m, rng));
    return Predictor(make_xspace(n), std::move(fs));
}

FiniteJoint bernoulli(double p) {
    return FiniteJoint(make_xspace(1), make_yspace(2), {p, 1.0 - p});
}

}  // namespace

std::size_t selftest(std::vector<std::string>& lines) {
    std::size_t failures = 0;
    auto record = [&](const std::string& name, bool ok, const std::string& detail) {
        lines.push_back(std::string(ok ? "PASS " : "FAIL ") + name +
                        (detail.empty() ? "" : " (" + detail + ")"));
        if (!ok) ++failures;
    };

    const std::vector<ProperLoss> losses = {ProperLoss::log_loss(), ProperLoss::brier()};

    // Propriety away from the clip.
    {
        SplitMix64 rng(11);
        bool ok = true;
        double worst = 0.0;
        for (const auto& pl : losses) {
            for (int t = 0; t < 200; ++t) {
                const auto eta = random_interior_forecast(3, rng);
                const auto h = random_interior_forecast(3, rng);
                const double slack = expected_loss(pl, eta, h) - pl.entropy(eta);
                worst = std::min(worst, slack);
                if (slack < -1e-9) ok = false;
            }
        }
        record("propriety", ok, "min slack " + format_sig(worst));
    }

    // Risk decomposes into calibration + refinement.
    {
        SplitMix64 rng(12);
        double worst = 0.0;
        for (const auto& pl : losses) {
            for (int t = 0; t < 200; ++t) {
                const auto q = random_joint(5, 3, rng);
                const auto h = random_interior_predictor(5, 3, rng);
                worst = std::max(worst, decompose(q, h, pl).identity_residual());
            }
        }
        record("decomposition_identity", worst <= kIdentityTol,
               "max residual " + format_sig(worst));
    }

    // The Bayes predictor carries no calibration error.
    {
        SplitMix64 rng(13);
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            const auto q = random_joint(4, 3, rng);
            worst = std::max(worst,
                             calibration_error(q, bayes_predictor(q), ProperLoss::log_loss()));
        }
        record("bayes_calibration", worst <= 1e-9, "max error " + format_sig(worst));
    }

    // Oracle outputs stay inside their envelopes.
    {
        SplitMix64 rng(14);
        bool ok = true;
        for (int t = 0; t < 40; ++t) {
            std::vector<std::shared_ptr<Envelope>> envs;
            envs.push_back(std::make_shared<ConvexHullEnvelope>(std::vector<FiniteJoint>{
                random_joint(2, 2, rng), random_joint(2, 2, rng), random_joint(2, 2, rng)}));
            envs.push_back(std::make_shared<DivergenceBallEnvelope>(random_joint(2, 2, rng),
                                                                    0.05, DivergenceKind::kl));
            envs.push_back(std::make_shared<DivergenceBallEnvelope>(random_joint(2, 2, rng),
                                                                    0.05, DivergenceKind::tv));
            envs.push_back(std::make_shared<CVaREnvelope>(random_joint(2, 2, rng), 0.4));
            for (const auto& env : envs) {
                std::vector<double> g(4);
                for (auto& x : g) x = rng.next_range(-1.0, 1.0);
                if (!env->contains(env->linear_oracle(g), 1e-6)) ok = false;
            }
        }
        record("oracle_membership", ok, "");
    }

    // Closed-form max-entropy instance.
    {
        const ConvexHullEnvelope hull({bernoulli(0.2), bernoulli(0.9)});
        SolverOptions opts;
        opts.gap_tol = 1e-9;
        const auto res = solve_max_entropy(hull, ProperLoss::log_loss(), opts);
        const double err = std::abs(res.value - std::log(2.0));
        record("bernoulli_hull_value", err <= 1e-6, "|value - ln2| = " + format_sig(err));
    }

    // Threshold rule agrees with expected-cost argmin.
    {
        SplitMix64 rng(15);
        bool ok = true;
        for (int t = 0; t < 200; ++t) {
            const double c00 = rng.next_range(0.0, 5.0);
            const double c01 = rng.next_range(0.0, 5.0);
            const double c10 = rng.next_range(0.0, 5.0);
            const double c11 = rng.next_range(0.0, 5.0);
            if (std::abs(c00 - c10) < 1e-6) continue;
            const CostMatrix cm({"a0", "a1"}, {{c00, c01}, {c10, c11}});
            const auto spec = threshold_from_costs(cm);
            const double nu = rng.next_range(0.01, 0.99);
            const double odds = nu / (1.0 - nu);
            if (std::abs(odds - spec.odds_threshold) < 1e-9) continue;
            const Forecast f({nu, 1.0 - nu});
            const std::size_t by_threshold =
                odds > spec.odds_threshold ? spec.positive_action : 1 - spec.positive_action;
            const std::size_t by_argmin =
                expected_cost(cm, f, 0) <= expected_cost(cm, f, 1) ? 0 : 1;
            if (by_threshold != by_argmin) ok = false;
        }
        record("threshold_agreement", ok, "");
    }

    return failures;
}

}  // namespace mdlcal
