#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mdlcal/audit.hpp"
#include "testutil.hpp"

using namespace mdlcal;
using namespace testutil;

namespace {

SolveResult solve_bernoulli_hull() {
    const ConvexHullEnvelope hull({bernoulli(0.2), bernoulli(0.9)});
    SolverOptions opts;
    opts.gap_tol = 1e-10;
    opts.max_iters = 50000;
    return solve_max_entropy(hull, ProperLoss::log_loss(), opts);
}

}  // namespace

TEST_CASE("audit rows: q_star is perfectly calibrated, the 0.2 probe is tight") {
    const ConvexHullEnvelope hull({bernoulli(0.2), bernoulli(0.9)});
    const auto log = ProperLoss::log_loss();
    const auto res = solve_bernoulli_hull();

    const std::vector<FiniteJoint> probes = {res.q_star, bernoulli(0.2)};
    const auto report = audit_envelope(hull, res, log, probes);
    REQUIRE(report.rows.size() == 2);

    CHECK(report.rows[0].calibration_error <= 1e-9);
    CHECK(std::abs(report.rows[0].entropy_gap) <= 1e-6);
    CHECK(report.rows[0].bound_satisfied);

    // Closed forms: calib = KL([0.2,0.8] || [0.5,0.5]), gap = ln2 - H(0.2), equal.
    const double expected = kl_reference({0.2, 0.8}, {0.5, 0.5});
    CHECK(expected == doctest::Approx(0.192745).epsilon(1e-5));
    CHECK(report.rows[1].calibration_error == doctest::Approx(expected).epsilon(1e-5));
    CHECK(report.rows[1].entropy_gap == doctest::Approx(expected).epsilon(1e-5));
    CHECK(report.rows[1].bound_satisfied);
    CHECK(report.rows[1].identity_residual <= kIdentityTol);
}

TEST_CASE("a probe matching the forecast marginal is calibrated without being q_star") {
    // Under a constant [0.5, 0.5] predictor, any population whose y-marginal is
    // 50-50 is perfectly calibrated, however skewed its conditionals.
    const auto log = ProperLoss::log_loss();
    const auto h = constant_predictor(2, Forecast({0.5, 0.5}));
    const auto skew = joint(2, 2, {0.4, 0.1, 0.1, 0.4});  // conditionals 0.8 / 0.2
    CHECK(calibration_error(skew, h, log) <= 1e-9);
    // A 60-40 marginal under the same predictor is not calibrated.
    const auto off = joint(2, 2, {0.45, 0.05, 0.15, 0.35});
    CHECK(calibration_error(off, h, log) > 1e-3);
}

TEST_CASE("audit rejects probes outside the envelope") {
    const ConvexHullEnvelope hull({bernoulli(0.2), bernoulli(0.9)});
    const auto res = solve_bernoulli_hull();
    CHECK_THROWS_AS(
        audit_envelope(hull, res, ProperLoss::log_loss(), {bernoulli(0.05)}),
        ProbeOutsideEnvelope);
}

TEST_CASE("prop 4.1 bound holds on random hulls") {
    SplitMix64 rng(30);
    const auto log = ProperLoss::log_loss();
    for (int t = 0; t < 25; ++t) {
        std::vector<FiniteJoint> vertices;
        const int k = 2 + static_cast<int>(rng.next_u64() % 3);
        for (int v = 0; v < k; ++v) vertices.push_back(random_joint(3, 2, rng));
        const ConvexHullEnvelope hull(vertices);
        SolverOptions opts;
        opts.gap_tol = 1e-9;
        opts.max_iters = 50000;
        const auto res = solve_max_entropy(hull, log, opts);
        std::vector<FiniteJoint> probes;
        for (int p = 0; p < 10; ++p) probes.push_back(hull.random_member(rng));
        const auto report = audit_envelope(hull, res, log, probes);
        for (const auto& row : report.rows) {
            CHECK(row.calibration_error <= row.entropy_gap + kAuditBoundTol);
        }
    }
}

TEST_CASE("disparity curve endpoints and closed-form strict decrease") {
    const auto log = ProperLoss::log_loss();
    const auto res = solve_bernoulli_hull();

    const auto curve = disparity_curve(bernoulli(0.2), res, log, 11);
    REQUIRE(curve.ts.size() == 11);
    CHECK(curve.ts.front() == doctest::Approx(0.0));
    CHECK(curve.ts.back() == doctest::Approx(1.0));
    // t = 0 equals the audit row; t = 1 vanishes.
    CHECK(curve.calib_errors.front() ==
          doctest::Approx(kl_reference({0.2, 0.8}, {0.5, 0.5})).epsilon(1e-5));
    CHECK(curve.calib_errors.back() <= 1e-8);
    // The segment is strictly decreasing, point by point, against direct KL.
    for (std::size_t s = 1; s < curve.ts.size(); ++s) {
        CHECK(curve.calib_errors[s] < curve.calib_errors[s - 1]);
        const double p = (1.0 - curve.ts[s]) * 0.2 + curve.ts[s] * res.q_star.at(0, 0);
        const double direct =
            kl_reference({p, 1.0 - p}, {res.h_star.at(0)[0], res.h_star.at(0)[1]});
        CHECK(curve.calib_errors[s] == doctest::Approx(direct).epsilon(1e-9));
    }
    CHECK(curve.monotonicity_violations == 0);

    CHECK_THROWS_AS(disparity_curve(bernoulli(0.2), res, log, 1), Error);
}

TEST_CASE("tradeoff ledger") {
    const auto log = ProperLoss::log_loss();
    const auto res = solve_bernoulli_hull();

    // q = q_star: a = b and zero calibration error.
    {
        const auto ledger = tradeoff_ledger(res.q_star, res, log);
        CHECK(ledger.a == doctest::Approx(ledger.b).epsilon(1e-9));
        CHECK(ledger.calibration_error <= 1e-9);
        CHECK(ledger.lower_bound_ok);
        CHECK(ledger.identity_ok);
    }

    // Bernoulli(0.2) probe: b = a + KL, refinement = a (constant predictor).
    {
        const auto ledger = tradeoff_ledger(bernoulli(0.2), res, log);
        CHECK(ledger.a == doctest::Approx(binary_entropy(0.2)).epsilon(1e-9));
        CHECK(ledger.refinement == doctest::Approx(ledger.a).epsilon(1e-9));
        CHECK(ledger.b ==
              doctest::Approx(ledger.a + kl_reference({0.2, 0.8}, {0.5, 0.5})).epsilon(1e-4));
        CHECK(ledger.lower_bound_ok);
        CHECK(ledger.identity_ok);
    }

    // Random probes: a <= b against the direct risk sum.
    SplitMix64 rng(31);
    const ConvexHullEnvelope hull({bernoulli(0.2), bernoulli(0.9)});
    for (int t = 0; t < 50; ++t) {
        const auto probe = hull.random_member(rng);
        const auto ledger = tradeoff_ledger(probe, res, log);
        CHECK(ledger.lower_bound_ok);
        CHECK(ledger.identity_ok);
        CHECK(ledger.b == doctest::Approx(reference::risk(probe, res.h_star, log)).epsilon(1e-10));
    }
}

TEST_CASE("lipschitz check on kl balls") {
    const auto log = ProperLoss::log_loss();
    const auto center = joint(2, 2, {0.3, 0.2, 0.25, 0.25});

    // Zero radius: everything collapses to the center.
    {
        const DivergenceBallEnvelope ball(center, 0.0, DivergenceKind::kl);
        const auto rep = lipschitz_check(ball, log, 20, 99);
        CHECK(rep.max_gap_observed == doctest::Approx(0.0));
        CHECK(rep.bound_value == doctest::Approx(0.0));
    }

    // The observed gap never beats kappa_hat * epsilon (same probe superset).
    {
        const DivergenceBallEnvelope ball(center, 0.05, DivergenceKind::kl);
        const auto rep = lipschitz_check(ball, log, 40, 99);
        CHECK(rep.max_gap_observed <= rep.bound_value + 1e-6);
        CHECK(rep.kappa_hat > 0.0);
    }

    // Shrinking radii never enlarge the observed gap.
    double prev = 1e300;
    for (double eps : {0.1, 0.05, 0.01}) {
        const DivergenceBallEnvelope ball(center, eps, DivergenceKind::kl);
        const auto rep = lipschitz_check(ball, log, 40, 99);
        CHECK(rep.max_gap_observed <= prev + 1e-12);
        prev = rep.max_gap_observed;
    }

    CHECK_THROWS_AS(lipschitz_check(DivergenceBallEnvelope(center, 0.05, DivergenceKind::kl),
                                    log, 5, 99),
                    Error);
}

TEST_CASE("temperature scaling") {
    SplitMix64 rng(32);
    const auto q = random_joint(4, 2, rng);

    // Bayes forecasts are already optimal: t_star lands at 1.
    {
        const auto fit = fit_temperature(q, bayes_predictor(q));
        CHECK(fit.t_star == doctest::Approx(1.0).epsilon(0.01));
        CHECK(fit.nll_after == doctest::Approx(fit.nll_before).epsilon(1e-9));
    }

    // Sharpened Bayes forecasts (temperature 0.5) are recovered by t ~ 2.
    {
        const auto bayes = bayes_predictor(q);
        std::vector<Forecast> sharp;
        for (std::size_t i = 0; i < bayes.n(); ++i) {
            std::vector<double> p(bayes.m());
            double z = 0.0;
            for (std::size_t y = 0; y < bayes.m(); ++y) {
                p[y] = std::pow(bayes.at(i)[y], 2.0);
                z += p[y];
            }
            for (auto& x : p) x /= z;
            sharp.emplace_back(std::move(p));
        }
        const Predictor overconfident(bayes.x_space(), std::move(sharp));
        const auto fit = fit_temperature(q, overconfident);
        CHECK(fit.t_star == doctest::Approx(2.0).epsilon(0.02));
        CHECK(fit.nll_after < fit.nll_before);
        // Repair recovers the Bayes forecasts.
        for (std::size_t i = 0; i < bayes.n(); ++i) {
            CHECK(fit.repaired.at(i)[0] == doctest::Approx(bayes.at(i)[0]).epsilon(1e-3));
        }
    }

    // Uniform forecasts are invariant under temperature.
    {
        const auto uniform = constant_predictor(4, Forecast({0.5, 0.5}));
        const auto fit = fit_temperature(q, uniform);
        CHECK(fit.nll_after == doctest::Approx(fit.nll_before).epsilon(1e-12));
    }

    // Never increases risk, across random predictors.
    for (int t = 0; t < 20; ++t) {
        const auto h = random_interior_predictor(4, 2, rng);
        const auto fit = fit_temperature(q, h);
        CHECK(fit.nll_after <= fit.nll_before + 1e-12);
    }
}
