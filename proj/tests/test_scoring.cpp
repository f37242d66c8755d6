#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mdlcal/scoring.hpp"
#include "testutil.hpp"

using namespace mdlcal;
using namespace testutil;

TEST_CASE("log loss values") {
    const auto log = ProperLoss::log_loss();
    CHECK(log.loss(0, Forecast({1.0, 0.0})) == doctest::Approx(0.0).epsilon(1e-12));
    // -ln(1e-12) ~ 27.6 clips at the default bound.
    CHECK(log.loss(0, Forecast({1e-12, 1.0 - 1e-12})) == doctest::Approx(20.0));
    CHECK(log.loss(1, Forecast({0.75, 0.25})) == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("brier loss values") {
    const auto brier = ProperLoss::brier();
    CHECK(brier.loss(0, Forecast({0.5, 0.5})) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(brier.loss(1, Forecast({1.0, 0.0})) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(brier.entropy(Forecast({1.0, 0.0})) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(brier.entropy(Forecast({0.5, 0.5})) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("expected loss closed forms") {
    const auto brier = ProperLoss::brier();
    const Forecast even({0.5, 0.5});
    CHECK(expected_loss(brier, even, even) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(expected_loss(brier, even, Forecast({0.25, 0.75})) ==
          doctest::Approx(0.625).epsilon(1e-12));

    const auto log = ProperLoss::log_loss();
    CHECK(log.entropy(even) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(expected_loss(log, even, even) == doctest::Approx(log.entropy(even)).epsilon(1e-12));
}

TEST_CASE("bregman closed forms") {
    const auto log = ProperLoss::log_loss();
    const auto brier = ProperLoss::brier();
    const Forecast eta({0.5, 0.5});
    const Forecast h({0.25, 0.75});

    CHECK(bregman(log, eta, eta) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bregman(log, eta, h) ==
          doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-12));
    CHECK(bregman(brier, eta, h) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("entropy is the grid minimum of the expected loss") {
    for (const auto& pl : {ProperLoss::log_loss(), ProperLoss::brier()}) {
        for (double p : {0.2, 0.5, 0.85}) {
            const Forecast eta({p, 1.0 - p});
            double grid_min = 1e300;
            for (int i = 1; i < 1000; ++i) {
                const Forecast h({i / 1000.0, 1.0 - i / 1000.0});
                grid_min = std::min(grid_min, expected_loss(pl, eta, h));
            }
            CHECK(pl.entropy(eta) <= grid_min + 1e-12);
            CHECK(pl.entropy(eta) == doctest::Approx(grid_min).epsilon(1e-5));
        }
    }
}

TEST_CASE("propriety on random pairs") {
    SplitMix64 rng(100);
    for (const auto& pl : {ProperLoss::log_loss(), ProperLoss::brier()}) {
        for (int t = 0; t < 1000; ++t) {
            const auto eta = random_interior_forecast(3, rng);
            const auto h = random_interior_forecast(3, rng);
            CHECK(expected_loss(pl, eta, h) >= pl.entropy(eta) - 1e-9);
        }
        // Strictness: clearly separated forecasts pay a real premium.
        for (int t = 0; t < 200; ++t) {
            const auto eta = random_interior_forecast(2, rng);
            auto probs = eta.probs();
            const double shift = probs[0] > 0.5 ? -0.05 : 0.05;
            probs[0] += shift;
            probs[1] -= shift;
            const Forecast h(std::move(probs));
            CHECK(expected_loss(pl, eta, h) > pl.entropy(eta) + 1e-9);
        }
    }
}

TEST_CASE("representation identity away from the clip") {
    SplitMix64 rng(200);
    for (const auto& pl : {ProperLoss::log_loss(), ProperLoss::brier()}) {
        for (int t = 0; t < 500; ++t) {
            const auto h = random_interior_forecast(3, rng);
            const auto g = pl.subgradient(h);
            for (std::size_t y = 0; y < h.size(); ++y) {
                double rep = pl.entropy(h) + g[y];
                for (std::size_t k = 0; k < h.size(); ++k) rep -= g[k] * h[k];
                CHECK(pl.loss(y, h) == doctest::Approx(rep).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("entropy midpoint concavity") {
    SplitMix64 rng(300);
    for (const auto& pl : {ProperLoss::log_loss(), ProperLoss::brier()}) {
        for (int t = 0; t < 500; ++t) {
            const auto p = random_interior_forecast(4, rng);
            const auto q = random_interior_forecast(4, rng);
            std::vector<double> mid(p.size());
            for (std::size_t y = 0; y < p.size(); ++y) mid[y] = 0.5 * (p[y] + q[y]);
            CHECK(pl.entropy(Forecast(std::move(mid))) >=
                  0.5 * pl.entropy(p) + 0.5 * pl.entropy(q) - 1e-9);
        }
    }
}

TEST_CASE("bregman nonnegative and matches independent KL") {
    SplitMix64 rng(400);
    const auto log = ProperLoss::log_loss();
    for (int t = 0; t < 1000; ++t) {
        const auto eta = random_interior_forecast(3, rng);
        const auto h = random_interior_forecast(3, rng);
        const double d = bregman(log, eta, h);
        CHECK(d >= -1e-9);
        CHECK(d == doctest::Approx(kl_reference(eta.probs(), h.probs())).epsilon(1e-9));
    }
}

TEST_CASE("user-defined entropy pair reproduces brier") {
    // Same (H, dH) pair as the built-in, plugged through from_entropy.
    const auto custom = ProperLoss::from_entropy(
        "custom_quadratic", 2.0,
        [](const Forecast& f) {
            double s = 0.0;
            for (std::size_t y = 0; y < f.size(); ++y) s += f[y] * f[y];
            return 1.0 - s;
        },
        [](const Forecast& f) {
            std::vector<double> g(f.size());
            for (std::size_t y = 0; y < f.size(); ++y) g[y] = -2.0 * f[y];
            return g;
        });
    const auto brier = ProperLoss::brier();
    SplitMix64 rng(500);
    for (int t = 0; t < 200; ++t) {
        const auto h = random_interior_forecast(3, rng);
        for (std::size_t y = 0; y < 3; ++y) {
            CHECK(custom.loss(y, h) == doctest::Approx(brier.loss(y, h)).epsilon(1e-12));
        }
    }
}

TEST_CASE("cost matrix and expected cost") {
    CHECK_THROWS_AS(CostMatrix({"a"}, {{-1.0, 0.0}}), InvalidDistribution);
    CHECK_THROWS_AS(CostMatrix({"a", "b"}, {{1.0, 0.0}}), InvalidDistribution);

    const CostMatrix zero({"a", "b"}, {{0.0, 0.0}, {0.0, 0.0}});
    CHECK(expected_cost(zero, Forecast({0.3, 0.7}), 0) == doctest::Approx(0.0));

    // Order-test action: c_TP = 0, c_FP = 1 against forecast [0.3, 0.7].
    const CostMatrix test_costs({"test", "skip"}, {{0.0, 1.0}, {10.0, 0.0}});
    CHECK(expected_cost(test_costs, Forecast({0.3, 0.7}), 0) == doctest::Approx(0.7).epsilon(1e-12));

    const Forecast onehot({1.0, 0.0});
    CHECK(expected_cost(test_costs, onehot, 1) == doctest::Approx(10.0).epsilon(1e-12));
}
