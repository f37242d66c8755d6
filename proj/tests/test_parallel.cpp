#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mdlcal/decision.hpp"
#include "mdlcal/decomposition.hpp"
#include "mdlcal/parallel.hpp"
#include "mdlcal/solver.hpp"
#include "testutil.hpp"

using namespace mdlcal;
using namespace testutil;

TEST_CASE("chunked_sum matches the serial reference across sizes") {
    SplitMix64 rng(50);
    for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{1023}, std::size_t{1024},
                          std::size_t{1025}, std::size_t{10000}}) {
        std::vector<double> values(n);
        for (auto& v : values) v = rng.next_range(-1.0, 1.0);
        const double parallel = chunked_sum(n, [&](std::size_t i) { return values[i]; });
        const double serial = reference::sum(n, [&](std::size_t i) { return values[i]; });
        CHECK(parallel == doctest::Approx(serial).epsilon(1e-13));
    }
}

TEST_CASE("chunked_sum is deterministic run to run") {
    SplitMix64 rng(51);
    std::vector<double> values(5000);
    for (auto& v : values) v = rng.next_range(-1.0, 1.0);
    const double a = chunked_sum(values.size(), [&](std::size_t i) { return values[i]; });
    const double b = chunked_sum(values.size(), [&](std::size_t i) { return values[i]; });
    CHECK(a == b);  // bitwise
}

TEST_CASE("chunked_argmin ties resolve to the lowest index") {
    std::vector<double> values(3000, 1.0);
    values[700] = 0.25;
    values[2100] = 0.25;
    const auto [idx, val] = chunked_argmin(values.size(), [&](std::size_t i) { return values[i]; });
    CHECK(idx == 700);
    CHECK(val == doctest::Approx(0.25));

    const auto [ridx, rval] =
        reference::argmin(values.size(), [&](std::size_t i) { return values[i]; });
    CHECK(ridx == idx);
    CHECK(rval == val);
}

TEST_CASE("risk kernel agrees with its serial twin") {
    SplitMix64 rng(52);
    for (const auto& pl : {ProperLoss::log_loss(), ProperLoss::brier()}) {
        for (int t = 0; t < 20; ++t) {
            const auto q = random_joint(50, 4, rng);
            const auto h = random_interior_predictor(50, 4, rng);
            CHECK(risk(q, h, pl) ==
                  doctest::Approx(reference::risk(q, h, pl)).epsilon(1e-12));
        }
    }
}

TEST_CASE("entropy kernel agrees with its serial twin") {
    SplitMix64 rng(53);
    for (int t = 0; t < 20; ++t) {
        const auto q = random_joint(64, 3, rng);
        CHECK(expected_gen_entropy(q, ProperLoss::log_loss()) ==
              doctest::Approx(reference::expected_gen_entropy(q, ProperLoss::log_loss()))
                  .epsilon(1e-12));
    }
}

TEST_CASE("decision cost kernel agrees with its serial twin") {
    SplitMix64 rng(54);
    const CostMatrix cm({"a0", "a1"}, {{0.0, 1.0}, {10.0, 0.0}});
    for (int t = 0; t < 20; ++t) {
        const auto q = random_joint(40, 2, rng);
        const auto h = bayes_predictor(q);
        const auto rule = induced_rule(h, cm);
        CHECK(average_decision_cost(q, h, rule, cm) ==
              doctest::Approx(reference::average_decision_cost(q, h, rule, cm)).epsilon(1e-12));
    }
}
