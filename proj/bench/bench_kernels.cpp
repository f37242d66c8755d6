// Kernel benchmark: OpenMP chunked kernels against their serial references on
// tables well past desk scale. Build and run:
//   cmake --build build --target mdlcal_bench && ./build/bench/mdlcal_bench

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mdlcal/decision.hpp"
#include "mdlcal/decomposition.hpp"
#include "mdlcal/parallel.hpp"
#include "mdlcal/rng.hpp"
#include "mdlcal/solver.hpp"

using namespace mdlcal;

namespace {

FiniteJoint synthetic_joint(std::size_t n, std::size_t m, SplitMix64& rng) {
    std::vector<std::string> xs(n);
    std::vector<std::string> ys(m);
    for (std::size_t i = 0; i < n; ++i) xs[i] = "x" + std::to_string(i);
    for (std::size_t y = 0; y < m; ++y) ys[y] = "y" + std::to_string(y);
    std::vector<double> cells(n * m);
    double total = 0.0;
    for (auto& c : cells) {
        c = rng.next_exp();
        total += c;
    }
    for (auto& c : cells) c /= total;
    return FiniteJoint(FeatureSpace(xs), LabelSpace(ys), std::move(cells));
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        best = std::min(best, secs);
    }
    return best;
}

void report(const char* kernel, const char* size, double serial_s, double parallel_s,
            double delta) {
    std::printf("%-22s %-12s serial %8.2f ms   parallel %8.2f ms   speedup %5.2fx   |diff| %g\n",
                kernel, size, serial_s * 1e3, parallel_s * 1e3,
                serial_s / std::max(parallel_s, 1e-12), delta);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("openmp disabled; parallel kernels run serially\n");
#endif

    SplitMix64 rng(2718);
    const auto log = ProperLoss::log_loss();

    for (const auto& [n, m] : std::vector<std::pair<std::size_t, std::size_t>>{
             {2000, 16}, {8000, 32}}) {
        const auto q = synthetic_joint(n, m, rng);
        const auto h = bayes_predictor(q);
        const std::string size = std::to_string(n) + "x" + std::to_string(m);

        double serial_value = 0.0;
        double parallel_value = 0.0;
        const double s_risk =
            time_best_of(3, [&] { serial_value = reference::risk(q, h, log); });
        const double p_risk = time_best_of(3, [&] { parallel_value = risk(q, h, log); });
        report("risk", size.c_str(), s_risk, p_risk,
               std::abs(serial_value - parallel_value));

        const double s_ent = time_best_of(
            3, [&] { serial_value = reference::expected_gen_entropy(q, log); });
        const double p_ent =
            time_best_of(3, [&] { parallel_value = expected_gen_entropy(q, log); });
        report("expected_gen_entropy", size.c_str(), s_ent, p_ent,
               std::abs(serial_value - parallel_value));
    }

    // Exhaustive rule enumeration: 2^18 rules over 18 forecast groups.
    {
        const std::size_t groups = 18;
        const std::size_t actions = 2;
        std::vector<std::vector<double>> table(groups, std::vector<double>(actions));
        for (auto& row : table) {
            for (auto& v : row) v = rng.next_range(0.0, 1.0);
        }
        const std::size_t num_rules = std::size_t{1} << groups;
        auto rule_cost = [&](std::size_t code) {
            double acc = 0.0;
            for (std::size_t g = 0; g < groups; ++g) {
                acc += table[g][code % actions];
                code /= actions;
            }
            return acc;
        };
        std::pair<std::size_t, double> serial_best;
        std::pair<std::size_t, double> parallel_best;
        const double s_enum = time_best_of(3, [&] {
            serial_best = reference::argmin(num_rules, rule_cost);
        });
        const double p_enum = time_best_of(3, [&] {
            parallel_best = chunked_argmin(num_rules, rule_cost);
        });
        report("rule_enumeration", "2^18 rules", s_enum, p_enum,
               std::abs(serial_best.second - parallel_best.second));
        if (serial_best.first != parallel_best.first) {
            std::printf("rule_enumeration argmin mismatch: %zu vs %zu\n", serial_best.first,
                        parallel_best.first);
            return 1;
        }
    }

    return 0;
}
