// Acceptance suite: every criterion prints one PASS/FAIL line with its
// measured slack and wall time. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "mdlcal/audit.hpp"
#include "mdlcal/decision.hpp"
#include "mdlcal/decomposition.hpp"
#include "mdlcal/io.hpp"
#include "mdlcal/scenario.hpp"
#include "mdlcal/solver.hpp"
#include "testutil.hpp"

using namespace mdlcal;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
public:
    Criterion(int number, std::string name, double budget_seconds)
        : number_(number),
          name_(std::move(name)),
          budget_(budget_seconds),
          start_(std::chrono::steady_clock::now()) {}

    void finish(bool ok, const std::string& detail) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        const bool in_budget = secs < budget_;
        const bool pass = ok && in_budget;
        std::printf("%s criterion %2d: %s (%s) [%.2fs / %.0fs]\n", pass ? "PASS" : "FAIL",
                    number_, name_.c_str(), detail.c_str(), secs, budget_);
        if (!pass) ++g_failures;
        if (!in_budget) std::printf("     criterion %2d exceeded its runtime budget\n", number_);
    }

private:
    int number_;
    std::string name_;
    double budget_;
    std::chrono::steady_clock::time_point start_;
};

SolverOptions tight_solver() {
    SolverOptions opts;
    opts.gap_tol = 1e-9;
    opts.max_iters = 50000;
    return opts;
}

struct SolvedHull {
    ConvexHullEnvelope hull;
    SolveResult fw;
    SolveResult game;
};

}  // namespace

int main(int argc, char** argv) {
    const fs::path scenario_dir = argc > 1 ? fs::path(argv[1]) : fs::path("scenarios");
    const auto log = ProperLoss::log_loss();
    const auto brier = ProperLoss::brier();
    const double ln2 = std::log(2.0);

    // 1. Decomposition identity on random instances, clip inactive.
    {
        Criterion c(1, "decomposition identity", 5.0);
        SplitMix64 rng(1001);
        double worst = 0.0;
        bool clip_hit = false;
        for (const auto& pl : {log, brier}) {
            for (int t = 0; t < 1000; ++t) {
                const std::size_t n = 1 + rng.next_u64() % 8;
                const std::size_t m = 2 + rng.next_u64() % 3;
                const auto q = random_joint(n, m, rng);
                const auto h = random_interior_predictor(n, m, rng);
                const auto d = decompose(q, h, pl);
                clip_hit = clip_hit || d.clip_active;
                worst = std::max(worst, d.identity_residual());
            }
        }
        c.finish(worst <= 1e-8 && !clip_hit,
                 "max |risk - calib - refinement| = " + format_sig(worst));
    }

    // 2. The Bayes predictor is perfectly calibrated.
    {
        Criterion c(2, "bayes-predictor calibration", 2.0);
        SplitMix64 rng(1002);
        double worst = 0.0;
        for (int t = 0; t < 500; ++t) {
            const std::size_t n = 1 + rng.next_u64() % 6;
            const std::size_t m = 2 + rng.next_u64() % 3;
            const auto q = random_joint(n, m, rng);
            worst = std::max(worst, calibration_error(q, bayes_predictor(q), log));
        }
        c.finish(worst <= 1e-9, "max calibration error = " + format_sig(worst));
    }

    // 3. Closed-form hull instance.
    SolveResult bernoulli_res = [&] {
        const ConvexHullEnvelope hull({bernoulli(0.2), bernoulli(0.9)});
        return solve_max_entropy(hull, log, tight_solver());
    }();
    {
        Criterion c(3, "closed-form max-entropy instance", 1.0);
        const double value_err = std::abs(bernoulli_res.value - ln2);
        const double cond_err = std::abs(bernoulli_res.q_star.at(0, 0) - 0.5);
        const bool ok =
            value_err <= 1e-6 && cond_err <= 1e-5 && bernoulli_res.duality_gap <= 1e-7;
        c.finish(ok, "|value - ln2| = " + format_sig(value_err) + ", |p* - 0.5| = " +
                         format_sig(cond_err) + ", gap = " +
                         format_sig(bernoulli_res.duality_gap));
    }

    // 4 + 5. Solver cross-validation and saddle certificates on the same set.
    std::vector<SolvedHull> solved;
    {
        Criterion c(4, "frank-wolfe vs multiplicative weights", 60.0);
        SplitMix64 rng(1004);
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            const std::size_t k = 1 + rng.next_u64() % 5;
            const std::size_t n = 1 + rng.next_u64() % 4;
            const std::size_t m = 2 + rng.next_u64() % 2;
            std::vector<FiniteJoint> vertices;
            for (std::size_t v = 0; v < k; ++v) vertices.push_back(random_joint(n, m, rng));
            ConvexHullEnvelope hull(vertices);
            auto fw = solve_max_entropy(hull, log, tight_solver());
            auto game = minimax_game(hull, log, 10000);
            worst = std::max(worst, std::abs(fw.value - game.value));
            solved.push_back(SolvedHull{std::move(hull), std::move(fw), std::move(game)});
        }
        c.finish(worst <= 0.02 * log.bound(),
                 "max |fw - game| = " + format_sig(worst) + " vs " +
                     format_sig(0.02 * log.bound()));
    }
    {
        Criterion c(5, "saddle certificates", 60.0);
        double worst_left = 0.0;
        double worst_right = 0.0;
        bool all_pass = true;
        for (const auto& s : solved) {
            const auto cert = verify_saddle(s.hull, s.fw, log, 16, 0xCADE);
            worst_left = std::min(worst_left, cert.left_slack);
            worst_right = std::min(worst_right, cert.right_slack);
            all_pass = all_pass && cert.passed();
        }
        // Negative control: a corrupted h* must fail the right inequality.
        auto corrupted = bernoulli_res;
        {
            auto probs = corrupted.h_star.at(0).probs();
            probs[0] += 0.1;
            probs[1] -= 0.1;
            corrupted.h_star =
                Predictor(corrupted.h_star.x_space(), {Forecast(std::move(probs))});
        }
        const ConvexHullEnvelope bern_hull({bernoulli(0.2), bernoulli(0.9)});
        const bool control_fails =
            verify_saddle(bern_hull, corrupted, log, 16, 0xCADE).right_slack < -kSaddleSlackTol;
        c.finish(all_pass && control_fails,
                 "min slacks " + format_sig(worst_left) + " / " + format_sig(worst_right) +
                     ", corrupted control " + (control_fails ? "fails as required" : "PASSED"));
    }

    // 6 + 8. Calibration error bound and the trade-off ledger on the same probes.
    double worst_ledger_gap = -1e300;
    double worst_ledger_identity = 0.0;
    {
        Criterion c6(6, "calibration error bound", 30.0);
        SplitMix64 rng(1006);
        double worst_bound = -1e300;
        int count = 0;
        while (count < 1000) {
            // Rotate through the envelope families.
            const int family = count % 4;
            std::shared_ptr<Envelope> env;
            const auto center = random_joint(3, 2, rng);
            switch (family) {
                case 0: {
                    const std::size_t k = 2 + rng.next_u64() % 3;
                    std::vector<FiniteJoint> vertices;
                    for (std::size_t v = 0; v < k; ++v) {
                        vertices.push_back(random_joint(3, 2, rng));
                    }
                    env = std::make_shared<ConvexHullEnvelope>(std::move(vertices));
                    break;
                }
                case 1:
                    env = std::make_shared<DivergenceBallEnvelope>(
                        center, rng.next_range(0.01, 0.1), DivergenceKind::kl);
                    break;
                case 2:
                    env = std::make_shared<DivergenceBallEnvelope>(
                        center, rng.next_range(0.02, 0.15), DivergenceKind::tv);
                    break;
                default:
                    env = std::make_shared<CVaREnvelope>(center, rng.next_range(0.1, 0.6));
                    break;
            }
            const auto res = solve_max_entropy(*env, log, tight_solver());
            std::vector<FiniteJoint> probes;
            for (int p = 0; p < 4; ++p) probes.push_back(env->random_member(rng));
            const auto report = audit_envelope(*env, res, log, probes);
            for (const auto& row : report.rows) {
                worst_bound = std::max(worst_bound, row.calibration_error - row.entropy_gap);
            }
            for (const auto& probe : probes) {
                const auto ledger = tradeoff_ledger(probe, res, log);
                worst_ledger_gap = std::max(worst_ledger_gap, ledger.a - ledger.b);
                worst_ledger_identity =
                    std::max(worst_ledger_identity,
                             std::abs(ledger.b - ledger.calibration_error - ledger.refinement));
            }
            count += static_cast<int>(probes.size());
        }

        // Tight closed-form instance: hull {0.2, 0.9} probed at 0.2.
        const ConvexHullEnvelope bern_hull({bernoulli(0.2), bernoulli(0.9)});
        const auto report =
            audit_envelope(bern_hull, bernoulli_res, log, {bernoulli(0.2)});
        const double expected_kl = kl_reference({0.2, 0.8}, {0.5, 0.5});
        const double tight_err =
            std::abs(report.rows[0].calibration_error - expected_kl);
        const bool tight_ok = tight_err <= 1e-6 && report.rows[0].bound_satisfied;

        c6.finish(worst_bound <= 1e-8 && tight_ok,
                  "max calib - gap = " + format_sig(worst_bound) +
                      ", tight-instance |calib - KL| = " + format_sig(tight_err));
    }

    // 7. Disparity curves converge to zero; the closed-form segment decreases.
    {
        Criterion c(7, "disparity curve limit", 5.0);
        double worst_end = 0.0;
        for (std::size_t i = 0; i < solved.size() && i < 50; ++i) {
            const auto curve =
                disparity_curve(solved[i].hull.vertices()[0], solved[i].fw, log, 11);
            worst_end = std::max(worst_end, curve.calib_errors.back());
        }
        const auto segment = disparity_curve(bernoulli(0.2), bernoulli_res, log, 11);
        bool strictly_decreasing = true;
        for (std::size_t s = 1; s < segment.calib_errors.size(); ++s) {
            if (!(segment.calib_errors[s] < segment.calib_errors[s - 1])) {
                strictly_decreasing = false;
            }
        }
        worst_end = std::max(worst_end, segment.calib_errors.back());
        c.finish(worst_end <= 1e-8 && strictly_decreasing,
                 "max curve endpoint = " + format_sig(worst_end) + ", segment " +
                     (strictly_decreasing ? "strictly decreasing" : "NOT decreasing"));
    }

    // 8. Trade-off ledger, computed on criterion 6's probes.
    {
        Criterion c(8, "trade-off ledger", 1.0);
        c.finish(worst_ledger_gap <= 1e-9 && worst_ledger_identity <= 1e-8,
                 "max a - b = " + format_sig(worst_ledger_gap) + ", max identity residual = " +
                     format_sig(worst_ledger_identity));
    }

    // 9. Induced rules minimize average cost among all rules, exhaustively.
    {
        Criterion c(9, "induced-rule average optimality", 10.0);
        SplitMix64 rng(1009);
        bool all_ok = true;
        for (int t = 0; t < 200; ++t) {
            const std::size_t n = 1 + rng.next_u64() % 3;
            const std::size_t m = 2 + rng.next_u64() % 2;
            const auto q = random_joint(n, m, rng);
            // Alternate between the two calibrated predictors at hand.
            const auto h = (t % 2 == 0) ? bayes_predictor(q)
                                        : constant_predictor(n, y_marginal(q));
            std::vector<std::vector<double>> costs(2, std::vector<double>(m));
            for (auto& row : costs) {
                for (auto& v : row) v = rng.next_range(0.0, 5.0);
            }
            const CostMatrix cm({"a0", "a1"}, costs);
            const auto result = verify_avg_optimality(q, h, cm);
            all_ok = all_ok && result.optimal;
        }
        c.finish(all_ok, all_ok ? "200/200 minimizers" : "a cheaper rule exists");
    }

    // 10. Binary threshold rule.
    {
        Criterion c(10, "cost threshold rule", 2.0);
        const CostMatrix screening({"test", "skip"}, {{0.0, 1.0}, {10.0, 0.0}});
        const auto spec = threshold_from_costs(screening);
        const bool worked_ok = std::abs(spec.odds_threshold - 0.1) <= 1e-12 &&
                               spec.positive_action == 0;

        SplitMix64 rng(1010);
        int agreements = 0;
        int tested = 0;
        while (tested < 1000) {
            const double c00 = rng.next_range(0.0, 5.0);
            const double c01 = rng.next_range(0.0, 5.0);
            const double c10 = rng.next_range(0.0, 5.0);
            const double c11 = rng.next_range(0.0, 5.0);
            if (std::abs(c00 - c10) < 1e-9) continue;
            const CostMatrix cm({"a0", "a1"}, {{c00, c01}, {c10, c11}});
            const auto th = threshold_from_costs(cm);
            const double nu = rng.next_range(1e-4, 1.0 - 1e-4);
            if (std::abs(nu / (1.0 - nu) - th.odds_threshold) < 1e-9) continue;
            ++tested;
            const Forecast f({nu, 1.0 - nu});
            const std::size_t chosen = nu / (1.0 - nu) > th.odds_threshold
                                           ? th.positive_action
                                           : 1 - th.positive_action;
            const std::size_t argmin =
                expected_cost(cm, f, 0) <= expected_cost(cm, f, 1) ? 0 : 1;
            if (chosen == argmin) ++agreements;
        }
        c.finish(worked_ok && agreements == 1000,
                 "threshold = " + format_sig(spec.odds_threshold) + ", agreement " +
                     std::to_string(agreements) + "/1000");
    }

    // 11. Entropy gaps obey the empirical Lipschitz bound and shrink with the ball.
    {
        Criterion c(11, "divergence-ball entropy gaps", 20.0);
        bool ok = true;
        double worst_slack = -1e300;
        for (std::uint64_t center_seed : {101ULL, 102ULL, 103ULL}) {
            SplitMix64 crng(center_seed);
            const auto center = random_joint(2, 2, crng);
            double prev = 1e300;
            for (double eps : {0.1, 0.05, 0.01}) {
                const DivergenceBallEnvelope ball(center, eps, DivergenceKind::kl);
                const auto rep = lipschitz_check(ball, log, 40, 2024);
                worst_slack = std::max(worst_slack, rep.max_gap_observed - rep.bound_value);
                if (rep.max_gap_observed > rep.bound_value + 1e-6) ok = false;
                if (rep.max_gap_observed > prev + 1e-12) ok = false;
                prev = rep.max_gap_observed;
            }
        }
        c.finish(ok, "max gap - bound = " + format_sig(worst_slack));
    }

    // 12. Supergradient versus central finite differences.
    {
        Criterion c(12, "entropy supergradient check", 5.0);
        SplitMix64 rng(1012);
        const double step = 1e-5;
        double worst_rel = 0.0;
        for (const auto& pl : {log, brier}) {
            for (int t = 0; t < 50; ++t) {
                const auto q = random_joint(3, 2, rng);
                const auto d = random_joint(3, 2, rng);
                const auto g = entropy_supergradient(q, pl);
                double analytic = 0.0;
                for (std::size_t cidx = 0; cidx < g.size(); ++cidx) {
                    analytic += g[cidx] * (d.probs()[cidx] - q.probs()[cidx]);
                }
                const double numeric = (expected_gen_entropy(blend(q, d, step), pl) -
                                        expected_gen_entropy(blend(q, d, -step), pl)) /
                                       (2.0 * step);
                worst_rel = std::max(worst_rel, std::abs(analytic - numeric) /
                                                    std::max(1.0, std::abs(numeric)));
            }
        }
        c.finish(worst_rel <= 1e-4, "max relative error = " + format_sig(worst_rel));
    }

    // 13. Rerunning a scenario reproduces the report bytes.
    {
        Criterion c(13, "pipeline determinism", 5.0);
        const fs::path out1 = fs::temp_directory_path() / "mdlcal_accept_a";
        const fs::path out2 = fs::temp_directory_path() / "mdlcal_accept_b";
        fs::remove_all(out1);
        fs::remove_all(out2);
        bool ok = true;
        std::string detail = "all report bytes identical";
        try {
            auto cfg = load_config((scenario_dir / "bernoulli_hull.toml").string());
            cfg.output_dir = out1.string();
            const auto first = run_scenario(cfg);
            cfg.output_dir = out2.string();
            const auto second = run_scenario(cfg);
            ok = first.hard_pass && second.hard_pass;
            if (!ok) detail = "scenario hard assertions failed";
            for (const auto& entry : fs::directory_iterator(out1)) {
                const auto name = entry.path().filename().string();
                if (name == "manifest.json") continue;  // timestamps differ
                if (read_file(entry.path().string()) !=
                    read_file((out2 / name).string())) {
                    ok = false;
                    detail = name + " differs between runs";
                }
            }
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        c.finish(ok, detail);
    }

    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}
