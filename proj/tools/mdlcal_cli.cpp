#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mdlcal/audit.hpp"
#include "mdlcal/decision.hpp"
#include "mdlcal/io.hpp"
#include "mdlcal/scenario.hpp"

namespace {

using namespace mdlcal;

struct CommonOpts {
    std::vector<std::string> configs;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int parallel = 1;
    bool strict = false;
};

ScenarioConfig load_with_overrides(const std::string& path, const CommonOpts& opts) {
    ScenarioConfig cfg = load_config(path);
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    if (opts.seed_set) {
        cfg.seed = opts.seed;
        cfg.seed_set = true;
        cfg.solver.seed = opts.seed;
    }
    return cfg;
}

void print_outcome(const std::string& name, const RunOutcome& outcome, bool strict) {
    std::printf("%s: value=%s %s\n", name.c_str(), format_sig(outcome.solve_value).c_str(),
                outcome.exit_ok(strict) ? "ok" : "FAILED");
    for (const auto& f : outcome.failures) std::printf("  failure: %s\n", f.c_str());
    for (const auto& w : outcome.warnings) std::printf("  warning: %s\n", w.c_str());
}

int run_configs(const CommonOpts& opts) {
    if (opts.configs.empty()) {
        std::fprintf(stderr, "no --config given\n");
        return 2;
    }
    std::vector<RunOutcome> outcomes(opts.configs.size());
    std::vector<std::string> errors(opts.configs.size());

#ifdef _OPENMP
    if (opts.parallel > 1) omp_set_num_threads(opts.parallel);
#endif

    auto run_one = [&](std::size_t i) {
        try {
            // Scenario outputs land in per-config directories when several
            // configs share one --out.
            ScenarioConfig cfg = load_with_overrides(opts.configs[i], opts);
            if (!opts.out_dir.empty() && opts.configs.size() > 1) {
                cfg.output_dir = opts.out_dir + "/" + cfg.name;
            }
            outcomes[i] = run_scenario(cfg);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    if (opts.parallel > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (long long i = 0; i < static_cast<long long>(opts.configs.size()); ++i) {
            run_one(static_cast<std::size_t>(i));
        }
    } else {
        for (std::size_t i = 0; i < opts.configs.size(); ++i) run_one(i);
    }

    int status = 0;
    for (std::size_t i = 0; i < opts.configs.size(); ++i) {
        if (!errors[i].empty()) {
            std::fprintf(stderr, "%s: error: %s\n", opts.configs[i].c_str(), errors[i].c_str());
            status = 2;
            continue;
        }
        print_outcome(opts.configs[i], outcomes[i], opts.strict);
        if (!outcomes[i].exit_ok(opts.strict)) status = 1;
    }
    return status;
}

int solve_only(const CommonOpts& opts) {
    if (opts.configs.size() != 1) {
        std::fprintf(stderr, "solve needs exactly one --config\n");
        return 2;
    }
    ScenarioConfig cfg = load_with_overrides(opts.configs[0], opts);
    const SolveResult res = solve_max_entropy(*cfg.envelope, cfg.loss, cfg.solver);
    const std::string path = cfg.output_dir + "/solve.json";
    write_solve_report(path, res);
    std::printf("value=%s gap=%s -> %s\n", format_sig(res.value).c_str(),
                format_sig(res.duality_gap).c_str(), path.c_str());
    return res.converged ? 0 : 1;
}

int decide(const std::string& predictor_path, const std::string& costs_path,
           const std::string& out_dir) {
    const Predictor h = predictor_from_json(load_structured(predictor_path));
    const CostMatrix cm = cost_matrix_from_json(load_structured(costs_path));
    const DecisionRule rule = induced_rule(h, cm);

    std::string csv = "forecast,action,expected_cost\n";
    for (std::size_t g = 0; g < rule.num_groups(); ++g) {
        const auto& f = rule.forecasts()[g];
        std::string fs;
        for (std::size_t y = 0; y < f.size(); ++y) {
            if (y) fs += ";";
            fs += format_sig(f[y]);
        }
        csv += fs + "," + cm.action(rule.actions()[g]) + "," +
               format_sig(expected_cost(cm, f, rule.actions()[g])) + "\n";
    }
    write_file(out_dir + "/decisions.csv", csv);
    std::printf("wrote %s/decisions.csv (%zu distinct forecasts)\n", out_dir.c_str(),
                rule.num_groups());

    if (cm.num_actions() == 2 && cm.num_labels() == 2) {
        try {
            const ThresholdSpec spec = threshold_from_costs(cm);
            JsonWriter w;
            w.begin_object();
            w.key("odds_threshold");
            w.value(spec.odds_threshold);
            w.key("positive_action");
            w.value(cm.action(spec.positive_action));
            w.end_object();
            write_file(out_dir + "/threshold.json", w.str() + "\n");
            std::printf("threshold: act '%s' when odds > %s\n",
                        cm.action(spec.positive_action).c_str(),
                        format_sig(spec.odds_threshold).c_str());
        } catch (const DegenerateCosts& e) {
            std::printf("threshold undefined: %s\n", e.what());
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"calibration, refinement, and entropy audits over distribution envelopes"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto add_common = [&](CLI::App* cmd, bool multi_config) {
        auto* c = cmd->add_option("--config", opts.configs, "scenario config (.json or .toml)");
        if (!multi_config) c->expected(1);
        cmd->add_option("--out", opts.out_dir, "output directory override");
        cmd->add_option("--seed", opts.seed, "seed override")
            ->each([&](const std::string&) { opts.seed_set = true; });
        cmd->add_flag("--strict", opts.strict, "treat warnings as failures");
    };

    auto* run_cmd = app.add_subcommand("run", "full solve -> audit -> decide pipeline");
    add_common(run_cmd, true);
    run_cmd->add_option("--parallel", opts.parallel, "run scenarios concurrently");

    auto* solve_cmd = app.add_subcommand("solve", "max-entropy solve only");
    add_common(solve_cmd, false);

    auto* audit_cmd = app.add_subcommand("audit", "solve and audit (alias of run)");
    add_common(audit_cmd, true);

    std::string predictor_path;
    std::string costs_path;
    std::string decide_out = "out";
    auto* decide_cmd = app.add_subcommand("decide", "induced decision rule for a predictor");
    decide_cmd->add_option("--predictor", predictor_path, "predictor JSON")->required();
    decide_cmd->add_option("--costs", costs_path, "cost matrix JSON")->required();
    decide_cmd->add_option("--out", decide_out, "output directory");

    auto* scenario_cmd = app.add_subcommand("scenario", "scenario utilities");
    scenario_cmd->require_subcommand(1);
    std::uint64_t gen_seed = 0;
    std::size_t gen_n = 2;
    std::size_t gen_m = 2;
    std::size_t gen_k = 3;
    std::string gen_out = "generated";
    auto* gen_cmd = scenario_cmd->add_subcommand("gen", "generate a random hull scenario");
    gen_cmd->add_option("--seed", gen_seed, "generator seed")->required();
    gen_cmd->add_option("--n", gen_n, "feature count");
    gen_cmd->add_option("--m", gen_m, "label count");
    gen_cmd->add_option("--k", gen_k, "vertex count");
    gen_cmd->add_option("--out", gen_out, "output directory");

    auto* selftest_cmd = app.add_subcommand("selftest", "run the built-in invariant suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed() || audit_cmd->parsed()) return run_configs(opts);
        if (solve_cmd->parsed()) return solve_only(opts);
        if (decide_cmd->parsed()) return decide(predictor_path, costs_path, decide_out);
        if (gen_cmd->parsed()) {
            const ScenarioConfig cfg =
                mdlcal::generate_random_scenario(gen_seed, gen_n, gen_m, gen_k, gen_out);
            std::printf("wrote %s/scenario.json (%s)\n", gen_out.c_str(),
                        cfg.envelope->describe().c_str());
            return 0;
        }
        if (selftest_cmd->parsed()) {
            std::vector<std::string> lines;
            const std::size_t failures = mdlcal::selftest(lines);
            for (const auto& l : lines) std::printf("%s\n", l.c_str());
            return failures == 0 ? 0 : 1;
        }
    } catch (const mdlcal::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
