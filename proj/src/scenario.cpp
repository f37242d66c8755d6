#include "mdlcal/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "mdlcal/audit.hpp"
#include "mdlcal/decomposition.hpp"
#include "mdlcal/io.hpp"
#include "mdlcal/rng.hpp"

namespace mdlcal {

namespace {

namespace fs = std::filesystem;

FiniteJoint joint_from_ref(const nlohmann::json& ref, const std::string& base_dir) {
    if (ref.is_string()) {
        fs::path p = ref.get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
        return joint_from_json(load_structured(p.string()));
    }
    if (ref.is_object()) return joint_from_json(ref);
    throw ConfigError("distribution reference must be a path or an inline object");
}

std::shared_ptr<const Envelope> envelope_from_json(const nlohmann::json& j,
                                                   const std::string& base_dir) {
    if (!j.is_object() || !j.contains("kind")) {
        throw ConfigError("envelope needs a 'kind'");
    }
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "hull") {
        if (!j.contains("vertices") || !j["vertices"].is_array() || j["vertices"].empty()) {
            throw ConfigError("hull envelope needs a non-empty 'vertices' array");
        }
        std::vector<FiniteJoint> vertices;
        for (const auto& v : j["vertices"]) vertices.push_back(joint_from_ref(v, base_dir));
        return std::make_shared<ConvexHullEnvelope>(std::move(vertices));
    }
    if (kind == "kl_ball" || kind == "chi2_ball" || kind == "tv_ball") {
        if (!j.contains("center")) throw ConfigError("ball envelope needs a 'center'");
        if (!j.contains("epsilon")) throw ConfigError("ball envelope needs an 'epsilon'");
        const DivergenceKind dk = kind == "kl_ball"     ? DivergenceKind::kl
                                  : kind == "chi2_ball" ? DivergenceKind::chi2
                                                        : DivergenceKind::tv;
        return std::make_shared<DivergenceBallEnvelope>(joint_from_ref(j["center"], base_dir),
                                                        j["epsilon"].get<double>(), dk);
    }
    if (kind == "cvar") {
        if (!j.contains("base")) throw ConfigError("cvar envelope needs a 'base'");
        if (!j.contains("alpha")) throw ConfigError("cvar envelope needs an 'alpha'");
        return std::make_shared<CVaREnvelope>(joint_from_ref(j["base"], base_dir),
                                              j["alpha"].get<double>());
    }
    throw ConfigError("unknown envelope kind '" + kind + "'");
}

ProperLoss loss_from_json(const nlohmann::json& j) {
    if (j.is_null()) return ProperLoss::log_loss();
    const std::string name = j.value("name", std::string("log"));
    if (name == "log") return ProperLoss::log_loss(j.value("bound", kDefaultLogBound));
    if (name == "brier") return ProperLoss::brier();
    throw ConfigError("unknown loss '" + name + "' (expected 'log' or 'brier')");
}

std::string csv_forecast(const Forecast& f) {
    std::string out;
    for (std::size_t y = 0; y < f.size(); ++y) {
        if (y) out += ";";
        out += format_sig(f[y]);
    }
    return out;
}

}  // namespace

ScenarioConfig config_from_json(const nlohmann::json& j, const std::string& base_dir) {
    ScenarioConfig cfg;
    cfg.name = j.value("name", std::string("scenario"));
    if (!j.contains("envelope")) throw ConfigError("config needs an 'envelope'");
    cfg.envelope = envelope_from_json(j["envelope"], base_dir);
    cfg.loss = loss_from_json(j.contains("loss") ? j["loss"] : nlohmann::json());

    if (j.contains("solver")) {
        const auto& s = j["solver"];
        cfg.solver.gap_tol = s.value("gap_tol", cfg.solver.gap_tol);
        cfg.solver.max_iters = s.value("max_iters", cfg.solver.max_iters);
        cfg.solver.line_search = s.value("line_search", cfg.solver.line_search);
        cfg.solver.rounds = s.value("rounds", cfg.solver.rounds);
    }

    if (j.contains("probes")) {
        const auto& p = j["probes"];
        const std::string kind = p.value("kind", std::string("vertices"));
        if (kind == "vertices") {
            cfg.probes.kind = ProbeSpec::Kind::vertices;
        } else if (kind == "random") {
            cfg.probes.kind = ProbeSpec::Kind::random;
            cfg.probes.count = p.value("count", std::size_t{8});
        } else if (kind == "explicit") {
            cfg.probes.kind = ProbeSpec::Kind::explicit_list;
            if (!p.contains("list") || !p["list"].is_array()) {
                throw ConfigError("explicit probes need a 'list'");
            }
            for (const auto& item : p["list"]) {
                cfg.probes.list.push_back(joint_from_ref(item, base_dir));
            }
        } else {
            throw ConfigError("unknown probe kind '" + kind + "'");
        }
    }

    if (j.contains("audit")) {
        const auto& a = j["audit"];
        cfg.disparity_steps = a.value("disparity_steps", cfg.disparity_steps);
        cfg.lipschitz_samples = a.value("lipschitz_samples", cfg.lipschitz_samples);
    }

    if (j.contains("decision") && j["decision"].contains("cost_matrix")) {
        const auto& c = j["decision"]["cost_matrix"];
        if (c.is_string()) {
            fs::path p = c.get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
            cfg.cost_matrix = cost_matrix_from_json(load_structured(p.string()));
        } else {
            cfg.cost_matrix = cost_matrix_from_json(c);
        }
    }

    if (j.contains("seed")) {
        cfg.seed = j["seed"].get<std::uint64_t>();
        cfg.seed_set = true;
        cfg.solver.seed = cfg.seed;
    }
    cfg.saddle_probes = j.value("saddle_probes", cfg.saddle_probes);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);

    // Validation the modules cannot do on their own.
    if (cfg.probes.kind == ProbeSpec::Kind::vertices &&
        !dynamic_cast<const ConvexHullEnvelope*>(cfg.envelope.get())) {
        throw ConfigError("probe kind 'vertices' needs a hull envelope; " +
                          cfg.envelope->describe() + " has no vertices");
    }
    const bool wants_randomness =
        cfg.probes.kind == ProbeSpec::Kind::random || cfg.lipschitz_samples > 0;
    if (wants_randomness && !cfg.seed_set) {
        throw ConfigError("config requests randomness but sets no seed");
    }
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    const std::string text = read_file(path);
    nlohmann::json j;
    if (fs::path(path).extension() == ".toml") {
        j = toml_to_json(text);
    } else {
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("cannot parse '" + path + "': " + e.what());
        }
    }
    ScenarioConfig cfg = config_from_json(j, fs::path(path).parent_path().string());
    cfg.source_text = text;
    return cfg;
}

void write_solve_report(const std::string& path, const SolveResult& res) {
    JsonWriter w;
    w.begin_object();
    w.key("value");
    w.value(res.value);
    w.key("iterations");
    w.value_u64(res.iterations);
    w.key("duality_gap");
    w.value(res.duality_gap);
    w.key("converged");
    w.value(res.converged);
    w.key("q_star");
    write_joint(w, res.q_star);
    w.key("h_star");
    write_predictor(w, res.h_star);
    w.key("trace");
    w.begin_array();
    for (double v : res.trace) w.value(v);
    w.end_array();
    w.end_object();
    write_file(path, w.str() + "\n");
}

namespace {

void write_saddle_json(const std::string& path, const SaddleCertificate& cert) {
    JsonWriter w;
    w.begin_object();
    w.key("left_slack");
    w.value(cert.left_slack);
    w.key("right_slack");
    w.value(cert.right_slack);
    w.key("passed");
    w.value(cert.passed());
    w.key("witness_q");
    write_joint(w, cert.witness_q);
    w.key("witness_h");
    write_predictor(w, cert.witness_h);
    w.end_object();
    write_file(path, w.str() + "\n");
}

void write_audit_csv(const std::string& path, const AuditReport& report) {
    std::string out = "dist_id,risk,calib,refinement,entropy_gap,bound_ok,residual\n";
    for (const auto& r : report.rows) {
        out += r.dist_id;
        out += ",";
        out += format_sig(r.risk);
        out += ",";
        out += format_sig(r.calibration_error);
        out += ",";
        out += format_sig(r.refinement);
        out += ",";
        out += format_sig(r.entropy_gap);
        out += ",";
        out += r.bound_satisfied ? "1" : "0";
        out += ",";
        out += format_sig(r.identity_residual);
        out += "\n";
    }
    write_file(path, out);
}

void write_disparity_csv(const std::string& path, const DisparityCurve& curve) {
    std::string out = "t,calib\n";
    for (std::size_t i = 0; i < curve.ts.size(); ++i) {
        out += format_sig(curve.ts[i]);
        out += ",";
        out += format_sig(curve.calib_errors[i]);
        out += "\n";
    }
    write_file(path, out);
}

void write_lipschitz_json(const std::string& path, const LipschitzReport& rep) {
    JsonWriter w;
    w.begin_object();
    w.key("kappa_hat");
    w.value(rep.kappa_hat);
    w.key("epsilon");
    w.value(rep.epsilon);
    w.key("max_gap_observed");
    w.value(rep.max_gap_observed);
    w.key("bound_value");
    w.value(rep.bound_value);
    w.key("samples");
    w.value_u64(rep.samples);
    w.end_object();
    write_file(path, w.str() + "\n");
}

void write_decisions_csv(const std::string& path, const DecisionRule& rule,
                         const CostMatrix& cm) {
    std::string out = "forecast,action,expected_cost\n";
    for (std::size_t g = 0; g < rule.num_groups(); ++g) {
        const auto& f = rule.forecasts()[g];
        const std::size_t a = rule.actions()[g];
        out += csv_forecast(f);
        out += ",";
        out += cm.action(a);
        out += ",";
        out += format_sig(expected_cost(cm, f, a));
        out += "\n";
    }
    write_file(path, out);
}

void write_threshold_json(const std::string& path, const ThresholdSpec& spec,
                          const CostMatrix& cm) {
    JsonWriter w;
    w.begin_object();
    w.key("odds_threshold");
    w.value(spec.odds_threshold);
    w.key("positive_action");
    w.value(cm.action(spec.positive_action));
    w.end_object();
    write_file(path, w.str() + "\n");
}

std::string sanitize_id(const std::string& id) {
    std::string out;
    for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

}  // namespace

RunOutcome run_scenario(const ScenarioConfig& cfg) {
    RunOutcome outcome;
    outcome.manifest.config_hash =
        "fnv1a64:" + std::to_string(fnv1a64(cfg.source_text.empty() ? cfg.name
                                                                    : cfg.source_text));
    outcome.manifest.tool_version = kToolVersion;
    outcome.manifest.seed = cfg.seed;
    outcome.manifest.started_at = iso8601_utc_now();

    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);
    auto emit = [&](const std::string& name) {
        outcome.manifest.files.push_back(name);
        return (out_dir / name).string();
    };
    auto fail = [&](const std::string& msg) {
        outcome.hard_pass = false;
        outcome.failures.push_back(msg);
    };
    auto warn = [&](const std::string& msg) { outcome.warnings.push_back(msg); };

    const Envelope& env = *cfg.envelope;

    // Solve.
    SolveResult res = solve_max_entropy(env, cfg.loss, cfg.solver);
    outcome.solve_value = res.value;
    write_solve_report(emit("solve.json"), res);
    if (!res.converged) {
        warn("solver stopped at duality gap " + format_sig(res.duality_gap) +
             " > tolerance " + format_sig(cfg.solver.gap_tol));
    }

    // Saddle certificate.
    const SaddleCertificate cert =
        verify_saddle(env, res, cfg.loss, cfg.saddle_probes, cfg.seed ^ 0x5ADD1EULL);
    write_saddle_json(emit("saddle.json"), cert);
    if (!cert.passed()) {
        fail("saddle certificate failed: left=" + format_sig(cert.left_slack) +
             " right=" + format_sig(cert.right_slack));
    }

    // Probes.
    std::vector<FiniteJoint> probes;
    std::vector<std::string> ids;
    probes.push_back(res.q_star);
    ids.push_back("q_star");
    switch (cfg.probes.kind) {
        case ProbeSpec::Kind::vertices: {
            const auto* hull = dynamic_cast<const ConvexHullEnvelope*>(&env);
            if (!hull) throw ConfigError("probe kind 'vertices' needs a hull envelope");
            for (std::size_t k = 0; k < hull->num_vertices(); ++k) {
                probes.push_back(hull->vertices()[k]);
                ids.push_back("vertex_" + std::to_string(k));
            }
            break;
        }
        case ProbeSpec::Kind::random: {
            SplitMix64 rng(cfg.seed ^ 0x9B0BEULL);
            for (std::size_t i = 0; i < cfg.probes.count; ++i) {
                probes.push_back(env.random_member(rng));
                ids.push_back("random_" + std::to_string(i));
            }
            break;
        }
        case ProbeSpec::Kind::explicit_list: {
            for (std::size_t i = 0; i < cfg.probes.list.size(); ++i) {
                probes.push_back(cfg.probes.list[i]);
                ids.push_back("probe_" + std::to_string(i));
            }
            break;
        }
    }

    // Audit + per-probe artifacts.
    const AuditReport audit = audit_envelope(env, res, cfg.loss, probes, &ids);
    write_audit_csv(emit("audit.csv"), audit);
    for (const auto& row : audit.rows) {
        if (!row.bound_satisfied) {
            fail("calibration bound violated for " + row.dist_id + ": calib=" +
                 format_sig(row.calibration_error) + " gap=" + format_sig(row.entropy_gap));
        }
        if (row.clip_active) {
            warn("loss clip active for " + row.dist_id + "; identity not asserted");
        } else if (row.identity_residual > kIdentityTol) {
            fail("decomposition identity residual " + format_sig(row.identity_residual) +
                 " for " + row.dist_id);
        }
    }

    for (std::size_t i = 0; i < probes.size(); ++i) {
        const DisparityCurve curve = disparity_curve(probes[i], res, cfg.loss,
                                                     cfg.disparity_steps);
        write_disparity_csv(emit("disparity_" + sanitize_id(ids[i]) + ".csv"), curve);
        if (curve.calib_errors.back() > kAuditBoundTol) {
            fail("disparity curve for " + ids[i] + " ends at " +
                 format_sig(curve.calib_errors.back()));
        }
        if (curve.monotonicity_violations > 0) {
            warn("disparity curve for " + ids[i] + " is non-monotone at " +
                 std::to_string(curve.monotonicity_violations) + " steps");
        }

        const TradeoffLedger ledger = tradeoff_ledger(probes[i], res, cfg.loss);
        if (!ledger.lower_bound_ok) {
            fail("minimal error exceeds realized risk for " + ids[i] + ": a=" +
                 format_sig(ledger.a) + " b=" + format_sig(ledger.b));
        }
        if (!ledger.identity_ok) {
            const auto d = decompose(probes[i], res.h_star, cfg.loss);
            if (!d.clip_active) {
                fail("trade-off ledger identity failed for " + ids[i]);
            }
        }
    }

    // Optional Lipschitz audit (meaningful on divergence balls).
    if (cfg.lipschitz_samples > 0) {
        const auto* ball = dynamic_cast<const DivergenceBallEnvelope*>(&env);
        if (!ball) {
            warn("lipschitz_samples set but the envelope is not a divergence ball; skipped");
        } else {
            const LipschitzReport rep =
                lipschitz_check(*ball, cfg.loss, cfg.lipschitz_samples, cfg.seed ^ 0x11B5ULL);
            write_lipschitz_json(emit("lipschitz.json"), rep);
            if (rep.max_gap_observed > rep.bound_value + 1e-6) {
                fail("entropy gap " + format_sig(rep.max_gap_observed) +
                     " exceeds the Lipschitz bound " + format_sig(rep.bound_value));
            }
        }
    }

    // Optional decision-rule audit.
    if (cfg.cost_matrix) {
        const CostMatrix& cm = *cfg.cost_matrix;
        const DecisionRule rule = induced_rule(res.h_star, cm);
        write_decisions_csv(emit("decisions.csv"), rule, cm);
        if (cm.num_actions() == 2 && cm.num_labels() == 2) {
            try {
                write_threshold_json(emit("threshold.json"), threshold_from_costs(cm), cm);
            } catch (const DegenerateCosts& e) {
                warn(std::string("threshold undefined: ") + e.what());
            }
        }
        try {
            std::vector<FiniteJoint> decision_probes(probes.begin() + 1, probes.end());
            const WorstCaseReport wc =
                verify_worstcase_optimality(env, res, cm, decision_probes);
            if (!wc.consistent) {
                warn("cost function is not consistent with the loss: q_star cost-entropy " +
                     format_sig(wc.qstar_cost_entropy) + " < max probe " +
                     format_sig(wc.max_probe_cost_entropy));
            } else if (!wc.optimal) {
                warn("induced rule is not worst-case optimal: " +
                     format_sig(wc.induced_worst_cost) + " vs " +
                     format_sig(wc.best_worst_cost));
            }
        } catch (const TooManyRules& e) {
            warn(std::string("worst-case rule enumeration skipped: ") + e.what());
        }
    }

    // Manifest last, listing itself.
    outcome.manifest.finished_at = iso8601_utc_now();
    outcome.manifest.files.push_back("manifest.json");
    {
        JsonWriter w;
        w.begin_object();
        w.key("config_hash");
        w.value(outcome.manifest.config_hash);
        w.key("tool_version");
        w.value(outcome.manifest.tool_version);
        w.key("seed");
        w.value_u64(outcome.manifest.seed);
        w.key("started_at");
        w.value(outcome.manifest.started_at);
        w.key("finished_at");
        w.value(outcome.manifest.finished_at);
        w.key("files");
        w.begin_array();
        for (const auto& f : outcome.manifest.files) w.value(f);
        w.end_array();
        w.key("hard_pass");
        w.value(outcome.hard_pass);
        w.key("failures");
        w.begin_array();
        for (const auto& f : outcome.failures) w.value(f);
        w.end_array();
        w.key("warnings");
        w.begin_array();
        for (const auto& s : outcome.warnings) w.value(s);
        w.end_array();
        w.end_object();
        write_file((out_dir / "manifest.json").string(), w.str() + "\n");
    }

    return outcome;
}

ScenarioConfig generate_random_scenario(std::uint64_t seed, std::size_t n, std::size_t m,
                                        std::size_t k, const std::string& out_dir) {
    if (n < 1 || m < 2 || k < 1) {
        throw SizeLimit("random scenarios need n >= 1, m >= 2, k >= 1");
    }
    if (n * m > kMaxScenarioCells) {
        throw SizeLimit("n*m = " + std::to_string(n * m) + " exceeds the limit of " +
                        std::to_string(kMaxScenarioCells));
    }

    std::vector<std::string> xs;
    std::vector<std::string> ys;
    for (std::size_t i = 0; i < n; ++i) xs.push_back("x" + std::to_string(i));
    for (std::size_t y = 0; y < m; ++y) ys.push_back("y" + std::to_string(y));
    const FeatureSpace xspace(xs);
    const LabelSpace yspace(ys);

    SplitMix64 rng(seed);
    std::vector<std::string> vertex_files;
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> cells(n * m);
        double total = 0.0;
        for (auto& c : cells) {
            c = rng.next_exp();
            total += c;
        }
        for (auto& c : cells) c /= total;
        const FiniteJoint joint(xspace, yspace, std::move(cells));
        JsonWriter w;
        write_joint(w, joint);
        const std::string name = "dist_" + std::to_string(j) + ".json";
        write_file((fs::path(out_dir) / name).string(), w.str() + "\n");
        vertex_files.push_back(name);
    }

    JsonWriter w;
    w.begin_object();
    w.key("name");
    w.value("random_" + std::to_string(seed));
    w.key("seed");
    w.value_u64(seed);
    w.key("output_dir");
    w.value((fs::path(out_dir) / "out").string());
    w.key("envelope");
    w.begin_object();
    w.key("kind");
    w.value("hull");
    w.key("vertices");
    w.begin_array();
    for (const auto& f : vertex_files) w.value(f);
    w.end_array();
    w.end_object();
    w.key("loss");
    w.begin_object();
    w.key("name");
    w.value("log");
    w.key("bound");
    w.value(kDefaultLogBound);
    w.end_object();
    w.key("probes");
    w.begin_object();
    w.key("kind");
    w.value("vertices");
    w.end_object();
    w.end_object();
    const std::string config_path = (fs::path(out_dir) / "scenario.json").string();
    write_file(config_path, w.str() + "\n");

    return load_config(config_path);
}

}  // namespace mdlcal
