#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdlcal/decision.hpp"
#include "mdlcal/envelope.hpp"
#include "mdlcal/scoring.hpp"
#include "mdlcal/solver.hpp"

namespace mdlcal {

inline constexpr const char* kToolVersion = "0.1.0";

// Random scenario generation refuses tables past this size.
inline constexpr std::size_t kMaxScenarioCells = 10000;

struct ProbeSpec {
    enum class Kind { explicit_list, vertices, random };
    Kind kind = Kind::vertices;
    std::vector<FiniteJoint> list;  // explicit_list
    std::size_t count = 0;          // random
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::shared_ptr<const Envelope> envelope;
    ProperLoss loss = ProperLoss::log_loss();
    SolverOptions solver;
    ProbeSpec probes;
    std::size_t disparity_steps = 11;
    std::size_t lipschitz_samples = 0;
    std::optional<CostMatrix> cost_matrix;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t saddle_probes = 64;
    std::string output_dir = "out";
    std::string source_text;  // raw config bytes; hashed into the manifest
};

// Loads and validates a .json or .toml scenario config. Distribution references
// may be inline objects or paths relative to the config file.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig config_from_json(const nlohmann::json& j, const std::string& base_dir);

struct RunManifest {
    std::string config_hash;
    std::string tool_version;
    std::uint64_t seed;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> files;
};

struct RunOutcome {
    RunManifest manifest;
    bool hard_pass = true;
    std::vector<std::string> failures;
    std::vector<std::string> warnings;
    double solve_value = 0.0;

    bool exit_ok(bool strict) const {
        return hard_pass && (!strict || warnings.empty());
    }
};

// Full pipeline: solve, certify the saddle, audit every probe, trace disparity
// curves, optionally check the Lipschitz bound and the induced decision rule.
// Reports land in cfg.output_dir; the manifest lists every emitted file.
RunOutcome run_scenario(const ScenarioConfig& cfg);

// Deterministic solve.json emitter shared by `run` and `solve`.
void write_solve_report(const std::string& path, const SolveResult& res);

// Writes k Dirichlet(1) joints over an n x m grid (seeded splitmix stream,
// exponential draws by inverse CDF) plus a hull scenario config referencing
// them, then returns the loaded config.
ScenarioConfig generate_random_scenario(std::uint64_t seed, std::size_t n, std::size_t m,
                                        std::size_t k, const std::string& out_dir);

// Built-in invariant sweeps behind the `selftest` subcommand; returns the
// number of failed checks and appends one line per suite.
std::size_t selftest(std::vector<std::string>& lines);

}  // namespace mdlcal
