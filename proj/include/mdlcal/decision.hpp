#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdlcal/dist.hpp"
#include "mdlcal/envelope.hpp"
#include "mdlcal/scoring.hpp"
#include "mdlcal/solver.hpp"

namespace mdlcal {

// Exhaustive rule enumeration refuses beyond this many rules.
inline constexpr std::size_t kMaxRuleEnumeration = std::size_t{1} << 20;

// Deterministic map from a predictor's distinct forecasts to actions.
class DecisionRule {
public:
    DecisionRule(std::vector<Forecast> forecasts, std::vector<std::size_t> actions);

    std::size_t num_groups() const { return forecasts_.size(); }
    const std::vector<Forecast>& forecasts() const { return forecasts_; }
    const std::vector<std::size_t>& actions() const { return actions_; }

    // Action for a forecast seen at build time; throws on an unknown forecast.
    std::size_t action_for(const Forecast& f) const;

private:
    std::vector<Forecast> forecasts_;
    std::vector<std::size_t> actions_;
    std::map<ForecastKey, std::size_t> index_;
};

// Per distinct forecast, the expected-cost-minimizing action (lowest index on
// ties).
DecisionRule induced_rule(const Predictor& h, const CostMatrix& cm);

struct ThresholdSpec {
    // Recommend positive_action when nu/(1-nu) > odds_threshold, with nu the
    // forecast probability of label 0.
    double odds_threshold;
    std::size_t positive_action;
};

// Binary two-action threshold (c_TN - c_FP) / (c_TP - c_FN) under expected-cost
// minimization. Label 0 is the positive label; positive_action is the action
// with the smaller cost on it. Throws DegenerateCosts when the two actions cost
// the same on the positive label.
ThresholdSpec threshold_from_costs(const CostMatrix& cm);

// E_q[c(rule(h(x)), y)].
double average_decision_cost(const FiniteJoint& q, const Predictor& h, const DecisionRule& rule,
                             const CostMatrix& cm);

struct AvgOptimality {
    bool optimal;
    double induced_cost;
    double best_cost;
    std::vector<std::size_t> best_actions;  // a strictly cheaper rule when !optimal
};

// Exhaustively checks that the induced rule minimizes average cost among all
// deterministic rules over the predictor's forecast groups. Requires h
// calibrated for q (Brier calibration error <= 1e-9).
AvgOptimality verify_avg_optimality(const FiniteJoint& q, const Predictor& h,
                                    const CostMatrix& cm);

struct WorstCaseReport {
    bool consistent;  // Q* attains the maximum generalized cost-entropy among probes
    bool optimal;     // no enumerated rule has smaller worst-case average cost
    double qstar_cost_entropy;
    double max_probe_cost_entropy;
    double induced_worst_cost;
    double best_worst_cost;
    std::vector<std::size_t> best_actions;
    std::vector<std::pair<std::string, double>> probe_cost_entropies;
};

// Measures whether the cost function is consistent with the solved loss
// (Q* maximizes the generalized cost-entropy among the probes) and whether the
// induced rule of h* attains the minimal worst-case average cost over the
// probes among all enumerable rules.
WorstCaseReport verify_worstcase_optimality(const Envelope& env, const SolveResult& res,
                                            const CostMatrix& cm,
                                            const std::vector<FiniteJoint>& probes);

// inf over decision rules of E_q[c(rule(x), y)]: per-feature best actions.
double generalized_cost_entropy(const FiniteJoint& q, const CostMatrix& cm);

namespace reference {
// Serial twins for testing the parallel kernels.
double average_decision_cost(const FiniteJoint& q, const Predictor& h, const DecisionRule& rule,
                             const CostMatrix& cm);
std::pair<std::size_t, double> min_rule_cost(std::size_t num_rules, std::size_t num_groups,
                                             std::size_t num_actions,
                                             const std::vector<std::vector<double>>& group_costs);
}  // namespace reference

}  // namespace mdlcal
