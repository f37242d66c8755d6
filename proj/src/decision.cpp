#include "mdlcal/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdlcal/decomposition.hpp"
#include "mdlcal/parallel.hpp"

namespace mdlcal {

namespace {

// Distinct quantized forecasts in first-seen order, plus each feature's group.
struct PredictorGroups {
    std::vector<Forecast> forecasts;
    std::vector<std::size_t> group_of_feature;
};

PredictorGroups distinct_forecasts(const Predictor& h) {
    PredictorGroups out;
    out.group_of_feature.resize(h.n());
    std::map<ForecastKey, std::size_t> index;
    for (std::size_t i = 0; i < h.n(); ++i) {
        auto key = quantize_forecast(h.at(i));
        auto [it, inserted] = index.try_emplace(std::move(key), out.forecasts.size());
        if (inserted) out.forecasts.push_back(h.at(i));
        out.group_of_feature[i] = it->second;
    }
    return out;
}

std::size_t rule_count_or_throw(std::size_t groups, std::size_t actions) {
    double count = 1.0;
    for (std::size_t g = 0; g < groups; ++g) {
        count *= static_cast<double>(actions);
        if (count > static_cast<double>(kMaxRuleEnumeration)) {
            throw TooManyRules(std::to_string(actions) + "^" + std::to_string(groups) +
                               " rules exceed the enumeration limit");
        }
    }
    return static_cast<std::size_t>(count);
}

// group_costs[g][a] = sum over the group's features of sum_y q[x,y] c(a,y).
std::vector<std::vector<double>> group_cost_table(const FiniteJoint& q,
                                                  const PredictorGroups& groups,
                                                  const CostMatrix& cm) {
    std::vector<std::vector<double>> table(groups.forecasts.size(),
                                           std::vector<double>(cm.num_actions(), 0.0));
    for (std::size_t i = 0; i < q.n(); ++i) {
        const auto row = q.row(i);
        auto& dest = table[groups.group_of_feature[i]];
        for (std::size_t a = 0; a < cm.num_actions(); ++a) {
            double acc = 0.0;
            for (std::size_t y = 0; y < q.m(); ++y) acc += row[y] * cm.cost(a, y);
            dest[a] += acc;
        }
    }
    return table;
}

std::vector<std::size_t> decode_rule(std::size_t code, std::size_t groups, std::size_t actions) {
    std::vector<std::size_t> rule(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        rule[g] = code % actions;
        code /= actions;
    }
    return rule;
}

std::size_t encode_rule(const std::vector<std::size_t>& rule, std::size_t actions) {
    std::size_t code = 0;
    for (std::size_t g = rule.size(); g-- > 0;) code = code * actions + rule[g];
    return code;
}

}  // namespace

DecisionRule::DecisionRule(std::vector<Forecast> forecasts, std::vector<std::size_t> actions)
    : forecasts_(std::move(forecasts)), actions_(std::move(actions)) {
    if (forecasts_.size() != actions_.size()) {
        throw Error("decision rule has mismatched forecast/action tables");
    }
    for (std::size_t g = 0; g < forecasts_.size(); ++g) {
        index_.emplace(quantize_forecast(forecasts_[g]), g);
    }
}

std::size_t DecisionRule::action_for(const Forecast& f) const {
    const auto it = index_.find(quantize_forecast(f));
    if (it == index_.end()) throw Error("decision rule has no entry for this forecast");
    return actions_[it->second];
}

DecisionRule induced_rule(const Predictor& h, const CostMatrix& cm) {
    if (h.m() != cm.num_labels()) {
        throw SpaceMismatch("cost matrix labels do not match the predictor");
    }
    auto groups = distinct_forecasts(h);
    std::vector<std::size_t> actions(groups.forecasts.size());
    for (std::size_t g = 0; g < groups.forecasts.size(); ++g) {
        std::size_t best = 0;
        double best_cost = expected_cost(cm, groups.forecasts[g], 0);
        for (std::size_t a = 1; a < cm.num_actions(); ++a) {
            const double c = expected_cost(cm, groups.forecasts[g], a);
            if (c < best_cost) {
                best_cost = c;
                best = a;
            }
        }
        actions[g] = best;
    }
    return DecisionRule(std::move(groups.forecasts), std::move(actions));
}

ThresholdSpec threshold_from_costs(const CostMatrix& cm) {
    if (cm.num_actions() != 2 || cm.num_labels() != 2) {
        throw Error("threshold_from_costs needs a 2x2 cost matrix");
    }
    // Label 0 is positive. The action preferred on certain-positive forecasts
    // plays the "order the test" role.
    const std::size_t pos = cm.cost(0, 0) < cm.cost(1, 0) ? 0 : 1;
    const std::size_t neg = 1 - pos;
    const double c_tp = cm.cost(pos, 0);
    const double c_fp = cm.cost(pos, 1);
    const double c_fn = cm.cost(neg, 0);
    const double c_tn = cm.cost(neg, 1);
    if (c_tp == c_fn) {
        throw DegenerateCosts("actions cost the same on the positive label");
    }
    return ThresholdSpec{(c_tn - c_fp) / (c_tp - c_fn), pos};
}

double average_decision_cost(const FiniteJoint& q, const Predictor& h, const DecisionRule& rule,
                             const CostMatrix& cm) {
    require_same_spaces(q, h);
    if (cm.num_labels() != q.m()) {
        throw SpaceMismatch("cost matrix labels do not match the joint");
    }
    std::vector<std::size_t> action_of_feature(q.n());
    for (std::size_t i = 0; i < q.n(); ++i) action_of_feature[i] = rule.action_for(h.at(i));
    return chunked_sum(q.n(), [&](std::size_t i) {
        const auto row = q.row(i);
        const std::size_t a = action_of_feature[i];
        double acc = 0.0;
        for (std::size_t y = 0; y < q.m(); ++y) acc += row[y] * cm.cost(a, y);
        return acc;
    });
}

AvgOptimality verify_avg_optimality(const FiniteJoint& q, const Predictor& h,
                                    const CostMatrix& cm) {
    require_same_spaces(q, h);
    // Prop coverage requires calibration; measure it with the Brier divergence.
    const double calib = calibration_error(q, h, ProperLoss::brier());
    if (calib > 1e-9) {
        throw NotCalibrated("predictor has Brier calibration error " + std::to_string(calib));
    }

    const auto groups = distinct_forecasts(h);
    const std::size_t num_rules = rule_count_or_throw(groups.forecasts.size(), cm.num_actions());
    const auto table = group_cost_table(q, groups, cm);

    auto rule_cost = [&](std::size_t code) {
        double acc = 0.0;
        for (std::size_t g = 0; g < table.size(); ++g) {
            acc += table[g][code % cm.num_actions()];
            code /= cm.num_actions();
        }
        return acc;
    };

    const auto [best_code, best_cost] = chunked_argmin(num_rules, rule_cost);

    const DecisionRule induced = induced_rule(h, cm);
    const double induced_cost = rule_cost(encode_rule(induced.actions(), cm.num_actions()));

    AvgOptimality out;
    out.induced_cost = induced_cost;
    out.best_cost = best_cost;
    out.optimal = induced_cost <= best_cost + 1e-9;
    if (!out.optimal) out.best_actions = decode_rule(best_code, table.size(), cm.num_actions());
    return out;
}

double generalized_cost_entropy(const FiniteJoint& q, const CostMatrix& cm) {
    if (cm.num_labels() != q.m()) {
        throw SpaceMismatch("cost matrix labels do not match the joint");
    }
    return chunked_sum(q.n(), [&](std::size_t i) {
        const auto row = q.row(i);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < cm.num_actions(); ++a) {
            double acc = 0.0;
            for (std::size_t y = 0; y < q.m(); ++y) acc += row[y] * cm.cost(a, y);
            best = std::min(best, acc);
        }
        return best;
    });
}

WorstCaseReport verify_worstcase_optimality(const Envelope& env, const SolveResult& res,
                                            const CostMatrix& cm,
                                            const std::vector<FiniteJoint>& probes) {
    for (std::size_t i = 0; i < probes.size(); ++i) {
        if (!env.contains(probes[i], 1e-6)) {
            throw ProbeOutsideEnvelope("probe " + std::to_string(i) +
                                       " is not a member of " + env.describe());
        }
    }

    WorstCaseReport report;
    report.qstar_cost_entropy = generalized_cost_entropy(res.q_star, cm);
    report.probe_cost_entropies.emplace_back("q_star", report.qstar_cost_entropy);
    report.max_probe_cost_entropy = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const double hc = generalized_cost_entropy(probes[i], cm);
        report.probe_cost_entropies.emplace_back("probe_" + std::to_string(i), hc);
        report.max_probe_cost_entropy = std::max(report.max_probe_cost_entropy, hc);
    }
    report.consistent =
        probes.empty() || report.qstar_cost_entropy >= report.max_probe_cost_entropy - 1e-9;

    // Worst-case cost over the probes, compared across every enumerable rule on
    // h*'s forecast groups.
    const auto groups = distinct_forecasts(res.h_star);
    const std::size_t num_rules = rule_count_or_throw(groups.forecasts.size(), cm.num_actions());
    std::vector<std::vector<std::vector<double>>> tables;
    tables.reserve(probes.size() + 1);
    tables.push_back(group_cost_table(res.q_star, groups, cm));
    for (const auto& p : probes) tables.push_back(group_cost_table(p, groups, cm));

    auto worst_cost = [&](std::size_t code) {
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& table : tables) {
            double acc = 0.0;
            std::size_t c = code;
            for (std::size_t g = 0; g < table.size(); ++g) {
                acc += table[g][c % cm.num_actions()];
                c /= cm.num_actions();
            }
            worst = std::max(worst, acc);
        }
        return worst;
    };

    const auto [best_code, best_worst] = chunked_argmin(num_rules, worst_cost);
    const DecisionRule induced = induced_rule(res.h_star, cm);
    const double induced_worst = worst_cost(encode_rule(induced.actions(), cm.num_actions()));

    report.induced_worst_cost = induced_worst;
    report.best_worst_cost = best_worst;
    report.optimal = induced_worst <= best_worst + 1e-6;
    if (!report.optimal) {
        report.best_actions = decode_rule(best_code, groups.forecasts.size(), cm.num_actions());
    }
    return report;
}

namespace reference {

double average_decision_cost(const FiniteJoint& q, const Predictor& h, const DecisionRule& rule,
                             const CostMatrix& cm) {
    require_same_spaces(q, h);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.n(); ++i) {
        const auto row = q.row(i);
        const std::size_t a = rule.action_for(h.at(i));
        for (std::size_t y = 0; y < q.m(); ++y) acc += row[y] * cm.cost(a, y);
    }
    return acc;
}

std::pair<std::size_t, double> min_rule_cost(std::size_t num_rules, std::size_t num_groups,
                                             std::size_t num_actions,
                                             const std::vector<std::vector<double>>& group_costs) {
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t code = 0; code < num_rules; ++code) {
        double acc = 0.0;
        std::size_t c = code;
        for (std::size_t g = 0; g < num_groups; ++g) {
            acc += group_costs[g][c % num_actions];
            c /= num_actions;
        }
        if (acc < best_cost) {
            best_cost = acc;
            best = code;
        }
    }
    return {best, best_cost};
}

}  // namespace reference

}  // namespace mdlcal
