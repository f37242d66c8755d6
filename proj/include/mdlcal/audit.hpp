#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdlcal/decomposition.hpp"
#include "mdlcal/envelope.hpp"
#include "mdlcal/solver.hpp"

namespace mdlcal {

// Slack allowed on the entropy-gap bound for calibration error.
inline constexpr double kAuditBoundTol = 1e-8;

struct AuditRow {
    std::string dist_id;
    double risk;
    double calibration_error;
    double refinement;
    double entropy_gap;  // solver value minus the probe's expected generalized entropy
    bool bound_satisfied;
    double identity_residual;
    bool clip_active;
};

struct AuditReport {
    std::vector<AuditRow> rows;

    bool all_bounds_ok() const;
    double max_identity_residual() const;
};

// Decomposes each probe under h* and checks its calibration error against the
// entropy gap. Probes must lie in the envelope (tolerance 1e-6). When ids is
// null, probes are labeled probe_0, probe_1, ...
AuditReport audit_envelope(const Envelope& env, const SolveResult& res, const ProperLoss& pl,
                           const std::vector<FiniteJoint>& probes,
                           const std::vector<std::string>* ids = nullptr);

struct DisparityCurve {
    std::vector<double> ts;
    std::vector<double> calib_errors;
    // Steps where the error increased along the path; reported, not asserted.
    std::size_t monotonicity_violations;
};

// Calibration error of h* along the straight-line mixtures (1-t) q + t Q*.
DisparityCurve disparity_curve(const FiniteJoint& q, const SolveResult& res, const ProperLoss& pl,
                               std::size_t steps);

struct TradeoffLedger {
    double a;  // E_q[H(q(y|x))], the minimal error for q
    double b;  // E_q[l(y, h*(x))]
    double calibration_error;
    double refinement;
    bool lower_bound_ok;  // a <= b + 1e-9
    bool identity_ok;     // |b - calib - refinement| <= 1e-8
};

TradeoffLedger tradeoff_ledger(const FiniteJoint& q, const SolveResult& res, const ProperLoss& pl);

struct LipschitzReport {
    double kappa_hat;  // max |gap| / divergence over the sampled superset
    double epsilon;
    double max_gap_observed;  // over members at radius <= epsilon
    double bound_value;       // kappa_hat * epsilon
    std::size_t samples;
};

// Samples ball members along seeded tilt directions at a radii grid, estimates
// the entropy-vs-divergence Lipschitz constant on a superset of the probe set,
// and records the largest entropy gap actually observed.
LipschitzReport lipschitz_check(const DivergenceBallEnvelope& ball, const ProperLoss& pl,
                                std::size_t samples, std::uint64_t seed);

struct TemperatureFit {
    double t_star;
    Predictor repaired;
    double nll_before;
    double nll_after;
};

// One-parameter post-hoc recalibration: h(x) -> softmax(log h(x) / t), with t
// chosen to minimize log-loss risk under q over a grid plus golden-section
// refinement.
TemperatureFit fit_temperature(const FiniteJoint& q, const Predictor& h, double t_min = 0.05,
                               double t_max = 20.0, std::size_t steps = 400);

}  // namespace mdlcal
