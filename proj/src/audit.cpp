#include "mdlcal/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdlcal/parallel.hpp"

namespace mdlcal {

bool AuditReport::all_bounds_ok() const {
    for (const auto& r : rows) {
        if (!r.bound_satisfied) return false;
    }
    return true;
}

double AuditReport::max_identity_residual() const {
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.identity_residual);
    return worst;
}

AuditReport audit_envelope(const Envelope& env, const SolveResult& res, const ProperLoss& pl,
                           const std::vector<FiniteJoint>& probes,
                           const std::vector<std::string>* ids) {
    for (std::size_t i = 0; i < probes.size(); ++i) {
        if (!env.contains(probes[i], 1e-6)) {
            throw ProbeOutsideEnvelope("probe " + std::to_string(i) +
                                       " is not a member of " + env.describe());
        }
    }

    AuditReport report;
    report.rows.resize(probes.size());
    parallel_for(probes.size(), [&](std::size_t i) {
        const auto& q = probes[i];
        const Decomposition d = decompose(q, res.h_star, pl);
        const double gap = res.value - expected_gen_entropy(q, pl);
        AuditRow row;
        row.dist_id = ids ? (*ids)[i] : "probe_" + std::to_string(i);
        row.risk = d.risk;
        row.calibration_error = d.calibration_error;
        row.refinement = d.refinement;
        row.entropy_gap = gap;
        row.bound_satisfied = d.calibration_error <= gap + kAuditBoundTol;
        row.identity_residual = d.identity_residual();
        row.clip_active = d.clip_active;
        report.rows[i] = std::move(row);
    });
    return report;
}

DisparityCurve disparity_curve(const FiniteJoint& q, const SolveResult& res, const ProperLoss& pl,
                               std::size_t steps) {
    if (steps < 2) throw Error("disparity_curve needs steps >= 2");
    DisparityCurve curve;
    curve.ts.resize(steps);
    curve.calib_errors.resize(steps);
    parallel_for(steps, [&](std::size_t s) {
        const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
        curve.ts[s] = t;
        curve.calib_errors[s] =
            calibration_error(blend(q, res.q_star, t), res.h_star, pl);
    });
    curve.monotonicity_violations = 0;
    for (std::size_t s = 1; s < steps; ++s) {
        if (curve.calib_errors[s] > curve.calib_errors[s - 1] + 1e-12) {
            ++curve.monotonicity_violations;
        }
    }
    return curve;
}

TradeoffLedger tradeoff_ledger(const FiniteJoint& q, const SolveResult& res,
                               const ProperLoss& pl) {
    const double a = expected_gen_entropy(q, pl);
    const Decomposition d = decompose(q, res.h_star, pl);
    TradeoffLedger ledger;
    ledger.a = a;
    ledger.b = d.risk;
    ledger.calibration_error = d.calibration_error;
    ledger.refinement = d.refinement;
    ledger.lower_bound_ok = a <= d.risk + 1e-9;
    ledger.identity_ok = d.identity_residual() <= kIdentityTol;
    return ledger;
}

LipschitzReport lipschitz_check(const DivergenceBallEnvelope& ball, const ProperLoss& pl,
                                std::size_t samples, std::uint64_t seed) {
    if (samples < 10) throw Error("lipschitz_check needs samples >= 10");
    const double eps = ball.epsilon();
    const double center_entropy = expected_gen_entropy(ball.center(), pl);

    // Probe radii live inside the ball; the kappa estimate additionally sees a
    // finer grid, so every probe pair is covered by the estimate.
    const std::vector<double> probe_fracs = {0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> kappa_fracs = {0.1, 0.3, 0.5, 0.7, 0.9};
    kappa_fracs.insert(kappa_fracs.end(), probe_fracs.begin(), probe_fracs.end());

    const std::size_t directions =
        (samples + probe_fracs.size() - 1) / probe_fracs.size();

    SplitMix64 rng(seed);
    const std::size_t cells = ball.n() * ball.m();

    double kappa = 0.0;
    double max_gap = 0.0;
    std::size_t probe_count = 0;
    for (std::size_t d = 0; d < directions; ++d) {
        std::vector<double> g(cells);
        for (auto& x : g) x = rng.next_range(-1.0, 1.0);
        for (double frac : kappa_fracs) {
            const double radius = frac * eps;
            const DivergenceBallEnvelope sub(ball.center(), radius, ball.kind());
            const FiniteJoint member = sub.linear_oracle(g);
            const double div = divergence(ball.kind(), ball.center(), member);
            const double gap = std::abs(center_entropy - expected_gen_entropy(member, pl));
            if (div >= 1e-6) kappa = std::max(kappa, gap / div);
            const bool is_probe =
                std::find(probe_fracs.begin(), probe_fracs.end(), frac) != probe_fracs.end();
            if (is_probe && div <= eps + 1e-9) {
                max_gap = std::max(max_gap, gap);
                ++probe_count;
            }
        }
    }

    return LipschitzReport{kappa, eps, max_gap, kappa * eps, probe_count};
}

TemperatureFit fit_temperature(const FiniteJoint& q, const Predictor& h, double t_min,
                               double t_max, std::size_t steps) {
    if (!(t_min > 0.0) || !(t_max > t_min) || steps < 2) {
        throw Error("fit_temperature needs 0 < t_min < t_max and steps >= 2");
    }
    const ProperLoss nll_loss = ProperLoss::log_loss();

    // Work in logit space on floored forecasts.
    std::vector<std::vector<double>> logits;
    logits.reserve(h.n());
    for (std::size_t i = 0; i < h.n(); ++i) {
        std::vector<double> l(h.m());
        for (std::size_t y = 0; y < h.m(); ++y) {
            l[y] = std::log(std::max(h.at(i)[y], kForecastFloor));
        }
        logits.push_back(std::move(l));
    }

    auto rescaled = [&](double t) {
        std::vector<Forecast> fs;
        fs.reserve(h.n());
        for (const auto& l : logits) {
            double peak = -std::numeric_limits<double>::infinity();
            for (double v : l) peak = std::max(peak, v / t);
            std::vector<double> p(l.size());
            double z = 0.0;
            for (std::size_t y = 0; y < l.size(); ++y) {
                p[y] = std::exp(l[y] / t - peak);
                z += p[y];
            }
            for (auto& x : p) x /= z;
            fs.emplace_back(std::move(p));
        }
        return Predictor(h.x_space(), std::move(fs));
    };

    auto nll_at = [&](double t) { return risk(q, rescaled(t), nll_loss); };

    const double nll_before = risk(q, h, nll_loss);

    const double span = (t_max - t_min) / static_cast<double>(steps - 1);
    double best_t = t_min;
    double best_nll = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = t_min + span * static_cast<double>(s);
        const double v = nll_at(t);
        if (v < best_nll) {
            best_nll = v;
            best_t = t;
            best_idx = s;
        }
    }

    // Golden-section refinement around the best grid cell.
    {
        constexpr double invphi = 0.6180339887498949;
        double a = t_min + span * static_cast<double>(best_idx > 0 ? best_idx - 1 : 0);
        double b = t_min + span * static_cast<double>(std::min(best_idx + 1, steps - 1));
        double x1 = b - invphi * (b - a);
        double x2 = a + invphi * (b - a);
        double f1 = nll_at(x1);
        double f2 = nll_at(x2);
        while (b - a > 1e-10) {
            if (f1 > f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + invphi * (b - a);
                f2 = nll_at(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - invphi * (b - a);
                f1 = nll_at(x1);
            }
            const double mid = f1 < f2 ? x1 : x2;
            const double val = f1 < f2 ? f1 : f2;
            if (val < best_nll) {
                best_nll = val;
                best_t = mid;
            }
        }
    }

    // The identity temperature is always a candidate, so repair never costs
    // log-loss risk.
    {
        const double identity = nll_at(1.0);
        if (identity < best_nll) {
            best_nll = identity;
            best_t = 1.0;
        }
    }
    if (nll_before < best_nll) {
        return TemperatureFit{1.0, h, nll_before, nll_before};
    }
    return TemperatureFit{best_t, rescaled(best_t), nll_before, best_nll};
}

}  // namespace mdlcal
