#include "mdlcal/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace mdlcal {

namespace {

double floored(double p) { return std::max(p, kForecastFloor); }

double sq_norm(const Forecast& h) {
    double s = 0.0;
    for (std::size_t y = 0; y < h.size(); ++y) s += h[y] * h[y];
    return s;
}

}  // namespace

ProperLoss::ProperLoss(std::string name, double bound, LossFn loss, EntropyFn entropy,
                       SubgradientFn subgradient)
    : name_(std::move(name)),
      bound_(bound),
      loss_(std::move(loss)),
      entropy_(std::move(entropy)),
      subgradient_(std::move(subgradient)) {}

ProperLoss ProperLoss::log_loss(double bound) {
    auto loss = [bound](std::size_t y, const Forecast& h) {
        return std::min(bound, -std::log(floored(h[y])));
    };
    // H(eta) = E_{y~eta}[min(M, -log eta_y)]: Shannon entropy with the same
    // clip the loss carries, so H(eta) == L(eta, eta) exactly.
    auto entropy = [bound](const Forecast& eta) {
        double acc = 0.0;
        for (std::size_t y = 0; y < eta.size(); ++y) {
            acc += eta[y] * std::min(bound, -std::log(floored(eta[y])));
        }
        return acc;
    };
    auto subgradient = [](const Forecast& h) {
        std::vector<double> g(h.size());
        for (std::size_t y = 0; y < h.size(); ++y) g[y] = -std::log(floored(h[y])) - 1.0;
        return g;
    };
    return ProperLoss("log", bound, std::move(loss), std::move(entropy), std::move(subgradient));
}

ProperLoss ProperLoss::brier() {
    // l(y, h) = ||e_y - h||^2, so H(eta) = 1 - ||eta||^2 and the loss never
    // exceeds 2.
    auto loss = [](std::size_t y, const Forecast& h) {
        return 1.0 - 2.0 * h[y] + sq_norm(h);
    };
    auto entropy = [](const Forecast& eta) { return 1.0 - sq_norm(eta); };
    auto subgradient = [](const Forecast& h) {
        std::vector<double> g(h.size());
        for (std::size_t y = 0; y < h.size(); ++y) g[y] = -2.0 * h[y];
        return g;
    };
    return ProperLoss("brier", 2.0, std::move(loss), std::move(entropy), std::move(subgradient));
}

ProperLoss ProperLoss::from_entropy(std::string name, double bound, EntropyFn entropy,
                                    SubgradientFn subgradient) {
    auto loss = [bound, entropy, subgradient](std::size_t y, const Forecast& h) {
        const double base = entropy(h);
        const auto g = subgradient(h);
        double value = base + g[y];
        for (std::size_t k = 0; k < h.size(); ++k) value -= g[k] * h[k];
        return std::clamp(value, 0.0, bound);
    };
    return ProperLoss(std::move(name), bound, std::move(loss), std::move(entropy),
                      std::move(subgradient));
}

double expected_loss(const ProperLoss& pl, const Forecast& eta, const Forecast& h) {
    double acc = 0.0;
    for (std::size_t y = 0; y < eta.size(); ++y) acc += eta[y] * pl.loss(y, h);
    return acc;
}

double bregman(const ProperLoss& pl, const Forecast& eta, const Forecast& h) {
    return expected_loss(pl, eta, h) - pl.entropy(eta);
}

CostMatrix::CostMatrix(std::vector<std::string> actions, std::vector<std::vector<double>> costs)
    : actions_(std::move(actions)), costs_(std::move(costs)) {
    if (actions_.empty()) throw InvalidDistribution("cost matrix needs at least one action");
    if (costs_.size() != actions_.size()) {
        throw InvalidDistribution("cost matrix has " + std::to_string(costs_.size()) +
                                  " rows for " + std::to_string(actions_.size()) + " actions");
    }
    for (const auto& row : costs_) {
        if (row.size() != costs_[0].size() || row.empty()) {
            throw InvalidDistribution("cost matrix rows have inconsistent label counts");
        }
        for (double c : row) {
            if (!(c >= 0.0) || !std::isfinite(c)) {
                throw InvalidDistribution("cost matrix entries must be finite and >= 0");
            }
        }
    }
}

double expected_cost(const CostMatrix& cm, const Forecast& h, std::size_t action) {
    double acc = 0.0;
    for (std::size_t y = 0; y < h.size(); ++y) acc += h[y] * cm.cost(action, y);
    return acc;
}

}  // namespace mdlcal
