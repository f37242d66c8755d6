#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mdlcal/dist.hpp"

namespace mdlcal {

// Forecast entries are clamped here before any logarithm.
inline constexpr double kForecastFloor = 1e-12;

inline constexpr double kDefaultLogBound = 20.0;

// A scoring loss bundled with its generalized entropy function and a
// supergradient of it. Built-ins cover log-loss and Brier; arbitrary concave
// (H, dH) pairs define further proper losses via from_entropy.
class ProperLoss {
public:
    using EntropyFn = std::function<double(const Forecast&)>;
    using SubgradientFn = std::function<std::vector<double>(const Forecast&)>;
    using LossFn = std::function<double(std::size_t, const Forecast&)>;

    static ProperLoss log_loss(double bound = kDefaultLogBound);
    static ProperLoss brier();

    // Loss derived from the representation l(y,h) = H(h) + dH(h).(e_y - h),
    // clipped into [0, bound].
    static ProperLoss from_entropy(std::string name, double bound, EntropyFn entropy,
                                   SubgradientFn subgradient);

    const std::string& name() const { return name_; }
    double bound() const { return bound_; }

    double loss(std::size_t y, const Forecast& h) const { return loss_(y, h); }
    double entropy(const Forecast& eta) const { return entropy_(eta); }
    std::vector<double> subgradient(const Forecast& h) const { return subgradient_(h); }

private:
    ProperLoss(std::string name, double bound, LossFn loss, EntropyFn entropy,
               SubgradientFn subgradient);

    std::string name_;
    double bound_;
    LossFn loss_;
    EntropyFn entropy_;
    SubgradientFn subgradient_;
};

// L(eta, h) = E_{y~eta}[l(y, h)].
double expected_loss(const ProperLoss& pl, const Forecast& eta, const Forecast& h);

// d(eta, h) = L(eta, h) - H(eta). Nonnegative wherever the clip is inactive.
double bregman(const ProperLoss& pl, const Forecast& eta, const Forecast& h);

// Nonnegative costs over actions x labels.
class CostMatrix {
public:
    CostMatrix(std::vector<std::string> actions, std::vector<std::vector<double>> costs);

    std::size_t num_actions() const { return actions_.size(); }
    std::size_t num_labels() const { return costs_.empty() ? 0 : costs_[0].size(); }
    const std::vector<std::string>& actions() const { return actions_; }
    const std::string& action(std::size_t a) const { return actions_[a]; }
    double cost(std::size_t a, std::size_t y) const { return costs_[a][y]; }
    const std::vector<std::vector<double>>& costs() const { return costs_; }

private:
    std::vector<std::string> actions_;
    std::vector<std::vector<double>> costs_;
};

// E_{y~h}[c(a, y)].
double expected_cost(const CostMatrix& cm, const Forecast& h, std::size_t action);

}  // namespace mdlcal
