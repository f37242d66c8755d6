#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdlcal/errors.hpp"

namespace mdlcal {

// Absolute tolerance on probability normalization. Constructors renormalize
// inputs whose total lands within this band and reject anything further out.
inline constexpr double kProbTol = 1e-9;

// Below this marginal mass a feature point is treated as unobserved.
inline constexpr double kMassFloor = 1e-12;

class LabelSpace {
public:
    explicit LabelSpace(std::vector<std::string> labels);

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(std::size_t y) const { return labels_[y]; }

    bool operator==(const LabelSpace&) const = default;

private:
    std::vector<std::string> labels_;
};

class FeatureSpace {
public:
    explicit FeatureSpace(std::vector<std::string> points);

    std::size_t size() const { return points_.size(); }
    const std::vector<std::string>& points() const { return points_; }
    const std::string& point(std::size_t i) const { return points_[i]; }

    bool operator==(const FeatureSpace&) const = default;

private:
    std::vector<std::string> points_;
};

// A point on the label simplex.
class Forecast {
public:
    explicit Forecast(std::vector<double> probs);

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t y) const { return probs_[y]; }
    const std::vector<double>& probs() const { return probs_; }

private:
    std::vector<double> probs_;
};

// Explicit joint distribution over a finite feature set x finite label set,
// stored as a dense row-major n x m table. Immutable once constructed.
class FiniteJoint {
public:
    FiniteJoint(FeatureSpace x_space, LabelSpace y_space, std::vector<double> probs);

    const FeatureSpace& x_space() const { return x_space_; }
    const LabelSpace& y_space() const { return y_space_; }
    std::size_t n() const { return x_space_.size(); }
    std::size_t m() const { return y_space_.size(); }

    double at(std::size_t i, std::size_t y) const { return probs_[i * m() + y]; }
    std::span<const double> row(std::size_t i) const {
        return {probs_.data() + i * m(), m()};
    }
    const std::vector<double>& probs() const { return probs_; }

private:
    FeatureSpace x_space_;
    LabelSpace y_space_;
    std::vector<double> probs_;
};

// Per-feature forecast table h : X -> simplex(Y).
class Predictor {
public:
    Predictor(FeatureSpace x_space, std::vector<Forecast> forecasts);

    const FeatureSpace& x_space() const { return x_space_; }
    std::size_t n() const { return x_space_.size(); }
    std::size_t m() const { return forecasts_.empty() ? 0 : forecasts_[0].size(); }
    const Forecast& at(std::size_t i) const { return forecasts_[i]; }
    const std::vector<Forecast>& forecasts() const { return forecasts_; }

private:
    FeatureSpace x_space_;
    std::vector<Forecast> forecasts_;
};

std::vector<double> marginal_x(const FiniteJoint& j);

// Label marginal, summed over features. Always a valid forecast.
Forecast y_marginal(const FiniteJoint& j);

// Throws ZeroMassFeature when the feature's marginal mass is <= kMassFloor.
Forecast conditional_y_given_x(const FiniteJoint& j, std::size_t i);

// Per-feature conditionals; zero-mass features receive the y-marginal so the
// predictor stays total.
Predictor bayes_predictor(const FiniteJoint& j);

// Entrywise convex combination of space-aligned joints.
FiniteJoint mix(const std::vector<FiniteJoint>& joints, const std::vector<double>& weights);

// (1-t) * a + t * b.
FiniteJoint blend(const FiniteJoint& a, const FiniteJoint& b, double t);

bool same_spaces(const FiniteJoint& a, const FiniteJoint& b);
void require_same_spaces(const FiniteJoint& a, const FiniteJoint& b);
void require_same_spaces(const FiniteJoint& q, const Predictor& h);

// Coordinates rounded at 1e-9 resolution; two forecasts with equal keys are
// treated as the same prediction.
using ForecastKey = std::vector<std::int64_t>;
ForecastKey quantize_forecast(const Forecast& f);

}  // namespace mdlcal
