#include "mdlcal/dist.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mdlcal {

namespace {

void check_distinct(const std::vector<std::string>& names, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& s : names) {
        if (!seen.insert(s).second) {
            throw InvalidDistribution(std::string(what) + " contains duplicate '" + s + "'");
        }
    }
}

// Clamps denormal negatives from upstream arithmetic, rejects real ones, and
// renormalizes totals inside the tolerance band.
void normalize_probs(std::vector<double>& p, double expected_total, double tol,
                     const char* what) {
    double total = 0.0;
    for (auto& x : p) {
        if (x < 0.0) {
            if (x < -1e-12) {
                throw InvalidDistribution(std::string(what) + " has negative entry " +
                                          std::to_string(x));
            }
            x = 0.0;
        }
        if (!std::isfinite(x)) {
            throw InvalidDistribution(std::string(what) + " has non-finite entry");
        }
        total += x;
    }
    if (std::abs(total - expected_total) > tol) {
        throw InvalidDistribution(std::string(what) + " sums to " + std::to_string(total) +
                                  ", expected " + std::to_string(expected_total));
    }
    if (total > 0.0 && total != expected_total) {
        const double scale = expected_total / total;
        for (auto& x : p) x *= scale;
    }
}

}  // namespace

LabelSpace::LabelSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw InvalidDistribution("label space needs at least 2 labels");
    check_distinct(labels_, "label space");
}

FeatureSpace::FeatureSpace(std::vector<std::string> points) : points_(std::move(points)) {
    if (points_.empty()) throw InvalidDistribution("feature space needs at least 1 point");
    check_distinct(points_, "feature space");
}

Forecast::Forecast(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.size() < 2) throw InvalidForecast("forecast needs at least 2 entries");
    for (double x : probs_) {
        if (!(x >= -1e-12) || x > 1.0 + kProbTol) {
            throw InvalidForecast("forecast entry " + std::to_string(x) + " outside [0,1]");
        }
    }
    try {
        normalize_probs(probs_, 1.0, kProbTol, "forecast");
    } catch (const InvalidDistribution& e) {
        throw InvalidForecast(e.what());
    }
}

FiniteJoint::FiniteJoint(FeatureSpace x_space, LabelSpace y_space, std::vector<double> probs)
    : x_space_(std::move(x_space)), y_space_(std::move(y_space)), probs_(std::move(probs)) {
    if (probs_.size() != x_space_.size() * y_space_.size()) {
        throw InvalidDistribution("probability table has " + std::to_string(probs_.size()) +
                                  " entries, expected " +
                                  std::to_string(x_space_.size() * y_space_.size()));
    }
    normalize_probs(probs_, 1.0, kProbTol, "joint distribution");
}

Predictor::Predictor(FeatureSpace x_space, std::vector<Forecast> forecasts)
    : x_space_(std::move(x_space)), forecasts_(std::move(forecasts)) {
    if (forecasts_.size() != x_space_.size()) {
        throw InvalidForecast("predictor has " + std::to_string(forecasts_.size()) +
                              " forecasts for " + std::to_string(x_space_.size()) +
                              " feature points");
    }
    for (const auto& f : forecasts_) {
        if (f.size() != forecasts_[0].size()) {
            throw InvalidForecast("predictor forecasts have inconsistent label counts");
        }
    }
}

std::vector<double> marginal_x(const FiniteJoint& j) {
    std::vector<double> marg(j.n(), 0.0);
    for (std::size_t i = 0; i < j.n(); ++i) {
        double acc = 0.0;
        for (double x : j.row(i)) acc += x;
        marg[i] = acc;
    }
    return marg;
}

Forecast y_marginal(const FiniteJoint& j) {
    std::vector<double> marg(j.m(), 0.0);
    for (std::size_t i = 0; i < j.n(); ++i) {
        const auto row = j.row(i);
        for (std::size_t y = 0; y < j.m(); ++y) marg[y] += row[y];
    }
    return Forecast(std::move(marg));
}

Forecast conditional_y_given_x(const FiniteJoint& j, std::size_t i) {
    const auto row = j.row(i);
    double mass = 0.0;
    for (double x : row) mass += x;
    if (mass <= kMassFloor) {
        throw ZeroMassFeature("feature '" + j.x_space().point(i) + "' has marginal mass " +
                              std::to_string(mass));
    }
    std::vector<double> cond(j.m());
    for (std::size_t y = 0; y < j.m(); ++y) cond[y] = row[y] / mass;
    return Forecast(std::move(cond));
}

Predictor bayes_predictor(const FiniteJoint& j) {
    std::vector<Forecast> forecasts;
    forecasts.reserve(j.n());
    const auto marg = marginal_x(j);
    Forecast fallback = y_marginal(j);
    for (std::size_t i = 0; i < j.n(); ++i) {
        if (marg[i] <= kMassFloor) {
            forecasts.push_back(fallback);
        } else {
            forecasts.push_back(conditional_y_given_x(j, i));
        }
    }
    return Predictor(j.x_space(), std::move(forecasts));
}

FiniteJoint mix(const std::vector<FiniteJoint>& joints, const std::vector<double>& weights) {
    if (joints.empty()) throw InvalidDistribution("mix of zero joints");
    if (joints.size() != weights.size()) {
        throw WeightNotSimplex("got " + std::to_string(weights.size()) + " weights for " +
                               std::to_string(joints.size()) + " joints");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < -1e-12 || !std::isfinite(w)) {
            throw WeightNotSimplex("weight " + std::to_string(w) + " outside the simplex");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > kProbTol) {
        throw WeightNotSimplex("weights sum to " + std::to_string(total));
    }
    for (std::size_t k = 1; k < joints.size(); ++k) {
        require_same_spaces(joints[0], joints[k]);
    }
    std::vector<double> acc(joints[0].probs().size(), 0.0);
    for (std::size_t k = 0; k < joints.size(); ++k) {
        const auto& p = joints[k].probs();
        const double w = weights[k];
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += w * p[c];
    }
    return FiniteJoint(joints[0].x_space(), joints[0].y_space(), std::move(acc));
}

FiniteJoint blend(const FiniteJoint& a, const FiniteJoint& b, double t) {
    require_same_spaces(a, b);
    std::vector<double> acc(a.probs().size());
    const auto& pa = a.probs();
    const auto& pb = b.probs();
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] = (1.0 - t) * pa[c] + t * pb[c];
    return FiniteJoint(a.x_space(), a.y_space(), std::move(acc));
}

bool same_spaces(const FiniteJoint& a, const FiniteJoint& b) {
    return a.x_space() == b.x_space() && a.y_space() == b.y_space();
}

void require_same_spaces(const FiniteJoint& a, const FiniteJoint& b) {
    if (!same_spaces(a, b)) throw SpaceMismatch("joints live on different spaces");
}

void require_same_spaces(const FiniteJoint& q, const Predictor& h) {
    if (!(q.x_space() == h.x_space()) || q.m() != h.m()) {
        throw SpaceMismatch("joint and predictor live on different spaces");
    }
}

ForecastKey quantize_forecast(const Forecast& f) {
    ForecastKey key(f.size());
    for (std::size_t y = 0; y < f.size(); ++y) {
        key[y] = static_cast<std::int64_t>(std::llround(f[y] * 1e9));
    }
    return key;
}

}  // namespace mdlcal
