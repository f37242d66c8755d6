#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mdlcal/dist.hpp"
#include "mdlcal/rng.hpp"
#include "mdlcal/scoring.hpp"

namespace mdlcal {

enum class DivergenceKind { kl, chi2, tv };

const char* divergence_name(DivergenceKind d);

// d(q || p) in the ambiguity-set orientation: KL(q||p), chi2(q||p), or TV.
// Returns +inf when q places mass where p has none (KL/chi2).
double divergence(DivergenceKind d, const FiniteJoint& p, const FiniteJoint& q);

// A compact convex set of joints. The solver touches members only through
// contains() and linear_oracle(), so new set families plug in behind this
// interface.
class Envelope {
public:
    virtual ~Envelope() = default;

    const FeatureSpace& x_space() const { return x_space_; }
    const LabelSpace& y_space() const { return y_space_; }
    std::size_t n() const { return x_space_.size(); }
    std::size_t m() const { return y_space_.size(); }

    virtual bool contains(const FiniteJoint& q, double tol) const = 0;

    // argmax over the set of <g, Q>, with g a row-major n x m table.
    virtual FiniteJoint linear_oracle(const std::vector<double>& g) const = 0;

    // A deterministic feasible starting point.
    virtual FiniteJoint initial_point() const = 0;

    virtual FiniteJoint random_member(SplitMix64& rng) const = 0;

    // Representative extreme points: hull vertices, or oracle outputs along
    // random directions for the smooth sets.
    virtual std::vector<FiniteJoint> extreme_members(std::size_t budget, SplitMix64& rng) const = 0;

    virtual std::string describe() const = 0;

protected:
    Envelope(FeatureSpace x_space, LabelSpace y_space)
        : x_space_(std::move(x_space)), y_space_(std::move(y_space)) {}

    void check_gradient(const std::vector<double>& g) const;
    void check_spaces(const FiniteJoint& q) const;

private:
    FeatureSpace x_space_;
    LabelSpace y_space_;
};

// conv{Q_1, ..., Q_k}.
class ConvexHullEnvelope final : public Envelope {
public:
    explicit ConvexHullEnvelope(std::vector<FiniteJoint> vertices);

    std::size_t num_vertices() const { return vertices_.size(); }
    const std::vector<FiniteJoint>& vertices() const { return vertices_; }

    // Index of the <g, .>-maximizing vertex; ties go to the lowest index.
    std::size_t best_vertex(const std::vector<double>& g) const;

    // Least-squares weights of the closest hull point to q, and the residual.
    struct Projection {
        std::vector<double> weights;
        double residual;  // euclidean distance to the hull
    };
    Projection project(const FiniteJoint& q) const;

    bool contains(const FiniteJoint& q, double tol) const override;
    FiniteJoint linear_oracle(const std::vector<double>& g) const override;
    FiniteJoint initial_point() const override;
    FiniteJoint random_member(SplitMix64& rng) const override;
    std::vector<FiniteJoint> extreme_members(std::size_t budget, SplitMix64& rng) const override;
    std::string describe() const override;

private:
    std::vector<FiniteJoint> vertices_;
};

// {Q : d(Q || center) <= epsilon}.
class DivergenceBallEnvelope final : public Envelope {
public:
    DivergenceBallEnvelope(FiniteJoint center, double epsilon, DivergenceKind kind);

    const FiniteJoint& center() const { return center_; }
    double epsilon() const { return epsilon_; }
    DivergenceKind kind() const { return kind_; }

    bool contains(const FiniteJoint& q, double tol) const override;
    FiniteJoint linear_oracle(const std::vector<double>& g) const override;
    FiniteJoint initial_point() const override;
    FiniteJoint random_member(SplitMix64& rng) const override;
    std::vector<FiniteJoint> extreme_members(std::size_t budget, SplitMix64& rng) const override;
    std::string describe() const override;

private:
    FiniteJoint center_;
    double epsilon_;
    DivergenceKind kind_;
};

// Reweightings w * base with 0 <= w <= 1/(1-alpha) and unit total mass.
class CVaREnvelope final : public Envelope {
public:
    CVaREnvelope(FiniteJoint base, double alpha);

    const FiniteJoint& base() const { return base_; }
    double alpha() const { return alpha_; }
    double ratio_cap() const { return 1.0 / (1.0 - alpha_); }

    bool contains(const FiniteJoint& q, double tol) const override;
    FiniteJoint linear_oracle(const std::vector<double>& g) const override;
    FiniteJoint initial_point() const override;
    FiniteJoint random_member(SplitMix64& rng) const override;
    std::vector<FiniteJoint> extreme_members(std::size_t budget, SplitMix64& rng) const override;
    std::string describe() const override;

private:
    FiniteJoint base_;
    double alpha_;
};

// Per-vertex Bayes predictors and their expected generalized entropies.
struct GeneralizedBayesRule {
    std::vector<std::string> ids;
    std::vector<Predictor> conditionals;
    std::vector<double> scores;
};

GeneralizedBayesRule generalized_bayes_rule(const ConvexHullEnvelope& env, const ProperLoss& pl);

}  // namespace mdlcal
