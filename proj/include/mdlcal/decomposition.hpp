#pragma once

#include <vector>

#include "mdlcal/dist.hpp"
#include "mdlcal/scoring.hpp"

namespace mdlcal {

// |risk - calibration_error - refinement| must stay below this when the loss
// clip is inactive.
inline constexpr double kIdentityTol = 1e-8;

struct ForecastGroup {
    Forecast representative;          // first member's forecast
    std::vector<std::size_t> members; // feature indices, ascending
    double mass;
    Forecast conditional;             // mass-weighted label distribution given the forecast
};

struct ForecastGrouping {
    std::vector<ForecastGroup> groups;
};

// Partitions the positive-mass features by quantized forecast equality and
// attaches each group's conditional label distribution under q.
ForecastGrouping group_by_forecast(const FiniteJoint& q, const Predictor& h);

// E_q[l(y, h(x))].
double risk(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl);

// E[d(q(y|h(x)), h(x))], summed over forecast groups.
double calibration_error(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl);

// E[H(q(y|h(x)))], summed over forecast groups.
double refinement(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl);

struct Decomposition {
    double risk;
    double calibration_error;
    double refinement;
    bool clip_active;  // some contributing loss term sat at the bound

    double identity_residual() const;
};

Decomposition decompose(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl);

namespace reference {
// Serial twin of risk(), used to test the chunked kernel.
double risk(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl);
}  // namespace reference

}  // namespace mdlcal
