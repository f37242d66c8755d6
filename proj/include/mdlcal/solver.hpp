#pragma once

#include <cstdint>
#include <vector>

#include "mdlcal/dist.hpp"
#include "mdlcal/envelope.hpp"
#include "mdlcal/scoring.hpp"

namespace mdlcal {

// Both saddle slacks must clear this (negative) floor for a certificate to pass.
inline constexpr double kSaddleSlackTol = 1e-6;

struct SolverOptions {
    double gap_tol = 1e-7;
    std::size_t max_iters = 10000;
    // Exact golden-section search along each accepted direction; when off, the
    // 2/(t+2) schedule is tried first and line search only rescues
    // non-improving steps.
    bool line_search = true;
    std::size_t rounds = 10000;  // minimax_game
    std::uint64_t seed = 0x9E3779B9ULL;
};

struct SolveResult {
    FiniteJoint q_star;
    Predictor h_star;
    double value = 0.0;
    std::size_t iterations = 0;
    double duality_gap = 0.0;
    bool converged = false;
    std::vector<double> trace;  // objective after each accepted step
};

struct SaddleCertificate {
    double left_slack;   // min over tested Q of E_{Q*}[l(h*)] - E_Q[l(h*)]
    double right_slack;  // min over tested h of E_{Q*}[l(h)] - E_{Q*}[l(h*)]
    FiniteJoint witness_q;
    Predictor witness_h;

    bool passed() const {
        return left_slack >= -kSaddleSlackTol && right_slack >= -kSaddleSlackTol;
    }
};

// E_Q[H(Q(y|x))]: the objective the solver maximizes. Zero-mass features
// contribute nothing.
double expected_gen_entropy(const FiniteJoint& q, const ProperLoss& pl);

// Supergradient of expected_gen_entropy at q: g[x,y] = l(y, q(y|x)).
std::vector<double> entropy_supergradient(const FiniteJoint& q, const ProperLoss& pl);

// Frank-Wolfe ascent (with away steps over the atoms the oracle has produced)
// of the expected generalized entropy over the envelope. On iteration-budget
// exhaustion the best iterate is returned with converged = false.
SolveResult solve_max_entropy(const Envelope& env, const ProperLoss& pl,
                              const SolverOptions& opts = {});

// Numerically certifies the saddle inequalities
//   E_Q[l(y,h*)] <= E_{Q*}[l(y,h*)] <= E_{Q*}[l(y,h)]
// against hull vertices / oracle extreme points, `probes` random members, the
// Bayes responses to the extreme points, and `probes` random predictors.
SaddleCertificate verify_saddle(const Envelope& env, const SolveResult& res, const ProperLoss& pl,
                                std::size_t probes, std::uint64_t seed = 0xC0FFEEULL);

// Nature-vs-learner zero-sum game on a hull: multiplicative weights over the
// vertices against exact Bayes best responses. Returns the time-averaged
// mixture; duality_gap records its exploitability.
SolveResult minimax_game(const ConvexHullEnvelope& env, const ProperLoss& pl, std::size_t rounds);

namespace reference {
// Serial twin of expected_gen_entropy, used to test the chunked kernel.
double expected_gen_entropy(const FiniteJoint& q, const ProperLoss& pl);
}  // namespace reference

}  // namespace mdlcal
