#include "mdlcal/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mdlcal/solver.hpp"

namespace mdlcal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRadiusResidualTol = 1e-10;
constexpr std::size_t kBisectionIters = 200;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

std::vector<double> random_direction(std::size_t cells, SplitMix64& rng) {
    std::vector<double> g(cells);
    for (auto& x : g) x = rng.next_range(-1.0, 1.0);
    return g;
}

// Dense Gaussian elimination with partial pivoting; false on singularity.
bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& out) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    out.assign(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= a[r][c] * out[c];
        out[r] = acc / a[r][r];
    }
    return true;
}

}  // namespace

const char* divergence_name(DivergenceKind d) {
    switch (d) {
        case DivergenceKind::kl: return "kl";
        case DivergenceKind::chi2: return "chi2";
        case DivergenceKind::tv: return "tv";
    }
    return "?";
}

double divergence(DivergenceKind d, const FiniteJoint& p, const FiniteJoint& q) {
    require_same_spaces(p, q);
    const auto& pp = p.probs();
    const auto& qp = q.probs();
    switch (d) {
        case DivergenceKind::kl: {
            double acc = 0.0;
            for (std::size_t i = 0; i < pp.size(); ++i) {
                if (qp[i] <= 0.0) continue;  // 0 log(0/.) = 0
                if (pp[i] <= 0.0) return kInf;
                acc += qp[i] * std::log(qp[i] / pp[i]);
            }
            return std::max(acc, 0.0);
        }
        case DivergenceKind::chi2: {
            double acc = 0.0;
            for (std::size_t i = 0; i < pp.size(); ++i) {
                if (pp[i] <= 0.0) {
                    if (qp[i] > 0.0) return kInf;
                    continue;
                }
                const double diff = qp[i] - pp[i];
                acc += diff * diff / pp[i];
            }
            return acc;
        }
        case DivergenceKind::tv: {
            double acc = 0.0;
            for (std::size_t i = 0; i < pp.size(); ++i) acc += std::abs(qp[i] - pp[i]);
            return 0.5 * acc;
        }
    }
    return kInf;
}

void Envelope::check_gradient(const std::vector<double>& g) const {
    if (g.size() != n() * m()) {
        throw SpaceMismatch("gradient table has " + std::to_string(g.size()) +
                            " cells, envelope expects " + std::to_string(n() * m()));
    }
    for (double x : g) {
        if (!std::isfinite(x)) throw Error("gradient table has non-finite entries");
    }
}

void Envelope::check_spaces(const FiniteJoint& q) const {
    if (!(q.x_space() == x_space()) || !(q.y_space() == y_space())) {
        throw SpaceMismatch("joint lives on a different space than the envelope");
    }
}

// ---------------------------------------------------------------------------
// Convex hull
// ---------------------------------------------------------------------------

namespace {
const FiniteJoint& first_vertex(const std::vector<FiniteJoint>& vertices) {
    if (vertices.empty()) throw InvalidDistribution("hull needs at least one vertex");
    return vertices.front();
}
}  // namespace

ConvexHullEnvelope::ConvexHullEnvelope(std::vector<FiniteJoint> vertices)
    : Envelope(first_vertex(vertices).x_space(), first_vertex(vertices).y_space()),
      vertices_(std::move(vertices)) {
    for (std::size_t k = 1; k < vertices_.size(); ++k) {
        require_same_spaces(vertices_[0], vertices_[k]);
    }
}

std::size_t ConvexHullEnvelope::best_vertex(const std::vector<double>& g) const {
    check_gradient(g);
    std::size_t best = 0;
    double best_val = dot(g, vertices_[0].probs());
    for (std::size_t k = 1; k < vertices_.size(); ++k) {
        const double v = dot(g, vertices_[k].probs());
        if (v > best_val) {
            best_val = v;
            best = k;
        }
    }
    return best;
}

// Simplex-constrained least squares: pairwise Frank-Wolfe on the weights with
// exact steps (the objective is quadratic), then an equality-constrained
// normal-equation polish on the detected support.
ConvexHullEnvelope::Projection ConvexHullEnvelope::project(const FiniteJoint& q) const {
    check_spaces(q);
    const std::size_t k = vertices_.size();
    const std::size_t cells = n() * m();
    const auto& target = q.probs();

    auto residual_of = [&](const std::vector<double>& w) {
        std::vector<double> r(cells, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            const auto& v = vertices_[j].probs();
            for (std::size_t c = 0; c < cells; ++c) r[c] += w[j] * v[c];
        }
        for (std::size_t c = 0; c < cells; ++c) r[c] -= target[c];
        return r;
    };

    if (k == 1) {
        auto r = residual_of({1.0});
        return Projection{{1.0}, std::sqrt(dot(r, r))};
    }

    std::vector<double> w(k, 1.0 / static_cast<double>(k));
    std::vector<double> r = residual_of(w);

    for (std::size_t iter = 0; iter < 20000; ++iter) {
        // grad_j = <V_j, r>
        std::vector<double> grad(k);
        for (std::size_t j = 0; j < k; ++j) grad[j] = dot(vertices_[j].probs(), r);

        std::size_t toward = 0;
        std::size_t away = 0;
        double gmin = kInf;
        double gmax = -kInf;
        for (std::size_t j = 0; j < k; ++j) {
            if (grad[j] < gmin) {
                gmin = grad[j];
                toward = j;
            }
            if (w[j] > 0.0 && grad[j] > gmax) {
                gmax = grad[j];
                away = j;
            }
        }
        if (gmax - gmin <= 1e-17) break;  // pairwise FW gap exhausted

        // Shift weight from the worst active vertex toward the best one.
        const double gamma_max = w[away];
        std::vector<double> dir(cells);
        const auto& vt = vertices_[toward].probs();
        const auto& va = vertices_[away].probs();
        for (std::size_t c = 0; c < cells; ++c) dir[c] = vt[c] - va[c];
        const double denom = dot(dir, dir);
        if (denom < 1e-300) break;
        double gamma = -dot(r, dir) / denom;
        gamma = std::clamp(gamma, 0.0, gamma_max);
        if (gamma <= 0.0) break;

        w[toward] += gamma;
        w[away] -= gamma;
        for (std::size_t c = 0; c < cells; ++c) r[c] += gamma * dir[c];

        if ((iter & 63u) == 63u) r = residual_of(w);  // kill incremental drift
    }

    r = residual_of(w);
    double best_res = std::sqrt(dot(r, r));

    // Polish: solve min ||V_S w - q|| s.t. sum(w) = 1 on the active support.
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < k; ++j) {
        if (w[j] > 1e-10) support.push_back(j);
    }
    if (!support.empty() && support.size() <= 64) {
        const std::size_t s = support.size();
        std::vector<std::vector<double>> a(s + 1, std::vector<double>(s + 1, 0.0));
        std::vector<double> b(s + 1, 0.0);
        for (std::size_t p = 0; p < s; ++p) {
            for (std::size_t qq = p; qq < s; ++qq) {
                const double val =
                    dot(vertices_[support[p]].probs(), vertices_[support[qq]].probs());
                a[p][qq] = val;
                a[qq][p] = val;
            }
            a[p][s] = 1.0;
            a[s][p] = 1.0;
            b[p] = dot(vertices_[support[p]].probs(), target);
        }
        b[s] = 1.0;
        std::vector<double> sol;
        if (solve_linear(a, b, sol)) {
            bool feasible = true;
            for (std::size_t p = 0; p < s; ++p) {
                if (sol[p] < -1e-10) feasible = false;
            }
            if (feasible) {
                std::vector<double> wp(k, 0.0);
                double total = 0.0;
                for (std::size_t p = 0; p < s; ++p) {
                    wp[support[p]] = std::max(sol[p], 0.0);
                    total += wp[support[p]];
                }
                if (total > 0.0) {
                    for (auto& x : wp) x /= total;
                    auto rp = residual_of(wp);
                    const double res = std::sqrt(dot(rp, rp));
                    if (res < best_res) {
                        best_res = res;
                        w = std::move(wp);
                    }
                }
            }
        }
    }

    return Projection{std::move(w), best_res};
}

bool ConvexHullEnvelope::contains(const FiniteJoint& q, double tol) const {
    return project(q).residual <= tol;
}

FiniteJoint ConvexHullEnvelope::linear_oracle(const std::vector<double>& g) const {
    return vertices_[best_vertex(g)];
}

FiniteJoint ConvexHullEnvelope::initial_point() const {
    std::vector<double> w(vertices_.size(), 1.0 / static_cast<double>(vertices_.size()));
    return mix(vertices_, w);
}

FiniteJoint ConvexHullEnvelope::random_member(SplitMix64& rng) const {
    return mix(vertices_, rng.next_simplex(vertices_.size()));
}

std::vector<FiniteJoint> ConvexHullEnvelope::extreme_members(std::size_t, SplitMix64&) const {
    return vertices_;
}

std::string ConvexHullEnvelope::describe() const {
    return "hull(" + std::to_string(vertices_.size()) + " vertices)";
}

// ---------------------------------------------------------------------------
// Divergence balls
// ---------------------------------------------------------------------------

DivergenceBallEnvelope::DivergenceBallEnvelope(FiniteJoint center, double epsilon,
                                               DivergenceKind kind)
    : Envelope(center.x_space(), center.y_space()),
      center_(std::move(center)),
      epsilon_(epsilon),
      kind_(kind) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw InvalidDistribution("ball radius must be finite and >= 0");
    }
}

bool DivergenceBallEnvelope::contains(const FiniteJoint& q, double tol) const {
    check_spaces(q);
    return divergence(kind_, center_, q) <= epsilon_ + tol;
}

namespace {

// argmax <g, Q> over {KL(Q||p) <= eps}: exponential tilt Q ~ p * exp(g / tau)
// with tau from bisection on the radius residual.
std::vector<double> kl_tilt_oracle(const std::vector<double>& p, const std::vector<double>& g,
                                   double eps) {
    const std::size_t cells = p.size();
    double gmax = -kInf;
    double gmin = kInf;
    for (std::size_t i = 0; i < cells; ++i) {
        if (p[i] <= 0.0) continue;
        gmax = std::max(gmax, g[i]);
        gmin = std::min(gmin, g[i]);
    }
    if (!(gmax > gmin)) return p;  // constant objective over the support

    // Unconstrained optimum: mass concentrated on the argmax cells.
    double top_mass = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        if (p[i] > 0.0 && g[i] >= gmax) top_mass += p[i];
    }
    std::vector<double> conc(cells, 0.0);
    for (std::size_t i = 0; i < cells; ++i) {
        if (p[i] > 0.0 && g[i] >= gmax) conc[i] = p[i] / top_mass;
    }
    const double kl_conc = -std::log(top_mass);
    if (kl_conc <= eps) return conc;

    auto tilt = [&](double tau, std::vector<double>& out) {
        double z = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            out[i] = p[i] > 0.0 ? p[i] * std::exp((g[i] - gmax) / tau) : 0.0;
            z += out[i];
        }
        double kl = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            out[i] /= z;
            if (out[i] > 0.0) kl += out[i] * (g[i] - gmax);
        }
        // KL = E_Q[(g - gmax)] / tau - log z
        return kl / tau - std::log(z);
    };

    std::vector<double> q(cells);
    double lo = gmax - gmin;  // tau scale
    double hi = lo;
    for (std::size_t it = 0; it < kBisectionIters && tilt(hi, q) > eps; ++it) hi *= 2.0;
    for (std::size_t it = 0; it < kBisectionIters && tilt(lo, q) < eps; ++it) lo *= 0.5;

    double residual = kInf;
    for (std::size_t it = 0; it < kBisectionIters; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double kl = tilt(mid, q);
        residual = std::abs(kl - eps);
        if (residual <= kRadiusResidualTol) return q;
        if (kl > eps) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw BisectionFailure("kl oracle bisection did not meet the radius tolerance", residual);
}

// argmax <g, Q> over {chi2(Q||p) <= eps}: water-filled Lagrangian
// Q_i = max(0, p_i (1 + (g_i - lambda) / (2 mu))) with nested bisections on
// lambda (unit mass) and mu (radius).
std::vector<double> chi2_oracle(const std::vector<double>& p, const std::vector<double>& g,
                                double eps) {
    const std::size_t cells = p.size();
    double gmax = -kInf;
    double gmin = kInf;
    double mean = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        if (p[i] <= 0.0) continue;
        gmax = std::max(gmax, g[i]);
        gmin = std::min(gmin, g[i]);
        mean += p[i] * g[i];
    }
    if (!(gmax > gmin)) return p;
    for (std::size_t i = 0; i < cells; ++i) {
        if (p[i] > 0.0) var += p[i] * (g[i] - mean) * (g[i] - mean);
    }

    double top_mass = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        if (p[i] > 0.0 && g[i] >= gmax) top_mass += p[i];
    }
    std::vector<double> conc(cells, 0.0);
    double chi2_conc = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        if (p[i] <= 0.0) continue;
        const double qi = g[i] >= gmax ? p[i] / top_mass : 0.0;
        conc[i] = qi;
        chi2_conc += (qi - p[i]) * (qi - p[i]) / p[i];
    }
    if (chi2_conc <= eps) return conc;

    auto fill = [&](double mu, std::vector<double>& out) {
        double lo = gmin;
        double hi = gmax;
        for (std::size_t it = 0; it < kBisectionIters; ++it) {
            const double lambda = 0.5 * (lo + hi);
            double total = 0.0;
            for (std::size_t i = 0; i < cells; ++i) {
                out[i] = p[i] > 0.0
                             ? std::max(0.0, p[i] * (1.0 + (g[i] - lambda) / (2.0 * mu)))
                             : 0.0;
                total += out[i];
            }
            if (std::abs(total - 1.0) <= 1e-14) break;
            if (total > 1.0) {
                lo = lambda;
            } else {
                hi = lambda;
            }
        }
        double total = 0.0;
        for (double x : out) total += x;
        if (total > 0.0) {
            for (auto& x : out) x /= total;
        }
        double c2 = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            if (p[i] > 0.0) c2 += (out[i] - p[i]) * (out[i] - p[i]) / p[i];
        }
        return c2;
    };

    std::vector<double> q(cells);
    double hi = std::sqrt(var / (4.0 * eps)) + 1e-12;
    double lo = hi;
    for (std::size_t it = 0; it < kBisectionIters && fill(hi, q) > eps; ++it) hi *= 2.0;
    for (std::size_t it = 0; it < kBisectionIters && fill(lo, q) < eps; ++it) lo *= 0.5;

    double residual = kInf;
    for (std::size_t it = 0; it < kBisectionIters; ++it) {
        const double mu = 0.5 * (lo + hi);
        const double c2 = fill(mu, q);
        residual = std::abs(c2 - eps);
        if (residual <= kRadiusResidualTol) return q;
        if (c2 > eps) {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    throw BisectionFailure("chi2 oracle bisection did not meet the radius tolerance", residual);
}

// argmax <g, Q> over {TV(Q, p) <= eps}: drain mass from the lowest-g cells
// into the single best cell.
std::vector<double> tv_oracle(const std::vector<double>& p, const std::vector<double>& g,
                              double eps) {
    const std::size_t cells = p.size();
    std::size_t receiver = 0;
    for (std::size_t i = 1; i < cells; ++i) {
        if (g[i] > g[receiver]) receiver = i;
    }
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (g[a] != g[b]) return g[a] < g[b];
        return a < b;
    });
    std::vector<double> q(p);
    double budget = eps;
    for (std::size_t idx : order) {
        if (budget <= 0.0) break;
        if (idx == receiver || g[idx] >= g[receiver]) continue;
        const double take = std::min(budget, q[idx]);
        q[idx] -= take;
        q[receiver] += take;
        budget -= take;
    }
    return q;
}

}  // namespace

FiniteJoint DivergenceBallEnvelope::linear_oracle(const std::vector<double>& g) const {
    check_gradient(g);
    if (epsilon_ <= 0.0) return center_;
    const auto& p = center_.probs();
    std::vector<double> q;
    switch (kind_) {
        case DivergenceKind::kl: q = kl_tilt_oracle(p, g, epsilon_); break;
        case DivergenceKind::chi2: q = chi2_oracle(p, g, epsilon_); break;
        case DivergenceKind::tv: q = tv_oracle(p, g, epsilon_); break;
    }
    return FiniteJoint(x_space(), y_space(), std::move(q));
}

FiniteJoint DivergenceBallEnvelope::initial_point() const { return center_; }

FiniteJoint DivergenceBallEnvelope::random_member(SplitMix64& rng) const {
    const auto g = random_direction(n() * m(), rng);
    const double u = rng.next_double();
    if (epsilon_ <= 0.0) return center_;
    return blend(center_, linear_oracle(g), u);
}

std::vector<FiniteJoint> DivergenceBallEnvelope::extreme_members(std::size_t budget,
                                                                 SplitMix64& rng) const {
    std::vector<FiniteJoint> out;
    out.reserve(budget + 1);
    out.push_back(center_);
    for (std::size_t i = 0; i < budget; ++i) {
        out.push_back(linear_oracle(random_direction(n() * m(), rng)));
    }
    return out;
}

std::string DivergenceBallEnvelope::describe() const {
    return std::string(divergence_name(kind_)) + "_ball(eps=" + std::to_string(epsilon_) + ")";
}

// ---------------------------------------------------------------------------
// CVaR reweighting polytope
// ---------------------------------------------------------------------------

CVaREnvelope::CVaREnvelope(FiniteJoint base, double alpha)
    : Envelope(base.x_space(), base.y_space()), base_(std::move(base)), alpha_(alpha) {
    if (!(alpha >= 0.0) || alpha >= 1.0) {
        throw InvalidDistribution("cvar level must lie in [0, 1)");
    }
}

bool CVaREnvelope::contains(const FiniteJoint& q, double tol) const {
    check_spaces(q);
    const double cap = ratio_cap();
    const auto& p = base_.probs();
    const auto& qp = q.probs();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 1e-15) {
            if (qp[i] > tol) return false;
            continue;
        }
        const double ratio = qp[i] / p[i];
        if (ratio > cap + tol) return false;
    }
    return true;
}

FiniteJoint CVaREnvelope::linear_oracle(const std::vector<double>& g) const {
    check_gradient(g);
    const double cap = ratio_cap();
    const auto& p = base_.probs();
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (g[a] != g[b]) return g[a] > g[b];
        return a < b;
    });
    std::vector<double> q(p.size(), 0.0);
    double remaining = 1.0;
    for (std::size_t idx : order) {
        if (remaining <= 0.0) break;
        const double take = std::min(cap * p[idx], remaining);
        q[idx] = take;
        remaining -= take;
    }
    return FiniteJoint(x_space(), y_space(), std::move(q));
}

FiniteJoint CVaREnvelope::initial_point() const { return base_; }

FiniteJoint CVaREnvelope::random_member(SplitMix64& rng) const {
    const auto g = random_direction(n() * m(), rng);
    const double u = rng.next_double();
    return blend(base_, linear_oracle(g), u);
}

std::vector<FiniteJoint> CVaREnvelope::extreme_members(std::size_t budget,
                                                       SplitMix64& rng) const {
    std::vector<FiniteJoint> out;
    out.reserve(budget + 1);
    out.push_back(base_);
    for (std::size_t i = 0; i < budget; ++i) {
        out.push_back(linear_oracle(random_direction(n() * m(), rng)));
    }
    return out;
}

std::string CVaREnvelope::describe() const {
    return "cvar(alpha=" + std::to_string(alpha_) + ")";
}

GeneralizedBayesRule generalized_bayes_rule(const ConvexHullEnvelope& env, const ProperLoss& pl) {
    GeneralizedBayesRule out;
    out.ids.reserve(env.num_vertices());
    out.conditionals.reserve(env.num_vertices());
    out.scores.reserve(env.num_vertices());
    for (std::size_t k = 0; k < env.num_vertices(); ++k) {
        const auto& v = env.vertices()[k];
        out.ids.push_back("vertex_" + std::to_string(k));
        out.conditionals.push_back(bayes_predictor(v));
        out.scores.push_back(expected_gen_entropy(v, pl));
    }
    return out;
}

}  // namespace mdlcal
