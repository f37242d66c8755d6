#include "mdlcal/decomposition.hpp"

#include <cmath>
#include <cstring>
#include <map>

#include "mdlcal/parallel.hpp"

namespace mdlcal {

ForecastGrouping group_by_forecast(const FiniteJoint& q, const Predictor& h) {
    require_same_spaces(q, h);
    const auto marg = marginal_x(q);

    struct Bucket {
        std::size_t first_member;
        std::vector<std::size_t> members;
        double mass = 0.0;
        std::vector<double> label_mass;
    };
    std::map<ForecastKey, Bucket> buckets;

    for (std::size_t i = 0; i < q.n(); ++i) {
        if (marg[i] <= kMassFloor) continue;
        auto key = quantize_forecast(h.at(i));
        auto [it, inserted] = buckets.try_emplace(std::move(key));
        Bucket& b = it->second;
        if (inserted) {
            b.first_member = i;
            b.label_mass.assign(q.m(), 0.0);
        }
        b.members.push_back(i);
        b.mass += marg[i];
        const auto row = q.row(i);
        for (std::size_t y = 0; y < q.m(); ++y) b.label_mass[y] += row[y];
    }

    // Deterministic group order: by first-seen feature index.
    std::map<std::size_t, const Bucket*> ordered;
    for (const auto& [key, b] : buckets) ordered.emplace(b.first_member, &b);

    ForecastGrouping out;
    out.groups.reserve(ordered.size());
    for (const auto& [first, b] : ordered) {
        std::vector<double> cond(q.m());
        for (std::size_t y = 0; y < q.m(); ++y) cond[y] = b->label_mass[y] / b->mass;
        out.groups.push_back(ForecastGroup{h.at(first), b->members, b->mass,
                                           Forecast(std::move(cond))});
    }
    return out;
}

double risk(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl) {
    require_same_spaces(q, h);
    return chunked_sum(q.n(), [&](std::size_t i) {
        const auto row = q.row(i);
        const Forecast& f = h.at(i);
        double acc = 0.0;
        for (std::size_t y = 0; y < q.m(); ++y) {
            if (row[y] != 0.0) acc += row[y] * pl.loss(y, f);
        }
        return acc;
    });
}

double calibration_error(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl) {
    const auto grouping = group_by_forecast(q, h);
    double acc = 0.0;
    for (const auto& g : grouping.groups) {
        acc += g.mass * bregman(pl, g.conditional, g.representative);
    }
    return acc;
}

double refinement(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl) {
    const auto grouping = group_by_forecast(q, h);
    double acc = 0.0;
    for (const auto& g : grouping.groups) {
        acc += g.mass * pl.entropy(g.conditional);
    }
    return acc;
}

double Decomposition::identity_residual() const {
    return std::abs(risk - calibration_error - refinement);
}

Decomposition decompose(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl) {
    const auto grouping = group_by_forecast(q, h);
    double calib = 0.0;
    double refine = 0.0;
    for (const auto& g : grouping.groups) {
        calib += g.mass * bregman(pl, g.conditional, g.representative);
        refine += g.mass * pl.entropy(g.conditional);
    }

    const double r = risk(q, h, pl);

    // The clip suspends the decomposition identity; flag any contributing term
    // that sat at the bound.
    const double near_bound = pl.bound() * (1.0 - 1e-12);
    bool clip = false;
    const auto marg = marginal_x(q);
    for (std::size_t i = 0; i < q.n() && !clip; ++i) {
        if (marg[i] <= kMassFloor) continue;
        const auto row = q.row(i);
        for (std::size_t y = 0; y < q.m(); ++y) {
            if (row[y] > 0.0 && pl.loss(y, h.at(i)) >= near_bound) {
                clip = true;
                break;
            }
        }
    }

    return Decomposition{r, calib, refine, clip};
}

namespace reference {

double risk(const FiniteJoint& q, const Predictor& h, const ProperLoss& pl) {
    require_same_spaces(q, h);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.n(); ++i) {
        const auto row = q.row(i);
        for (std::size_t y = 0; y < q.m(); ++y) {
            if (row[y] != 0.0) acc += row[y] * pl.loss(y, h.at(i));
        }
    }
    return acc;
}

}  // namespace reference

}  // namespace mdlcal
