// SPDX-License-Identifier: Apache-2.0

#include "primevo/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace primevo {

void LossCurve::push(double c, double l) {
    compute.push_back(c);
    loss.push_back(l);
}

void LossCurve::check() const {
    if (compute.size() != loss.size()) throw InvalidData("curve arrays differ in length");
    for (std::size_t i = 0; i < compute.size(); ++i) {
        if (!std::isfinite(loss[i])) throw InvalidData("non-finite loss in curve");
        if (i > 0 && compute[i] <= compute[i - 1]) {
            throw InvalidData("curve compute must be strictly increasing");
        }
    }
}

PowerLawFit fit_power_law(const std::vector<double>& compute, const std::vector<double>& loss,
                          bool huber, double huber_delta) {
    if (compute.size() != loss.size() || compute.size() < 3) {
        throw InvalidData("power-law fit needs at least 3 points");
    }
    const std::size_t n = compute.size();
    std::vector<double> x(n), y(n), w(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (compute[i] <= 0.0 || loss[i] <= 0.0) {
            throw InvalidData("power-law fit requires positive compute and loss");
        }
        x[i] = std::log(compute[i]);
        y[i] = std::log(loss[i]);
    }
    double slope = 0.0, intercept = 0.0;
    const int iters = huber ? 50 : 1;
    for (int it = 0; it < iters; ++it) {
        double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sw += w[i];
            sx += w[i] * x[i];
            sy += w[i] * y[i];
            sxx += w[i] * x[i] * x[i];
            sxy += w[i] * x[i] * y[i];
        }
        const double denom = sw * sxx - sx * sx;
        if (denom == 0.0) throw InvalidData("degenerate abscissa in power-law fit");
        const double new_slope = (sw * sxy - sx * sy) / denom;
        const double new_intercept = (sy - new_slope * sx) / sw;
        const bool converged =
            std::abs(new_slope - slope) < 1e-14 && std::abs(new_intercept - intercept) < 1e-14;
        slope = new_slope;
        intercept = new_intercept;
        if (!huber) break;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = std::abs(y[i] - (slope * x[i] + intercept));
            w[i] = r <= huber_delta ? 1.0 : huber_delta / r;
        }
        if (converged && it > 0) break;
    }
    PowerLawFit fit;
    fit.k = -slope;
    fit.a = std::exp(intercept);
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (slope * x[i] + intercept);
        rss += r * r;
    }
    fit.residual = rss / n;
    fit.ok = fit.a > 0.0 && fit.k > 0.0;
    return fit;
}

PowerLawFit fit_power_law(const LossCurve& curve, bool huber, double huber_delta) {
    return fit_power_law(curve.compute, curve.loss, huber, huber_delta);
}

double speedup_factor(const LossCurve& baseline, const LossCurve& treatment) {
    baseline.check();
    treatment.check();
    if (baseline.compute.empty() || treatment.compute.empty()) {
        throw InvalidData("speedup_factor: empty curve");
    }
    const double target = baseline.loss.back();
    const double baseline_compute = baseline.compute.back();
    double best = treatment.loss[0];
    for (std::size_t i = 0; i < treatment.compute.size(); ++i) {
        best = std::min(best, treatment.loss[i]);
        if (treatment.loss[i] > target) continue;
        double crossing = treatment.compute[i];
        if (treatment.loss[i] < target && i > 0 && treatment.loss[i - 1] > target) {
            // log-linear interpolation between the bracketing samples
            const double lc0 = std::log(treatment.compute[i - 1]);
            const double lc1 = std::log(treatment.compute[i]);
            const double ll0 = std::log(treatment.loss[i - 1]);
            const double ll1 = std::log(treatment.loss[i]);
            const double t = (std::log(target) - ll0) / (ll1 - ll0);
            crossing = std::exp(lc0 + t * (lc1 - lc0));
        }
        return baseline_compute / crossing;
    }
    throw NotReached("treatment never reaches the baseline's final loss (best " +
                         std::to_string(best) + " vs target " + std::to_string(target) + ")",
                     best);
}

double SavingsLaw::savings_at(double loss) const {
    if (coefficient <= 0.0 || loss <= 0.0) return 0.0;
    return std::pow(coefficient / loss, 1.0 / k);
}

double SavingsLaw::loss_at(double savings) const {
    if (coefficient <= 0.0 || savings <= 0.0) return 0.0;
    return coefficient * std::pow(savings, -k);
}

SavingsLaw savings_from_offset(const PowerLawFit& baseline, const PowerLawFit& treatment,
                               double parallel_tolerance) {
    if (!baseline.ok || !treatment.ok) throw InvalidData("savings need valid power-law fits");
    const double kbar = 0.5 * (baseline.k + treatment.k);
    if (std::abs(baseline.k - treatment.k) > parallel_tolerance * kbar) {
        throw AssumptionViolated("power-law lines are not parallel: k " +
                                 std::to_string(baseline.k) + " vs " +
                                 std::to_string(treatment.k));
    }
    SavingsLaw law;
    law.k = kbar;
    // vertical offset log b^k = log a_baseline - log a_treatment
    law.b = std::exp((std::log(baseline.a) - std::log(treatment.a)) / kbar);
    const double frac = 1.0 - 1.0 / law.b;
    law.coefficient = frac <= 0.0 ? 0.0 : baseline.a * std::pow(frac, kbar);
    return law;
}

std::vector<int> pareto_front(const std::vector<ParetoPoint>& points) {
    if (points.empty()) throw InvalidData("pareto_front: no points");
    std::vector<int> keep;
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
        bool dominated = false;
        for (int j = 0; j < static_cast<int>(points.size()) && !dominated; ++j) {
            if (i == j) continue;
            const bool leq = points[j].inference_seconds <= points[i].inference_seconds &&
                             points[j].loss <= points[i].loss;
            const bool strict = points[j].inference_seconds < points[i].inference_seconds ||
                                points[j].loss < points[i].loss;
            dominated = leq && strict;
        }
        if (!dominated) keep.push_back(i);
    }
    return keep;
}

std::vector<int> frontier_lower_hull(const std::vector<double>& compute,
                                     const std::vector<double>& loss) {
    if (compute.size() != loss.size() || compute.empty()) {
        throw InvalidData("frontier_lower_hull: bad input");
    }
    std::vector<int> order(compute.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (compute[a] != compute[b]) return compute[a] < compute[b];
        return loss[a] < loss[b];
    });
    auto lx = [&](int i) { return std::log(compute[i]); };
    auto ly = [&](int i) { return std::log(loss[i]); };
    std::vector<int> hull;
    for (int idx : order) {
        if (compute[idx] <= 0.0 || loss[idx] <= 0.0) {
            throw InvalidData("frontier_lower_hull: requires positive values");
        }
        while (hull.size() >= 2) {
            const int a = hull[hull.size() - 2], b = hull[hull.size() - 1];
            const double cross = (lx(b) - lx(a)) * (ly(idx) - ly(a)) -
                                 (ly(b) - ly(a)) * (lx(idx) - lx(a));
            if (cross <= 0.0) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(idx);
    }
    return hull;
}

}  // namespace primevo
