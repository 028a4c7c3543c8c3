// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "primevo/analysis.hpp"

#include <cmath>

using namespace primevo;

namespace {

LossCurve power_curve(double a, double k, const std::vector<double>& compute,
                      const std::string& label = "") {
    LossCurve c;
    c.label = label;
    for (double x : compute) c.push(x, a * std::pow(x, -k));
    return c;
}

}  // namespace

TEST_CASE("power-law fit recovers exact parameters on noiseless data") {
    std::vector<double> compute;
    for (int i = 1; i <= 20; ++i) compute.push_back(10.0 * i);
    LossCurve c = power_curve(2.0, 0.5, compute);
    PowerLawFit fit = fit_power_law(c);
    CHECK(fit.ok);
    CHECK(fit.a == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fit.k == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(fit.residual < 1e-18);

    // plain least squares agrees on clean data
    PowerLawFit plain = fit_power_law(c, false);
    CHECK(plain.k == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("power-law fit tolerates multiplicative noise") {
    Rng rng(55);
    std::vector<double> compute, loss;
    for (int i = 1; i <= 60; ++i) {
        const double c = 5.0 * i;
        compute.push_back(c);
        loss.push_back(3.0 * std::pow(c, -0.5) * (1.0 + 0.01 * rng.normal()));
    }
    PowerLawFit fit = fit_power_law(compute, loss);
    CHECK(fit.ok);
    CHECK(fit.k == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::abs(fit.k - 0.5) < 0.05);
}

TEST_CASE("power-law fit rejects bad input") {
    CHECK_THROWS_AS(fit_power_law({1.0, 2.0}, {1.0, 0.5}), InvalidData);
    CHECK_THROWS_AS(fit_power_law({1.0, 2.0, -3.0}, {1.0, 0.5, 0.3}), InvalidData);
    CHECK_THROWS_AS(fit_power_law({1.0, 2.0, 3.0}, {1.0, 0.5, 0.0}), InvalidData);
}

TEST_CASE("fit is scale-equivariant in the compute units") {
    std::vector<double> compute, loss;
    Rng rng(7);
    for (int i = 1; i <= 30; ++i) {
        compute.push_back(2.0 * i);
        loss.push_back(4.0 * std::pow(2.0 * i, -0.7) * (1.0 + 0.002 * rng.normal()));
    }
    PowerLawFit f1 = fit_power_law(compute, loss);
    std::vector<double> scaled = compute;
    const double beta = 3.5;
    for (double& c : scaled) c *= beta;
    PowerLawFit f2 = fit_power_law(scaled, loss);
    CHECK(f2.k == doctest::Approx(f1.k).epsilon(1e-6));
    CHECK(f2.a == doctest::Approx(f1.a * std::pow(beta, f1.k)).epsilon(1e-6));
}

TEST_CASE("speedup factor on constructed curves") {
    std::vector<double> compute;
    for (int i = 1; i <= 10; ++i) compute.push_back(100.0 * i);
    LossCurve base = power_curve(2.0, 0.5, compute, "baseline");

    // exact half-compute shift -> factor 2
    LossCurve half;
    for (std::size_t i = 0; i < base.compute.size(); ++i) {
        half.push(base.compute[i] / 2.0, base.loss[i]);
    }
    CHECK(speedup_factor(base, half) == doctest::Approx(2.0));

    // identity -> factor 1
    CHECK(speedup_factor(base, base) == doctest::Approx(1.0));

    // unit rescaling of both curves leaves the factor unchanged
    LossCurve base_scaled, half_scaled;
    for (std::size_t i = 0; i < base.compute.size(); ++i) {
        base_scaled.push(base.compute[i] * 7.0, base.loss[i]);
        half_scaled.push(half.compute[i] * 7.0, half.loss[i]);
    }
    CHECK(speedup_factor(base_scaled, half_scaled) == doctest::Approx(2.0));

    // a treatment that stalls above the target reports NotReached
    LossCurve stalled;
    for (double c : compute) stalled.push(c, 1.0);
    CHECK_THROWS_AS(speedup_factor(base, stalled), NotReached);
    try {
        speedup_factor(base, stalled);
    } catch (const NotReached& e) {
        CHECK(e.best_loss == doctest::Approx(1.0));
    }
}

TEST_CASE("speedup factor interpolates between samples") {
    LossCurve base;
    base.push(10, 1.0);
    base.push(100, 0.5);
    LossCurve treat;
    treat.push(10, 0.8);
    treat.push(40, 0.4);
    // crossing of 0.5 lies between the samples; log-linear interpolation
    const double f = speedup_factor(base, treat);
    const double t = (std::log(0.5) - std::log(0.8)) / (std::log(0.4) - std::log(0.8));
    const double c = std::exp(std::log(10.0) + t * (std::log(40.0) - std::log(10.0)));
    CHECK(f == doctest::Approx(100.0 / c).epsilon(1e-12));
}

TEST_CASE("savings from the vertical offset") {
    PowerLawFit base;
    base.a = 2.0;
    base.k = 1.0;
    base.ok = true;
    PowerLawFit treat;
    treat.a = 1.0;
    treat.k = 1.0;
    treat.ok = true;
    SavingsLaw law = savings_from_offset(base, treat);
    CHECK(law.b == doctest::Approx(2.0));
    // s = c_baseline / 2 at every loss: c1 = a_b / l, s = a_b / (2 l)
    for (double l : {0.1, 0.5, 2.0}) {
        CHECK(law.savings_at(l) == doctest::Approx(2.0 / (2.0 * l)));
    }

    // identical lines: savings identically zero
    SavingsLaw zero = savings_from_offset(base, base);
    CHECK(zero.b == doctest::Approx(1.0));
    CHECK(zero.savings_at(0.5) == 0.0);

    PowerLawFit steep = treat;
    steep.k = 1.5;
    CHECK_THROWS_AS(savings_from_offset(base, steep), AssumptionViolated);
}

TEST_CASE("savings closed form round-trips on generated curves") {
    // two exactly parallel lines: b known, check c0 * b == c1 at every loss
    const double a1 = 3.0, k = 0.8, b = 1.7;
    const double a0 = a1 / std::pow(b, k);
    std::vector<double> compute;
    for (int i = 1; i <= 24; ++i) compute.push_back(8.0 * i);
    PowerLawFit fb = fit_power_law(power_curve(a1, k, compute));
    PowerLawFit ft = fit_power_law(power_curve(a0, k, compute));
    SavingsLaw law = savings_from_offset(fb, ft);
    CHECK(law.b == doctest::Approx(b).epsilon(0.01));
    for (double l : {0.5, 1.0, 1.5}) {
        const double c1 = std::pow(a1 / l, 1.0 / k);
        const double c0 = std::pow(a0 / l, 1.0 / k);
        CHECK(c0 * law.b == doctest::Approx(c1).epsilon(1e-6));
        CHECK(law.savings_at(l) == doctest::Approx(c1 - c0).epsilon(1e-6));
    }
}

TEST_CASE("pareto front") {
    CHECK(pareto_front({{1.0, 1.0, "only"}}) == std::vector<int>{0});

    std::vector<ParetoPoint> two = {{1.0, 2.0, "a"}, {2.0, 1.0, "b"}};
    CHECK(pareto_front(two) == std::vector<int>{0, 1});

    std::vector<ParetoPoint> three = {{1.0, 2.0, "a"}, {2.0, 1.0, "b"}, {2.5, 1.5, "dominated"}};
    CHECK(pareto_front(three) == std::vector<int>{0, 1});

    // brute-force dominance oracle on random points
    Rng rng(3);
    std::vector<ParetoPoint> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({rng.uniform(), rng.uniform(), ""});
    std::vector<int> got = pareto_front(pts);
    for (int i = 0; i < 40; ++i) {
        bool dominated = false;
        for (int j = 0; j < 40; ++j) {
            if (i == j) continue;
            if (pts[j].inference_seconds <= pts[i].inference_seconds &&
                pts[j].loss <= pts[i].loss &&
                (pts[j].inference_seconds < pts[i].inference_seconds ||
                 pts[j].loss < pts[i].loss)) {
                dominated = true;
            }
        }
        const bool kept = std::find(got.begin(), got.end(), i) != got.end();
        CHECK(kept == !dominated);
    }
}

TEST_CASE("frontier lower hull keeps the envelope") {
    // a point above the line between its neighbours is dropped
    std::vector<double> compute = {10, 20, 40};
    std::vector<double> loss = {1.0, 0.9, 0.25};
    std::vector<int> hull = frontier_lower_hull(compute, loss);
    CHECK(hull == std::vector<int>{0, 2});
}
