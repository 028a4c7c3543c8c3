// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "primevo/common.hpp"

namespace primevo {

// Ordered (training compute, validation loss) samples for one model.
struct LossCurve {
    std::vector<double> compute;
    std::vector<double> loss;
    std::string label;

    void push(double c, double l);
    void check() const;  // strictly increasing compute, finite losses
};

// l = a * c^(-k)
struct PowerLawFit {
    double a = 0.0;
    double k = 0.0;
    double residual = 0.0;  // mean squared log-residual
    bool ok = false;        // a > 0 and k > 0
};

// Least squares on (log c, log l); Huber-smoothed residuals by default
// (delta = 0.1 in log space), plain least squares behind the flag.
PowerLawFit fit_power_law(const std::vector<double>& compute, const std::vector<double>& loss,
                          bool huber = true, double huber_delta = 0.1);
PowerLawFit fit_power_law(const LossCurve& curve, bool huber = true, double huber_delta = 0.1);

// Baseline total compute divided by the compute at which the treatment first
// reaches the baseline's final loss (log-linear interpolation between
// samples). Throws NotReached when the treatment never gets there.
double speedup_factor(const LossCurve& baseline, const LossCurve& treatment);

// Compute-savings law from two roughly parallel power-law lines:
// b from the vertical offset, savings curve l = a1 * (1 - 1/b)^k * s^(-k).
struct SavingsLaw {
    double b = 1.0;
    double k = 0.0;
    double coefficient = 0.0;  // a1 * (1 - 1/b)^k; 0 when b == 1

    // savings at a given loss level (0 when b == 1)
    double savings_at(double loss) const;
    // loss at a given savings level
    double loss_at(double savings) const;
};
SavingsLaw savings_from_offset(const PowerLawFit& baseline, const PowerLawFit& treatment,
                               double parallel_tolerance = 0.10);

// Non-dominated subset of (inference seconds, loss) points; returns indices.
struct ParetoPoint {
    double inference_seconds = 0.0;
    double loss = 0.0;
    std::string label;
};
std::vector<int> pareto_front(const std::vector<ParetoPoint>& points);

// Lower convex hull in (log c, log l); the frontier used before scaling-law
// fits. Returns indices in increasing compute order.
std::vector<int> frontier_lower_hull(const std::vector<double>& compute,
                                     const std::vector<double>& loss);

}  // namespace primevo
