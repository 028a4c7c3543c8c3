// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "primevo/graph.hpp"

namespace primevo {

// Execution record: the topologically ordered node list plus every recorded
// activation. Replaying the graph forward reproduces `values` bit-identically.
struct Tape {
    const Graph* graph = nullptr;
    std::vector<Tensor> values;
    const Tensor* x = nullptr;
    const Tensor* targets = nullptr;

    const Tensor& output() const { return values[graph->output]; }
};

Tape forward_tape(const Graph& g, const Params& p, const Tensor& x,
                  const Tensor* targets = nullptr);

// dLoss/dParam for every parameter touched by the forward pass, plus the
// gradient with respect to the slot-0 input.
struct GradientSet {
    std::vector<Tensor> param_grads;  // indexed by parameter id
    std::vector<char> touched;
    Tensor input_grad;

    bool has(int pid) const { return pid >= 0 && pid < static_cast<int>(touched.size()) && touched[pid]; }
    bool all_finite() const;
    double global_norm() const;
};

// Subgradient conventions: SIGN -> 0, ABS -> sign(x) with 0 at x = 0,
// MAX(x, C) -> [x > C], guarded DIVIDE/RECIP/LOG points -> 0.
GradientSet backward(const Tape& tape, const Params& p, const Tensor& loss_seed);
GradientSet backward(const Tape& tape, const Params& p);  // seed = ones scalar

struct GradCheckReport {
    double max_rel_err = 0.0;
    int coords_checked = 0;
    bool pass = false;
    int worst_param = -1;
    int worst_coord = -1;
};

// Central finite differences over a sampled subset of parameter coordinates
// compared against backward(); the graph output must be scalar.
GradCheckReport grad_check(const Graph& g, const Params& p, const Tensor& x,
                           const Tensor* targets, double epsilon, double tolerance,
                           int max_coords_per_param, std::uint64_t seed);

}  // namespace primevo
