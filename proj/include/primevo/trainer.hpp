// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "primevo/autograd.hpp"
#include "primevo/graph.hpp"

namespace primevo {

// Byte-level character corpus with a held-out validation tail.
struct Corpus {
    std::vector<std::uint8_t> train;
    std::vector<std::uint8_t> valid;
    int vocab = 256;

    static Corpus from_bytes(std::vector<std::uint8_t> data, double valid_fraction = 0.1);
    static Corpus from_file(const std::string& path, double valid_fraction = 0.1);
};

enum class BudgetMode { Steps, WallSeconds };

struct TrainConfig {
    int batch_tokens = 4096;
    double budget = 1000.0;  // steps or wall seconds
    BudgetMode mode = BudgetMode::Steps;
    std::int64_t warmup = 400;
    double peak_lr = 0.01;
    double clip_norm = 10.0;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 100;  // curve sampling interval, steps
    int eval_batches = 8;
    double degeneracy_ceiling_factor = 2.0;  // ceiling = factor * ln(vocab)
};

struct CurvePoint {
    std::int64_t step = 0;
    double wall_seconds = 0.0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
};

struct FitnessRecord {
    std::int64_t candidate_id = -1;
    int hurdle_reached = 0;  // gates passed before stopping
    std::int64_t steps = 0;
    double wall_seconds = 0.0;
    double loss = 0.0;  // validation loss, nats/token
    double perplexity = 1.0;
    bool degenerate = false;
    std::string note;
};

// Linear warmup to peak, then reciprocal square-root decay; the branches meet
// at step == warmup.
double lr_schedule(std::int64_t step, std::int64_t warmup, double peak);

// Consulted when training crosses a hurdle budget mark; return false to stop.
using HurdleHook = std::function<bool(int hurdle_index, double fitness)>;

struct TrainResult {
    FitnessRecord record;
    std::vector<CurvePoint> curve;
};

class Adam {
  public:
    Adam(double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9);
    void step(Params& params, const GradientSet& grads, double lr);

  private:
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Teacher-forced next-token training under a fixed budget. Never throws for
// numeric trouble: overflow or an above-ceiling loss yields a degenerate
// record with the loss capped at the ceiling.
TrainResult train(const DecoderStack& stack, Params& params, const Corpus& corpus,
                  const TrainConfig& config, const std::vector<double>& hurdle_marks = {},
                  const HurdleHook& hook = nullptr);

struct EvalConfig {
    CompileConfig compile;
    StackConfig stack;
    TrainConfig train;
    std::int64_t min_params = 0;  // both bounds > 0 enables resizing
    std::int64_t max_params = 0;
};

// resize -> compile -> stack -> train; totalizes every failure into a
// degenerate record (worst fitness), so any Dna maps to a FitnessRecord.
FitnessRecord evaluate_fitness(const Dna& dna, const Corpus& corpus, const EvalConfig& cfg,
                               const std::vector<double>& hurdle_marks = {},
                               const HurdleHook& hook = nullptr,
                               std::vector<CurvePoint>* curve_out = nullptr);

double degeneracy_ceiling(const TrainConfig& cfg, int vocab);

// Median wall-clock seconds of a logits-only forward pass (one warmup pass).
double measure_inference(const DecoderStack& stack, const Params& params, int batch, int repeats);

}  // namespace primevo
