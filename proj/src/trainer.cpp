// SPDX-License-Identifier: Apache-2.0

#include "primevo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace primevo {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

Corpus Corpus::from_bytes(std::vector<std::uint8_t> data, double valid_fraction) {
    if (data.size() < 64) throw InvalidData("corpus too small");
    Corpus c;
    const std::size_t split =
        data.size() - std::max<std::size_t>(32, static_cast<std::size_t>(data.size() * valid_fraction));
    c.train.assign(data.begin(), data.begin() + split);
    c.valid.assign(data.begin() + split, data.end());
    return c;
}

Corpus Corpus::from_file(const std::string& path, double valid_fraction) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidData("cannot open corpus file: " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return from_bytes(std::move(data), valid_fraction);
}

double lr_schedule(std::int64_t step, std::int64_t warmup, double peak) {
    if (step < 1) step = 1;
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(std::max<std::int64_t>(warmup, 1));
    return peak * std::min(s / w, std::sqrt(w / s));
}

double degeneracy_ceiling(const TrainConfig& cfg, int vocab) {
    return cfg.degeneracy_ceiling_factor * std::log(static_cast<double>(vocab));
}

Adam::Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Params& params, const GradientSet& grads, double lr) {
    if (m_.empty()) {
        for (const Tensor& t : params.values) {
            m_.emplace_back(t.batch(), t.seq(), t.channel());
            v_.emplace_back(t.batch(), t.seq(), t.channel());
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pid = 0; pid < params.values.size(); ++pid) {
        if (!grads.touched[pid]) continue;
        double* w = params.values[pid].data();
        double* m = m_[pid].data();
        double* v = v_[pid].data();
        const double* g = grads.param_grads[pid].data();
        const std::int64_t n = params.values[pid].size();
        for (std::int64_t i = 0; i < n; ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

struct Batcher {
    const std::vector<std::uint8_t>& data;
    int seq;
    int batch;

    void fill(Rng& rng, Tensor& tokens, Tensor& targets) const {
        for (int b = 0; b < batch; ++b) {
            const std::size_t start =
                rng.index(static_cast<std::uint64_t>(data.size() - seq - 1));
            for (int s = 0; s < seq; ++s) {
                tokens.at(b, s, 0) = static_cast<double>(data[start + s]);
                targets.at(b, s, 0) = static_cast<double>(data[start + s + 1]);
            }
        }
    }

    // deterministic strided windows for validation
    void fill_at(std::size_t index, std::size_t stride, Tensor& tokens, Tensor& targets) const {
        for (int b = 0; b < batch; ++b) {
            const std::size_t start = (index * batch + b) * stride % (data.size() - seq - 1);
            for (int s = 0; s < seq; ++s) {
                tokens.at(b, s, 0) = static_cast<double>(data[start + s]);
                targets.at(b, s, 0) = static_cast<double>(data[start + s + 1]);
            }
        }
    }
};

}  // namespace

TrainResult train(const DecoderStack& stack, Params& params, const Corpus& corpus,
                  const TrainConfig& config, const std::vector<double>& hurdle_marks,
                  const HurdleHook& hook) {
    const Graph& g = stack.graph;
    const int seq = g.seq;
    const int batch = std::max(1, config.batch_tokens / seq);
    if (corpus.train.size() < static_cast<std::size_t>(seq + 2) ||
        corpus.valid.size() < static_cast<std::size_t>(seq + 2)) {
        throw InvalidData("corpus smaller than one sequence window");
    }
    const double ceiling = degeneracy_ceiling(config, stack.vocab);

    TrainResult res;
    FitnessRecord& rec = res.record;
    Rng batch_rng(mix_seed(config.seed, 0xb47cULL));
    Adam opt;
    Batcher train_batches{corpus.train, seq, batch};
    Batcher valid_batches{corpus.valid, seq, batch};
    const std::size_t vwin = corpus.valid.size() - seq - 1;
    const std::size_t vstride =
        std::max<std::size_t>(1, vwin / std::max(1, config.eval_batches * batch));

    Tensor tokens(batch, seq, 1), targets(batch, seq, 1);
    const double t0 = now_seconds();

    auto validation_loss = [&]() {
        double acc = 0.0;
        for (int e = 0; e < config.eval_batches; ++e) {
            valid_batches.fill_at(static_cast<std::size_t>(e), vstride, tokens, targets);
            acc += run_output(g, params, tokens, &targets).vec()[0];
        }
        return acc / config.eval_batches;
    };

    auto budget_used = [&](std::int64_t step) {
        return config.mode == BudgetMode::Steps ? static_cast<double>(step)
                                                : now_seconds() - t0;
    };

    double last_train_loss = 0.0;
    double last_valid = 0.0;
    bool stopped = false;
    std::size_t next_hurdle = 0;
    std::int64_t step = 0;

    auto sample_curve = [&](double vloss) {
        res.curve.push_back({step, now_seconds() - t0, last_train_loss, vloss});
    };

    last_valid = validation_loss();
    if (!std::isfinite(last_valid)) {
        rec.degenerate = true;
        rec.note = "non-finite loss at initialization";
        rec.loss = ceiling;
        rec.perplexity = std::exp(rec.loss);
        return res;
    }
    last_train_loss = last_valid;
    sample_curve(last_valid);

    while (!stopped) {
        if (budget_used(step) >= config.budget) break;
        ++step;
        train_batches.fill(batch_rng, tokens, targets);
        double lr = lr_schedule(step, config.warmup, config.peak_lr);
        try {
            Tape tape = forward_tape(g, params, tokens, &targets);
            last_train_loss = tape.output().vec()[0];
            if (!std::isfinite(last_train_loss) || last_train_loss > 50.0 * ceiling) {
                throw NumericOverflow("training loss diverged");
            }
            GradientSet grads = backward(tape, params);
            const double norm = grads.global_norm();
            if (!std::isfinite(norm)) throw NumericOverflow("non-finite gradient norm");
            if (config.clip_norm > 0.0 && norm > config.clip_norm) {
                const double scale = config.clip_norm / norm;
                for (std::size_t i = 0; i < grads.param_grads.size(); ++i) {
                    if (!grads.touched[i]) continue;
                    for (double& v : grads.param_grads[i].vec()) v *= scale;
                }
            }
            opt.step(params, grads, lr);
        } catch (const NumericOverflow& e) {
            rec.degenerate = true;
            rec.note = e.what();
            break;
        }

        const double used = budget_used(step);
        while (next_hurdle < hurdle_marks.size() && used >= hurdle_marks[next_hurdle]) {
            last_valid = validation_loss();
            sample_curve(last_valid);
            bool go = true;
            if (hook) go = hook(static_cast<int>(next_hurdle), last_valid);
            if (go) {
                rec.hurdle_reached = static_cast<int>(next_hurdle) + 1;
                ++next_hurdle;
            } else {
                stopped = true;
                break;
            }
        }
        if (!stopped && config.eval_every > 0 && step % config.eval_every == 0) {
            last_valid = validation_loss();
            sample_curve(last_valid);
        }
    }

    rec.steps = step;
    rec.wall_seconds = now_seconds() - t0;
    if (!rec.degenerate) {
        last_valid = validation_loss();
        sample_curve(last_valid);
        rec.loss = last_valid;
        if (!std::isfinite(rec.loss) || rec.loss > ceiling) {
            rec.degenerate = true;
            rec.note = rec.note.empty() ? "loss above degeneracy ceiling" : rec.note;
        }
    }
    if (rec.degenerate) rec.loss = ceiling;
    rec.loss = std::min(rec.loss, ceiling);
    rec.perplexity = std::exp(rec.loss);
    return res;
}

FitnessRecord evaluate_fitness(const Dna& dna, const Corpus& corpus, const EvalConfig& cfg,
                               const std::vector<double>& hurdle_marks, const HurdleHook& hook,
                               std::vector<CurvePoint>* curve_out) {
    FitnessRecord rec;
    rec.degenerate = true;
    rec.loss = degeneracy_ceiling(cfg.train, cfg.stack.vocab);
    rec.perplexity = std::exp(rec.loss);
    try {
        CompileConfig cc = cfg.compile;
        if (cfg.min_params > 0 && cfg.max_params > 0) {
            cc.scale_unit = resize_to_budget(dna, cfg.min_params, cfg.max_params, cc, cfg.stack);
        }
        cc.force_output_width = cc.d_model();
        Graph block = compile(dna, cc);
        DecoderStack stack = build_stack(block, cfg.stack);
        Params params = make_params(stack.graph, mix_seed(cfg.train.seed, 0x9a17ULL));
        TrainResult tr = train(stack, params, corpus, cfg.train, hurdle_marks, hook);
        if (curve_out) *curve_out = tr.curve;
        return tr.record;
    } catch (const EngineError& e) {
        rec.note = e.what();
    } catch (const std::exception& e) {
        rec.note = e.what();
    }
    return rec;
}

double measure_inference(const DecoderStack& stack, const Params& params, int batch, int repeats) {
    if (repeats < 3) throw ContractViolation("measure_inference: repeats must be >= 3");
    const Graph& g = stack.graph;
    Tensor tokens(batch, g.seq, 1);
    Rng rng(7);
    for (double& v : tokens.vec()) {
        v = static_cast<double>(rng.index(static_cast<std::uint64_t>(stack.vocab)));
    }
    (void)run_to(g, params, g.logits, tokens, nullptr);  // warmup
    std::vector<double> times;
    times.reserve(repeats);
    for (int r = 0; r < repeats; ++r) {
        const double t0 = now_seconds();
        (void)run_to(g, params, g.logits, tokens, nullptr);
        times.push_back(now_seconds() - t0);
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace primevo
