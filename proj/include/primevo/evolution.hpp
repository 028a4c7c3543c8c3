// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "primevo/trainer.hpp"

namespace primevo {

// Budget marks spaced so the expected compute per hurdle band is equal:
// t_i = (2^i - 1) / (2^(n+1) - 1) * T.
struct HurdleSchedule {
    int n = 0;
    double max_budget = 0.0;
    std::vector<double> thresholds;

    // Expected per-candidate budget when exactly half stop at each gate:
    // (n + 1) * T / (2^(n+1) - 1).
    double expected_budget_perfect_halving() const;
};

HurdleSchedule build_hurdles(int n, double max_budget);

// Per-hurdle running fitness statistics; pass iff fitness <= median of the
// records seen so far (ties pass, first candidate auto-passes).
class HurdleGate {
  public:
    explicit HurdleGate(int hurdles, int median_window = 0);
    bool pass(int hurdle, double fitness);
    const std::vector<std::vector<double>>& history() const { return history_; }

  private:
    std::vector<std::vector<double>> history_;
    int window_;
};

enum class MutationClass {
    Delete,
    Insert,
    DeleteAndInsert,
    MutateField,
    Swap,
    MutateBankValue,
};
const char* mutation_name(MutationClass m);

// One uniformly drawn mutation; children equivalent to the parent (by the
// canonical compute-graph hash) are re-mutated, up to 20 attempts, after
// which MutationStall is thrown.
Dna mutate(const Dna& parent, Rng& rng, const CompileConfig& hash_cfg);
// Single application of a specific class, no equivalence check; exposed for
// the fuzzers and the no-op re-mutation tests.
Dna mutate_once(const Dna& parent, MutationClass cls, Rng& rng);
// Bank-value update rule for constants: c_new = c_prev * 10^X + Y.
double mutate_constant(double prev, double x, double y);

struct Population {
    struct Member {
        Dna dna;
        double fitness = 0.0;
        std::int64_t id = -1;
    };
    explicit Population(int capacity) : capacity_(capacity) {}
    void insert(Member m);
    const Member& sample_tournament(int k, Rng& rng) const;  // best of k uniform
    std::size_t size() const { return members_.size(); }
    const std::deque<Member>& members() const { return members_; }
    std::deque<Member>& members() { return members_; }
    int capacity() const { return capacity_; }

  private:
    std::deque<Member> members_;
    int capacity_;
};

struct SearchConfig {
    int population = 100;
    int tournament = 10;
    int candidates = 300;  // mutated candidates evaluated after seeding
    int hurdles = 4;
    double proxy_fraction = 1.0;  // scales the per-candidate budget
    int workers = 1;
    std::uint64_t master_seed = 0;
    int top_n = 10;
    bool random_init = false;     // control arm: random programs, not seed copies
    int random_program_length = 37;
    int median_window = 0;  // 0 = global running median
    EvalConfig eval;
};

struct LogEntry {
    std::int64_t id = -1;
    std::int64_t parent = -1;
    std::string mutation;
    int hurdle_reached = 0;
    double fitness = 0.0;
    double perplexity = 0.0;
    bool degenerate = false;
    std::int64_t steps = 0;
    double wall_seconds = 0.0;
    std::uint64_t hash = 0;
    std::string note;
    std::string dna_text;  // canonical serialization, for replay and top-N
};

struct SearchResult {
    std::vector<LogEntry> log;
    std::vector<LogEntry> top;  // best top_n by fitness
    HurdleSchedule schedule;
};

// Checkpointable coordinator state (population + counters + gate history).
struct SearchState {
    Population population{100};
    std::int64_t issued = 0;     // candidates dispatched (including seeding)
    std::int64_t completed = 0;
    std::vector<std::vector<double>> gate_history;
};

using CandidateCallback = std::function<void(const LogEntry&)>;

// Regularized evolution with aging: initialize with copies of the seed,
// tournament-select a parent, mutate, evaluate under hurdle gating, insert,
// evict oldest. `on_candidate` streams every record (for the JSONL log);
// `resume_from` continues a previous state.
SearchResult run_search(const Dna& seed, const Corpus& corpus, const SearchConfig& config,
                        const CandidateCallback& on_candidate = nullptr,
                        SearchState* resume_from = nullptr,
                        SearchState* state_out = nullptr);

}  // namespace primevo
