// SPDX-License-Identifier: Apache-2.0

#include "primevo/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "primevo/graph.hpp"

namespace primevo {

double HurdleSchedule::expected_budget_perfect_halving() const {
    const double denom = std::pow(2.0, n + 1) - 1.0;
    return (n + 1) * max_budget / denom;
}

HurdleSchedule build_hurdles(int n, double max_budget) {
    if (n < 0 || max_budget <= 0.0) throw InvalidSchedule("need n >= 0 and positive budget");
    HurdleSchedule s;
    s.n = n;
    s.max_budget = max_budget;
    const double denom = std::pow(2.0, n + 1) - 1.0;
    double prev = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double t = (std::pow(2.0, i) - 1.0) / denom * max_budget;
        if (t <= prev || t >= max_budget || t < 1.0) {
            throw InvalidSchedule("hurdle " + std::to_string(i) +
                                  " not resolvable at this budget");
        }
        s.thresholds.push_back(t);
        prev = t;
    }
    return s;
}

HurdleGate::HurdleGate(int hurdles, int median_window)
    : history_(std::max(hurdles, 0)), window_(median_window) {}

bool HurdleGate::pass(int hurdle, double fitness) {
    auto& h = history_.at(hurdle);
    bool ok = true;
    if (!h.empty()) {
        std::vector<double> v;
        if (window_ > 0 && static_cast<int>(h.size()) > window_) {
            v.assign(h.end() - window_, h.end());
        } else {
            v = h;
        }
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size();
        const double median = (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
        ok = fitness <= median;  // ties pass: the top 50% includes the boundary
    }
    h.push_back(fitness);
    return ok;
}

const char* mutation_name(MutationClass m) {
    switch (m) {
        case MutationClass::Delete: return "delete";
        case MutationClass::Insert: return "insert";
        case MutationClass::DeleteAndInsert: return "delete_and_insert";
        case MutationClass::MutateField: return "mutate_field";
        case MutationClass::Swap: return "swap";
        case MutationClass::MutateBankValue: return "mutate_bank_value";
    }
    return "?";
}

double mutate_constant(double prev, double x, double y) {
    return prev * std::pow(10.0, x) + y;
}

namespace {

Instruction random_instruction(Rng& rng, int sub_idx, int nsub, int position) {
    Instruction ins;
    // ops are drawn over primitives plus the strictly-higher subprograms
    const int callable = nsub - sub_idx - 1;
    const int pick = static_cast<int>(rng.index(kNumPrimitives + callable));
    if (pick < kNumPrimitives) {
        ins.op = static_cast<Op>(pick);
    } else {
        ins.callee = sub_idx + 1 + (pick - kNumPrimitives);
    }
    ins.input1 = static_cast<int>(rng.index(position + 2));
    ins.input2 = static_cast<int>(rng.index(position + 2));
    ins.constant_idx = static_cast<int>(rng.index(kConstantsBankSize));
    ins.dim_idx = static_cast<int>(rng.index(kDimsBankSize));
    ins.branching = kBranchingChoices[rng.index(kBranchingChoices.size())];
    return ins;
}

void delete_at(Subprogram& sub, int k) {
    if (sub.instructions.size() == 1) {
        // never emptied: leave a pass-through of input 0
        Instruction pass;
        pass.op = Op::Scale;
        pass.input1 = 0;
        pass.input2 = 0;
        sub.instructions[0] = pass;
        return;
    }
    const int removed_state = k + 2;
    const int splice = sub.instructions[k].input1;  // route consumers around it
    sub.instructions.erase(sub.instructions.begin() + k);
    for (int j = k; j < static_cast<int>(sub.instructions.size()); ++j) {
        auto remap = [&](int& ref) {
            if (ref == removed_state) {
                ref = splice;
            } else if (ref > removed_state) {
                ref -= 1;
            }
        };
        remap(sub.instructions[j].input1);
        remap(sub.instructions[j].input2);
    }
}

void insert_random(Dna& dna, int sub_idx, Rng& rng) {
    Subprogram& sub = dna.subprograms[sub_idx];
    const int pos = static_cast<int>(rng.index(sub.instructions.size() + 1));
    Instruction ins =
        random_instruction(rng, sub_idx, static_cast<int>(dna.subprograms.size()), pos);
    const int new_state = pos + 2;
    for (int j = pos; j < static_cast<int>(sub.instructions.size()); ++j) {
        if (sub.instructions[j].input1 >= new_state) sub.instructions[j].input1 += 1;
        if (sub.instructions[j].input2 >= new_state) sub.instructions[j].input2 += 1;
    }
    sub.instructions.insert(sub.instructions.begin() + pos, ins);
}

void mutate_field(Dna& dna, int sub_idx, Rng& rng) {
    Subprogram& sub = dna.subprograms[sub_idx];
    const int k = static_cast<int>(rng.index(sub.instructions.size()));
    Instruction& ins = sub.instructions[k];
    switch (rng.index(6)) {
        case 0: {  // operation
            const int nsub = static_cast<int>(dna.subprograms.size());
            const int callable = nsub - sub_idx - 1;
            const int pick = static_cast<int>(rng.index(kNumPrimitives + callable));
            if (pick < kNumPrimitives) {
                ins.op = static_cast<Op>(pick);
                ins.callee = -1;
            } else {
                ins.op = Op::Add;  // canonical filler; calls ignore the op field
                ins.callee = sub_idx + 1 + (pick - kNumPrimitives);
            }
            break;
        }
        case 1: ins.input1 = static_cast<int>(rng.index(k + 2)); break;
        case 2: ins.input2 = static_cast<int>(rng.index(k + 2)); break;
        case 3: ins.constant_idx = static_cast<int>(rng.index(kConstantsBankSize)); break;
        case 4: ins.dim_idx = static_cast<int>(rng.index(kDimsBankSize)); break;
        case 5: ins.branching = kBranchingChoices[rng.index(kBranchingChoices.size())]; break;
    }
}

void swap_instructions(Dna& dna, int sub_idx, Rng& rng) {
    Subprogram& sub = dna.subprograms[sub_idx];
    const int n = static_cast<int>(sub.instructions.size());
    if (n < 2) return;
    int i = static_cast<int>(rng.index(n));
    int j = static_cast<int>(rng.index(n));
    if (i == j) j = (j + 1) % n;
    if (i > j) std::swap(i, j);
    std::swap(sub.instructions[i], sub.instructions[j]);
    // wiring moves with each instruction; clamp references that now point at
    // states which do not exist yet at the earlier position
    auto fix = [](Instruction& ins, int pos) {
        const int limit = pos + 2;
        if (ins.input1 >= limit) ins.input1 %= limit;
        if (ins.input2 >= limit) ins.input2 %= limit;
    };
    fix(sub.instructions[i], i);
    fix(sub.instructions[j], j);
}

void mutate_bank(Dna& dna, Rng& rng) {
    const int slot = static_cast<int>(rng.index(kConstantsBankSize + kDimsBankSize));
    if (slot < kConstantsBankSize) {
        dna.constants[slot] = mutate_constant(dna.constants[slot], rng.normal(), rng.normal());
    } else {
        dna.dims[slot - kConstantsBankSize] = kDimsVocabulary[rng.index(kDimsVocabulary.size())];
    }
}

}  // namespace

Dna mutate_once(const Dna& parent, MutationClass cls, Rng& rng) {
    Dna child = parent;
    const int sub_idx = static_cast<int>(rng.index(child.subprograms.size()));
    switch (cls) {
        case MutationClass::Delete:
            delete_at(child.subprograms[sub_idx],
                      static_cast<int>(rng.index(child.subprograms[sub_idx].instructions.size())));
            break;
        case MutationClass::Insert:
            insert_random(child, sub_idx, rng);
            break;
        case MutationClass::DeleteAndInsert: {
            delete_at(child.subprograms[sub_idx],
                      static_cast<int>(rng.index(child.subprograms[sub_idx].instructions.size())));
            const int sub2 = static_cast<int>(rng.index(child.subprograms.size()));
            insert_random(child, sub2, rng);
            break;
        }
        case MutationClass::MutateField:
            mutate_field(child, sub_idx, rng);
            break;
        case MutationClass::Swap:
            swap_instructions(child, sub_idx, rng);
            break;
        case MutationClass::MutateBankValue:
            mutate_bank(child, rng);
            break;
    }
    validate(child);
    return child;
}

Dna mutate(const Dna& parent, Rng& rng, const CompileConfig& hash_cfg) {
    std::optional<std::uint64_t> parent_hash;
    try {
        parent_hash = canonical_hash(parent, hash_cfg);
    } catch (const EngineError&) {
        parent_hash.reset();  // parent does not compile; any child differs
    }
    for (int attempt = 0; attempt < 20; ++attempt) {
        const MutationClass cls = static_cast<MutationClass>(rng.index(6));
        Dna child = mutate_once(parent, cls, rng);
        if (!parent_hash) return child;
        try {
            if (canonical_hash(child, hash_cfg) != *parent_hash) return child;
        } catch (const EngineError&) {
            return child;  // child stopped compiling: clearly not equivalent
        }
    }
    throw MutationStall("20 consecutive mutations left the compute graph unchanged");
}

void Population::insert(Member m) {
    members_.push_back(std::move(m));
    while (static_cast<int>(members_.size()) > capacity_) members_.pop_front();
}

const Population::Member& Population::sample_tournament(int k, Rng& rng) const {
    if (members_.empty()) throw ContractViolation("tournament over empty population");
    const Member* best = nullptr;
    for (int i = 0; i < k; ++i) {
        const Member& m = members_[rng.index(members_.size())];
        if (best == nullptr || m.fitness < best->fitness) best = &m;
    }
    return *best;
}

namespace {

LogEntry make_entry(std::int64_t id, std::int64_t parent, const std::string& mutation,
                    const Dna& dna, const FitnessRecord& rec, const CompileConfig& hash_cfg) {
    LogEntry e;
    e.id = id;
    e.parent = parent;
    e.mutation = mutation;
    e.hurdle_reached = rec.hurdle_reached;
    e.fitness = rec.loss;
    e.perplexity = rec.perplexity;
    e.degenerate = rec.degenerate;
    e.steps = rec.steps;
    e.wall_seconds = rec.wall_seconds;
    e.note = rec.note;
    e.dna_text = serialize_program(dna);
    try {
        e.hash = canonical_hash(dna, hash_cfg);
    } catch (const EngineError&) {
        e.hash = 0;
    }
    return e;
}

}  // namespace

SearchResult run_search(const Dna& seed, const Corpus& corpus, const SearchConfig& config,
                        const CandidateCallback& on_candidate, SearchState* resume_from,
                        SearchState* state_out) {
    SearchResult result;
    const double budget = config.eval.train.budget * config.proxy_fraction;
    result.schedule = build_hurdles(config.hurdles, budget);

    SearchState state{Population(config.population)};
    if (resume_from) {
        state = *resume_from;
    } else {
        state.gate_history.assign(config.hurdles, {});
    }
    HurdleGate gate(config.hurdles, config.median_window);
    for (int h = 0; h < static_cast<int>(state.gate_history.size()) && h < config.hurdles; ++h) {
        for (double f : state.gate_history[h]) gate.pass(h, f);
    }

    std::mutex mu;
    EvalConfig eval = config.eval;
    eval.train.budget = budget;

    auto evaluate_candidate = [&](const Dna& dna, std::uint64_t eval_seed) {
        EvalConfig e = eval;
        e.train.seed = eval_seed;
        HurdleHook hook = [&](int h, double fitness) {
            std::lock_guard<std::mutex> lock(mu);
            return gate.pass(h, fitness);
        };
        return evaluate_fitness(dna, corpus, e, result.schedule.thresholds, hook);
    };

    // conceptual initialization: the population starts as copies of the seed
    if (!resume_from || state.population.size() == 0) {
        if (config.random_init) {
            for (int i = 0; i < config.population; ++i) {
                Rng rng(mix_seed(config.master_seed, 0xd00dULL + i));
                Dna d = random_dna(rng, config.random_program_length);
                d.meta.birth = i;
                FitnessRecord rec = evaluate_candidate(d, mix_seed(config.master_seed, i));
                LogEntry e = make_entry(i, -1, "random_init", d, rec, config.eval.compile);
                state.population.insert({d, rec.loss, i});
                result.log.push_back(e);
                if (on_candidate) on_candidate(e);
            }
        } else {
            // identical copies in step-budget mode share one deterministic record
            FitnessRecord rec = evaluate_candidate(seed, mix_seed(config.master_seed, 0));
            for (int i = 0; i < config.population; ++i) {
                Dna d = seed;
                d.meta.birth = i;
                LogEntry e = make_entry(i, -1, "seed", d, rec, config.eval.compile);
                state.population.insert({d, rec.loss, i});
                result.log.push_back(e);
                if (on_candidate) on_candidate(e);
            }
        }
        state.issued = config.population;
        state.completed = config.population;
    }

    const std::int64_t last_id = config.population + config.candidates;
    std::vector<std::thread> pool;
    const int workers = std::max(1, config.workers);

    auto worker_loop = [&]() {
        for (;;) {
            std::int64_t id;
            Dna parent_dna;
            std::int64_t parent_id;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (state.issued >= last_id) return;
                id = state.issued++;
                Rng rng(mix_seed(config.master_seed, 0x70ffULL + id));
                const Population::Member& parent =
                    state.population.sample_tournament(config.tournament, rng);
                parent_dna = parent.dna;
                parent_id = parent.id;
            }
            Rng rng(mix_seed(config.master_seed, 0xa11cULL + id));
            Dna child;
            std::string mutation = "mutation";
            try {
                child = mutate(parent_dna, rng, config.eval.compile);
            } catch (const MutationStall&) {
                // stalled lineage: fall back to a fresh uniform mutation
                child = mutate_once(parent_dna, MutationClass::Insert, rng);
                mutation = "insert_after_stall";
            }
            child.meta.parent = parent_id;
            child.meta.birth = id;
            child.meta.lineage = parent_dna.meta.lineage;
            FitnessRecord rec = evaluate_candidate(child, mix_seed(config.master_seed, id));
            rec.candidate_id = id;
            {
                std::lock_guard<std::mutex> lock(mu);
                LogEntry e = make_entry(id, parent_id, mutation, child, rec, config.eval.compile);
                state.population.insert({child, rec.loss, id});
                result.log.push_back(e);
                state.completed++;
                if (on_candidate) on_candidate(e);
            }
        }
    };

    if (workers == 1) {
        worker_loop();
    } else {
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_loop);
        for (auto& t : pool) t.join();
    }

    // top-N by fitness across everything evaluated
    std::vector<const LogEntry*> sorted;
    sorted.reserve(result.log.size());
    for (const LogEntry& e : result.log) sorted.push_back(&e);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const LogEntry* a, const LogEntry* b) { return a->fitness < b->fitness; });
    for (int i = 0; i < std::min<int>(config.top_n, static_cast<int>(sorted.size())); ++i) {
        result.top.push_back(*sorted[i]);
    }
    if (state_out) {
        state.gate_history = gate.history();
        *state_out = state;
    }
    return result;
}

}  // namespace primevo
