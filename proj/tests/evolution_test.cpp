// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "primevo/evolution.hpp"
#include "primevo/rundir.hpp"
#include "primevo/seeds.hpp"

#include <cmath>
#include <set>

using namespace primevo;

TEST_CASE("halving hurdle thresholds and expected budget") {
    HurdleSchedule s = build_hurdles(4, 25200.0);
    REQUIRE(s.thresholds.size() == 4);
    CHECK(s.thresholds[0] == doctest::Approx(812.9).epsilon(0.001));
    CHECK(s.thresholds[1] == doctest::Approx(2438.7).epsilon(0.001));
    CHECK(s.thresholds[2] == doctest::Approx(5690.3).epsilon(0.001));
    CHECK(s.thresholds[3] == doctest::Approx(12193.5).epsilon(0.001));
    CHECK(s.expected_budget_perfect_halving() == doctest::Approx(4064.5).epsilon(0.001));

    // equal-compute bands: t1 = (t2-t1)/2 = (t3-t2)/4 = (t4-t3)/8 = (T-t4)/16
    const double t1 = s.thresholds[0];
    CHECK((s.thresholds[1] - s.thresholds[0]) / 2 == doctest::Approx(t1));
    CHECK((s.thresholds[2] - s.thresholds[1]) / 4 == doctest::Approx(t1));
    CHECK((s.thresholds[3] - s.thresholds[2]) / 8 == doctest::Approx(t1));
    CHECK((25200.0 - s.thresholds[3]) / 16 == doctest::Approx(t1));

    HurdleSchedule none = build_hurdles(0, 100.0);
    CHECK(none.thresholds.empty());

    CHECK_THROWS_AS(build_hurdles(12, 20.0), InvalidSchedule);  // thresholds below resolution
    CHECK_THROWS_AS(build_hurdles(-1, 100.0), InvalidSchedule);
}

TEST_CASE("hurdle gate: auto-pass, tie passes, above-median stops") {
    HurdleGate gate(1);
    CHECK(gate.pass(0, 5.0));  // first candidate auto-passes
    CHECK(gate.pass(0, 3.0));  // 3.0 <= median{5.0}
    CHECK(gate.pass(0, 4.0));  // median{5,3} = 4.0, tie passes
    // history {5,3,4}: median 4.0
    CHECK(!gate.pass(0, 4.5));
    // history {3,4,4.5,5}: median 4.25
    CHECK(gate.pass(0, 4.25));
}

TEST_CASE("hurdle budget law under synthetic halving") {
    const double T = 1000.0;
    HurdleSchedule s = build_hurdles(4, T);

    // exactly half stop at each gate: mean consumed budget is 5T/31
    {
        int reach[5] = {0, 0, 0, 0, 0};
        double total = 0.0;
        const int n = 4096;
        for (int i = 0; i < n; ++i) {
            double consumed = T;
            for (int h = 0; h < 4; ++h) {
                if (reach[h]++ % 2 == 1) {
                    consumed = s.thresholds[h];
                    break;
                }
            }
            total += consumed;
        }
        CHECK(total / n == doctest::Approx(5.0 * T / 31.0).epsilon(0.05));
    }

    // the live gate on iid fitnesses converges to the same budget (the early
    // running median is slightly permissive, hence the looser band)
    {
        HurdleGate gate(4);
        Rng rng(99);
        double total = 0.0;
        const int n = 4000;
        for (int i = 0; i < n; ++i) {
            const double fitness = rng.uniform();
            double consumed = T;
            for (int h = 0; h < 4; ++h) {
                if (!gate.pass(h, fitness)) {
                    consumed = s.thresholds[h];
                    break;
                }
            }
            total += consumed;
        }
        CHECK(total / n == doctest::Approx(5.0 * T / 31.0).epsilon(0.12));
    }
}

TEST_CASE("population aging keeps the most recent members") {
    Population pop(3);
    for (int i = 0; i < 10; ++i) {
        pop.insert({transformer_seed(), static_cast<double>(i), i});
        CHECK(static_cast<int>(pop.size()) == std::min(i + 1, 3));
    }
    std::vector<std::int64_t> ids;
    for (const auto& m : pop.members()) ids.push_back(m.id);
    CHECK(ids == std::vector<std::int64_t>{7, 8, 9});
}

TEST_CASE("bank-value mutation rule") {
    CHECK(mutate_constant(0.125, 0.0, 0.0) == doctest::Approx(0.125));  // fixed point
    CHECK(mutate_constant(2.0, 1.0, 0.5) == doctest::Approx(20.5));
    CHECK(mutate_constant(-1.0, 0.0, 0.25) == doctest::Approx(-0.75));
}

TEST_CASE("mutate never returns a graph-equivalent child") {
    CompileConfig cfg;
    cfg.scale_unit = 2;
    cfg.seq = 8;
    Rng rng(1234);
    const Dna parent = transformer_seed();
    const std::uint64_t ph = canonical_hash(parent, cfg);
    for (int i = 0; i < 40; ++i) {
        Dna child = mutate(parent, rng, cfg);
        CHECK(is_valid(child));
        std::uint64_t ch = 0;
        bool compiled = true;
        try {
            ch = canonical_hash(child, cfg);
        } catch (const EngineError&) {
            compiled = false;
        }
        if (compiled) CHECK(ch != ph);
    }
}

TEST_CASE("mutation closure: children parse, serialize and evaluate") {
    CompileConfig cfg;
    cfg.scale_unit = 2;
    cfg.seq = 8;
    Rng rng(777);
    Corpus corpus = Corpus::from_bytes(synthetic_corpus(20000, 3));
    EvalConfig e;
    e.compile = cfg;
    e.stack.layers = 1;
    e.train.batch_tokens = 64;
    e.train.budget = 4;
    e.train.eval_every = 0;
    e.train.eval_batches = 1;
    e.compile.seq = 8;

    Dna parent = transformer_seed();
    for (int i = 0; i < 300; ++i) {
        Dna child;
        try {
            child = mutate(parent, rng, cfg);
        } catch (const MutationStall&) {
            continue;
        }
        CHECK(is_valid(child));
        Dna back = parse_program(serialize_program(child));
        CHECK(back == child);
        if (i % 30 == 0) {
            FitnessRecord rec = evaluate_fitness(child, corpus, e);
            CHECK(std::isfinite(rec.loss));
        }
        if (i % 3 == 0) parent = child;  // walk the space
    }
}

TEST_CASE("delete mutation never empties a subprogram") {
    Dna d;
    d.subprograms.clear();
    Subprogram s;
    Instruction t;
    t.op = Op::Tanh;
    s.instructions.push_back(t);
    d.subprograms.push_back(s);
    Rng rng(1);
    Dna child = mutate_once(d, MutationClass::Delete, rng);
    REQUIRE(child.subprograms[0].instructions.size() == 1);
    CHECK(child.subprograms[0].instructions[0].op == Op::Scale);  // pass-through gain
    CHECK(child.subprograms[0].instructions[0].input1 == 0);
}

TEST_CASE("toy search completes and logs every candidate") {
    Corpus corpus = Corpus::from_bytes(synthetic_corpus(30000, 5));
    SearchConfig sc;
    sc.population = 5;
    sc.tournament = 2;
    sc.candidates = 12;
    sc.hurdles = 2;
    sc.top_n = 3;
    sc.master_seed = 9;
    sc.eval.compile.scale_unit = 1;
    sc.eval.compile.seq = 8;
    sc.eval.stack.layers = 1;
    sc.eval.train.batch_tokens = 64;
    sc.eval.train.budget = 12;
    sc.eval.train.warmup = 4;
    sc.eval.train.eval_every = 0;
    sc.eval.train.eval_batches = 1;

    SearchResult res = run_search(transformer_seed(), corpus, sc);
    CHECK(res.log.size() == 5 + 12);
    CHECK(res.top.size() == 3);
    CHECK(res.top[0].fitness <= res.top[1].fitness);
    std::set<std::int64_t> ids;
    for (const auto& e : res.log) ids.insert(e.id);
    CHECK(ids.size() == res.log.size());  // candidate numbering has no gaps
    CHECK(*ids.rbegin() == 16);

    // zero candidates: log contains only the seeded population
    SearchConfig none = sc;
    none.candidates = 0;
    SearchResult res0 = run_search(transformer_seed(), corpus, none);
    CHECK(res0.log.size() == 5);
}

TEST_CASE("search is reproducible for a fixed master seed") {
    Corpus corpus = Corpus::from_bytes(synthetic_corpus(30000, 5));
    SearchConfig sc;
    sc.population = 4;
    sc.tournament = 2;
    sc.candidates = 8;
    sc.hurdles = 1;
    sc.master_seed = 31;
    sc.eval.compile.scale_unit = 1;
    sc.eval.compile.seq = 8;
    sc.eval.stack.layers = 1;
    sc.eval.train.batch_tokens = 64;
    sc.eval.train.budget = 8;
    sc.eval.train.eval_every = 0;
    sc.eval.train.eval_batches = 1;

    SearchResult a = run_search(transformer_seed(), corpus, sc);
    SearchResult b = run_search(transformer_seed(), corpus, sc);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].id == b.log[i].id);
        CHECK(a.log[i].parent == b.log[i].parent);
        CHECK(a.log[i].fitness == b.log[i].fitness);
        CHECK(a.log[i].dna_text == b.log[i].dna_text);
    }
}

TEST_CASE("proxy fraction scales the per-candidate budget") {
    Corpus corpus = Corpus::from_bytes(synthetic_corpus(30000, 5));
    SearchConfig sc;
    sc.population = 2;
    sc.tournament = 1;
    sc.candidates = 2;
    sc.hurdles = 0;
    sc.proxy_fraction = 0.5;
    sc.master_seed = 3;
    sc.eval.compile.scale_unit = 1;
    sc.eval.compile.seq = 8;
    sc.eval.stack.layers = 1;
    sc.eval.train.batch_tokens = 64;
    sc.eval.train.budget = 20;
    sc.eval.train.eval_every = 0;
    sc.eval.train.eval_batches = 1;
    SearchResult res = run_search(transformer_seed(), corpus, sc);
    CHECK(res.schedule.max_budget == doctest::Approx(10.0));
    for (const LogEntry& e : res.log) {
        if (!e.degenerate) CHECK(e.steps == 10);
    }
}

TEST_CASE("search state checkpoints round-trip") {
    Corpus corpus = Corpus::from_bytes(synthetic_corpus(30000, 5));
    SearchConfig sc;
    sc.population = 4;
    sc.tournament = 2;
    sc.candidates = 6;
    sc.hurdles = 1;
    sc.master_seed = 77;
    sc.eval.compile.scale_unit = 1;
    sc.eval.compile.seq = 8;
    sc.eval.stack.layers = 1;
    sc.eval.train.batch_tokens = 64;
    sc.eval.train.budget = 6;
    sc.eval.train.eval_every = 0;
    sc.eval.train.eval_batches = 1;

    SearchState state;
    SearchResult first = run_search(transformer_seed(), corpus, sc, nullptr, nullptr, &state);
    const std::string json = search_state_json(state, sc.master_seed);
    SearchState restored = parse_search_state(json, sc.master_seed);
    CHECK(restored.issued == state.issued);
    CHECK(restored.population.size() == state.population.size());

    // resuming continues candidate numbering without gaps
    SearchConfig more = sc;
    more.candidates = sc.candidates + 4;
    SearchResult cont = run_search(transformer_seed(), corpus, more, nullptr, &restored);
    std::set<std::int64_t> ids;
    for (const auto& e : cont.log) ids.insert(e.id);
    CHECK(*ids.begin() == 10);   // first new candidate after the checkpoint
    CHECK(*ids.rbegin() == 13);  // 4 more candidates

    CHECK_THROWS_AS(parse_search_state(json, 123456), InvalidData);
}
