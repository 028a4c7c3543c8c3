// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations: program parsing and listing,
// compilation reports, mutation, fitness evaluation, hurdle schedules and the
// analysis toolkit.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "primevo/analysis.hpp"
#include "primevo/autograd.hpp"
#include "primevo/evolution.hpp"
#include "primevo/rundir.hpp"
#include "primevo/seeds.hpp"
#include "primevo/trainer.hpp"

namespace py = pybind11;
using namespace primevo;

namespace {

Dna dna_from_text(const std::string& text_or_name) {
    if (auto seed = seed_by_name(text_or_name)) return *seed;
    return parse_program(text_or_name);
}

CompileConfig make_compile_config(int scale_unit, int seq, int d_model_rel) {
    CompileConfig cc;
    cc.scale_unit = scale_unit;
    cc.seq = seq;
    cc.d_model_rel = d_model_rel;
    return cc;
}

py::dict record_to_dict(const FitnessRecord& rec) {
    py::dict d;
    d["candidate_id"] = rec.candidate_id;
    d["hurdle_reached"] = rec.hurdle_reached;
    d["steps"] = rec.steps;
    d["wall_seconds"] = rec.wall_seconds;
    d["loss"] = rec.loss;
    d["perplexity"] = rec.perplexity;
    d["degenerate"] = rec.degenerate;
    d["note"] = rec.note;
    return d;
}

Tensor array_to_tensor(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 3) throw ContractViolation("expected a (batch, seq, channel) array");
    Tensor t(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
             static_cast<int>(arr.shape(2)));
    std::copy(arr.data(), arr.data() + t.size(), t.data());
    return t;
}

py::array_t<double> tensor_to_array(const Tensor& t) {
    py::array_t<double> arr({t.batch(), t.seq(), t.channel()});
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

}  // namespace

PYBIND11_MODULE(_primevo, m) {
    m.doc() = "decoder-block program search engine";

    // programs
    m.def("seed_names", &seed_names);
    m.def("seed_program", [](const std::string& name) {
        auto d = seed_by_name(name);
        if (!d) throw InvalidData("unknown seed: " + name);
        return serialize_program(*d);
    });
    m.def("seed_native_scale_unit", &seed_native_scale_unit);
    m.def("parse_roundtrip",
          [](const std::string& text) { return serialize_program(parse_program(text)); });
    m.def(
        "flatten",
        [](const std::string& program, int scale_unit, int d_model) {
            return flatten_program(dna_from_text(program), scale_unit, d_model);
        },
        py::arg("program"), py::arg("scale_unit"), py::arg("d_model"));

    m.def(
        "compile_report",
        [](const std::string& program, int scale_unit, int seq, int d_model_rel, int layers,
           int vocab, bool tie, int causality_trials) {
            Dna dna = dna_from_text(program);
            CompileConfig cc = make_compile_config(scale_unit, seq, d_model_rel);
            Graph block = compile(dna, cc);
            CompileConfig scc = cc;
            scc.force_output_width = cc.d_model();
            StackConfig sc{layers, vocab, tie};
            DecoderStack stack = build_stack(compile(dna, scc), sc);
            Params params = make_params(block, 1);
            CausalityReport causality = verify_causality(block, params, causality_trials, 1);
            py::dict d;
            d["scale_unit"] = cc.scale_unit;
            d["d_model"] = cc.d_model();
            d["block_nodes"] = block.nodes.size();
            d["block_parameters"] = block.parameter_count();
            d["stack_parameters"] = stack.graph.parameter_count();
            d["canonical_hash"] = canonical_hash(dna, cc);
            d["causality_pass"] = causality.passed;
            return d;
        },
        py::arg("program"), py::arg("scale_unit") = 8, py::arg("seq") = 64,
        py::arg("d_model_rel") = 8, py::arg("layers") = 2, py::arg("vocab") = 256,
        py::arg("tie") = false, py::arg("causality_trials") = 25);

    m.def(
        "canonical_hash",
        [](const std::string& program, int scale_unit, int seq) {
            return canonical_hash(dna_from_text(program), make_compile_config(scale_unit, seq, 8));
        },
        py::arg("program"), py::arg("scale_unit") = 4, py::arg("seq") = 8);

    m.def(
        "resize_to_budget",
        [](const std::string& program, std::int64_t min_params, std::int64_t max_params, int seq,
           int layers, int vocab, bool tie) {
            StackConfig sc{layers, vocab, tie};
            CompileConfig cc = make_compile_config(8, seq, 8);
            return resize_to_budget(dna_from_text(program), min_params, max_params, cc, sc);
        },
        py::arg("program"), py::arg("min_params"), py::arg("max_params"), py::arg("seq") = 64,
        py::arg("layers") = 2, py::arg("vocab") = 256, py::arg("tie") = false);

    m.def(
        "mutate",
        [](const std::string& program, std::uint64_t seed, int scale_unit, int seq) {
            Rng rng(seed);
            return serialize_program(
                mutate(dna_from_text(program), rng, make_compile_config(scale_unit, seq, 8)));
        },
        py::arg("program"), py::arg("seed"), py::arg("scale_unit") = 2, py::arg("seq") = 8);

    m.def(
        "apply_modification",
        [](const std::string& program, const std::string& flag, bool variable_seq) {
            auto f = modification_from_name(flag);
            if (!f) throw InvalidData("unknown modification flag: " + flag);
            return serialize_program(apply_modification(dna_from_text(program), *f, variable_seq));
        },
        py::arg("program"), py::arg("flag"), py::arg("variable_seq") = false);
    m.def("modification_names", [] {
        std::vector<std::string> names;
        for (ModificationFlag f : all_modifications()) names.push_back(modification_name(f));
        return names;
    });

    m.def(
        "evaluate_fitness",
        [](const std::string& program, const std::string& corpus_path, double budget_steps,
           int scale_unit, int seq, int layers, int vocab, int batch_tokens, std::uint64_t seed,
           int hurdles) {
            Dna dna = dna_from_text(program);
            Corpus corpus = Corpus::from_file(corpus_path);
            EvalConfig e;
            e.compile = make_compile_config(scale_unit, seq, 8);
            e.stack = StackConfig{layers, vocab, false};
            e.train.budget = budget_steps;
            e.train.batch_tokens = batch_tokens;
            e.train.seed = seed;
            e.train.eval_every = 0;
            std::vector<double> marks;
            if (hurdles > 0) marks = build_hurdles(hurdles, budget_steps).thresholds;
            FitnessRecord rec = evaluate_fitness(dna, corpus, e, marks);
            return record_to_dict(rec);
        },
        py::arg("program"), py::arg("corpus_path"), py::arg("budget_steps") = 50,
        py::arg("scale_unit") = 2, py::arg("seq") = 16, py::arg("layers") = 1,
        py::arg("vocab") = 256, py::arg("batch_tokens") = 128, py::arg("seed") = 0,
        py::arg("hurdles") = 0);

    m.def(
        "build_hurdles",
        [](int n, double max_budget) {
            HurdleSchedule s = build_hurdles(n, max_budget);
            py::dict d;
            d["thresholds"] = s.thresholds;
            d["expected_budget_perfect_halving"] = s.expected_budget_perfect_halving();
            return d;
        },
        py::arg("n"), py::arg("max_budget"));

    m.def("lr_schedule", &lr_schedule, py::arg("step"), py::arg("warmup"), py::arg("peak"));

    // activation zoo on numpy arrays
    m.def(
        "activation",
        [](const std::string& kind, py::array_t<double> x) {
            auto k = activation_from_name(kind);
            if (!k) throw InvalidData("unknown activation: " + kind);
            return tensor_to_array(activation(*k, array_to_tensor(x)));
        },
        py::arg("kind"), py::arg("x"));
    m.def("squared_relu",
          [](py::array_t<double> x) { return tensor_to_array(squared_relu(array_to_tensor(x))); });

    // analysis
    m.def(
        "fit_power_law",
        [](std::vector<double> compute, std::vector<double> loss, bool huber) {
            PowerLawFit fit = fit_power_law(compute, loss, huber);
            py::dict d;
            d["a"] = fit.a;
            d["k"] = fit.k;
            d["residual"] = fit.residual;
            d["ok"] = fit.ok;
            return d;
        },
        py::arg("compute"), py::arg("loss"), py::arg("huber") = true);
    m.def(
        "speedup_factor",
        [](std::vector<double> base_c, std::vector<double> base_l, std::vector<double> treat_c,
           std::vector<double> treat_l) {
            LossCurve b{std::move(base_c), std::move(base_l), "baseline"};
            LossCurve t{std::move(treat_c), std::move(treat_l), "treatment"};
            return speedup_factor(b, t);
        });
    m.def("pareto_front", [](std::vector<std::pair<double, double>> points) {
        std::vector<ParetoPoint> pts;
        for (auto& [inf, loss] : points) pts.push_back({inf, loss, ""});
        return pareto_front(pts);
    });

    m.def(
        "synthetic_corpus",
        [](std::size_t bytes, std::uint64_t seed) {
            auto data = synthetic_corpus(bytes, seed);
            return py::bytes(reinterpret_cast<const char*>(data.data()), data.size());
        },
        py::arg("bytes"), py::arg("seed") = 0);

    py::register_exception<EngineError>(m, "EngineError");
}
