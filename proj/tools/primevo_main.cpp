// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: compile / train / search / ablate / analyze / seeds,
// with a run-directory convention for persistence and resumability.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "primevo/analysis.hpp"
#include "primevo/autograd.hpp"
#include "primevo/evolution.hpp"
#include "primevo/rundir.hpp"
#include "primevo/seeds.hpp"
#include "primevo/trainer.hpp"

using namespace primevo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInternal = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidData("cannot open file: " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// a program argument is either a seed name or a .dna file path
Dna load_program(const std::string& arg) {
    if (auto seed = seed_by_name(arg)) return *seed;
    return parse_program(read_file(arg));
}

// budgets accept plain steps ("500") or wall-clock ("90s", "15m", "7h")
struct Budget {
    double amount = 0.0;
    BudgetMode mode = BudgetMode::Steps;
};

Budget parse_budget(const std::string& text) {
    if (text.empty()) throw InvalidData("empty budget");
    Budget b;
    char suffix = text.back();
    std::string num = text;
    double scale = 1.0;
    if (suffix == 's' || suffix == 'm' || suffix == 'h') {
        b.mode = BudgetMode::WallSeconds;
        num = text.substr(0, text.size() - 1);
        scale = suffix == 's' ? 1.0 : (suffix == 'm' ? 60.0 : 3600.0);
    }
    b.amount = std::stod(num) * scale;
    return b;
}

// parameter budgets accept "650000", "0.5M", "250k"
std::int64_t parse_param_count(const std::string& text) {
    if (text.empty()) throw InvalidData("empty parameter budget");
    char suffix = text.back();
    double scale = 1.0;
    std::string num = text;
    if (suffix == 'k' || suffix == 'K') {
        scale = 1e3;
        num = text.substr(0, text.size() - 1);
    } else if (suffix == 'm' || suffix == 'M') {
        scale = 1e6;
        num = text.substr(0, text.size() - 1);
    }
    return static_cast<std::int64_t>(std::stod(num) * scale);
}

struct CommonModel {
    int scale_unit = 8;
    int seq = 64;
    int d_model_rel = 8;
    int layers = 2;
    int vocab = 256;
    bool tie = false;
    std::string min_params, max_params;

    void attach(CLI::App* cmd) {
        cmd->add_option("--scale-unit", scale_unit, "relative-dimension scale unit");
        cmd->add_option("--seq", seq, "sequence length");
        cmd->add_option("--d-model-rel", d_model_rel, "relative width of the block interface");
        cmd->add_option("--layers", layers, "stacked block copies");
        cmd->add_option("--vocab", vocab, "vocabulary size");
        cmd->add_flag("--tie", tie, "tie the output projection to the embedding");
        cmd->add_option("--min-params", min_params, "resize floor, e.g. 0.5M");
        cmd->add_option("--max-params", max_params, "resize ceiling, e.g. 1.5M");
    }

    CompileConfig compile_config(const Dna& dna) const {
        CompileConfig cc;
        cc.scale_unit = scale_unit;
        cc.seq = seq;
        cc.d_model_rel = d_model_rel;
        StackConfig sc = stack_config();
        if (!min_params.empty() && !max_params.empty()) {
            cc.scale_unit = resize_to_budget(dna, parse_param_count(min_params),
                                             parse_param_count(max_params), cc, sc);
        }
        return cc;
    }

    StackConfig stack_config() const {
        StackConfig sc;
        sc.layers = layers;
        sc.vocab = vocab;
        sc.tie_embeddings = tie;
        return sc;
    }

    json to_json() const {
        json j;
        j["scale_unit"] = scale_unit;
        j["seq"] = seq;
        j["d_model_rel"] = d_model_rel;
        j["layers"] = layers;
        j["vocab"] = vocab;
        j["tie"] = tie;
        if (!min_params.empty()) j["min_params"] = min_params;
        if (!max_params.empty()) j["max_params"] = max_params;
        return j;
    }
};

struct TrainFlags {
    std::string budget = "500";
    int batch_tokens = 4096;
    std::int64_t warmup = 400;
    double peak_lr = 0.01;
    double clip_norm = 10.0;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 50;
    int eval_batches = 8;

    void attach(CLI::App* cmd) {
        cmd->add_option("--budget", budget, "training budget: steps, or 90s/15m/7h wall-clock");
        cmd->add_option("--batch-tokens", batch_tokens, "tokens per optimizer step");
        cmd->add_option("--warmup", warmup, "warmup steps");
        cmd->add_option("--peak-lr", peak_lr, "peak learning rate");
        cmd->add_option("--clip-norm", clip_norm, "global gradient-norm clip");
        cmd->add_option("--seed", seed, "run seed (step mode is deterministic)");
        cmd->add_option("--eval-every", eval_every, "curve sampling interval in steps");
        cmd->add_option("--eval-batches", eval_batches, "validation batches per sample");
    }

    TrainConfig config() const {
        Budget b = parse_budget(budget);
        TrainConfig tc;
        tc.batch_tokens = batch_tokens;
        tc.budget = b.amount;
        tc.mode = b.mode;
        tc.warmup = warmup;
        tc.peak_lr = peak_lr;
        tc.clip_norm = clip_norm;
        tc.seed = seed;
        tc.eval_every = eval_every;
        tc.eval_batches = eval_batches;
        return tc;
    }

    json to_json() const {
        json j;
        j["budget"] = budget;
        j["batch_tokens"] = batch_tokens;
        j["warmup"] = warmup;
        j["peak_lr"] = peak_lr;
        j["clip_norm"] = clip_norm;
        j["seed"] = seed;
        j["eval_every"] = eval_every;
        j["eval_batches"] = eval_batches;
        return j;
    }
};

std::string default_run_root() {
    if (const char* env = std::getenv("PRIMEVO_RUN_ROOT")) return env;
    return "runs";
}

int cmd_compile(const std::string& program, const CommonModel& model, int causality_trials,
                const std::string& dot_path, bool dump) {
    Dna dna = load_program(program);
    CompileConfig cc = model.compile_config(dna);
    Graph block = compile(dna, cc);
    CompileConfig stacked_cc = cc;
    stacked_cc.force_output_width = cc.d_model();
    Graph stack_block = compile(dna, stacked_cc);
    DecoderStack stack = build_stack(stack_block, model.stack_config());
    Params params = make_params(block, 1);
    CausalityReport causality = verify_causality(block, params, causality_trials, 1);

    json report;
    report["program"] = program;
    report["scale_unit"] = cc.scale_unit;
    report["d_model"] = cc.d_model();
    report["block_nodes"] = block.nodes.size();
    report["block_parameters"] = block.parameter_count();
    report["stack_parameters"] = stack.graph.parameter_count();
    report["canonical_hash"] = canonical_hash(dna, cc);
    report["causality"] = causality.passed ? "pass" : "fail";
    report["causality_trials"] = causality.trials;
    if (!causality.passed) report["causality_violation"] = causality.message;
    int dconv = 0;
    for (const Node& n : block.nodes) dconv += op_traits(n.op).depthwise;
    report["depthwise_conv_nodes"] = dconv;
    std::cout << report.dump(2) << "\n";
    if (dump) std::cout << dump_graph(block);
    if (!dot_path.empty()) {
        std::ofstream out(dot_path);
        out << dump_dot(block);
    }
    return causality.passed ? kExitOk : kExitInternal;
}

int cmd_train(const std::string& program, const std::string& corpus_path,
              const CommonModel& model, const TrainFlags& flags, const std::string& run_dir,
              bool strict) {
    Dna dna = load_program(program);
    Corpus corpus = Corpus::from_file(corpus_path);
    RunDirectory run(run_dir);
    json config;
    config["command"] = "train";
    config["program"] = program;
    config["corpus"] = corpus_path;
    config["model"] = model.to_json();
    config["train"] = flags.to_json();
    run.write_config_snapshot(config.dump());

    EvalConfig e;
    e.compile = model.compile_config(dna);
    e.stack = model.stack_config();
    e.train = flags.config();
    std::vector<CurvePoint> curve;
    FitnessRecord rec = evaluate_fitness(dna, corpus, e, {}, nullptr, &curve);
    if (e.train.mode == BudgetMode::Steps) {
        // step-budget curves are bit-reproducible; measured wall time is not
        for (CurvePoint& p : curve) p.wall_seconds = 0.0;
    }
    run.write_atomic("curve.csv", curve_csv(curve));
    run.write_atomic("record.json", fitness_record_json(rec) + "\n");
    std::cout << fitness_record_json(rec) << "\n";
    if (rec.degenerate && strict) return kExitUsage;
    return kExitOk;
}

int cmd_search(const std::string& program, const std::string& corpus_path,
               const CommonModel& model, const TrainFlags& flags, SearchConfig sc,
               const std::string& run_dir, bool resume) {
    Dna seed = load_program(program);
    Corpus corpus = Corpus::from_file(corpus_path);
    RunDirectory run(run_dir);
    json config;
    config["command"] = "search";
    config["program"] = program;
    config["corpus"] = corpus_path;
    config["model"] = model.to_json();
    config["train"] = flags.to_json();
    config["population"] = sc.population;
    config["tournament"] = sc.tournament;
    config["candidates"] = sc.candidates;
    config["hurdles"] = sc.hurdles;
    config["proxy_fraction"] = sc.proxy_fraction;
    config["workers"] = sc.workers;
    config["master_seed"] = sc.master_seed;
    config["random_init"] = sc.random_init;
    config["median_window"] = sc.median_window;
    if (!resume) run.write_config_snapshot(config.dump());

    sc.eval.compile = model.compile_config(seed);
    sc.eval.stack = model.stack_config();
    sc.eval.train = flags.config();

    SearchState resumed;
    SearchState* resume_ptr = nullptr;
    if (resume) {
        resumed = parse_search_state(read_file((fs::path(run_dir) / "checkpoint.json").string()),
                                     sc.master_seed);
        resume_ptr = &resumed;
    }

    SearchState state;
    CandidateCallback stream = [&](const LogEntry& e) {
        run.append_jsonl("search.jsonl", log_entry_json(e));
    };
    SearchResult res = run_search(seed, corpus, sc, stream, resume_ptr, &state);
    run.write_atomic("checkpoint.json", search_state_json(state, sc.master_seed));

    json summary;
    summary["candidates_logged"] = res.log.size();
    summary["hurdle_thresholds"] = res.schedule.thresholds;
    json top = json::array();
    for (std::size_t i = 0; i < res.top.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "top_%03d.dna", static_cast<int>(i));
        run.write_atomic(name, res.top[i].dna_text);
        json t;
        t["rank"] = i;
        t["id"] = res.top[i].id;
        t["fitness"] = res.top[i].fitness;
        t["perplexity"] = res.top[i].perplexity;
        t["file"] = name;
        top.push_back(t);
    }
    summary["top"] = top;
    run.write_atomic("summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

int cmd_ablate(const std::string& program, const std::string& corpus_path,
               const CommonModel& model, const TrainFlags& flags, const std::string& mode,
               std::vector<std::string> flag_names, const std::string& run_dir) {
    Dna base = load_program(program);
    Corpus corpus = Corpus::from_file(corpus_path);
    RunDirectory run(run_dir);
    json config;
    config["command"] = "ablate";
    config["program"] = program;
    config["mode"] = mode;
    config["flags"] = flag_names;
    config["model"] = model.to_json();
    config["train"] = flags.to_json();
    run.write_config_snapshot(config.dump());

    EvalConfig e;
    e.compile = model.compile_config(base);
    e.stack = model.stack_config();
    e.train = flags.config();

    const bool insertion = mode == "insertion";
    FitnessRecord base_rec = evaluate_fitness(base, corpus, e);
    std::ostringstream csv;
    csv << "variant,applicable,loss,perplexity,degenerate,normalized_pplx_delta\n";
    char row[256];
    std::snprintf(row, sizeof(row), "baseline,yes,%.6f,%.6f,%d,\n", base_rec.loss,
                  base_rec.perplexity, base_rec.degenerate ? 1 : 0);
    csv << row;

    if (flag_names.size() == 1 && flag_names[0] == "all") {
        flag_names.clear();
        for (ModificationFlag f : all_modifications()) flag_names.push_back(modification_name(f));
    }
    for (const std::string& name : flag_names) {
        auto flag = modification_from_name(name);
        if (!flag) throw InvalidData("unknown modification flag: " + name);
        Dna variant;
        try {
            variant = insertion ? apply_modification(base, *flag) : remove_modification(base, *flag);
        } catch (const ModificationNotApplicable& ex) {
            std::snprintf(row, sizeof(row), "%s,skipped,,,,\n", name.c_str());
            csv << row;
            std::cerr << "skipped " << name << ": " << ex.what() << "\n";
            continue;
        }
        FitnessRecord rec = evaluate_fitness(variant, corpus, e);
        // insertion: (P_b - P_m) / P_b; ablation: (P_m - P_b) / P_b -- positive
        // always means the modification is beneficial
        const double delta = insertion
                                 ? (base_rec.perplexity - rec.perplexity) / base_rec.perplexity
                                 : (rec.perplexity - base_rec.perplexity) / base_rec.perplexity;
        std::snprintf(row, sizeof(row), "%s,yes,%.6f,%.6f,%d,%.6f\n", name.c_str(), rec.loss,
                      rec.perplexity, rec.degenerate ? 1 : 0, delta);
        csv << row;
    }
    run.write_atomic("ablation.csv", csv.str());
    std::cout << csv.str();
    return kExitOk;
}

int cmd_analyze(const std::string& mode, const std::vector<std::string>& inputs,
                const std::string& baseline, const std::string& treatment, bool wall_clock,
                bool hull, bool plain_ls, const std::string& out_dir, bool strict) {
    json out;
    out["mode"] = mode;
    int exit_code = kExitOk;
    std::string csv_out;

    if (mode == "fit") {
        if (inputs.empty()) throw InvalidData("fit mode needs at least one curve csv");
        json fits = json::array();
        std::ostringstream csv;
        csv << "label,a,k,residual,ok\n";
        for (const std::string& path : inputs) {
            LossCurve c = load_loss_curve_csv(path, wall_clock, fs::path(path).stem().string());
            std::vector<double> xs = c.compute, ys = c.loss;
            if (hull) {
                std::vector<int> keep = frontier_lower_hull(xs, ys);
                std::vector<double> hx, hy;
                for (int i : keep) {
                    hx.push_back(xs[i]);
                    hy.push_back(ys[i]);
                }
                xs = hx;
                ys = hy;
            }
            PowerLawFit fit = fit_power_law(xs, ys, !plain_ls);
            json f;
            f["label"] = c.label;
            f["a"] = fit.a;
            f["k"] = fit.k;
            f["residual"] = fit.residual;
            f["ok"] = fit.ok;
            fits.push_back(f);
            char row[256];
            std::snprintf(row, sizeof(row), "%s,%.10g,%.10g,%.10g,%d\n", c.label.c_str(), fit.a,
                          fit.k, fit.residual, fit.ok ? 1 : 0);
            csv << row;
        }
        out["fits"] = fits;
        csv_out = csv.str();
    } else if (mode == "speedup") {
        LossCurve b = load_loss_curve_csv(baseline, wall_clock, "baseline");
        LossCurve t = load_loss_curve_csv(treatment, wall_clock, "treatment");
        try {
            const double factor = speedup_factor(b, t);
            out["speedup_factor"] = factor;
            out["baseline_compute"] = b.compute.back();
            out["target_loss"] = b.loss.back();
            out["crossing_compute"] = b.compute.back() / factor;
            std::cout << "speedup factor " << factor << " (crossing at compute "
                      << b.compute.back() / factor << ")\n";
        } catch (const NotReached& e) {
            out["not_reached"] = true;
            out["best_loss"] = e.best_loss;
            out["target_loss"] = b.loss.back();
            if (strict) exit_code = kExitUsage;
        }
    } else if (mode == "savings") {
        LossCurve b = load_loss_curve_csv(baseline, wall_clock, "baseline");
        LossCurve t = load_loss_curve_csv(treatment, wall_clock, "treatment");
        PowerLawFit fb = fit_power_law(b, !plain_ls);
        PowerLawFit ft = fit_power_law(t, !plain_ls);
        SavingsLaw law = savings_from_offset(fb, ft);
        out["b"] = law.b;
        out["k"] = law.k;
        out["coefficient"] = law.coefficient;
        std::ostringstream csv;
        csv << "loss,savings\n";
        for (std::size_t i = 0; i < b.loss.size(); ++i) {
            char row[128];
            std::snprintf(row, sizeof(row), "%.10g,%.10g\n", b.loss[i],
                          law.savings_at(b.loss[i]));
            csv << row;
        }
        csv_out = csv.str();
    } else if (mode == "pareto") {
        if (inputs.empty()) throw InvalidData("pareto mode needs a points csv");
        std::vector<ParetoPoint> pts;
        std::istringstream in(read_file(inputs[0]));
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (header) {
                header = false;
                if (line.find("label") != std::string::npos) continue;
            }
            std::istringstream row_in(line);
            ParetoPoint p;
            std::string tok;
            std::getline(row_in, p.label, ',');
            std::getline(row_in, tok, ',');
            p.inference_seconds = std::stod(tok);
            std::getline(row_in, tok, ',');
            p.loss = std::stod(tok);
            pts.push_back(p);
        }
        std::vector<int> front = pareto_front(pts);
        json arr = json::array();
        std::ostringstream csv;
        csv << "label,inference_seconds,loss\n";
        for (int i : front) {
            json p;
            p["label"] = pts[i].label;
            p["inference_seconds"] = pts[i].inference_seconds;
            p["loss"] = pts[i].loss;
            arr.push_back(p);
            char row[256];
            std::snprintf(row, sizeof(row), "%s,%.10g,%.10g\n", pts[i].label.c_str(),
                          pts[i].inference_seconds, pts[i].loss);
            csv << row;
        }
        out["front"] = arr;
        csv_out = csv.str();
    } else {
        throw InvalidData("unknown analyze mode: " + mode);
    }

    std::cout << out.dump(2) << "\n";
    if (!out_dir.empty()) {
        RunDirectory run(out_dir);
        run.write_atomic("analysis.json", out.dump(2) + "\n");
        if (!csv_out.empty()) run.write_atomic("analysis.csv", csv_out);
    }
    return exit_code;
}

int cmd_seeds(const std::string& emit_dir) {
    if (emit_dir.empty()) {
        for (const std::string& name : seed_names()) {
            std::cout << name << " (native scale unit " << seed_native_scale_unit(name) << ")\n";
        }
        return kExitOk;
    }
    fs::create_directories(emit_dir);
    for (const std::string& name : seed_names()) {
        std::ofstream out(fs::path(emit_dir) / (name + ".dna"), std::ios::binary);
        out << serialize_program(*seed_by_name(name));
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale decoder-block program search engine"};
    app.require_subcommand(1);

    auto* compile_cmd = app.add_subcommand("compile", "compile a program and report its graph");
    std::string program, corpus_path, run_dir, dot_path;
    bool dump = false, strict = false;
    int causality_trials = 50;
    CommonModel model;
    compile_cmd->add_option("program", program, "seed name or .dna path")->required();
    model.attach(compile_cmd);
    compile_cmd->add_option("--causality-trials", causality_trials, "perturbation trials");
    compile_cmd->add_option("--dot", dot_path, "write a DOT rendering here");
    compile_cmd->add_flag("--dump", dump, "print the node list");

    auto* train_cmd = app.add_subcommand("train", "train a program on a byte corpus");
    TrainFlags tf;
    CommonModel train_model;
    train_cmd->add_option("program", program, "seed name or .dna path")->required();
    train_cmd->add_option("corpus", corpus_path, "corpus file (raw bytes)")->required();
    train_model.attach(train_cmd);
    tf.attach(train_cmd);
    train_cmd->add_option("--run-dir", run_dir, "artifact directory");
    train_cmd->add_flag("--strict", strict, "exit nonzero on a degenerate record");

    auto* search_cmd = app.add_subcommand("search", "regularized evolution with halving hurdles");
    CommonModel search_model;
    TrainFlags sf;
    SearchConfig sc;
    bool resume = false;
    search_cmd->add_option("program", program, "seed name or .dna path")->required();
    search_cmd->add_option("corpus", corpus_path, "corpus file")->required();
    search_model.attach(search_cmd);
    sf.attach(search_cmd);
    search_cmd->add_option("--population", sc.population, "population ring size");
    search_cmd->add_option("--tournament", sc.tournament, "tournament size");
    search_cmd->add_option("--candidates", sc.candidates, "mutated candidates to evaluate");
    search_cmd->add_option("--hurdles", sc.hurdles, "halving hurdle count");
    search_cmd->add_option("--proxy-fraction", sc.proxy_fraction,
                           "fraction of the budget used as a training proxy");
    search_cmd->add_option("--workers", sc.workers, "parallel evaluators");
    search_cmd->add_option("--master-seed", sc.master_seed, "search master seed");
    search_cmd->add_option("--top-n", sc.top_n, "programs to emit");
    search_cmd->add_option("--median-window", sc.median_window,
                           "sliding hurdle-median window (0 = global)");
    search_cmd->add_flag("--random-init", sc.random_init,
                         "initialize with random programs instead of seed copies");
    search_cmd->add_option("--run-dir", run_dir, "artifact directory");
    search_cmd->add_flag("--resume", resume, "continue from the run directory checkpoint");

    auto* ablate_cmd = app.add_subcommand("ablate", "insertion and ablation studies");
    CommonModel ablate_model;
    TrainFlags af;
    std::string mode = "insertion";
    std::vector<std::string> flag_names;
    ablate_cmd->add_option("program", program, "base program")->required();
    ablate_cmd->add_option("corpus", corpus_path, "corpus file")->required();
    ablate_cmd->add_option("--mode", mode, "insertion | ablation")
        ->check(CLI::IsMember({"insertion", "ablation"}));
    ablate_cmd->add_option("--flags", flag_names, "modification flags (or 'all')")->delimiter(',');
    ablate_model.attach(ablate_cmd);
    af.attach(ablate_cmd);
    ablate_cmd->add_option("--run-dir", run_dir, "artifact directory");

    auto* analyze_cmd = app.add_subcommand("analyze", "fits, speedups, savings, pareto fronts");
    std::string a_mode, baseline, treatment, out_dir;
    std::vector<std::string> inputs;
    bool wall_clock = false, hull = false, plain_ls = false;
    analyze_cmd->add_option("--mode", a_mode, "fit | speedup | savings | pareto")->required();
    analyze_cmd->add_option("inputs", inputs, "input csv files");
    analyze_cmd->add_option("--baseline", baseline, "baseline curve csv");
    analyze_cmd->add_option("--treatment", treatment, "treatment curve csv");
    analyze_cmd->add_flag("--wall-clock", wall_clock, "use wall seconds as the compute axis");
    analyze_cmd->add_flag("--hull", hull, "fit on the lower convex hull of the curve");
    analyze_cmd->add_flag("--plain-ls", plain_ls, "plain least squares instead of Huber");
    analyze_cmd->add_option("--out", out_dir, "write analysis.json / analysis.csv here");
    analyze_cmd->add_flag("--strict", strict, "exit nonzero when a target is not reached");

    auto* seeds_cmd = app.add_subcommand("seeds", "list or emit the canonical programs");
    std::string emit_dir;
    seeds_cmd->add_option("--emit", emit_dir, "write the .dna files here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (compile_cmd->parsed()) {
            return cmd_compile(program, model, causality_trials, dot_path, dump);
        }
        if (train_cmd->parsed()) {
            if (run_dir.empty()) run_dir = default_run_root() + "/train";
            return cmd_train(program, corpus_path, train_model, tf, run_dir, strict);
        }
        if (search_cmd->parsed()) {
            if (run_dir.empty()) run_dir = default_run_root() + "/search";
            return cmd_search(program, corpus_path, search_model, sf, sc, run_dir, resume);
        }
        if (ablate_cmd->parsed()) {
            if (run_dir.empty()) run_dir = default_run_root() + "/ablate";
            return cmd_ablate(program, corpus_path, ablate_model, af, mode, flag_names, run_dir);
        }
        if (analyze_cmd->parsed()) {
            return cmd_analyze(a_mode, inputs, baseline, treatment, wall_clock, hull, plain_ls,
                               out_dir, strict);
        }
        if (seeds_cmd->parsed()) {
            return cmd_seeds(emit_dir);
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ResizeFailure& e) {
        std::cerr << "resize failure: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CompileError& e) {
        std::cerr << "compile error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidData& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NotReached& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const EngineError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
