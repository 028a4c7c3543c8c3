// SPDX-License-Identifier: Apache-2.0

#include "primevo/rundir.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace primevo {

namespace fs = std::filesystem;
using nlohmann::json;

RunDirectory::RunDirectory(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
}

std::string RunDirectory::write_config_snapshot(const std::string& config_json) {
    const std::uint64_t h = splitmix64(std::hash<std::string>{}(config_json));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    json j = json::parse(config_json);
    j["config_hash"] = buf;
    write_atomic("config.json", j.dump(2) + "\n");
    return buf;
}

std::optional<std::string> RunDirectory::config_hash() const {
    std::ifstream in(root_ / "config.json");
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("config_hash")) return std::nullopt;
    return j["config_hash"].get<std::string>();
}

void RunDirectory::append_jsonl(const std::string& file, const std::string& json_line) {
    std::ofstream out(root_ / file, std::ios::app);
    out << json_line << "\n";
}

void RunDirectory::write_atomic(const std::string& file, const std::string& content) {
    const fs::path tmp = root_ / (file + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
    }
    fs::rename(tmp, root_ / file);
}

std::string fitness_record_json(const FitnessRecord& rec) {
    json j;
    j["candidate_id"] = rec.candidate_id;
    j["hurdle_reached"] = rec.hurdle_reached;
    j["steps"] = rec.steps;
    j["wall_seconds"] = rec.wall_seconds;
    j["loss"] = rec.loss;
    j["perplexity"] = rec.perplexity;
    j["degenerate"] = rec.degenerate;
    j["note"] = rec.note;
    return j.dump();
}

std::string log_entry_json(const LogEntry& e) {
    json j;
    j["id"] = e.id;
    j["parent"] = e.parent;
    j["mutation"] = e.mutation;
    j["hurdle_reached"] = e.hurdle_reached;
    j["fitness"] = e.fitness;
    j["perplexity"] = e.perplexity;
    j["degenerate"] = e.degenerate;
    j["steps"] = e.steps;
    j["wall_seconds"] = e.wall_seconds;
    j["hash"] = e.hash;
    j["note"] = e.note;
    j["dna"] = e.dna_text;
    return j.dump();
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream out;
    out << "step,wall_seconds,train_loss,valid_loss\n";
    for (const CurvePoint& p : curve) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.17g,%.17g\n",
                      static_cast<long long>(p.step), p.wall_seconds, p.train_loss, p.valid_loss);
        out << buf;
    }
    return out.str();
}

std::vector<CurvePoint> parse_curve_csv(const std::string& text) {
    std::vector<CurvePoint> curve;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.find("step") != std::string::npos) continue;
        }
        CurvePoint p;
        if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf", reinterpret_cast<long long*>(&p.step),
                        &p.wall_seconds, &p.train_loss, &p.valid_loss) != 4) {
            throw ParseError(lineno, "malformed curve row: " + line);
        }
        curve.push_back(p);
    }
    return curve;
}

LossCurve curve_to_loss_curve(const std::vector<CurvePoint>& curve, bool wall_clock,
                              const std::string& label) {
    LossCurve lc;
    lc.label = label;
    for (const CurvePoint& p : curve) {
        const double c = wall_clock ? p.wall_seconds : static_cast<double>(p.step);
        if (c <= 0.0) continue;  // drop the step-0 sample; log axes need c > 0
        if (!lc.compute.empty() && c <= lc.compute.back()) continue;
        lc.push(c, p.valid_loss);
    }
    return lc;
}

LossCurve load_loss_curve_csv(const std::string& path, bool wall_clock,
                              const std::string& label) {
    std::ifstream in(path);
    if (!in) throw InvalidData("cannot open curve csv: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return curve_to_loss_curve(parse_curve_csv(ss.str()), wall_clock, label);
}

std::string search_state_json(const SearchState& state, std::uint64_t master_seed) {
    json j;
    j["master_seed"] = master_seed;
    j["issued"] = state.issued;
    j["completed"] = state.completed;
    j["capacity"] = state.population.capacity();
    json pop = json::array();
    for (const auto& m : state.population.members()) {
        json e;
        e["dna"] = serialize_program(m.dna);
        e["fitness"] = m.fitness;
        e["id"] = m.id;
        pop.push_back(e);
    }
    j["population"] = pop;
    j["gate_history"] = state.gate_history;
    return j.dump();
}

SearchState parse_search_state(const std::string& json_text, std::uint64_t expected_seed) {
    json j = json::parse(json_text);
    if (j["master_seed"].get<std::uint64_t>() != expected_seed) {
        throw InvalidData("checkpoint was produced with a different master seed");
    }
    SearchState state{Population(j["capacity"].get<int>())};
    state.issued = j["issued"].get<std::int64_t>();
    state.completed = j["completed"].get<std::int64_t>();
    for (const auto& e : j["population"]) {
        Population::Member m;
        m.dna = parse_program(e["dna"].get<std::string>());
        m.fitness = e["fitness"].get<double>();
        m.id = e["id"].get<std::int64_t>();
        state.population.insert(std::move(m));
    }
    state.gate_history = j["gate_history"].get<std::vector<std::vector<double>>>();
    return state;
}

// Sentence templates over small word banks, with the subject and object
// repeated later in each line. The repeats sit 15-40 characters back, so
// models that can retrieve from context have real headroom over short
// receptive fields while a few hundred steps still show clear progress.
std::vector<std::uint8_t> synthetic_corpus(std::size_t bytes, std::uint64_t seed) {
    static const char* const names[] = {"marta", "edwin", "sofia",  "viktor",
                                        "priya", "jonas", "amelia", "tomas"};
    static const char* const verbs[] = {"keeps", "finds", "carries", "remembers",
                                        "follows", "repairs", "collects", "measures"};
    static const char* const objects[] = {"the grain", "a worn map", "the steady beat",
                                          "late tomatoes", "cold water", "forgotten books",
                                          "spare parts", "small hours"};
    static const char* const tails[] = {"through the winter", "before the rain",
                                        "without a sound", "every morning", "against the wind",
                                        "by candle light", "along the road", "after the fair"};
    Rng rng(seed);
    std::string text;
    text.reserve(bytes + 128);
    while (text.size() < bytes) {
        const char* name = names[rng.index(8)];
        const char* object = objects[rng.index(8)];
        text += name;
        text += ' ';
        text += verbs[rng.index(8)];
        text += ' ';
        text += object;
        text += ' ';
        text += tails[rng.index(8)];
        text += ". yes, ";
        text += object;
        text += ", ";
        text += name;
        text += " said. ";
        if (rng.index(6) == 0) text += '\n';
    }
    text.resize(bytes);
    return std::vector<std::uint8_t>(text.begin(), text.end());
}

}  // namespace primevo
