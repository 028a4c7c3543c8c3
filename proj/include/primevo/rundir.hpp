// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "primevo/analysis.hpp"
#include "primevo/evolution.hpp"
#include "primevo/trainer.hpp"

namespace primevo {

// Run-directory convention: a config snapshot is written before any
// computation, logs are append-only, checkpoints replaced atomically.
class RunDirectory {
  public:
    explicit RunDirectory(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path path(const std::string& name) const { return root_ / name; }

    // Writes config.json with a content hash; returns the hash.
    std::string write_config_snapshot(const std::string& config_json);
    std::optional<std::string> config_hash() const;

    void append_jsonl(const std::string& file, const std::string& json_line);
    void write_atomic(const std::string& file, const std::string& content);

  private:
    std::filesystem::path root_;
};

std::string fitness_record_json(const FitnessRecord& rec);
std::string log_entry_json(const LogEntry& e);

std::string curve_csv(const std::vector<CurvePoint>& curve);
// columns: step, wall_seconds, train_loss, valid_loss
std::vector<CurvePoint> parse_curve_csv(const std::string& text);
LossCurve curve_to_loss_curve(const std::vector<CurvePoint>& curve, bool wall_clock,
                              const std::string& label);
LossCurve load_loss_curve_csv(const std::string& path, bool wall_clock,
                              const std::string& label);

// Search checkpointing (population + gate history + counters + rng-free).
std::string search_state_json(const SearchState& state, std::uint64_t master_seed);
SearchState parse_search_state(const std::string& json_text, std::uint64_t expected_seed);

// Deterministic synthetic character corpus with phrase-level structure;
// used by tests and as a bundled default.
std::vector<std::uint8_t> synthetic_corpus(std::size_t bytes, std::uint64_t seed);

}  // namespace primevo
