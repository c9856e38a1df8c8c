#pragma once

// Preference pairs: validation, deduplication and the JSONL dataset format.
//
// One JSON object per line, keys in this order:
//   {"prompt": str, "chosen": str, "rejected": str, "stage": str,
//    "meta": {"problem_id": str, "chosen_reward": num, "rejected_reward": num,
//             "chosen_correct": bool, "rejected_correct": bool,
//             ["failed_reward": num, "correction_prompt": str,]   // stage 2
//             ["step_level": int]}}                              // step pairs

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefgen/types.h"

namespace prefgen {

struct PreferencePair {
  std::string problem_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  Stage stage = Stage::SelfGeneration;
  double chosen_reward = 0.0;
  double rejected_reward = 0.0;
  bool chosen_correct = true;
  bool rejected_correct = false;
  // Self-correction pairs: cumulative reward of the failed stage-1 solution
  // and the correction prefix that produced the chosen trajectory.
  std::optional<double> failed_reward;
  std::optional<std::string> correction_prompt;
  std::optional<int> step_level;

  bool operator==(const PreferencePair&) const = default;
};

struct PairCheck {
  bool valid = true;
  std::string reason;  // machine-readable code when invalid

  explicit operator bool() const { return valid; }
};

PairCheck validate_pair(const PreferencePair& pair);

// Drops repeats of (problem_id, chosen, rejected); keeps first occurrence.
std::vector<PreferencePair> dedupe(std::vector<PreferencePair> pairs);

struct DatasetStats {
  std::size_t total_questions = 0;
  std::size_t pairs_stage1 = 0;
  std::size_t pairs_stage2 = 0;
  std::size_t pairs_stage3 = 0;
  std::size_t total_pairs = 0;
  std::size_t aborted = 0;
  std::size_t dropped = 0;
  // Route accounting over non-aborted problems.
  std::size_t routed_emit = 0;
  std::size_t routed_self_correct = 0;
  std::size_t routed_diversify = 0;
  std::size_t rejected_stage1 = 0;
  std::size_t rejected_stage2 = 0;
  std::size_t rejected_stage3 = 0;
  std::size_t completed = 0;  // problems with a terminal journal record

  bool operator==(const DatasetStats&) const = default;
};

DatasetStats count_pairs(std::span<const PreferencePair> pairs);

nlohmann::ordered_json stats_to_json(const DatasetStats& stats);
DatasetStats stats_from_json(const nlohmann::json& j);
std::string render_stats_table(const DatasetStats& stats);

nlohmann::ordered_json pair_to_json(const PreferencePair& pair);
// Throws std::runtime_error describing the first structural problem.
PreferencePair pair_from_json(const nlohmann::json& j);

// Writes atomically (temp file + rename). Refuses invalid pairs; on any
// failure no file is left at `path`.
DatasetStats export_jsonl(std::span<const PreferencePair> pairs,
                          const std::filesystem::path& path);

struct LineFailure {
  std::size_t line = 0;
  bool malformed = false;  // parse/structure error vs. invalid pair
  std::string message;
};

struct DatasetScan {
  std::vector<PreferencePair> pairs;
  std::vector<LineFailure> failures;
};

// Parses and validates every line, collecting all failures.
DatasetScan scan_jsonl(const std::filesystem::path& path);

// Fail-closed: ImportError / ValidationError for the first bad line.
std::vector<PreferencePair> import_jsonl(const std::filesystem::path& path);

}  // namespace prefgen
