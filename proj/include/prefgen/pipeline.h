#pragma once

// End-to-end runs: stage 1, routing and the follow-up stage for every problem
// in a corpus, with a crash-safe journal and exported pairs/stats.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "prefgen/config.h"
#include "prefgen/journal.h"
#include "prefgen/pairs.h"

namespace prefgen {

inline constexpr std::string_view kJournalFile = "journal.jsonl";
inline constexpr std::string_view kPairsFile = "pairs.jsonl";
inline constexpr std::string_view kStatsFile = "stats.json";

// JSONL of {"id", "question", "answer"}. Throws StartupError naming the path
// and line.
std::vector<Problem> load_problems(const std::filesystem::path& path);

// ORM endpoints "mock" and "answer-match" both select answer matching.
bool is_answer_match_orm(const BackendConfig& cfg);

std::unique_ptr<Gateway> make_gateway(const PipelineConfig& cfg);

// Throws StartupError for the first unreachable remote endpoint.
void preflight_backends(const PipelineConfig& cfg);

// Runs one problem to its terminal record. Backend failures end up as an
// aborted record; anything else propagates.
JournalRecord process_problem(Gateway& gateway, const PipelineConfig& cfg,
                              const Problem& problem, std::size_t index,
                              ExpansionOrder order = ExpansionOrder::MaxFirst);

// Identifies config + corpus; a resumed journal must carry the same value.
std::uint64_t run_fingerprint(const PipelineConfig& cfg, const std::vector<Problem>& problems);

struct RunOptions {
  bool resume = false;
  // Process at most this many problems in this invocation (the rest are left
  // for a later --resume).
  std::optional<std::size_t> stop_after;
  bool fsync = true;
  ExpansionOrder order = ExpansionOrder::MaxFirst;
  const std::atomic<bool>* cancel = nullptr;
};

struct RunReport {
  DatasetStats stats;
  std::size_t processed = 0;       // problems journaled by this invocation
  std::size_t skipped = 0;         // already journaled before a resume
  std::size_t internal_errors = 0;
  bool interrupted = false;        // some problems are still unjournaled
  std::vector<std::string> errors;
};

// Writes journal.jsonl, pairs.jsonl and stats.json into out_dir. Pairs and
// stats are always rebuilt from the journal.
RunReport run_pipeline(const PipelineConfig& cfg, const std::vector<Problem>& problems,
                       const std::filesystem::path& out_dir, const RunOptions& options = {});

void write_stats_json(const DatasetStats& stats, const std::filesystem::path& path);

}  // namespace prefgen
