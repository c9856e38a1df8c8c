#pragma once

// Append-only run journal (JSONL). The first line is a header; every other
// line is the terminal record of one problem. Each record is written with a
// single write() and synced before the next problem is acknowledged, so a
// crash can leave at most one torn line at the end of the file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefgen/pairs.h"
#include "prefgen/stages.h"

namespace prefgen {

inline constexpr int kJournalVersion = 1;

enum class ProblemStatus { Done, Aborted };

struct JournalHeader {
  int version = kJournalVersion;
  std::size_t total_questions = 0;
  std::uint64_t config_fingerprint = 0;
  std::string prompt_version;

  bool operator==(const JournalHeader&) const = default;
};

struct OutcomeRecord {
  Stage stage = Stage::SelfGeneration;
  bool accepted = false;
  std::optional<std::string> reject_reason;
  std::vector<PreferencePair> pairs;  // trajectory pair first, then step pairs

  bool operator==(const OutcomeRecord&) const = default;
};

struct JournalRecord {
  std::string problem_id;
  std::size_t index = 0;  // position in the input corpus
  ProblemStatus status = ProblemStatus::Done;
  std::optional<RouteDecision> route;
  std::string route_reason;
  bool max_correct = false;
  bool min_correct = false;
  double max_reward = 0.0;
  double min_reward = 0.0;
  std::optional<double> failed_reward;  // stage-1 max reward when self-correcting
  std::vector<OutcomeRecord> outcomes;
  std::string abort_reason;
  std::string started_at;
  std::string finished_at;

  bool operator==(const JournalRecord&) const = default;
};

nlohmann::ordered_json header_to_json(const JournalHeader& header);
JournalHeader header_from_json(const nlohmann::json& j);
nlohmann::ordered_json record_to_json(const JournalRecord& record);
JournalRecord record_from_json(const nlohmann::json& j);

// Builds the journal record for one problem from its stage results.
JournalRecord make_record(const Problem& problem, std::size_t index,
                          const Stage1Result& stage1,
                          const std::optional<StageOutcome>& follow_up);

std::string utc_timestamp();

class JournalWriter {
 public:
  // Truncates `path` and writes the header.
  static JournalWriter create(const std::filesystem::path& path, const JournalHeader& header,
                              bool sync = true);
  // Opens an existing journal for appending after truncating it to
  // `valid_bytes` (dropping a torn tail).
  static JournalWriter resume(const std::filesystem::path& path, std::uintmax_t valid_bytes,
                              bool sync = true);

  JournalWriter(JournalWriter&& other) noexcept;
  JournalWriter& operator=(JournalWriter&& other) noexcept;
  JournalWriter(const JournalWriter&) = delete;
  JournalWriter& operator=(const JournalWriter&) = delete;
  ~JournalWriter();

  void append(const JournalRecord& record);

 private:
  JournalWriter(int fd, std::filesystem::path path, bool sync);
  void write_line(const std::string& line);

  int fd_ = -1;
  std::filesystem::path path_;
  bool sync_ = true;
};

enum class TailPolicy {
  Strict,  // a torn or unparseable line is an error
  Repair,  // stop at the last complete record
};

struct JournalContents {
  std::optional<JournalHeader> header;
  std::vector<JournalRecord> records;
  std::uintmax_t valid_bytes = 0;  // length of the intact prefix
  bool torn_tail = false;
};

// Throws JournalError (Strict) naming the last valid record.
JournalContents read_journal(const std::filesystem::path& path, TailPolicy policy);

struct JournalReplay {
  DatasetStats stats;
  std::vector<PreferencePair> pairs;  // corpus order, validated, deduplicated
};

JournalReplay replay_journal(const JournalContents& contents);

}  // namespace prefgen
