#include "prefgen/journal.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <utility>

#include "prefgen/errors.h"

namespace prefgen {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string_view to_string(ProblemStatus status) {
  return status == ProblemStatus::Done ? "done" : "aborted";
}

ordered_json outcome_to_json(const OutcomeRecord& o) {
  ordered_json j;
  j["stage"] = std::string(prefgen::to_string(o.stage));
  j["accepted"] = o.accepted;
  if (o.reject_reason) j["reject_reason"] = *o.reject_reason;
  ordered_json pairs = ordered_json::array();
  for (const auto& p : o.pairs) pairs.push_back(pair_to_json(p));
  j["pairs"] = std::move(pairs);
  return j;
}

OutcomeRecord outcome_from_json(const json& j) {
  OutcomeRecord o;
  const auto stage = parse_stage(j.at("stage").get<std::string>());
  if (!stage) throw std::runtime_error("unknown stage in outcome");
  o.stage = *stage;
  o.accepted = j.at("accepted").get<bool>();
  if (j.contains("reject_reason")) o.reject_reason = j["reject_reason"].get<std::string>();
  for (const auto& p : j.at("pairs")) o.pairs.push_back(pair_from_json(p));
  return o;
}

OutcomeRecord outcome_record(const StageOutcome& outcome) {
  OutcomeRecord o;
  o.stage = outcome.stage;
  o.accepted = outcome.accepted;
  o.reject_reason = outcome.reject_reason;
  if (outcome.pair) o.pairs.push_back(*outcome.pair);
  for (const auto& p : outcome.step_pairs) o.pairs.push_back(p);
  return o;
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(ms));
  return buf;
}

ordered_json header_to_json(const JournalHeader& h) {
  ordered_json j;
  j["type"] = "header";
  j["version"] = h.version;
  j["total_questions"] = h.total_questions;
  j["config_fingerprint"] = h.config_fingerprint;
  j["prompt_version"] = h.prompt_version;
  return j;
}

JournalHeader header_from_json(const json& j) {
  if (j.at("type").get<std::string>() != "header") throw std::runtime_error("not a header");
  JournalHeader h;
  h.version = j.at("version").get<int>();
  if (h.version != kJournalVersion)
    throw std::runtime_error("unsupported journal version " + std::to_string(h.version));
  h.total_questions = j.at("total_questions").get<std::size_t>();
  h.config_fingerprint = j.at("config_fingerprint").get<std::uint64_t>();
  h.prompt_version = j.at("prompt_version").get<std::string>();
  return h;
}

ordered_json record_to_json(const JournalRecord& r) {
  ordered_json j;
  j["type"] = "problem";
  j["problem_id"] = r.problem_id;
  j["index"] = r.index;
  j["status"] = std::string(to_string(r.status));
  if (r.route) {
    j["route"] = std::string(prefgen::to_string(*r.route));
    j["route_reason"] = r.route_reason;
  }
  j["stage1"] = {{"max_correct", r.max_correct},
                 {"min_correct", r.min_correct},
                 {"max_reward", r.max_reward},
                 {"min_reward", r.min_reward}};
  if (r.failed_reward) j["failed_reward"] = *r.failed_reward;
  ordered_json outcomes = ordered_json::array();
  for (const auto& o : r.outcomes) outcomes.push_back(outcome_to_json(o));
  j["outcomes"] = std::move(outcomes);
  if (!r.abort_reason.empty()) j["abort_reason"] = r.abort_reason;
  j["started_at"] = r.started_at;
  j["finished_at"] = r.finished_at;
  return j;
}

JournalRecord record_from_json(const json& j) {
  if (j.at("type").get<std::string>() != "problem") throw std::runtime_error("not a problem record");
  JournalRecord r;
  r.problem_id = j.at("problem_id").get<std::string>();
  r.index = j.at("index").get<std::size_t>();
  const auto status = j.at("status").get<std::string>();
  if (status == "done") {
    r.status = ProblemStatus::Done;
  } else if (status == "aborted") {
    r.status = ProblemStatus::Aborted;
  } else {
    throw std::runtime_error("unknown status \"" + status + "\"");
  }
  if (j.contains("route")) {
    r.route = parse_route(j["route"].get<std::string>());
    if (!r.route) throw std::runtime_error("unknown route");
    r.route_reason = j.at("route_reason").get<std::string>();
  }
  const auto& s1 = j.at("stage1");
  r.max_correct = s1.at("max_correct").get<bool>();
  r.min_correct = s1.at("min_correct").get<bool>();
  r.max_reward = s1.at("max_reward").get<double>();
  r.min_reward = s1.at("min_reward").get<double>();
  if (j.contains("failed_reward")) r.failed_reward = j["failed_reward"].get<double>();
  for (const auto& o : j.at("outcomes")) r.outcomes.push_back(outcome_from_json(o));
  if (j.contains("abort_reason")) r.abort_reason = j["abort_reason"].get<std::string>();
  r.started_at = j.at("started_at").get<std::string>();
  r.finished_at = j.at("finished_at").get<std::string>();
  return r;
}

JournalRecord make_record(const Problem& problem, std::size_t index,
                          const Stage1Result& stage1,
                          const std::optional<StageOutcome>& follow_up) {
  JournalRecord r;
  r.problem_id = problem.id;
  r.index = index;
  if (stage1.rollout.aborted || !stage1.route) {
    r.status = ProblemStatus::Aborted;
    r.abort_reason = stage1.rollout.abort_reason.empty() ? "abort" : stage1.rollout.abort_reason;
    return r;
  }
  r.status = ProblemStatus::Done;
  r.route = stage1.route->decision;
  r.route_reason = stage1.route->reason;
  r.max_correct = stage1.rollout.sol_max.correct;
  r.min_correct = stage1.rollout.sol_min.correct;
  r.max_reward = stage1.rollout.sol_max.cumulative_reward;
  r.min_reward = stage1.rollout.sol_min.cumulative_reward;
  if (*r.route == RouteDecision::SelfCorrect) r.failed_reward = r.max_reward;
  if (stage1.outcome) r.outcomes.push_back(outcome_record(*stage1.outcome));
  if (follow_up) r.outcomes.push_back(outcome_record(*follow_up));
  return r;
}

JournalWriter::JournalWriter(int fd, std::filesystem::path path, bool sync)
    : fd_(fd), path_(std::move(path)), sync_(sync) {}

JournalWriter::JournalWriter(JournalWriter&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), path_(std::move(other.path_)), sync_(other.sync_) {}

JournalWriter& JournalWriter::operator=(JournalWriter&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    path_ = std::move(other.path_);
    sync_ = other.sync_;
  }
  return *this;
}

JournalWriter::~JournalWriter() {
  if (fd_ >= 0) ::close(fd_);
}

JournalWriter JournalWriter::create(const std::filesystem::path& path,
                                    const JournalHeader& header, bool sync) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0)
    throw JournalError("cannot create journal " + path.string() + ": " + std::strerror(errno));
  JournalWriter writer(fd, path, sync);
  writer.write_line(header_to_json(header).dump());
  return writer;
}

JournalWriter JournalWriter::resume(const std::filesystem::path& path,
                                    std::uintmax_t valid_bytes, bool sync) {
  std::error_code ec;
  std::filesystem::resize_file(path, valid_bytes, ec);
  if (ec) throw JournalError("cannot truncate journal " + path.string() + ": " + ec.message());
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd < 0)
    throw JournalError("cannot open journal " + path.string() + ": " + std::strerror(errno));
  return JournalWriter(fd, path, sync);
}

void JournalWriter::append(const JournalRecord& record) {
  write_line(record_to_json(record).dump());
}

void JournalWriter::write_line(const std::string& line) {
  std::string buf = line;
  buf.push_back('\n');
  const char* data = buf.data();
  std::size_t left = buf.size();
  while (left > 0) {
    const ssize_t n = ::write(fd_, data, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw JournalError("journal write failed: " + std::string(std::strerror(errno)));
    }
    data += n;
    left -= static_cast<std::size_t>(n);
  }
  if (sync_ && ::fdatasync(fd_) != 0)
    throw JournalError("journal sync failed: " + std::string(std::strerror(errno)));
}

JournalContents read_journal(const std::filesystem::path& path, TailPolicy policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw JournalError("cannot read journal " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  JournalContents contents;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto last_valid = [&]() -> std::string {
    if (!contents.records.empty())
      return "record " + std::to_string(contents.records.size()) + " (problem " +
             contents.records.back().problem_id + ")";
    return contents.header ? "the header" : "the start of the file";
  };
  while (pos < data.size()) {
    ++line_no;
    const auto end = data.find('\n', pos);
    const bool complete = end != std::string::npos;
    const std::string_view line(data.data() + pos, (complete ? end : data.size()) - pos);
    std::string error;
    if (!complete) {
      error = "torn final line";
    } else {
      try {
        const json j = json::parse(line);
        if (line_no == 1) {
          contents.header = header_from_json(j);
        } else {
          contents.records.push_back(record_from_json(j));
        }
      } catch (const std::exception& e) {
        error = e.what();
      }
    }
    if (!error.empty()) {
      contents.torn_tail = true;
      if (policy == TailPolicy::Strict)
        throw JournalError("journal " + path.string() + " is truncated or corrupt at line " +
                           std::to_string(line_no) + " (" + error + "); last valid entry is " +
                           last_valid());
      break;
    }
    pos = end + 1;
    contents.valid_bytes = pos;
  }
  return contents;
}

JournalReplay replay_journal(const JournalContents& contents) {
  JournalReplay replay;
  DatasetStats& s = replay.stats;
  s.total_questions = contents.header ? contents.header->total_questions : contents.records.size();
  s.completed = contents.records.size();

  std::vector<const JournalRecord*> ordered;
  ordered.reserve(contents.records.size());
  for (const auto& r : contents.records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const JournalRecord* a, const JournalRecord* b) { return a->index < b->index; });

  std::vector<PreferencePair> pairs;
  for (const JournalRecord* r : ordered) {
    if (r->status == ProblemStatus::Aborted) {
      ++s.aborted;
      continue;
    }
    switch (r->route.value_or(RouteDecision::Drop)) {
      case RouteDecision::EmitPair: ++s.routed_emit; break;
      case RouteDecision::SelfCorrect: ++s.routed_self_correct; break;
      case RouteDecision::Diversify: ++s.routed_diversify; break;
      case RouteDecision::Drop: ++s.dropped; break;
    }
    for (const auto& o : r->outcomes) {
      bool rejected = !o.accepted;
      for (const auto& p : o.pairs) {
        if (validate_pair(p)) {
          pairs.push_back(p);
        } else if (!p.step_level) {
          rejected = true;
        }
      }
      if (rejected) {
        switch (o.stage) {
          case Stage::SelfGeneration: ++s.rejected_stage1; break;
          case Stage::SelfCorrection: ++s.rejected_stage2; break;
          case Stage::Diversity: ++s.rejected_stage3; break;
        }
      }
    }
  }
  replay.pairs = dedupe(std::move(pairs));
  const DatasetStats counts = count_pairs(replay.pairs);
  s.pairs_stage1 = counts.pairs_stage1;
  s.pairs_stage2 = counts.pairs_stage2;
  s.pairs_stage3 = counts.pairs_stage3;
  s.total_pairs = counts.total_pairs;
  return replay;
}

}  // namespace prefgen
