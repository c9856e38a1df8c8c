#pragma once

// Writes a journal with prescribed per-stage pair counts. Problems that do
// not yield a pair are split between drops, rejected follow-ups and aborts.

#include <filesystem>
#include <string>

#include "prefgen/journal.h"

namespace prefgen::testing {

struct SyntheticCounts {
  std::size_t total_questions = 0;
  std::size_t stage1 = 0;
  std::size_t stage2 = 0;
  std::size_t stage3 = 0;
};

inline PreferencePair synthetic_pair(std::size_t i, Stage stage) {
  PreferencePair p;
  p.problem_id = "syn-" + std::to_string(i);
  p.prompt = "Problem:\nquestion " + std::to_string(i) + "\n\nSolution:\n";
  p.chosen = "right " + std::to_string(i);
  p.rejected = "wrong " + std::to_string(i);
  p.stage = stage;
  p.chosen_reward = 3.0;
  p.rejected_reward = 1.0;
  if (stage == Stage::SelfCorrection) {
    p.failed_reward = 2.0;
    p.correction_prompt = p.prompt + "bad\n\nfix it\n\nSolution:\n";
  }
  return p;
}

inline void write_synthetic_journal(const std::filesystem::path& path,
                                    const SyntheticCounts& counts) {
  JournalHeader header;
  header.total_questions = counts.total_questions;
  header.prompt_version = "v1";
  auto writer = JournalWriter::create(path, header, false);
  std::size_t i = 0;
  auto base = [&](RouteDecision route, bool max_ok, bool min_ok) {
    JournalRecord r;
    r.problem_id = "syn-" + std::to_string(i);
    r.index = i;
    r.route = route;
    r.route_reason = std::string(to_string(route));
    r.max_correct = max_ok;
    r.min_correct = min_ok;
    r.max_reward = 3.0;
    r.min_reward = 1.0;
    r.started_at = r.finished_at = "2025-01-01T00:00:00.000Z";
    return r;
  };
  auto emit = [&](RouteDecision route, Stage stage, bool max_ok, bool min_ok) {
    auto r = base(route, max_ok, min_ok);
    if (route == RouteDecision::SelfCorrect) r.failed_reward = 2.0;
    r.outcomes.push_back({stage, true, std::nullopt, {synthetic_pair(i, stage)}});
    writer.append(r);
    ++i;
  };
  for (std::size_t k = 0; k < counts.stage1; ++k)
    emit(RouteDecision::EmitPair, Stage::SelfGeneration, true, false);
  for (std::size_t k = 0; k < counts.stage2; ++k)
    emit(RouteDecision::SelfCorrect, Stage::SelfCorrection, false, false);
  for (std::size_t k = 0; k < counts.stage3; ++k)
    emit(RouteDecision::Diversify, Stage::Diversity, true, true);
  std::size_t rest = 0;
  while (i < counts.total_questions) {
    JournalRecord r;
    switch (rest++ % 4) {
      case 0: r = base(RouteDecision::Drop, false, true); break;
      case 1:
        r = base(RouteDecision::SelfCorrect, false, false);
        r.failed_reward = 2.0;
        r.outcomes.push_back({Stage::SelfCorrection, false, "correction failed", {}});
        break;
      case 2:
        r = base(RouteDecision::Diversify, true, true);
        r.outcomes.push_back({Stage::Diversity, false, "no incorrect found", {}});
        break;
      default:
        r = base(RouteDecision::Drop, false, false);
        r.route.reset();
        r.status = ProblemStatus::Aborted;
        r.abort_reason = "backend unavailable";
        break;
    }
    writer.append(r);
    ++i;
  }
}

}  // namespace prefgen::testing
