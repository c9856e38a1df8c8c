#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "prefgen/config.h"
#include "prefgen/errors.h"
#include "prefgen/journal.h"
#include "prefgen/mock_world.h"
#include "prefgen/pipeline.h"
#include "support/scripted.h"
#include "support/synthetic_journal.h"

using namespace prefgen;
using prefgen::testing::TempDir;
namespace fs = std::filesystem;

namespace {

PipelineConfig mock_config(int n_problems, std::uint64_t seed = 7) {
  PipelineConfig cfg;
  force_mock(cfg);
  cfg.mock_world.n_problems = n_problems;
  cfg.mock_world.seed = seed;
  cfg.seed = seed;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

RunOptions quiet() {
  RunOptions o;
  o.fsync = false;
  return o;
}

}  // namespace

TEST_CASE("config survives a JSON round trip") {
  PipelineConfig cfg = mock_config(40, 3);
  cfg.exploration_budget = 4;
  cfg.beta = 0.5;
  cfg.prm.max_retries = 1;
  cfg.mock_world.prm_discrimination = 0.0;
  TempDir dir("cfg");
  save_config(cfg, dir / "c.json");
  const PipelineConfig back = load_config(dir / "c.json");
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(config_fingerprint(back) == config_fingerprint(cfg));
}

TEST_CASE("unknown and invalid config keys are rejected") {
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"exploraton_budget", 5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"exploration_budget", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"concurrency", 0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"prm_floor", 1.5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"backends", {{"critic", {}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"beta", "high"}}), ConfigError);
  TempDir dir("cfgbad");
  write_text(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
}

TEST_CASE("fingerprint ignores concurrency but tracks search settings") {
  PipelineConfig a = mock_config(10);
  PipelineConfig b = a;
  b.concurrency = 16;
  b.max_inflight_requests = 7;
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  b.exploration_budget = 6;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
}

TEST_CASE("load_problems reports path and line") {
  TempDir dir("problems");
  write_text(dir / "ok.jsonl",
             "{\"id\":\"a\",\"question\":\"q1\",\"answer\":\"1\"}\n\n"
             "{\"id\":7,\"question\":\"q2\",\"answer\":2.5}\n");
  const auto ok = load_problems(dir / "ok.jsonl");
  REQUIRE(ok.size() == 2);
  CHECK(ok[1].id == "7");
  CHECK(ok[1].answer == "2.5");

  write_text(dir / "dup.jsonl",
             "{\"id\":\"a\",\"question\":\"q\",\"answer\":\"1\"}\n"
             "{\"id\":\"a\",\"question\":\"q\",\"answer\":\"1\"}\n");
  try {
    load_problems(dir / "dup.jsonl");
    FAIL("duplicate id accepted");
  } catch (const StartupError& e) {
    CHECK(std::string(e.what()).find("dup.jsonl:2") != std::string::npos);
  }
  write_text(dir / "missing.jsonl", "{\"id\":\"a\",\"question\":\"q\"}\n");
  CHECK_THROWS_AS(load_problems(dir / "missing.jsonl"), StartupError);
  CHECK_THROWS_AS(load_problems(dir / "nope.jsonl"), StartupError);
}

TEST_CASE("journal records round trip through JSON") {
  const PipelineConfig cfg = mock_config(30);
  auto gateway = make_gateway(cfg);
  const auto corpus = MockWorld(cfg.mock_world).make_corpus();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const JournalRecord r = process_problem(*gateway, cfg, corpus[i], i);
    const JournalRecord back = record_from_json(nlohmann::json::parse(record_to_json(r).dump()));
    CHECK(back == r);
  }
  JournalHeader h{kJournalVersion, 12, 0xfeedface12345678ULL, "v1"};
  CHECK(header_from_json(nlohmann::json::parse(header_to_json(h).dump())) == h);
}

TEST_CASE("torn tail: strict names the last record, repair drops it") {
  TempDir dir("torn");
  const fs::path path = dir / "journal.jsonl";
  prefgen::testing::write_synthetic_journal(path, {5, 2, 1, 1});
  const auto whole = slurp(path);
  write_text(path, whole + "{\"type\":\"problem\",\"problem_id\":\"syn-");

  try {
    read_journal(path, TailPolicy::Strict);
    FAIL("torn journal accepted");
  } catch (const JournalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 7") != std::string::npos);
    CHECK(msg.find("syn-4") != std::string::npos);
  }
  const auto repaired = read_journal(path, TailPolicy::Repair);
  CHECK(repaired.torn_tail);
  CHECK(repaired.records.size() == 5);
  CHECK(repaired.valid_bytes == whole.size());
}

TEST_CASE("journal with only a header yields zero stats") {
  TempDir dir("empty");
  prefgen::testing::write_synthetic_journal(dir / "j.jsonl", {0, 0, 0, 0});
  const auto replay = replay_journal(read_journal(dir / "j.jsonl", TailPolicy::Strict));
  CHECK(replay.stats == DatasetStats{});
  CHECK(replay.pairs.empty());
}

TEST_CASE("synthetic journal renders the published totals") {
  TempDir dir("table");
  prefgen::testing::write_synthetic_journal(dir / "j.jsonl", {18644, 3238, 1932, 4665});
  const auto replay = replay_journal(read_journal(dir / "j.jsonl", TailPolicy::Strict));
  CHECK(replay.stats.total_questions == 18644);
  CHECK(replay.stats.pairs_stage1 == 3238);
  CHECK(replay.stats.pairs_stage2 == 1932);
  CHECK(replay.stats.pairs_stage3 == 4665);
  CHECK(replay.stats.total_pairs == 9835);
  const std::string table = render_stats_table(replay.stats);
  CHECK(table.find("Total Question = 18644\n") != std::string::npos);
  CHECK(table.find("Total Preference Dataset = 9835\n") != std::string::npos);
}

TEST_CASE("mock run partitions every problem into exactly one route") {
  TempDir dir("run");
  const PipelineConfig cfg = mock_config(200);
  const auto corpus = MockWorld(cfg.mock_world).make_corpus();
  const RunReport rep = run_pipeline(cfg, corpus, dir.path(), quiet());
  const DatasetStats& s = rep.stats;
  CHECK_FALSE(rep.interrupted);
  CHECK(rep.internal_errors == 0);
  CHECK(rep.processed == corpus.size());
  CHECK(s.completed == corpus.size());
  CHECK(s.routed_emit + s.routed_self_correct + s.routed_diversify + s.dropped + s.aborted ==
        corpus.size());
  CHECK(s.total_pairs == s.pairs_stage1 + s.pairs_stage2 + s.pairs_stage3);
  CHECK(s.pairs_stage1 <= s.routed_emit);
  CHECK(s.pairs_stage2 + s.rejected_stage2 == s.routed_self_correct);
  CHECK(s.pairs_stage3 + s.rejected_stage3 == s.routed_diversify);

  const auto scan = scan_jsonl(dir / std::string(kPairsFile));
  CHECK(scan.failures.empty());
  CHECK(scan.pairs.size() == s.total_pairs);
  CHECK(stats_from_json(nlohmann::json::parse(slurp(dir / std::string(kStatsFile)))) == s);
}

TEST_CASE("self-correction pairs beat the journaled failed reward") {
  TempDir dir("sc");
  const PipelineConfig cfg = mock_config(200, 11);
  const auto corpus = MockWorld(cfg.mock_world).make_corpus();
  run_pipeline(cfg, corpus, dir.path(), quiet());
  const auto contents = read_journal(dir / std::string(kJournalFile), TailPolicy::Strict);
  std::size_t checked = 0;
  for (const auto& r : contents.records) {
    for (const auto& o : r.outcomes) {
      if (o.stage != Stage::SelfCorrection || !o.accepted) continue;
      REQUIRE(r.failed_reward.has_value());
      REQUIRE_FALSE(o.pairs.empty());
      CHECK(o.pairs.front().chosen_correct);
      CHECK(o.pairs.front().chosen_reward > *r.failed_reward);
      CHECK(o.pairs.front().failed_reward == r.failed_reward);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("outputs are independent of concurrency and repeat runs") {
  PipelineConfig cfg = mock_config(120, 5);
  const auto corpus = MockWorld(cfg.mock_world).make_corpus();
  TempDir a("c1"), b("c4"), c("c4b");
  cfg.concurrency = 1;
  run_pipeline(cfg, corpus, a.path(), quiet());
  cfg.concurrency = 4;
  run_pipeline(cfg, corpus, b.path(), quiet());
  run_pipeline(cfg, corpus, c.path(), quiet());
  const auto pairs = std::string(kPairsFile);
  const auto stats = std::string(kStatsFile);
  CHECK(slurp(a / pairs) == slurp(b / pairs));
  CHECK(slurp(b / pairs) == slurp(c / pairs));
  CHECK(slurp(a / stats) == slurp(b / stats));
}

TEST_CASE("resume after a partial run with a torn tail matches a full run") {
  PipelineConfig cfg = mock_config(90, 9);
  cfg.concurrency = 3;
  const auto corpus = MockWorld(cfg.mock_world).make_corpus();
  TempDir full("full"), part("part");
  run_pipeline(cfg, corpus, full.path(), quiet());

  RunOptions first = quiet();
  first.stop_after = 37;
  const RunReport r1 = run_pipeline(cfg, corpus, part.path(), first);
  CHECK(r1.interrupted);
  CHECK(r1.processed == 37);
  {
    std::ofstream out(part / std::string(kJournalFile), std::ios::binary | std::ios::app);
    out << "{\"type\":\"problem\",\"problem_id\":\"mock-0";
  }
  RunOptions again = quiet();
  again.resume = true;
  const RunReport r2 = run_pipeline(cfg, corpus, part.path(), again);
  CHECK_FALSE(r2.interrupted);
  CHECK(r2.skipped == 37);
  CHECK(r2.processed == corpus.size() - 37);
  CHECK(slurp(full / std::string(kPairsFile)) == slurp(part / std::string(kPairsFile)));
  CHECK(slurp(full / std::string(kStatsFile)) == slurp(part / std::string(kStatsFile)));
}

TEST_CASE("resume refuses a journal from a different config") {
  PipelineConfig cfg = mock_config(20);
  const auto corpus = MockWorld(cfg.mock_world).make_corpus();
  TempDir dir("mismatch");
  RunOptions first = quiet();
  first.stop_after = 5;
  run_pipeline(cfg, corpus, dir.path(), first);
  cfg.exploration_budget = 3;
  RunOptions again = quiet();
  again.resume = true;
  CHECK_THROWS_AS(run_pipeline(cfg, corpus, dir.path(), again), StartupError);
}

TEST_CASE("unreachable policy backend aborts every problem without crashing") {
  PipelineConfig cfg = mock_config(6);
  for (Role role : {Role::Policy, Role::SmallPolicy}) {
    auto& b = cfg.backend(role);
    b.endpoint = "http://127.0.0.1:9";
    b.max_retries = 0;
    b.request_timeout = std::chrono::milliseconds(200);
    b.retry_base_delay = std::chrono::milliseconds(1);
    b.retry_max_delay = std::chrono::milliseconds(1);
  }
  const auto corpus = MockWorld(cfg.mock_world).make_corpus();
  TempDir dir("dead");
  const RunReport rep = run_pipeline(cfg, corpus, dir.path(), quiet());
  CHECK(rep.internal_errors == 0);
  CHECK(rep.stats.aborted == corpus.size());
  CHECK(rep.stats.total_pairs == 0);
  CHECK_FALSE(rep.interrupted);
}

TEST_CASE("a malformed problem is an internal error and stays unjournaled") {
  PipelineConfig cfg = mock_config(8);
  auto corpus = MockWorld(cfg.mock_world).make_corpus();
  corpus[3].answer.clear();
  TempDir dir("internal");
  const RunReport rep = run_pipeline(cfg, corpus, dir.path(), quiet());
  CHECK(rep.internal_errors == 1);
  REQUIRE(rep.errors.size() == 1);
  CHECK(rep.errors[0].rfind(corpus[3].id + ":", 0) == 0);
  CHECK(rep.stats.completed == corpus.size() - 1);
  CHECK_FALSE(rep.interrupted);
  const auto contents = read_journal(dir / std::string(kJournalFile), TailPolicy::Strict);
  for (const auto& r : contents.records) CHECK(r.problem_id != corpus[3].id);
}
