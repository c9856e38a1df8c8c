#include "prefgen/pipeline.h"

#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "prefgen/errors.h"
#include "prefgen/hashing.h"
#include "prefgen/http_backend.h"
#include "prefgen/mock_world.h"
#include "prefgen/prompts.h"

namespace prefgen {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Problem> load_problems(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StartupError("cannot read problems file " + path.string());
  std::vector<Problem> problems;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    Problem p;
    try {
      const json j = json::parse(line);
      p.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
      p.question = j.at("question").get<std::string>();
      const auto& a = j.at("answer");
      p.answer = a.is_string() ? a.get<std::string>() : a.dump();
    } catch (const std::exception& e) {
      throw StartupError(where + e.what());
    }
    if (p.id.empty()) throw StartupError(where + "empty id");
    if (!seen.insert(p.id).second) throw StartupError(where + "duplicate id \"" + p.id + "\"");
    problems.push_back(std::move(p));
  }
  if (in.bad()) throw StartupError("error reading " + path.string());
  return problems;
}

bool is_answer_match_orm(const BackendConfig& cfg) {
  return cfg.endpoint == "mock" || cfg.endpoint == "answer-match";
}

std::unique_ptr<Gateway> make_gateway(const PipelineConfig& cfg) {
  std::shared_ptr<const MockWorld> world;
  auto mock = [&]() {
    if (!world) world = std::make_shared<const MockWorld>(cfg.mock_world);
    return world;
  };
  const std::string key = api_key_from_env();

  GatewayBackends b;
  auto generator = [&](Role role) -> std::unique_ptr<StepGenerator> {
    const auto& bc = cfg.backend(role);
    if (bc.is_mock()) return make_mock_generator(mock(), role, bc.seed);
    return make_openai_generator(bc, key);
  };
  b.policy = generator(Role::Policy);
  b.small_policy = generator(Role::SmallPolicy);
  b.prm = cfg.prm.is_mock() ? make_mock_prm(mock(), cfg.prm.seed) : make_http_prm(cfg.prm, key);
  if (is_answer_match_orm(cfg.orm)) {
    b.orm = std::make_unique<AnswerMatchOrm>();
  } else {
    b.orm = make_http_orm(cfg.orm, key);
  }
  return std::make_unique<Gateway>(std::move(b), cfg.max_inflight_requests);
}

void preflight_backends(const PipelineConfig& cfg) {
  for (Role role : {Role::Policy, Role::SmallPolicy, Role::Prm, Role::Orm}) {
    const auto& bc = cfg.backend(role);
    if (bc.is_mock() || (role == Role::Orm && is_answer_match_orm(bc))) continue;
    if (!preflight(bc))
      throw StartupError("backend " + std::string(to_string(role)) + " unreachable at " +
                         bc.endpoint);
  }
}

JournalRecord process_problem(Gateway& gateway, const PipelineConfig& cfg,
                              const Problem& problem, std::size_t index,
                              ExpansionOrder order) {
  const std::string started = utc_timestamp();
  StageContext ctx{gateway, cfg, derive_problem_seed(cfg.seed, problem.id), order};
  Stage1Result s1 = run_stage1(problem, ctx);
  std::optional<StageOutcome> follow_up;
  if (s1.route) {
    if (s1.route->decision == RouteDecision::SelfCorrect) {
      follow_up = self_correct(problem, s1.rollout.sol_max, ctx);
    } else if (s1.route->decision == RouteDecision::Diversify) {
      follow_up = diversify(problem, s1.rollout.sol_max, ctx);
    }
  }
  JournalRecord record = make_record(problem, index, s1, follow_up);
  record.started_at = started;
  record.finished_at = utc_timestamp();
  return record;
}

std::uint64_t run_fingerprint(const PipelineConfig& cfg, const std::vector<Problem>& problems) {
  std::uint64_t h = hash_combine(config_fingerprint(cfg), prompt_version());
  for (const auto& p : problems) {
    h = hash_combine(h, p.id);
    h = hash_combine(h, p.question);
    h = hash_combine(h, p.answer);
  }
  return h;
}

void write_stats_json(const DatasetStats& stats, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ExportError("cannot write " + tmp.string());
    out << stats_to_json(stats).dump(2) << '\n';
    if (!out) throw ExportError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

struct Handoff {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<JournalRecord> ready;
  std::size_t workers_left = 0;
  std::vector<std::string> errors;
};

}  // namespace

RunReport run_pipeline(const PipelineConfig& cfg, const std::vector<Problem>& problems,
                       const fs::path& out_dir, const RunOptions& options) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw StartupError("cannot create output directory " + out_dir.string() + ": " +
                             ec.message());

  const fs::path journal_path = out_dir / kJournalFile;
  JournalHeader header;
  header.total_questions = problems.size();
  header.config_fingerprint = run_fingerprint(cfg, problems);
  header.prompt_version = std::string(prompt_version());

  RunReport report;
  std::unordered_set<std::string> done;
  std::optional<JournalWriter> writer;
  if (options.resume && fs::exists(journal_path)) {
    JournalContents existing = read_journal(journal_path, TailPolicy::Repair);
    if (!existing.header)
      throw StartupError("cannot resume: " + journal_path.string() + " has no header");
    if (existing.header->config_fingerprint != header.config_fingerprint ||
        existing.header->total_questions != header.total_questions)
      throw StartupError("cannot resume: " + journal_path.string() +
                         " was written with a different config or corpus");
    for (const auto& r : existing.records) done.insert(r.problem_id);
    writer.emplace(JournalWriter::resume(journal_path, existing.valid_bytes, options.fsync));
  } else {
    writer.emplace(JournalWriter::create(journal_path, header, options.fsync));
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < problems.size(); ++i)
    if (!done.contains(problems[i].id)) pending.push_back(i);
  report.skipped = problems.size() - pending.size();

  std::size_t quota = pending.size();
  if (options.stop_after) quota = std::min(quota, *options.stop_after);

  if (quota > 0) {
    auto gateway = make_gateway(cfg);
    std::atomic<std::size_t> next{0};
    Handoff handoff;
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency), quota);
    handoff.workers_left = n_workers;

    auto cancelled = [&] { return options.cancel && options.cancel->load(); };
    auto work = [&] {
      for (;;) {
        if (cancelled()) break;
        const std::size_t k = next.fetch_add(1);
        if (k >= quota) break;
        const std::size_t index = pending[k];
        const Problem& problem = problems[index];
        try {
          JournalRecord record = process_problem(*gateway, cfg, problem, index, options.order);
          std::lock_guard lock(handoff.mu);
          handoff.ready.push_back(std::move(record));
        } catch (const std::exception& e) {
          std::lock_guard lock(handoff.mu);
          handoff.errors.push_back(problem.id + ": " + e.what());
        }
        handoff.cv.notify_one();
      }
      {
        std::lock_guard lock(handoff.mu);
        --handoff.workers_left;
      }
      handoff.cv.notify_one();
    };

    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);

    std::exception_ptr write_failure;
    for (;;) {
      std::unique_lock lock(handoff.mu);
      handoff.cv.wait(lock, [&] { return !handoff.ready.empty() || handoff.workers_left == 0; });
      if (handoff.ready.empty()) break;
      JournalRecord record = std::move(handoff.ready.front());
      handoff.ready.pop_front();
      lock.unlock();
      if (write_failure) continue;
      try {
        writer->append(record);
        ++report.processed;
      } catch (...) {
        write_failure = std::current_exception();
      }
    }
    pool.clear();
    if (write_failure) std::rethrow_exception(write_failure);
    report.errors = std::move(handoff.errors);
    report.internal_errors = report.errors.size();
  }
  writer.reset();

  const JournalReplay replay = replay_journal(read_journal(journal_path, TailPolicy::Strict));
  report.stats = replay.stats;
  report.interrupted = replay.stats.completed + report.internal_errors < problems.size();
  export_jsonl(replay.pairs, out_dir / kPairsFile);
  write_stats_json(report.stats, out_dir / kStatsFile);
  return report;
}

}  // namespace prefgen
