// prefgen: preference-pair generation, dataset checks and toy DPO training.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "prefgen/dpo.h"
#include "prefgen/errors.h"
#include "prefgen/journal.h"
#include "prefgen/mock_world.h"
#include "prefgen/pipeline.h"

namespace fs = std::filesystem;
using namespace prefgen;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitStartup = 2;

std::atomic<bool> g_cancel{false};

extern "C" void on_signal(int) { g_cancel.store(true); }

struct RunArgs {
  std::string config;
  std::string problems;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> concurrency;
  std::optional<std::size_t> stop_after;
  bool resume = false;
  bool mock = false;
  bool no_fsync = false;
};

int cmd_run(const RunArgs& a) {
  PipelineConfig cfg;
  std::vector<Problem> problems;
  try {
    if (!a.config.empty()) cfg = load_config(a.config);
    if (a.mock) force_mock(cfg);
    if (a.seed) cfg.seed = *a.seed;
    if (a.concurrency) cfg.concurrency = *a.concurrency;
    cfg.validate();
    if (!a.problems.empty()) {
      problems = load_problems(a.problems);
    } else if (a.mock) {
      problems = MockWorld(cfg.mock_world).make_corpus();
    } else {
      throw StartupError("--problems is required unless --mock is given");
    }
    preflight_backends(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStartup;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  RunOptions options;
  options.resume = a.resume;
  options.stop_after = a.stop_after;
  options.fsync = !a.no_fsync;
  options.cancel = &g_cancel;

  RunReport report;
  try {
    report = run_pipeline(cfg, problems, a.out, options);
  } catch (const StartupError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStartup;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  for (const auto& e : report.errors) std::cerr << "internal error: " << e << "\n";
  std::cout << render_stats_table(report.stats);
  std::cout << "processed " << report.processed << ", already journaled " << report.skipped
            << "\n";
  if (report.interrupted)
    std::cout << "run incomplete; continue with --resume\n";
  return report.internal_errors == 0 ? kExitOk : kExitFailure;
}

int cmd_validate(const std::string& path) {
  DatasetScan scan;
  try {
    scan = scan_jsonl(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  for (const auto& f : scan.failures)
    std::cout << path << ":" << f.line << ": " << (f.malformed ? "malformed: " : "invalid: ")
              << f.message << "\n";
  if (scan.pairs.empty() && scan.failures.empty())
    std::cerr << "warning: " << path << " contains no pairs\n";
  std::cout << scan.pairs.size() << " valid, " << scan.failures.size() << " failed\n";
  return scan.failures.empty() ? kExitOk : kExitFailure;
}

int cmd_stats(const std::string& path, bool as_json) {
  try {
    if (!fs::exists(path)) throw JournalError("journal not found: " + path);
    const auto replay = replay_journal(read_journal(path, TailPolicy::Strict));
    if (as_json) {
      std::cout << stats_to_json(replay.stats).dump(2) << "\n";
    } else {
      std::cout << render_stats_table(replay.stats);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

struct TrainArgs {
  std::string pairs;
  std::string out = "margins.csv";
  int steps = 200;
  double lr = 0.1;
  double beta = 0.8;
  std::uint64_t seed = 0;
};

int cmd_train_toy(const TrainArgs& a) {
  try {
    const auto pairs = a.pairs.empty() ? dpo::synthetic_pairs(16, 3, a.seed)
                                       : import_jsonl(a.pairs);
    if (pairs.empty()) throw EmptyBatch();
    const auto reference = dpo::make_toy_policy(pairs, a.seed);
    dpo::TrainTrace trace;
    const auto trained =
        dpo::toy_train(reference, reference, pairs, a.steps, a.lr, {a.beta}, &trace);
    dpo::write_margin_csv(trace, a.out);
    std::cout << pairs.size() << " pairs, margin " << dpo::mean_margin(reference, pairs)
              << " -> " << dpo::mean_margin(trained, pairs) << ", loss "
              << trace.points.front().loss << " -> " << trace.points.back().loss << "\n"
              << "wrote " << a.out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_dpo_eval(std::uint64_t seed, int examples) {
  bool ok = true;
  for (const auto& c : dpo::run_self_checks(seed, examples)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    ok = ok && c.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

int cmd_corpus(const std::string& config, std::optional<int> n, const std::string& out) {
  try {
    PipelineConfig cfg;
    if (!config.empty()) cfg = load_config(config);
    if (n) cfg.mock_world.n_problems = *n;
    cfg.mock_world.validate();
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw ExportError("cannot write " + out);
    for (const auto& p : MockWorld(cfg.mock_world).make_corpus())
      os << nlohmann::ordered_json{{"id", p.id}, {"question", p.question}, {"answer", p.answer}}
                .dump()
         << "\n";
    if (!os) throw ExportError("write failed for " + out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Step-level preference pair generation"};
  app.require_subcommand(1);
  int rc = kExitOk;

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Generate preference pairs over a problem corpus");
  run_cmd->add_option("--config", run.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  run_cmd->add_option("--problems", run.problems, "Problems JSONL with id, question, answer");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--seed", run.seed, "Global seed (overrides config)");
  run_cmd->add_option("--concurrency", run.concurrency, "Problems in flight")
      ->check(CLI::PositiveNumber);
  run_cmd->add_flag("--resume", run.resume, "Continue an interrupted run in --out");
  run_cmd->add_flag("--mock", run.mock, "Use the built-in mock world for every backend");
  run_cmd->add_option("--stop-after", run.stop_after, "Process at most N problems, then stop");
  run_cmd->add_flag("--no-fsync", run.no_fsync, "Skip fsync after journal records");
  run_cmd->callback([&] { rc = cmd_run(run); });

  std::string dataset;
  auto* validate_cmd = app.add_subcommand("validate", "Check every pair in a dataset");
  validate_cmd->add_option("dataset", dataset, "pairs.jsonl")->required();
  validate_cmd->callback([&] { rc = cmd_validate(dataset); });

  std::string journal;
  bool stats_json = false;
  auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics from a run journal");
  stats_cmd->add_option("journal", journal, "journal.jsonl")->required();
  stats_cmd->add_flag("--json", stats_json, "Print JSON instead of the table");
  stats_cmd->callback([&] { rc = cmd_stats(journal, stats_json); });

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Toy DPO training; writes a margin trace");
  train_cmd->add_option("--pairs", train.pairs, "pairs.jsonl (default: synthetic set)");
  train_cmd->add_option("--out", train.out, "Margin trace CSV")->capture_default_str();
  train_cmd->add_option("--steps", train.steps, "Gradient steps")->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train.lr, "Learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--beta", train.beta, "DPO beta")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train.seed, "Seed for initial logits")->capture_default_str();
  train_cmd->callback([&] { rc = cmd_train_toy(train); });

  std::uint64_t eval_seed = 0;
  int eval_examples = 1000;
  auto* eval_cmd = app.add_subcommand("dpo-eval", "DPO loss and gradient self-checks");
  eval_cmd->add_option("--seed", eval_seed, "Seed")->capture_default_str();
  eval_cmd->add_option("--examples", eval_examples, "Random gradient checks")->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval_cmd->callback([&] { rc = cmd_dpo_eval(eval_seed, eval_examples); });

  std::string corpus_config, corpus_out;
  std::optional<int> corpus_n;
  auto* corpus_cmd = app.add_subcommand("mock-corpus", "Write the mock problem corpus as JSONL");
  corpus_cmd->add_option("--config", corpus_config, "Pipeline config (mock_world section)")
      ->check(CLI::ExistingFile);
  corpus_cmd->add_option("-n", corpus_n, "Number of problems")->check(CLI::PositiveNumber);
  corpus_cmd->add_option("--out", corpus_out, "Output JSONL")->required();
  corpus_cmd->callback([&] { rc = cmd_corpus(corpus_config, corpus_n, corpus_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitStartup;
  }
  return rc;
}
