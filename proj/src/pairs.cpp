#include "prefgen/pairs.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "prefgen/errors.h"

namespace prefgen {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool gap = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      gap = !out.empty();
      continue;
    }
    if (gap) out.push_back(' ');
    gap = false;
    out.push_back(c);
  }
  return out;
}

PairCheck invalid(std::string reason) { return {false, std::move(reason)}; }

}  // namespace

PairCheck validate_pair(const PreferencePair& pair) {
  if (pair.problem_id.empty() || pair.prompt.empty()) return invalid("incomplete");
  const std::string chosen = normalize_whitespace(pair.chosen);
  const std::string rejected = normalize_whitespace(pair.rejected);
  if (chosen.empty() || rejected.empty() || chosen == rejected) return invalid("degenerate");
  if (!std::isfinite(pair.chosen_reward) || !std::isfinite(pair.rejected_reward))
    return invalid("non-finite reward");
  if (!pair.chosen_correct) return invalid("chosen incorrect");
  switch (pair.stage) {
    case Stage::SelfGeneration:
    case Stage::Diversity:
      if (pair.rejected_correct) return invalid("no contrast");
      break;
    case Stage::SelfCorrection:
      if (!pair.failed_reward || !std::isfinite(*pair.failed_reward))
        return invalid("missing failed reward");
      if (!(pair.chosen_reward > *pair.failed_reward)) return invalid("no superiority");
      break;
  }
  return {};
}

std::vector<PreferencePair> dedupe(std::vector<PreferencePair> pairs) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::vector<PreferencePair> out;
  out.reserve(pairs.size());
  for (auto& p : pairs) {
    if (seen.emplace(p.problem_id, p.chosen, p.rejected).second) out.push_back(std::move(p));
  }
  return out;
}

DatasetStats count_pairs(std::span<const PreferencePair> pairs) {
  DatasetStats stats;
  for (const auto& p : pairs) {
    switch (p.stage) {
      case Stage::SelfGeneration: ++stats.pairs_stage1; break;
      case Stage::SelfCorrection: ++stats.pairs_stage2; break;
      case Stage::Diversity: ++stats.pairs_stage3; break;
    }
  }
  stats.total_pairs = stats.pairs_stage1 + stats.pairs_stage2 + stats.pairs_stage3;
  return stats;
}

ordered_json stats_to_json(const DatasetStats& s) {
  ordered_json j;
  j["total_questions"] = s.total_questions;
  j["pairs_stage1"] = s.pairs_stage1;
  j["pairs_stage2"] = s.pairs_stage2;
  j["pairs_stage3"] = s.pairs_stage3;
  j["total_pairs"] = s.total_pairs;
  j["aborted"] = s.aborted;
  j["dropped"] = s.dropped;
  j["routes"] = {{"emit_pair", s.routed_emit},
                 {"self_correct", s.routed_self_correct},
                 {"diversify", s.routed_diversify},
                 {"drop", s.dropped}};
  j["rejected"] = {{"stage1", s.rejected_stage1},
                   {"stage2", s.rejected_stage2},
                   {"stage3", s.rejected_stage3}};
  j["completed"] = s.completed;
  return j;
}

DatasetStats stats_from_json(const json& j) {
  DatasetStats s;
  s.total_questions = j.at("total_questions").get<std::size_t>();
  s.pairs_stage1 = j.at("pairs_stage1").get<std::size_t>();
  s.pairs_stage2 = j.at("pairs_stage2").get<std::size_t>();
  s.pairs_stage3 = j.at("pairs_stage3").get<std::size_t>();
  s.total_pairs = j.at("total_pairs").get<std::size_t>();
  s.aborted = j.at("aborted").get<std::size_t>();
  s.dropped = j.at("dropped").get<std::size_t>();
  const auto& routes = j.at("routes");
  s.routed_emit = routes.at("emit_pair").get<std::size_t>();
  s.routed_self_correct = routes.at("self_correct").get<std::size_t>();
  s.routed_diversify = routes.at("diversify").get<std::size_t>();
  const auto& rejected = j.at("rejected");
  s.rejected_stage1 = rejected.at("stage1").get<std::size_t>();
  s.rejected_stage2 = rejected.at("stage2").get<std::size_t>();
  s.rejected_stage3 = rejected.at("stage3").get<std::size_t>();
  s.completed = j.at("completed").get<std::size_t>();
  return s;
}

std::string render_stats_table(const DatasetStats& s) {
  std::ostringstream out;
  out << "Total Question = " << s.total_questions << "\n"
      << "Stage I (Self Generation) - Pairs = " << s.pairs_stage1 << "\n"
      << "Stage II (Self Correction) - Pairs = " << s.pairs_stage2 << "\n"
      << "Stage III (Diversity) - Pairs = " << s.pairs_stage3 << "\n"
      << "Total Preference Dataset = " << s.total_pairs << "\n"
      << "Aborted = " << s.aborted << ", Dropped = " << s.dropped << "\n"
      << "Routes: emit_pair=" << s.routed_emit << " self_correct=" << s.routed_self_correct
      << " diversify=" << s.routed_diversify << "\n";
  return out.str();
}

ordered_json pair_to_json(const PreferencePair& p) {
  ordered_json meta;
  meta["problem_id"] = p.problem_id;
  meta["chosen_reward"] = p.chosen_reward;
  meta["rejected_reward"] = p.rejected_reward;
  meta["chosen_correct"] = p.chosen_correct;
  meta["rejected_correct"] = p.rejected_correct;
  if (p.failed_reward) meta["failed_reward"] = *p.failed_reward;
  if (p.correction_prompt) meta["correction_prompt"] = *p.correction_prompt;
  if (p.step_level) meta["step_level"] = *p.step_level;

  ordered_json j;
  j["prompt"] = p.prompt;
  j["chosen"] = p.chosen;
  j["rejected"] = p.rejected;
  j["stage"] = std::string(to_string(p.stage));
  j["meta"] = std::move(meta);
  return j;
}

namespace {

template <typename T>
T require_field(const json& obj, const char* key, json::value_t kind, const char* kind_name) {
  if (!obj.contains(key)) throw std::runtime_error(std::string("missing field \"") + key + "\"");
  const auto& v = obj.at(key);
  const bool number_ok = kind == json::value_t::number_float && v.is_number();
  if (!number_ok && v.type() != kind)
    throw std::runtime_error(std::string("field \"") + key + "\" must be " + kind_name);
  return v.get<T>();
}

}  // namespace

PreferencePair pair_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("line is not a JSON object");
  PreferencePair p;
  p.prompt = require_field<std::string>(j, "prompt", json::value_t::string, "a string");
  p.chosen = require_field<std::string>(j, "chosen", json::value_t::string, "a string");
  p.rejected = require_field<std::string>(j, "rejected", json::value_t::string, "a string");
  const auto stage_name = require_field<std::string>(j, "stage", json::value_t::string, "a string");
  const auto stage = parse_stage(stage_name);
  if (!stage) throw std::runtime_error("unknown stage \"" + stage_name + "\"");
  p.stage = *stage;
  if (!j.contains("meta") || !j["meta"].is_object())
    throw std::runtime_error("missing object field \"meta\"");
  const auto& meta = j["meta"];
  p.problem_id = require_field<std::string>(meta, "problem_id", json::value_t::string, "a string");
  p.chosen_reward = require_field<double>(meta, "chosen_reward", json::value_t::number_float, "a number");
  p.rejected_reward = require_field<double>(meta, "rejected_reward", json::value_t::number_float, "a number");
  p.chosen_correct = require_field<bool>(meta, "chosen_correct", json::value_t::boolean, "a boolean");
  p.rejected_correct = require_field<bool>(meta, "rejected_correct", json::value_t::boolean, "a boolean");
  if (meta.contains("failed_reward"))
    p.failed_reward = require_field<double>(meta, "failed_reward", json::value_t::number_float, "a number");
  if (meta.contains("correction_prompt"))
    p.correction_prompt = require_field<std::string>(meta, "correction_prompt", json::value_t::string, "a string");
  if (meta.contains("step_level")) {
    if (!meta["step_level"].is_number_integer())
      throw std::runtime_error("field \"step_level\" must be an integer");
    p.step_level = meta["step_level"].get<int>();
  }
  return p;
}

DatasetStats export_jsonl(std::span<const PreferencePair> pairs,
                          const std::filesystem::path& path) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (auto check = validate_pair(pairs[i]); !check)
      throw ExportError("refusing to export invalid pair #" + std::to_string(i) + " (" +
                        pairs[i].problem_id + "): " + check.reason);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw ExportError("cannot open " + tmp.string() + " for writing");
      for (const auto& p : pairs) out << pair_to_json(p).dump() << '\n';
      out.flush();
      if (!out) throw ExportError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (const ExportError&) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  } catch (const std::exception& e) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw ExportError(std::string("export to ") + path.string() + " failed: " + e.what());
  }
  return count_pairs(pairs);
}

DatasetScan scan_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImportError(0, "cannot open " + path.string());
  DatasetScan scan;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    PreferencePair pair;
    try {
      pair = pair_from_json(json::parse(line));
    } catch (const std::exception& e) {
      scan.failures.push_back({number, true, e.what()});
      continue;
    }
    if (auto check = validate_pair(pair); !check) {
      scan.failures.push_back({number, false, check.reason});
      continue;
    }
    scan.pairs.push_back(std::move(pair));
  }
  return scan;
}

std::vector<PreferencePair> import_jsonl(const std::filesystem::path& path) {
  DatasetScan scan = scan_jsonl(path);
  if (!scan.failures.empty()) {
    const auto& f = scan.failures.front();
    if (f.malformed) throw ImportError(f.line, f.message);
    throw ValidationError(f.line, f.message);
  }
  return std::move(scan.pairs);
}

}  // namespace prefgen
