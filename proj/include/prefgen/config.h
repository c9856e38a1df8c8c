#pragma once

// Pipeline configuration. The on-disk format is a single JSON document; see
// docs/config.md for the schema. Missing keys take their defaults, unknown
// keys are rejected.

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "prefgen/backend.h"
#include "prefgen/mock_world.h"
#include "prefgen/rollout.h"

namespace prefgen {

// Carried for external DPO trainers; the toy trainer does not read them.
struct TrainingDefaults {
  double learning_rate = 1e-6;
  double warmup_ratio = 0.2;
  int lora_rank = 64;
  int lora_alpha = 128;
  double lora_dropout = 0.05;
  int epochs = 10;

  bool operator==(const TrainingDefaults&) const = default;
};

struct PipelineConfig {
  int exploration_budget = 5;  // E
  int small_budget_multiplier = 2;
  int max_depth = 10;
  double temperature_policy = 0.8;
  double prm_floor = kDefaultPrmFloor;
  double epsilon = kAdvantageEpsilon;
  double beta = 0.8;
  int concurrency = 1;
  int max_inflight_requests = 16;
  std::uint64_t seed = 0;
  bool step_level_pairs = false;

  BackendConfig policy = BackendConfig::defaults_for(Role::Policy);
  BackendConfig small_policy = BackendConfig::defaults_for(Role::SmallPolicy);
  BackendConfig prm = BackendConfig::defaults_for(Role::Prm);
  BackendConfig orm = BackendConfig::defaults_for(Role::Orm);

  MockWorldSpec mock_world;
  TrainingDefaults training;

  // Throws ConfigError.
  void validate() const;

  SearchSettings search() const;
  int small_budget() const { return exploration_budget * small_budget_multiplier; }
  const BackendConfig& backend(Role role) const;
  BackendConfig& backend(Role role);

  bool operator==(const PipelineConfig&) const = default;
};

nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const nlohmann::json& j);

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

// Hash of every setting that influences generated data. Concurrency and the
// in-flight limit are excluded: they do not change results.
std::uint64_t config_fingerprint(const PipelineConfig& cfg);

// Points every backend at the mock world (ORM at answer matching).
void force_mock(PipelineConfig& cfg);

}  // namespace prefgen
