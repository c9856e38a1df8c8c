#include "prefgen/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "prefgen/errors.h"
#include "prefgen/hashing.h"

namespace prefgen {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr Role kRoles[] = {Role::Policy, Role::SmallPolicy, Role::Prm, Role::Orm};

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known,
                         std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool found = false;
    for (auto k : known) found = found || item.key() == k;
    if (!found)
      throw ConfigError("unknown key \"" + item.key() + "\" in " + std::string(where));
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

ordered_json backend_to_json(const BackendConfig& b) {
  ordered_json j;
  j["endpoint"] = b.endpoint;
  j["model_name"] = b.model_name;
  j["temperature"] = b.temperature;
  j["max_step_tokens"] = b.max_step_tokens;
  j["request_timeout_ms"] = b.request_timeout.count();
  j["max_retries"] = b.max_retries;
  j["retry_base_delay_ms"] = b.retry_base_delay.count();
  j["retry_max_delay_ms"] = b.retry_max_delay.count();
  j["seed"] = b.seed;
  return j;
}

BackendConfig backend_from_json(const json& j, Role role, double default_temperature) {
  const std::string where = "backends." + std::string(to_string(role));
  reject_unknown_keys(j,
                      {"endpoint", "model_name", "temperature", "max_step_tokens",
                       "request_timeout_ms", "max_retries", "retry_base_delay_ms",
                       "retry_max_delay_ms", "seed"},
                      where);
  BackendConfig b = BackendConfig::defaults_for(role);
  b.temperature = default_temperature;
  read(j, "endpoint", b.endpoint, where);
  read(j, "model_name", b.model_name, where);
  read(j, "temperature", b.temperature, where);
  read(j, "max_step_tokens", b.max_step_tokens, where);
  long long ms = b.request_timeout.count();
  read(j, "request_timeout_ms", ms, where);
  b.request_timeout = std::chrono::milliseconds(ms);
  ms = b.retry_base_delay.count();
  read(j, "retry_base_delay_ms", ms, where);
  b.retry_base_delay = std::chrono::milliseconds(ms);
  ms = b.retry_max_delay.count();
  read(j, "retry_max_delay_ms", ms, where);
  b.retry_max_delay = std::chrono::milliseconds(ms);
  read(j, "max_retries", b.max_retries, where);
  read(j, "seed", b.seed, where);
  return b;
}

ordered_json mock_to_json(const MockWorldSpec& m) {
  ordered_json j;
  j["n_problems"] = m.n_problems;
  j["p_step_correct_policy"] = m.p_step_correct_policy;
  j["p_step_correct_small"] = m.p_step_correct_small;
  j["p_step_correct_correction"] = m.p_step_correct_correction;
  j["steps_per_problem"] = m.steps_per_problem;
  j["prm_discrimination"] = m.prm_discrimination;
  j["seed"] = m.seed;
  return j;
}

MockWorldSpec mock_from_json(const json& j) {
  const char* where = "mock_world";
  reject_unknown_keys(j,
                      {"n_problems", "p_step_correct_policy", "p_step_correct_small",
                       "p_step_correct_correction", "steps_per_problem",
                       "prm_discrimination", "seed"},
                      where);
  MockWorldSpec m;
  read(j, "n_problems", m.n_problems, where);
  read(j, "p_step_correct_policy", m.p_step_correct_policy, where);
  read(j, "p_step_correct_small", m.p_step_correct_small, where);
  read(j, "p_step_correct_correction", m.p_step_correct_correction, where);
  read(j, "steps_per_problem", m.steps_per_problem, where);
  read(j, "prm_discrimination", m.prm_discrimination, where);
  read(j, "seed", m.seed, where);
  return m;
}

ordered_json training_to_json(const TrainingDefaults& t) {
  ordered_json j;
  j["learning_rate"] = t.learning_rate;
  j["warmup_ratio"] = t.warmup_ratio;
  j["lora_rank"] = t.lora_rank;
  j["lora_alpha"] = t.lora_alpha;
  j["lora_dropout"] = t.lora_dropout;
  j["epochs"] = t.epochs;
  return j;
}

TrainingDefaults training_from_json(const json& j) {
  const char* where = "training";
  reject_unknown_keys(j,
                      {"learning_rate", "warmup_ratio", "lora_rank", "lora_alpha",
                       "lora_dropout", "epochs"},
                      where);
  TrainingDefaults t;
  read(j, "learning_rate", t.learning_rate, where);
  read(j, "warmup_ratio", t.warmup_ratio, where);
  read(j, "lora_rank", t.lora_rank, where);
  read(j, "lora_alpha", t.lora_alpha, where);
  read(j, "lora_dropout", t.lora_dropout, where);
  read(j, "epochs", t.epochs, where);
  return t;
}

}  // namespace

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (exploration_budget < 2) fail("exploration_budget must be >= 2");
  if (small_budget_multiplier < 1) fail("small_budget_multiplier must be >= 1");
  if (max_depth < 1) fail("max_depth must be >= 1");
  if (!(temperature_policy >= 0.0)) fail("temperature_policy must be >= 0");
  if (!(prm_floor >= 0.0 && prm_floor <= 1.0)) fail("prm_floor must lie in [0, 1]");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) fail("beta must be positive and finite");
  if (concurrency < 1) fail("concurrency must be >= 1");
  if (max_inflight_requests < 1 || max_inflight_requests > Gateway::kMaxInflight)
    fail("max_inflight_requests must lie in [1, 4096]");
  for (Role role : kRoles) {
    const auto& b = backend(role);
    const std::string name(to_string(role));
    if (b.endpoint.empty()) fail("backends." + name + ".endpoint is empty");
    if (!(b.temperature >= 0.0)) fail("backends." + name + ".temperature must be >= 0");
    if (b.max_step_tokens <= 0) fail("backends." + name + ".max_step_tokens must be > 0");
    if (b.max_retries < 0) fail("backends." + name + ".max_retries must be >= 0");
    if (b.request_timeout.count() <= 0) fail("backends." + name + ".request_timeout_ms must be > 0");
  }
  mock_world.validate();
}

SearchSettings PipelineConfig::search() const {
  return SearchSettings{max_depth, prm_floor, epsilon};
}

const BackendConfig& PipelineConfig::backend(Role role) const {
  switch (role) {
    case Role::Policy: return policy;
    case Role::SmallPolicy: return small_policy;
    case Role::Prm: return prm;
    case Role::Orm: return orm;
  }
  throw ContractViolation("unknown role");
}

BackendConfig& PipelineConfig::backend(Role role) {
  return const_cast<BackendConfig&>(std::as_const(*this).backend(role));
}

ordered_json config_to_json(const PipelineConfig& cfg) {
  ordered_json j;
  j["exploration_budget"] = cfg.exploration_budget;
  j["small_budget_multiplier"] = cfg.small_budget_multiplier;
  j["max_depth"] = cfg.max_depth;
  j["temperature_policy"] = cfg.temperature_policy;
  j["prm_floor"] = cfg.prm_floor;
  j["epsilon"] = cfg.epsilon;
  j["beta"] = cfg.beta;
  j["concurrency"] = cfg.concurrency;
  j["max_inflight_requests"] = cfg.max_inflight_requests;
  j["seed"] = cfg.seed;
  j["step_level_pairs"] = cfg.step_level_pairs;
  ordered_json backends;
  for (Role role : kRoles) backends[std::string(to_string(role))] = backend_to_json(cfg.backend(role));
  j["backends"] = std::move(backends);
  j["mock_world"] = mock_to_json(cfg.mock_world);
  j["training"] = training_to_json(cfg.training);
  return j;
}

PipelineConfig config_from_json(const json& j) {
  const char* where = "config";
  reject_unknown_keys(j,
                      {"exploration_budget", "small_budget_multiplier", "max_depth",
                       "temperature_policy", "prm_floor", "epsilon", "beta", "concurrency",
                       "max_inflight_requests", "seed", "step_level_pairs", "backends",
                       "mock_world", "training"},
                      where);
  PipelineConfig cfg;
  read(j, "exploration_budget", cfg.exploration_budget, where);
  read(j, "small_budget_multiplier", cfg.small_budget_multiplier, where);
  read(j, "max_depth", cfg.max_depth, where);
  read(j, "temperature_policy", cfg.temperature_policy, where);
  read(j, "prm_floor", cfg.prm_floor, where);
  read(j, "epsilon", cfg.epsilon, where);
  read(j, "beta", cfg.beta, where);
  read(j, "concurrency", cfg.concurrency, where);
  read(j, "max_inflight_requests", cfg.max_inflight_requests, where);
  read(j, "seed", cfg.seed, where);
  read(j, "step_level_pairs", cfg.step_level_pairs, where);
  cfg.policy.temperature = cfg.temperature_policy;
  cfg.small_policy.temperature = cfg.temperature_policy;
  if (j.contains("backends")) {
    const auto& backends = j["backends"];
    reject_unknown_keys(backends, {"policy", "small_policy", "prm", "orm"}, "backends");
    for (Role role : kRoles) {
      const std::string name(to_string(role));
      if (!backends.contains(name)) continue;
      const double temp = (role == Role::Policy || role == Role::SmallPolicy)
                              ? cfg.temperature_policy
                              : cfg.backend(role).temperature;
      cfg.backend(role) = backend_from_json(backends[name], role, temp);
    }
  }
  if (j.contains("mock_world")) cfg.mock_world = mock_from_json(j["mock_world"]);
  if (j.contains("training")) cfg.training = training_from_json(j["training"]);
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << config_to_json(cfg).dump(2) << '\n';
}

std::uint64_t config_fingerprint(const PipelineConfig& cfg) {
  auto j = config_to_json(cfg);
  j.erase("concurrency");
  j.erase("max_inflight_requests");
  return fnv1a64(j.dump());
}

void force_mock(PipelineConfig& cfg) {
  cfg.policy.endpoint = "mock";
  cfg.small_policy.endpoint = "mock";
  cfg.prm.endpoint = "mock";
  cfg.orm.endpoint = "mock";
}

}  // namespace prefgen
