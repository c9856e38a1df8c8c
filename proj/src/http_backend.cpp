#include "prefgen/http_backend.h"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <httplib.h>

#include "prefgen/errors.h"
#include "prefgen/hashing.h"
#include "prefgen/prompts.h"

namespace prefgen {

using nlohmann::json;

std::string api_key_from_env() {
  const char* value = std::getenv(std::string(kApiKeyEnvVar).c_str());
  return value == nullptr ? std::string() : std::string(value);
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry,
                                        std::mt19937_64& rng) {
  const double cap = static_cast<double>(policy.max_delay.count());
  const double exp = static_cast<double>(policy.base_delay.count()) *
                     std::ldexp(1.0, std::min(retry, 30));
  const double ceiling = std::min(cap, exp);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::chrono::milliseconds(static_cast<long long>(u * ceiling));
}

Endpoint parse_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos)
    throw ConfigError("endpoint must be a URL with a scheme: " + std::string(url));
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string_view::npos) {
    ep.origin = std::string(url);
    return ep;
  }
  ep.origin = std::string(url.substr(0, path_start));
  std::string_view path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.remove_suffix(1);
  ep.base_path = std::string(path);
  return ep;
}

bool is_retryable_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

HttpJsonClient::HttpJsonClient(const BackendConfig& cfg, std::string api_key)
    : cfg_(cfg),
      api_key_(std::move(api_key)),
      endpoint_(parse_endpoint(cfg.endpoint)),
      retry_{cfg.max_retries, cfg.retry_base_delay, cfg.retry_max_delay},
      jitter_rng_(mix64(cfg.seed)) {}

namespace {

httplib::Client make_client(const Endpoint& ep, const BackendConfig& cfg) {
  httplib::Client client(ep.origin);
  const auto timeout = cfg.request_timeout;
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  return client;
}

}  // namespace

json HttpJsonClient::post(std::string_view route, const json& body) {
  const std::string path = endpoint_.base_path + std::string(route);
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  std::string last_error;
  for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::chrono::milliseconds delay;
      {
        std::lock_guard lock(rng_mutex_);
        delay = backoff_delay(retry_, attempt - 1, jitter_rng_);
      }
      std::this_thread::sleep_for(delay);
    }
    {
      std::lock_guard lock(stats_mutex_);
      ++attempts_;
    }
    auto client = make_client(endpoint_, cfg_);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw RolloutAbort(path + ": malformed JSON response: " + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status);
    if (!is_retryable_status(res->status)) break;
  }
  throw RolloutAbort(endpoint_.origin + path + ": " + last_error);
}

bool HttpJsonClient::reachable() {
  auto client = make_client(endpoint_, cfg_);
  auto res = client.Get(endpoint_.base_path.empty() ? "/" : endpoint_.base_path);
  return static_cast<bool>(res);
}

int HttpJsonClient::attempts_made() const {
  std::lock_guard lock(stats_mutex_);
  return attempts_;
}

json build_chat_request(const BackendConfig& cfg, std::string_view prefix, int n,
                        std::uint64_t seed) {
  // Committed steps go into an assistant message that the server continues.
  const std::string_view region = solution_region(prefix);
  const std::string_view context = prefix.substr(0, prefix.size() - region.size());

  json messages = json::array();
  messages.push_back({{"role", "user"}, {"content", std::string(context)}});
  const bool continuing = !region.empty();
  if (continuing) {
    messages.push_back({{"role", "assistant"}, {"content", std::string(region)}});
  }
  json request = {
      {"model", cfg.model_name},
      {"messages", messages},
      {"n", n},
      {"temperature", cfg.temperature},
      {"max_tokens", cfg.max_step_tokens},
      {"stop", json::array({std::string(kStepDelimiter)})},
      {"logprobs", true},
      {"seed", seed & 0x7fffffffffffffffULL},
  };
  if (continuing) {
    request["continue_final_message"] = true;
    request["add_generation_prompt"] = false;
  }
  return request;
}

std::vector<GeneratedStep> parse_chat_response(const json& body) {
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array())
    throw std::runtime_error("response has no choices array");
  std::vector<GeneratedStep> out;
  for (const auto& choice : body["choices"]) {
    const auto& message = choice.at("message");
    if (!message.contains("content") || !message["content"].is_string()) continue;
    std::string text = message["content"].get<std::string>();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    const auto last = text.find_last_not_of(" \t\r\n");
    text = text.substr(first, last - first + 1);

    if (!choice.contains("logprobs") || !choice["logprobs"].is_object() ||
        !choice["logprobs"].contains("content") || !choice["logprobs"]["content"].is_array() ||
        choice["logprobs"]["content"].empty())
      throw std::runtime_error("choice is missing token logprobs");
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& token : choice["logprobs"]["content"]) {
      sum += token.at("logprob").get<double>();
      ++count;
    }
    GeneratedStep step;
    step.text = std::move(text);
    step.policy_likelihood = std::exp(sum / static_cast<double>(count));
    out.push_back(std::move(step));
  }
  return out;
}

namespace {

class OpenAiGenerator final : public StepGenerator {
 public:
  OpenAiGenerator(const BackendConfig& cfg, std::string api_key)
      : cfg_(cfg), client_(cfg, std::move(api_key)) {}

  std::vector<GeneratedStep> generate(const RequestContext& ctx,
                                      std::string_view prefix, int n) override {
    std::vector<GeneratedStep> steps;
    const std::uint64_t base_seed = hash_combine(ctx.seed, prefix);
    // A server may return fewer choices than requested; top up with further
    // requests, each counted against the retry budget.
    for (int round = 0; round <= cfg_.max_retries && static_cast<int>(steps.size()) < n;
         ++round) {
      const int wanted = n - static_cast<int>(steps.size());
      json body = client_.post(
          kChatCompletionsRoute,
          build_chat_request(cfg_, prefix, wanted,
                             hash_combine(base_seed, static_cast<std::uint64_t>(round))));
      try {
        auto batch = parse_chat_response(body);
        for (auto& step : batch) steps.push_back(std::move(step));
      } catch (const std::exception& e) {
        throw RolloutAbort(std::string("chat completion: ") + e.what());
      }
    }
    return steps;
  }

 private:
  BackendConfig cfg_;
  HttpJsonClient client_;
};

double parse_score(const json& body) {
  if (!body.is_object() || !body.contains("score") || !body["score"].is_number())
    throw RolloutAbort("score response lacks a numeric \"score\" field");
  return body["score"].get<double>();
}

class HttpPrm final : public StepScorer {
 public:
  HttpPrm(const BackendConfig& cfg, std::string api_key) : client_(cfg, std::move(api_key)) {}

  double score(const RequestContext&, std::string_view prefix,
               std::string_view step) override {
    return parse_score(client_.post(
        kScoreRoute, {{"prefix", std::string(prefix)}, {"step", std::string(step)}}));
  }

 private:
  HttpJsonClient client_;
};

// The ORM sees the question as prefix and the whole solution as the step.
class HttpOrm final : public TrajectoryScorer {
 public:
  HttpOrm(const BackendConfig& cfg, std::string api_key) : client_(cfg, std::move(api_key)) {}

  double score(const RequestContext& ctx, std::string_view solution_text) override {
    if (ctx.problem == nullptr) throw ContractViolation("ORM request without a problem");
    return parse_score(client_.post(
        kScoreRoute,
        {{"prefix", ctx.problem->question}, {"step", std::string(solution_text)}}));
  }

 private:
  HttpJsonClient client_;
};

}  // namespace

std::unique_ptr<StepGenerator> make_openai_generator(const BackendConfig& cfg,
                                                     std::string api_key) {
  return std::make_unique<OpenAiGenerator>(cfg, std::move(api_key));
}

std::unique_ptr<StepScorer> make_http_prm(const BackendConfig& cfg, std::string api_key) {
  return std::make_unique<HttpPrm>(cfg, std::move(api_key));
}

std::unique_ptr<TrajectoryScorer> make_http_orm(const BackendConfig& cfg,
                                                std::string api_key) {
  return std::make_unique<HttpOrm>(cfg, std::move(api_key));
}

bool preflight(const BackendConfig& cfg) {
  if (cfg.is_mock()) return true;
  HttpJsonClient client(cfg, api_key_from_env());
  return client.reachable();
}

}  // namespace prefgen
