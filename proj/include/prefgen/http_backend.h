#pragma once

// Wire backends.
//
//   generation: POST <endpoint>/v1/chat/completions (OpenAI-compatible),
//               stop = step delimiter, logprobs requested.
//   scoring:    POST <endpoint>/score  {"prefix": str, "step": str}
//                                   -> {"score": float}
//
// Transport failures, 408/429 and 5xx responses are retried with exponential
// backoff and full jitter; anything still failing after max_retries raises
// RolloutAbort.

#include <chrono>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prefgen/backend.h"

namespace prefgen {

inline constexpr std::string_view kApiKeyEnvVar = "PREFGEN_API_KEY";
inline constexpr std::string_view kChatCompletionsRoute = "/v1/chat/completions";
inline constexpr std::string_view kScoreRoute = "/score";

// Reads kApiKeyEnvVar; empty when unset.
std::string api_key_from_env();

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
};

// Uniform in [0, min(max_delay, base_delay * 2^retry)].
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry,
                                        std::mt19937_64& rng);

struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // "" or "/prefix" without trailing slash
};

Endpoint parse_endpoint(std::string_view url);

bool is_retryable_status(int status);

class HttpJsonClient {
 public:
  HttpJsonClient(const BackendConfig& cfg, std::string api_key);

  // Returns the parsed JSON body of a 2xx response.
  nlohmann::json post(std::string_view route, const nlohmann::json& body);

  // Any HTTP response (even an error status) counts as reachable.
  bool reachable();

  int attempts_made() const;

 private:
  BackendConfig cfg_;
  std::string api_key_;
  Endpoint endpoint_;
  RetryPolicy retry_;
  std::mutex rng_mutex_;
  std::mt19937_64 jitter_rng_;
  mutable std::mutex stats_mutex_;
  int attempts_ = 0;
};

nlohmann::json build_chat_request(const BackendConfig& cfg,
                                  std::string_view prefix, int n,
                                  std::uint64_t seed);

// Choices with empty content are skipped. Throws std::runtime_error when the
// body is not a chat completion or a choice lacks token log-probabilities.
std::vector<GeneratedStep> parse_chat_response(const nlohmann::json& body);

std::unique_ptr<StepGenerator> make_openai_generator(const BackendConfig& cfg,
                                                     std::string api_key);
std::unique_ptr<StepScorer> make_http_prm(const BackendConfig& cfg,
                                          std::string api_key);
std::unique_ptr<TrajectoryScorer> make_http_orm(const BackendConfig& cfg,
                                                std::string api_key);

bool preflight(const BackendConfig& cfg);

}  // namespace prefgen
