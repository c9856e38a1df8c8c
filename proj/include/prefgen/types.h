#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "prefgen/answer.h"

namespace prefgen {

struct Problem {
  std::string id;
  std::string question;
  std::string answer;  // ground-truth final answer
};

enum class Stage { SelfGeneration, SelfCorrection, Diversity };

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

// Model roles served by the backend gateway.
enum class Role { Policy, SmallPolicy, Prm, Orm };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view name);

struct Trajectory {
  std::string text;  // steps joined by kStepDelimiter
  std::size_t step_count = 0;
  std::optional<FinalAnswer> final_answer;
  bool correct = false;
  Stage stage = Stage::SelfGeneration;
  Role generator = Role::Policy;
  double cumulative_reward = 0.0;
};

// Step boundary used in prefixes, trajectory renderings and as the
// generation stop sequence.
inline constexpr std::string_view kStepDelimiter = "\n\n";

}  // namespace prefgen
