#include "prefgen/types.h"

namespace prefgen {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::SelfGeneration: return "self_generation";
    case Stage::SelfCorrection: return "self_correction";
    case Stage::Diversity: return "diversity";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) {
  if (name == "self_generation") return Stage::SelfGeneration;
  if (name == "self_correction") return Stage::SelfCorrection;
  if (name == "diversity") return Stage::Diversity;
  return std::nullopt;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Policy: return "policy";
    case Role::SmallPolicy: return "small_policy";
    case Role::Prm: return "prm";
    case Role::Orm: return "orm";
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view name) {
  if (name == "policy") return Role::Policy;
  if (name == "small_policy") return Role::SmallPolicy;
  if (name == "prm") return Role::Prm;
  if (name == "orm") return Role::Orm;
  return std::nullopt;
}

}  // namespace prefgen
