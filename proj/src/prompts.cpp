#include "prefgen/prompts.h"

#include "prompt_templates.h"

namespace prefgen {

std::string_view prompt_version() { return templates::kVersion; }
std::string_view self_generation_prompt() { return templates::kSelfGeneration; }
std::string_view self_correction_prompt() { return templates::kSelfCorrection; }

std::string generation_prefix(const Problem& problem) {
  std::string out;
  out.reserve(templates::kSelfGeneration.size() + problem.question.size() + 32);
  out.append(templates::kSelfGeneration);
  out.append(kStepDelimiter);
  out.append(kProblemHeader);
  out.append(problem.question);
  out.append(kStepDelimiter);
  out.append(kSolutionHeader);
  return out;
}

std::string correction_prefix(const Problem& problem,
                              std::string_view failed_solution) {
  std::string out = generation_prefix(problem);
  out.append(failed_solution);
  out.append(kStepDelimiter);
  out.append(templates::kSelfCorrection);
  out.append(kStepDelimiter);
  out.append(kSolutionHeader);
  return out;
}

bool is_correction_prefix(std::string_view prefix) {
  return prefix.find(templates::kSelfCorrection) != std::string_view::npos;
}

std::string_view solution_region(std::string_view prefix) {
  const auto pos = prefix.rfind(kSolutionHeader);
  if (pos == std::string_view::npos) return prefix;
  return prefix.substr(pos + kSolutionHeader.size());
}

}  // namespace prefgen
