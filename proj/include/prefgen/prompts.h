#pragma once

// Prompt templates (prompts/<version>/*.txt, embedded at build time) and the
// prefix layouts built from them.

#include <string>
#include <string_view>

#include "prefgen/types.h"

namespace prefgen {

inline constexpr std::string_view kProblemHeader = "Problem:\n";
inline constexpr std::string_view kSolutionHeader = "Solution:\n";

std::string_view prompt_version();
std::string_view self_generation_prompt();
std::string_view self_correction_prompt();

// <generation prompt>\n\nProblem:\n<question>\n\nSolution:\n
std::string generation_prefix(const Problem& problem);

// generation_prefix + <failed solution>\n\n<correction prompt>\n\nSolution:\n
std::string correction_prefix(const Problem& problem,
                              std::string_view failed_solution);

bool is_correction_prefix(std::string_view prefix);

// Text after the last solution header: the steps committed so far.
std::string_view solution_region(std::string_view prefix);

}  // namespace prefgen
