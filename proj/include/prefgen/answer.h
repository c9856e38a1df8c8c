#pragma once

// Final-answer extraction and grading for completions that follow the
// "Final Answer: The final answer is $answer$. I hope it is correct." format.

#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace prefgen {

inline constexpr std::string_view kAnswerMarker = "The final answer is";
inline constexpr std::string_view kAnswerClosing = "I hope it is correct";

struct FinalAnswer {
  std::string raw;        // verbatim captured span
  std::string canonical;  // normalize_answer(raw)

  bool operator==(const FinalAnswer&) const = default;
};

// Captures the answer after the last occurrence of kAnswerMarker. Returns
// nullopt when the marker is absent.
std::optional<FinalAnswer> extract_final_answer(std::string_view completion);

// Canonical form used for comparison. Applies its rewrite rules to a fixed
// point, so the result is idempotent.
std::string normalize_answer(std::string_view raw);

using Rational = boost::multiprecision::cpp_rational;

// Parses integers, decimals and a/b fractions as exact rationals.
std::optional<Rational> parse_exact_number(std::string_view canonical);

// Both arguments must already be canonical. Numeric values compare exactly;
// anything unparseable falls back to string equality.
bool answers_equal(std::string_view a, std::string_view b);

// Normalizes both sides, then answers_equal. An empty candidate never
// matches.
bool grade_answer(std::string_view candidate, std::string_view gold);

}  // namespace prefgen
