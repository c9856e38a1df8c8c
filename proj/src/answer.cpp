#include "prefgen/answer.h"

#include <cctype>
#include <regex>

namespace prefgen {
namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view strip_dollars(std::string_view s) {
  std::size_t lead = 0;
  while (lead < s.size() && s[lead] == '$') ++lead;
  std::size_t trail = 0;
  while (trail < s.size() - lead && s[s.size() - 1 - trail] == '$') ++trail;
  if (lead == 0 || trail == 0) return s;
  return s.substr(lead, s.size() - lead - trail);
}

// True when the '{' at position 0 is closed by the final character.
bool wrapped_in_braces(std::string_view s) {
  if (s.size() < 2 || s.front() != '{' || s.back() != '}') return false;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}') --depth;
    if (depth == 0 && i + 1 < s.size()) return false;
  }
  return depth == 0;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// Lowercases letters that are not part of a backslash command name.
std::string lowercase_bare_words(std::string_view s) {
  std::string out(s);
  bool in_command = false;
  for (char& c : out) {
    unsigned char u = static_cast<unsigned char>(c);
    if (c == '\\') {
      in_command = true;
      continue;
    }
    if (in_command) {
      if (std::isalpha(u)) continue;
      in_command = false;
    }
    if (u < 0x80) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

std::string rewrite_once(std::string_view input) {
  static const std::regex kFracAlias(R"(\\[dt]frac)");
  static const std::regex kFrac(R"(\\frac\{([0-9A-Za-z.]+)\}\{([0-9A-Za-z.]+)\})");
  static const std::regex kThousands(R"(^[-+]?\d{1,3}(,\d{3})+(\.\d+)?$)");
  static const std::regex kIntegerPointZero(R"(^([-+]?\d+)\.0+$)");
  static const std::regex kTrailingPeriod(R"(^([-+]?[0-9./]*[0-9])\.$)");

  std::string s(trim(input));
  s = std::string(trim(strip_dollars(s)));
  while (wrapped_in_braces(s)) s = std::string(trim(std::string_view(s).substr(1, s.size() - 2)));

  s = std::regex_replace(s, kFracAlias, "\\frac");
  s = std::regex_replace(s, kFrac, "$1/$2");

  if (std::regex_match(s, kThousands)) {
    std::string digits;
    for (char c : s)
      if (c != ',') digits.push_back(c);
    s = std::move(digits);
  }
  s = std::regex_replace(s, kIntegerPointZero, "$1");
  s = std::regex_replace(s, kTrailingPeriod, "$1");
  s = collapse_whitespace(s);
  return lowercase_bare_words(s);
}

std::optional<boost::multiprecision::cpp_int> parse_integer(std::string_view digits) {
  if (digits.empty()) return std::nullopt;
  boost::multiprecision::cpp_int value = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

// [+-]digits[.digits] with at least one digit overall.
std::optional<Rational> parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  std::string_view whole = s;
  std::string_view fraction;
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    whole = s.substr(0, dot);
    fraction = s.substr(dot + 1);
    if (fraction.find('.') != std::string_view::npos) return std::nullopt;
  }
  if (whole.empty() && fraction.empty()) return std::nullopt;
  boost::multiprecision::cpp_int numerator = 0;
  if (!whole.empty()) {
    auto w = parse_integer(whole);
    if (!w) return std::nullopt;
    numerator = *w;
  }
  boost::multiprecision::cpp_int denominator = 1;
  for (char c : fraction) {
    if (c < '0' || c > '9') return std::nullopt;
    numerator = numerator * 10 + (c - '0');
    denominator *= 10;
  }
  Rational value(numerator, denominator);
  return negative ? Rational(-value) : value;
}

}  // namespace

std::optional<FinalAnswer> extract_final_answer(std::string_view completion) {
  const auto marker = completion.rfind(kAnswerMarker);
  if (marker == std::string_view::npos) return std::nullopt;

  std::string_view span = completion.substr(marker + kAnswerMarker.size());
  if (auto closing = span.find(kAnswerClosing); closing != std::string_view::npos) {
    span = span.substr(0, closing);
  }
  span = trim(span);
  if (!span.empty() && span.back() == '.') span.remove_suffix(1);
  span = trim(strip_dollars(trim(span)));

  FinalAnswer answer;
  answer.raw = std::string(span);
  answer.canonical = normalize_answer(answer.raw);
  return answer;
}

std::string normalize_answer(std::string_view raw) {
  // Every rule is length non-increasing and lowercasing is idempotent, so the
  // loop reaches a fixed point.
  std::string current = rewrite_once(raw);
  for (;;) {
    std::string next = rewrite_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

std::optional<Rational> parse_exact_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    auto num = parse_decimal(s.substr(0, slash));
    auto den = parse_decimal(s.substr(slash + 1));
    if (!num || !den || *den == 0) return std::nullopt;
    return Rational(*num / *den);
  }
  return parse_decimal(s);
}

bool answers_equal(std::string_view a, std::string_view b) {
  if (a == b) return true;
  auto x = parse_exact_number(a);
  auto y = parse_exact_number(b);
  if (x && y) return *x == *y;
  return false;
}

bool grade_answer(std::string_view candidate, std::string_view gold) {
  const std::string c = normalize_answer(candidate);
  if (c.empty()) return false;
  return answers_equal(c, normalize_answer(gold));
}

}  // namespace prefgen
