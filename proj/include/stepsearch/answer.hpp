#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "stepsearch/types.hpp"

namespace stepsearch {

/// Answer convention of a corpus: GSM8K-style "The answer is N." or
/// MATH-style \boxed{...}.
struct AnswerSpec {
  enum class Kind { the_answer_is, boxed };
  Kind kind = Kind::the_answer_is;

  bool operator==(const AnswerSpec&) const = default;
};

std::string_view to_string(AnswerSpec::Kind kind);
AnswerSpec::Kind answer_kind_from_string(std::string_view name);

/// Parses a number in any of the accepted surface forms: integers with
/// thousands separators, decimals, a/b, \frac{a}{b}, optional sign, `$`,
/// trailing period, and a \boxed{} wrapper. Returns nullopt otherwise.
std::optional<Rational> parse_number(std::string_view text);

/// Canonical form of an answer string: numeric when parseable, otherwise
/// the whitespace-free text with any \boxed{} wrapper removed.
Answer canonicalize_answer(std::string_view raw, AnswerKind hint = AnswerKind::text);

/// Extracts the last answer token under `spec`. Never throws.
std::optional<Answer> extract_answer(std::string_view expression, const AnswerSpec& spec);

/// Format-insensitive equality on canonical forms.
bool verify_answer(const Answer& found, const Answer& gold);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a gold answer at corpus load time. Throws ConfigError when empty.
Answer parse_gold_answer(std::string_view raw);

/// Final answer of a state: the answer in its newest non-empty expression.
std::optional<Answer> trajectory_answer(const Trajectory& state, const AnswerSpec& spec);

}  // namespace stepsearch
