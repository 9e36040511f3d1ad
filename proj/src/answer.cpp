#include "stepsearch/answer.hpp"

#include <algorithm>
#include <cctype>

namespace stepsearch {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Index just past the brace that closes the one at `open`, or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

constexpr std::string_view kBoxed = "\\boxed{";

// Contents of a \boxed{} that spans the whole (trimmed) string.
std::optional<std::string_view> whole_boxed(std::string_view s) {
  s = trim(s);
  while (!s.empty() && s.front() == '$') s = trim(s.substr(1));
  while (!s.empty() && s.back() == '$') s = trim(s.substr(0, s.size() - 1));
  if (!s.starts_with(kBoxed)) return std::nullopt;
  auto end = match_brace(s, kBoxed.size() - 1);
  if (end == std::string_view::npos) return std::nullopt;
  if (auto tail = trim(s.substr(end)); !tail.empty() && tail != ".") return std::nullopt;
  return s.substr(kBoxed.size(), end - kBoxed.size() - 1);
}

std::string strip_decorations(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == '$' || is_space(c)) continue;
    if (c == '\\' && i + 1 < raw.size() && (raw[i + 1] == '$' || raw[i + 1] == '!' ||
                                              raw[i + 1] == ',' || raw[i + 1] == ' ')) {
      ++i;
      continue;
    }
    out.push_back(c);
  }
  while (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::size_t digit_run(std::string_view s, std::size_t at) {
  std::size_t end = at;
  while (end < s.size() && is_digit(s[end])) ++end;
  return end - at;
}

// Decimal digits to an integer; cpp_int's string constructor would read a
// leading 0 as octal.
boost::multiprecision::cpp_int to_integer(std::string_view digits) {
  boost::multiprecision::cpp_int value = 0;
  for (char c : digits) {
    if (is_digit(c)) value = value * 10 + (c - '0');
  }
  return value;
}

struct NumberToken {
  std::size_t length = 0;
  bool negative = false;
  std::string whole;     // digits, commas removed
  std::string fraction;  // digits after the point
  std::string denominator;
};

// Longest number at the start of `s`: optional sign, then digits (plain or
// grouped as 1,234,567) with an optional decimal part, or .5; then an
// optional /denominator. Linear scan; safe on arbitrarily long input.
std::optional<NumberToken> scan_number(std::string_view s) {
  NumberToken t;
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) t.negative = s[i++] == '-';
  const std::size_t lead = digit_run(s, i);
  if (lead > 0) {
    t.whole.assign(s.substr(i, lead));
    i += lead;
    if (lead <= 3) {
      while (i + 3 < s.size() && s[i] == ',' && digit_run(s, i + 1) == 3) {
        t.whole.append(s.substr(i + 1, 3));
        i += 4;
      }
    }
    if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
      const std::size_t n = digit_run(s, i + 1);
      t.fraction.assign(s.substr(i + 1, n));
      i += 1 + n;
    }
  } else if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
    const std::size_t n = digit_run(s, i + 1);
    t.fraction.assign(s.substr(i + 1, n));
    i += 1 + n;
  } else {
    return std::nullopt;
  }
  if (i + 1 < s.size() && s[i] == '/' && is_digit(s[i + 1])) {
    const std::size_t n = digit_run(s, i + 1);
    t.denominator.assign(s.substr(i + 1, n));
    i += 1 + n;
  }
  t.length = i;
  return t;
}

std::optional<Rational> token_value(const NumberToken& t) {
  boost::multiprecision::cpp_int scale = 1;
  for (std::size_t k = 0; k < t.fraction.size(); ++k) scale *= 10;
  Rational value(to_integer(t.whole) * scale + to_integer(t.fraction), scale);
  if (!t.denominator.empty()) {
    const auto den = to_integer(t.denominator);
    if (den == 0) return std::nullopt;
    value /= Rational(den);
  }
  return t.negative ? Rational(-value) : value;
}

// [-+]?\[dt]?frac{a}{b} spanning all of `s`.
std::optional<Rational> parse_frac(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  for (std::string_view head : {"\\frac{", "\\dfrac{", "\\tfrac{"}) {
    if (!s.starts_with(head)) continue;
    s.remove_prefix(head.size());
    const std::size_t a = digit_run(s, 0);
    if (a == 0 || s.substr(a, 2) != "}{") return std::nullopt;
    const std::size_t b = digit_run(s, a + 2);
    if (b == 0 || a + 2 + b + 1 != s.size() || s.back() != '}') return std::nullopt;
    const auto den = to_integer(s.substr(a + 2, b));
    if (den == 0) return std::nullopt;
    Rational value(to_integer(s.substr(0, a)), den);
    return negative ? Rational(-value) : value;
  }
  return std::nullopt;
}

std::string text_key(std::string_view raw) {
  if (auto inner = whole_boxed(raw)) return strip_decorations(*inner);
  return strip_decorations(raw);
}

}  // namespace

std::string_view to_string(AnswerSpec::Kind kind) {
  return kind == AnswerSpec::Kind::boxed ? "boxed" : "the_answer_is";
}

AnswerSpec::Kind answer_kind_from_string(std::string_view name) {
  if (name == "boxed") return AnswerSpec::Kind::boxed;
  if (name == "the_answer_is") return AnswerSpec::Kind::the_answer_is;
  throw ConfigError("unknown answer kind: " + std::string(name));
}

std::optional<Rational> parse_number(std::string_view text) {
  std::string_view body = trim(text);
  if (auto inner = whole_boxed(body)) body = *inner;
  std::string cleaned = strip_decorations(body);
  if (cleaned.empty()) return std::nullopt;

  if (auto frac = parse_frac(cleaned)) return frac;
  if (auto token = scan_number(cleaned); token && token->length == cleaned.size()) {
    return token_value(*token);
  }
  return std::nullopt;
}

Answer canonicalize_answer(std::string_view raw, AnswerKind hint) {
  Answer answer;
  answer.raw = std::string(trim(raw));
  if (auto value = parse_number(answer.raw)) {
    answer.numeric = *value;
    answer.kind = AnswerKind::number;
  } else {
    answer.kind = whole_boxed(answer.raw) ? AnswerKind::latex_boxed : hint;
  }
  return answer;
}

namespace {

std::optional<Answer> extract_boxed(std::string_view text) {
  auto pos = text.rfind(kBoxed);
  while (pos != std::string_view::npos) {
    auto end = match_brace(text, pos + kBoxed.size() - 1);
    if (end != std::string_view::npos) {
      std::string_view inner = text.substr(pos + kBoxed.size(), end - pos - kBoxed.size() - 1);
      if (!trim(inner).empty()) {
        Answer a = canonicalize_answer(inner, AnswerKind::latex_boxed);
        if (a.kind != AnswerKind::number) a.kind = AnswerKind::latex_boxed;
        return a;
      }
    }
    if (pos == 0) break;
    pos = text.rfind(kBoxed, pos - 1);
  }
  return std::nullopt;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<Answer> extract_answer_is(std::string_view text) {
  static constexpr std::string_view kMarker = "the answer is";
  const std::string lower = lowercase(text);
  auto pos = lower.rfind(kMarker);
  while (pos != std::string::npos) {
    std::string_view rest = text.substr(pos + kMarker.size());
    rest = rest.substr(0, rest.find('\n'));
    // Skip separators and inline math openers.
    while (!rest.empty()) {
      if (rest.front() == ':' || rest.front() == '$' || rest.front() == '*' ||
          is_space(rest.front())) {
        rest.remove_prefix(1);
      } else if (rest.starts_with("\\(") || rest.starts_with("\\$")) {
        rest.remove_prefix(2);
      } else {
        break;
      }
    }
    if (rest.starts_with(kBoxed)) {
      if (auto boxed = extract_boxed(rest.substr(0, match_brace(rest, kBoxed.size() - 1))))
        return boxed;
    }
    if (auto token = scan_number(rest)) {
      return canonicalize_answer(rest.substr(0, token->length), AnswerKind::number);
    }
    // Non-numeric answer: up to the end of the sentence.
    std::string_view sentence = rest;
    auto stop = sentence.find(". ");
    if (stop != std::string_view::npos) sentence = sentence.substr(0, stop);
    sentence = trim(sentence);
    while (!sentence.empty() && (sentence.back() == '.' || sentence.back() == '$'))
      sentence.remove_suffix(1);
    if (!trim(sentence).empty()) return canonicalize_answer(sentence, AnswerKind::text);
    if (pos == 0) break;
    pos = lower.rfind(kMarker, pos - 1);
  }
  return std::nullopt;
}

}  // namespace

std::optional<Answer> extract_answer(std::string_view expression, const AnswerSpec& spec) {
  try {
    return spec.kind == AnswerSpec::Kind::boxed ? extract_boxed(expression)
                                                : extract_answer_is(expression);
  } catch (...) {
    // Anything unexpected reads as "no answer".
    return std::nullopt;
  }
}

bool verify_answer(const Answer& found, const Answer& gold) {
  if (found.numeric && gold.numeric) return *found.numeric == *gold.numeric;
  if (found.numeric || gold.numeric) return false;
  const std::string key = text_key(found.raw);
  return !key.empty() && key == text_key(gold.raw);
}

Answer parse_gold_answer(std::string_view raw) {
  if (trim(raw).empty()) throw ConfigError("gold answer is empty");
  return canonicalize_answer(raw, AnswerKind::text);
}

std::optional<Answer> trajectory_answer(const Trajectory& state, const AnswerSpec& spec) {
  for (auto it = state.steps.rbegin(); it != state.steps.rend(); ++it) {
    if (!it->expression.empty()) return extract_answer(it->expression, spec);
  }
  return std::nullopt;
}

}  // namespace stepsearch
