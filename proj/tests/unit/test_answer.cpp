#include <doctest.h>

#include <random>

#include "support.hpp"

using namespace stepsearch;

namespace {

const AnswerSpec kAnswerIs{AnswerSpec::Kind::the_answer_is};
const AnswerSpec kBoxed{AnswerSpec::Kind::boxed};

}  // namespace

TEST_CASE("the prompt examples extract their answers") {
  const auto a = extract_answer("So 40 + 2 = 42. The answer is 42.", kAnswerIs);
  REQUIRE(a);
  CHECK(a->numeric == Rational(42));
  const auto b = extract_answer("$(9+1)^3 = 10^3 = \\boxed{1000}$", kBoxed);
  REQUIRE(b);
  CHECK(b->numeric == Rational(1000));
  CHECK_FALSE(extract_answer("no answer here", kAnswerIs));
  CHECK_FALSE(extract_answer("no answer here", kBoxed));
}

TEST_CASE("every fixture case extracts as expected") {
  const auto cases = testing::answer_cases();
  REQUIRE(cases.size() == 30);
  for (const auto& c : cases) {
    CAPTURE(c.text);
    CHECK(testing::check_answer_case(c) == "");
  }
}

TEST_CASE("verification compares canonical forms") {
  const Answer gold = parse_gold_answer("42");
  CHECK(verify_answer(canonicalize_answer("42"), gold));
  CHECK(verify_answer(canonicalize_answer("42.0"), gold));
  CHECK(verify_answer(canonicalize_answer("\\boxed{42}"), gold));
  CHECK(verify_answer(canonicalize_answer("84/2"), gold));
  CHECK_FALSE(verify_answer(canonicalize_answer("41"), gold));
  CHECK(verify_answer(canonicalize_answer("1,000"), parse_gold_answer("1000")));
  CHECK(verify_answer(canonicalize_answer("\\frac{1}{2}"), parse_gold_answer("0.5")));
  CHECK(verify_answer(canonicalize_answer("$x + 1$"), parse_gold_answer("x+1")));
  CHECK_FALSE(verify_answer(canonicalize_answer("x+2"), parse_gold_answer("x+1")));
  CHECK_FALSE(verify_answer(canonicalize_answer("7"), parse_gold_answer("seven")));
}

TEST_CASE("an empty gold answer is a configuration error") {
  CHECK_THROWS_AS(parse_gold_answer(""), ConfigError);
  CHECK_THROWS_AS(parse_gold_answer("   "), ConfigError);
}

TEST_CASE("number parsing accepts the documented surface forms") {
  CHECK(parse_number("1,234") == Rational(1234));
  CHECK(parse_number("-3.5") == Rational(-7, 2));
  CHECK(parse_number("$12.") == Rational(12));
  CHECK(parse_number("\\frac{6}{8}") == Rational(3, 4));
  CHECK(parse_number("\\boxed{7}") == Rational(7));
  CHECK_FALSE(parse_number("1/0"));
  CHECK_FALSE(parse_number("12 apples"));
  CHECK_FALSE(parse_number(""));
}

TEST_CASE("extraction never throws on arbitrary text") {
  std::mt19937_64 rng(11);
  const std::string alphabet = "0123456789 ,./-+$\\{}boxedThe answer is\n:*()";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> length(0, 200);
  for (int i = 0; i < 2000; ++i) {
    std::string text;
    const int n = length(rng);
    for (int k = 0; k < n; ++k) text.push_back(alphabet[pick(rng)]);
    CHECK_NOTHROW(extract_answer(text, kAnswerIs));
    CHECK_NOTHROW(extract_answer(text, kBoxed));
  }
  CHECK_NOTHROW(extract_answer(std::string(100000, '1'), kAnswerIs));
  CHECK_NOTHROW(extract_answer("The answer is " + std::string(100000, '9'), kAnswerIs));
  CHECK_NOTHROW(extract_answer(std::string(5000, '{'), kBoxed));
}

TEST_CASE("trajectory answer reads the newest non-empty expression") {
  Trajectory t = Trajectory{"p", {}, false, std::nullopt}.extended("a", "The answer is 3.");
  t = t.extended("b", "The answer is 4.");
  const auto a = trajectory_answer(t, kAnswerIs);
  REQUIRE(a);
  CHECK(a->numeric == Rational(4));
  CHECK_FALSE(trajectory_answer(Trajectory{}, kAnswerIs));
}
