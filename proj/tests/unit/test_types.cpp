#include <doctest.h>

#include "stepsearch/json_io.hpp"
#include "support.hpp"

using namespace stepsearch;
using nlohmann::json;

TEST_CASE("node value is the correct/visits ratio") {
  SearchNode n;
  n.visits = 4;
  n.correct = 3;
  CHECK(node_value(n) == 0.75);
  n.visits = 1;
  n.correct = 0;
  CHECK(node_value(n) == 0.0);
  n.visits = 0;
  CHECK_THROWS_AS(node_value(n), UndefinedValue);
}

TEST_CASE("trajectory extension numbers steps densely") {
  Trajectory t;
  t.problem_id = "p";
  const Trajectory a = t.extended("first", "1 + 1 = 2");
  const Trajectory b = a.extended("second", "2 + 2 = 4");
  REQUIRE(b.depth() == 2);
  CHECK(b.steps[0].index == 0);
  CHECK(b.steps[1].index == 1);
  CHECK(t.depth() == 0);
  CHECK(b.reasoning_steps() == 2);
}

TEST_CASE("finish appends an auditable terminal marker") {
  const Trajectory state = Trajectory{"p", {}, false, std::nullopt}.extended("go", "The answer is 3.");
  const Trajectory done = finish(state, canonicalize_answer("3", AnswerKind::number));
  CHECK(done.terminal);
  REQUIRE(done.final_answer);
  CHECK(done.steps.back().thought == kStopPhrase);
  CHECK(done.steps.back().expression.empty());
  CHECK(done.reasoning_steps() == 1);

  const Trajectory empty = finish(Trajectory{}, std::nullopt);
  REQUIRE(empty.final_answer);
  CHECK_FALSE(verify_answer(*empty.final_answer, parse_gold_answer("0")));
}

TEST_CASE("stop and answer phrases are recognised at the start of a thought") {
  CHECK(is_stop_thought("The math problem has been solved."));
  CHECK(is_stop_thought("  The math problem has been solved. Done"));
  CHECK_FALSE(is_stop_thought("Check: The math problem has been solved."));
  CHECK(is_answer_thought("Now you can answer the problem in this step. Add them."));
  CHECK_FALSE(is_answer_thought("Add them."));
}

TEST_CASE("trajectory json enforces its invariants") {
  Trajectory t = Trajectory{"p", {}, false, std::nullopt}.extended("a", "b");
  const json j = t;
  CHECK(j.at("depth") == 1);
  CHECK(j.get<Trajectory>() == t);

  json gap = j;
  gap["steps"][0]["index"] = 3;
  CHECK_THROWS(gap.get<Trajectory>());

  json answer_without_terminal = j;
  answer_without_terminal["final_answer"] = json(canonicalize_answer("4"));
  CHECK_THROWS(answer_without_terminal.get<Trajectory>());

  json terminal_without_answer = j;
  terminal_without_answer["terminal"] = true;
  CHECK_THROWS(terminal_without_answer.get<Trajectory>());
}

TEST_CASE("answers keep exact rationals through json") {
  const Answer a = canonicalize_answer("2/3", AnswerKind::number);
  const json j = a;
  CHECK(j.at("numeric") == "2/3");
  CHECK(j.get<Answer>() == a);
}

TEST_CASE("preference pairs round trip through jsonl") {
  PreferencePair p;
  p.problem_id = "p1";
  p.problem_statement = "What is 1 + 1?";
  p.prefix = Trajectory{"p1", {}, false, std::nullopt}.extended("t0", "e0");
  p.chosen = {Step{"good", "1 + 1 = 2", 1}};
  p.rejected = {Step{"bad", "1 + 1 = 3", 1}};
  p.value_chosen = 0.9;
  p.value_rejected = 0.1;
  p.gap = 0.8;
  p.tree_id = "tree";
  const std::string text = to_jsonl({p, p});
  const auto lines = split_lines(text);
  REQUIRE(lines.size() == 2);
  CHECK(json::parse(lines[0].text).get<PreferencePair>() == p);
  CHECK(json::parse(lines[0].text).at("schema_version") == kSchemaVersion);
}
