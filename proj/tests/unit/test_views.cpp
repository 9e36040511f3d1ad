#include <doctest.h>

#include "stepsearch/json_io.hpp"
#include "support.hpp"

using namespace stepsearch;
using nlohmann::json;

namespace {

const std::string kStatement = "Natalia sold clips to 48 friends.";

Trajectory two_step_prefix() {
  return Trajectory{"p", {}, false, std::nullopt}
      .extended("T0 add them", "E0: 48 + 24 = 72")
      .extended("T1 halve", "E1: 72 / 2 = 36");
}

const Step kCandidate{"T2 answer", "E2: The answer is 36.", 2};

PreferencePair pair_with(std::string chosen_expr, std::string rejected_expr, std::string suffix = "") {
  PreferencePair p;
  p.problem_id = "p" + suffix;
  p.problem_statement = kStatement;
  p.prefix = two_step_prefix();
  p.prefix.problem_id = p.problem_id;
  p.chosen = {Step{"good thought", std::move(chosen_expr), 2}};
  p.rejected = {Step{"bad thought", std::move(rejected_expr), 2}};
  p.value_chosen = 1.0;
  p.value_rejected = 0.0;
  p.gap = 1.0;
  p.tree_id = "t";
  return p;
}

}  // namespace

TEST_CASE("view names and short forms") {
  for (ViewKind v : kAllViews) CHECK(view_from_string(to_string(v)) == v);
  CHECK(view_from_string("ssmo") == ViewKind::single_step_math_only);
  CHECK(view_from_string("nt") == ViewKind::next_thought);
  CHECK_FALSE(view_from_string("thoughts"));
  CHECK(std::size(kAllViews) == 4);
}

TEST_CASE("full context interleaves every thought and expression") {
  CHECK(render(two_step_prefix(), kCandidate, ViewKind::full_context, kStatement) ==
        "[PROBLEM]\n" + kStatement +
            "\n[STEP 0]\n[THOUGHT]\nT0 add them\n[MATH]\nE0: 48 + 24 = 72"
            "\n[STEP 1]\n[THOUGHT]\nT1 halve\n[MATH]\nE1: 72 / 2 = 36"
            "\n[STEP 2]\n[THOUGHT]\nT2 answer\n[MATH]\nE2: The answer is 36.");
}

TEST_CASE("math only keeps exactly the expressions") {
  const std::string mo = render(two_step_prefix(), kCandidate, ViewKind::math_only, kStatement);
  CHECK(mo == "[PROBLEM]\n" + kStatement +
                  "\n[STEP 0]\n[MATH]\nE0: 48 + 24 = 72"
                  "\n[STEP 1]\n[MATH]\nE1: 72 / 2 = 36"
                  "\n[STEP 2]\n[MATH]\nE2: The answer is 36.");
  std::size_t blocks = 0;
  for (auto at = mo.find("[MATH]"); at != std::string::npos; at = mo.find("[MATH]", at + 1)) ++blocks;
  CHECK(blocks == 3);
  CHECK(mo.find("T0") == std::string::npos);
  CHECK(mo.find("T1") == std::string::npos);
  CHECK(mo.find("T2") == std::string::npos);
  CHECK(mo.find("[THOUGHT]") == std::string::npos);
}

TEST_CASE("single step math only is the newest expression alone") {
  CHECK(render(two_step_prefix(), kCandidate, ViewKind::single_step_math_only, kStatement) ==
        "E2: The answer is 36.");
  RenderOptions with;
  with.ssmo_include_statement = true;
  CHECK(render(two_step_prefix(), kCandidate, ViewKind::single_step_math_only, kStatement, with) ==
        "[PROBLEM]\n" + kStatement + "\n[MATH]\nE2: The answer is 36.");
}

TEST_CASE("next thought shows the candidate thought but not its expression") {
  const std::string nt = render(two_step_prefix(), kCandidate, ViewKind::next_thought, kStatement);
  CHECK(nt.find("T2 answer") != std::string::npos);
  CHECK(nt.find("E2") == std::string::npos);
  CHECK(nt.find("E1: 72 / 2 = 36") != std::string::npos);
  CHECK(nt.ends_with("[STEP 2]\n[THOUGHT]\nT2 answer"));
}

TEST_CASE("render preconditions") {
  CHECK_THROWS_AS(render(two_step_prefix(), Step{"t", "e", 1}, ViewKind::full_context, kStatement),
                  std::invalid_argument);
  const Step empty{"t", "", 2};
  CHECK_THROWS_AS(render(two_step_prefix(), empty, ViewKind::math_only, kStatement), EmptyRender);
  CHECK_THROWS_AS(render(two_step_prefix(), empty, ViewKind::single_step_math_only, kStatement), EmptyRender);
  CHECK_NOTHROW(render(two_step_prefix(), empty, ViewKind::full_context, kStatement));
  const Step stop{std::string(kStopPhrase), "", 2};
  CHECK(render(two_step_prefix(), stop, ViewKind::single_step_math_only, kStatement).empty());
  CHECK_THROWS_AS(render_state(Trajectory{}, ViewKind::math_only, kStatement), std::invalid_argument);
  const Trajectory full = two_step_prefix().extended(kCandidate.thought, kCandidate.expression);
  CHECK(render_state(full, ViewKind::math_only, kStatement) ==
        render(two_step_prefix(), kCandidate, ViewKind::math_only, kStatement));
}

TEST_CASE("sentinel purity over random pairs") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    const auto p = testing::sentinel_pair(rng, i);
    CHECK(testing::view_purity_violation(p) == "");
  }
}

TEST_CASE("render duplicates and impossible renders are dropped and counted") {
  const std::vector<PreferencePair> pairs{
      pair_with("1 + 1 = 2", "1 + 1 = 3", "a"),
      pair_with("same", "same", "b"),
      pair_with("1 + 1 = 2", "1 + 1 = 3", "a"),
      pair_with("ok", "", "c"),
  };
  const Dataset mo = build_dataset(pairs, ViewKind::math_only);
  CHECK(mo.stats.input_pairs == 4);
  CHECK(mo.stats.count == 1);
  CHECK(mo.examples.size() == 1);
  CHECK(mo.stats.dedup_count == 2);
  CHECK(mo.stats.render_errors == 1);
  // The thoughts differ, so full context keeps the shared-expression pair.
  const Dataset fc = build_dataset(pairs, ViewKind::full_context);
  CHECK(fc.stats.count == 3);
  CHECK(fc.stats.dedup_count == 1);
  for (const auto& e : fc.examples) CHECK(e.chosen_text != e.rejected_text);
}

TEST_CASE("dataset stats and order") {
  std::mt19937_64 rng(3);
  std::vector<PreferencePair> pairs;
  double gap_sum = 0.0;
  double depth_sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    pairs.push_back(testing::sentinel_pair(rng, i));
    pairs.back().gap = 0.71 + 0.002 * i;
    gap_sum += pairs.back().gap;
    depth_sum += pairs.back().prefix.depth();
  }
  for (ViewKind v : kAllViews) {
    const Dataset d = build_dataset(pairs, v);
    CHECK(d.stats.count == 100);
    CHECK(d.stats.mean_gap == doctest::Approx(gap_sum / 100));
    CHECK(d.stats.mean_prefix_depth == doctest::Approx(depth_sum / 100));
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
      CHECK(d.examples[i].problem_id == pairs[i].problem_id);
      CHECK(d.examples[i].view == v);
    }
  }
}

TEST_CASE("dataset files are deterministic and well-formed") {
  std::mt19937_64 rng(8);
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 20; ++i) pairs.push_back(testing::sentinel_pair(rng, i));
  testing::TempDir dir;
  write_dataset(dir / "a.jsonl", build_dataset(pairs, ViewKind::next_thought));
  write_dataset(dir / "b.jsonl", build_dataset(pairs, ViewKind::next_thought));
  CHECK(read_text_file(dir / "a.jsonl") == read_text_file(dir / "b.jsonl"));
  CHECK(read_text_file(dir / "a.jsonl.stats.json") == read_text_file(dir / "b.jsonl.stats.json"));

  const std::string text = read_text_file(dir / "a.jsonl");
  const auto lines = split_lines(text);
  REQUIRE(lines.size() == 20);
  const auto first = json::parse(lines[0].text);
  CHECK(first.at("view") == "next_thought");
  for (const char* key : {"chosen_text", "rejected_text", "gap", "problem_id", "tree_id"}) {
    CHECK(first.contains(key));
  }
  CHECK(json::parse(read_text_file(dir / "a.jsonl.stats.json")).at("count") == 20);

  write_dataset(dir / "p.jsonl", build_dataset(pairs, ViewKind::math_only), true);
  const std::string point_text = read_text_file(dir / "p.jsonl");
  const auto points = split_lines(point_text);
  REQUIRE(points.size() == 40);
  CHECK(json::parse(points[0].text).at("label") == 1);
  CHECK(json::parse(points[1].text).at("label") == 0);

  CHECK_THROWS_WITH_AS(write_dataset((dir / "missing") + "/x.jsonl", build_dataset(pairs, ViewKind::math_only)),
                       doctest::Contains("missing"), std::exception);
}
