#include <doctest.h>

#include <fstream>
#include <iterator>

#include "stepsearch/hashing.hpp"
#include "support.hpp"

using namespace stepsearch;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Trajectory two_steps() {
  return Trajectory{"p", {}, false, std::nullopt}
      .extended("Add the clips.", "48 + 24 = 72")
      .extended("Halve it.", "72 / 2 = 36");
}

}  // namespace

TEST_CASE("default prompts match the versioned resources byte for byte") {
  const auto dir = testing::source_dir() / "resources" / "prompts" / "v1";
  CHECK(default_agent_prompt() == read_file(dir / "agent.txt"));
  CHECK(default_world_prompt(WorldStyle::gsm8k) == read_file(dir / "world_gsm8k.txt"));
  CHECK(default_world_prompt(WorldStyle::math) == read_file(dir / "world_math.txt"));
  CHECK(kPromptVersion == 1);
}

TEST_CASE("default prompts have their pinned checksums") {
  CHECK(default_agent_prompt().size() == 709);
  CHECK(fnv1a(default_agent_prompt()) == 0x44c475776b69cbb4ULL);
  CHECK(default_world_prompt(WorldStyle::gsm8k).size() == 670);
  CHECK(fnv1a(default_world_prompt(WorldStyle::gsm8k)) == 0x568a698fb357f8f9ULL);
  CHECK(default_world_prompt(WorldStyle::math).size() == 637);
  CHECK(fnv1a(default_world_prompt(WorldStyle::math)) == 0x7f101e4a177f921bULL);
  CHECK(default_agent_prompt().starts_with("You should act as a guide."));
}

TEST_CASE("the answer examples in the world prompts extract") {
  const auto gsm = PromptConfig::for_style(WorldStyle::gsm8k);
  const auto math = PromptConfig::for_style(WorldStyle::math);
  CHECK(gsm.answer_spec.kind == AnswerSpec::Kind::the_answer_is);
  CHECK(math.answer_spec.kind == AnswerSpec::Kind::boxed);
  CHECK(gsm.world_system.find("The answer is 42.") != std::string::npos);
  CHECK(math.world_system.find("\\boxed{1000}") != std::string::npos);
  const auto a = extract_answer("The answer is 42.", gsm.answer_spec);
  REQUIRE(a);
  CHECK(a->numeric == Rational(42));
  const auto b = extract_answer("$(9+1)^3 = 10^3 = \\boxed{1000}$", math.answer_spec);
  REQUIRE(b);
  CHECK(b->numeric == Rational(1000));
}

TEST_CASE("agent and world conversations interleave the steps") {
  const PromptConfig prompts;
  const Problem problem = testing::make_problem("p", "How many clips?", "36");
  const Trajectory state = two_steps();

  const auto agent = agent_messages(prompts, problem, state);
  REQUIRE(agent.size() == 6);
  CHECK(agent[0] == ChatMessage{"system", std::string(default_agent_prompt())});
  CHECK(agent[1] == ChatMessage{"user", "How many clips?"});
  CHECK(agent[2] == ChatMessage{"assistant", "Add the clips."});
  CHECK(agent[3] == ChatMessage{"user", "48 + 24 = 72"});
  CHECK(agent[5] == ChatMessage{"user", "72 / 2 = 36"});

  const auto world = world_messages(prompts, problem, state, "Now you can answer the problem in this step.");
  REQUIRE(world.size() == 7);
  CHECK(world[0].role == "system");
  CHECK(world[2] == ChatMessage{"user", "Add the clips."});
  CHECK(world[3] == ChatMessage{"assistant", "48 + 24 = 72"});
  CHECK(world[6] == ChatMessage{"user", "Now you can answer the problem in this step."});
}

TEST_CASE("few-shot examples follow the system message") {
  PromptConfig prompts;
  prompts.shot_examples = {{{"user", "q1"}, {"assistant", "a1"}}, {{"user", "q2"}, {"assistant", "a2"}}};
  prompts.n_shots = 1;
  const Problem problem = testing::make_problem("p", "Q", "1");
  const auto messages = agent_messages(prompts, problem, Trajectory{});
  REQUIRE(messages.size() == 4);
  CHECK(messages[1].content == "q1");
  CHECK(messages[3].content == "Q");
  prompts.n_shots = 5;
  CHECK(agent_messages(prompts, problem, Trajectory{}).size() == 6);
}

TEST_CASE("proposals are deduplicated after normalization") {
  CHECK(normalize_thought("  Add   THE\tclips ") == "add the clips");
  testing::FakeBackend backend;
  backend.on_propose = [](const Trajectory&, int, const CallOptions&) {
    return std::vector<std::string>{"Add the clips.", "add  the CLIPS.", "", "   ", "Halve it.",
                                    "Double it.", "Triple it."};
  };
  const Problem problem = testing::make_problem("p", "Q", "1");
  const auto thoughts = propose_thoughts(backend, problem, Trajectory{}, 6, {});
  CHECK(thoughts == std::vector<std::string>{"Add the clips.", "Halve it.", "Double it.", "Triple it."});
  CHECK(propose_thoughts(backend, problem, Trajectory{}, 2, {}).size() == 2);
}

TEST_CASE("proposal preconditions and exhaustion") {
  testing::FakeBackend backend;
  backend.on_propose = [](const Trajectory&, int, const CallOptions&) {
    return std::vector<std::string>{"", "  "};
  };
  const Problem problem = testing::make_problem("p", "Q", "1");
  CHECK_THROWS_AS(propose_thoughts(backend, problem, Trajectory{}, 6, {}), ExhaustedProposals);
  CHECK_THROWS_AS(propose_thoughts(backend, problem, Trajectory{}, 0, {}), std::invalid_argument);
  const Trajectory done = finish(Trajectory{}, canonicalize_answer("1"));
  CHECK_THROWS_AS(propose_thoughts(backend, problem, done, 3, {}), std::invalid_argument);
}

TEST_CASE("an answer step without an answer is an unanswered final step") {
  testing::FakeBackend backend;
  backend.on_execute = [](const Trajectory&, std::string_view, const CallOptions&) {
    return std::string("72 / 2 = 36");
  };
  const Problem problem = testing::make_problem("p", "Q", "36");
  const AnswerSpec spec;
  CHECK(execute_thought(backend, problem, Trajectory{}, "Halve it.", {}, spec) == "72 / 2 = 36");
  try {
    execute_thought(backend, problem, Trajectory{},
                    "Now you can answer the problem in this step. Halve it.", {}, spec);
    FAIL("expected an unanswered final step");
  } catch (const UnansweredFinalStep& e) {
    CHECK(e.expression() == "72 / 2 = 36");
  }
  CHECK_THROWS_AS(execute_thought(backend, problem, Trajectory{}, std::string(kStopPhrase), {}, spec),
                  std::invalid_argument);
  CHECK_THROWS_AS(execute_thought(backend, problem, Trajectory{}, " ", {}, spec), std::invalid_argument);
}
