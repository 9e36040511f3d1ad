#include <doctest.h>

#include <fstream>

#include "stepsearch/json_io.hpp"
#include "stepsearch/mcts.hpp"
#include "stepsearch/transcript.hpp"
#include "support.hpp"

using namespace stepsearch;

namespace {

MctsConfig small_config() {
  MctsConfig cfg;
  cfg.n_iteration = 60;
  cfg.depth_limit = 4;
  cfg.rng_seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("record then replay a full run gives an identical tree") {
  testing::TempDir dir;
  const auto p = testing::synthetic(2, 14, "add 3|mul 2|sub 1", 4);
  const Problem problem = p.to_problem("rec");
  const PromptConfig prompts;

  auto log = std::make_shared<TranscriptLog>(dir / "t.jsonl");
  RecordingBackend recorder(std::make_shared<SyntheticBackend>(p, 0.4), prompts, log);
  const SearchTree recorded = run_mcts(problem, recorder, small_config());
  REQUIRE(recorded.run.completed_iterations == 60);

  ReplayBackend replay(prompts, dir / "t.jsonl");
  CHECK(replay.size() > 0);
  const SearchTree replayed = run_mcts(problem, replay, small_config());
  CHECK(serialize_tree(replayed) == serialize_tree(recorded));

  // Every logged line carries the request inputs, the response and a timestamp.
  const std::string log_text = read_text_file(dir / "t.jsonl");
  for (const auto& line : split_lines(log_text)) {
    if (line.text.empty()) continue;
    const auto entry = nlohmann::json::parse(line.text);
    CHECK(entry.at("schema_version") == kSchemaVersion);
    CHECK(entry.at("request").contains("messages"));
    CHECK(entry.at("request").contains("temperature"));
    CHECK(entry.contains("response"));
    CHECK(entry.contains("timestamp"));
  }
}

TEST_CASE("a mutated prompt misses the replay log") {
  testing::TempDir dir;
  const auto p = testing::synthetic(2, 14, "add 3|mul 2", 3);
  const Problem problem = p.to_problem("rec");
  auto log = std::make_shared<TranscriptLog>(dir / "t.jsonl");
  RecordingBackend recorder(std::make_shared<SyntheticBackend>(p, 0.0), PromptConfig{}, log);
  run_mcts(problem, recorder, small_config());

  PromptConfig mutated;
  mutated.agent_system += " ";
  ReplayBackend replay(mutated, dir / "t.jsonl");
  try {
    replay.propose(problem, Trajectory{}, 6, {1.3, 0});
    FAIL("expected a replay miss");
  } catch (const ReplayMiss& e) {
    CHECK(e.key().kind == CallKind::propose);
    CHECK(std::string(e.what()).find("propose/") != std::string::npos);
  }
}

TEST_CASE("an empty log misses immediately") {
  auto replay = ReplayBackend::from_bytes(PromptConfig{}, "");
  const Problem problem = testing::make_problem("p", "Q", "1");
  CHECK_THROWS_AS(replay->propose(problem, Trajectory{}, 6, {}), ReplayMiss);
  CHECK_THROWS_AS(replay->execute(problem, Trajectory{}, "go", {}), ReplayMiss);
  CHECK_THROWS_AS(run_mcts(problem, *replay, small_config()), ReplayMiss);
}

TEST_CASE("three recorded thoughts replay as exactly those three") {
  testing::TempDir dir;
  auto fake = std::make_shared<testing::FakeBackend>();
  fake->on_propose = [](const Trajectory&, int, const CallOptions&) {
    return std::vector<std::string>{"gamma", "alpha", "beta"};
  };
  fake->on_execute = [](const Trajectory&, std::string_view t, const CallOptions&) {
    return "did " + std::string(t);
  };
  const Problem problem = testing::make_problem("p", "Q", "1");
  auto log = std::make_shared<TranscriptLog>(dir / "t.jsonl");
  RecordingBackend recorder(fake, PromptConfig{}, log);
  CHECK(recorder.propose(problem, Trajectory{}, 6, {1.3, 9}).size() == 3);
  recorder.execute(problem, Trajectory{}, "alpha", {0.7, 1});
  recorder.execute(problem, Trajectory{}, "alpha", {0.7, 2});

  ReplayBackend replay(PromptConfig{}, dir / "t.jsonl");
  CHECK(replay.propose(problem, Trajectory{}, 6, {1.3, 9}) ==
        std::vector<std::string>{"gamma", "alpha", "beta"});
  CHECK(replay.execute(problem, Trajectory{}, "alpha", {0.7, 1}) == "did alpha");
  // The ordinal distinguishes repeated identical requests; a third has none.
  CHECK(replay.execute(problem, Trajectory{}, "alpha", {0.7, 2}) == "did alpha");
  CHECK_THROWS_AS(replay.execute(problem, Trajectory{}, "alpha", {0.7, 3}), ReplayMiss);
  // A different temperature is a different request.
  CHECK_THROWS_AS(replay.propose(problem, Trajectory{}, 6, {1.0, 9}), ReplayMiss);
}

TEST_CASE("request hashes separate problems and requests") {
  const std::vector<ChatMessage> m{{"user", "x"}};
  const auto base = request_hash(CallKind::propose, "a", m, 6, 1.3);
  CHECK(base == request_hash(CallKind::propose, "a", m, 6, 1.3));
  CHECK(base != request_hash(CallKind::propose, "b", m, 6, 1.3));
  CHECK(base != request_hash(CallKind::execute, "a", m, 6, 1.3));
  CHECK(base != request_hash(CallKind::propose, "a", m, 5, 1.3));
  CHECK(base != request_hash(CallKind::propose, "a", m, 6, 0.7));
  CHECK(base != request_hash(CallKind::propose, "a", {{"user", "y"}}, 6, 1.3));
  CHECK(request_hash(CallKind::propose, "a", {{"us", "erx"}}, 6, 1.3) != base);
}

TEST_CASE("a corrupt transcript names the byte offset") {
  try {
    ReplayBackend::from_bytes(PromptConfig{}, "{}\n");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("transcript byte 0") != std::string::npos);
  }
}
