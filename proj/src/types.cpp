#include "stepsearch/types.hpp"

#include <algorithm>

namespace stepsearch {

int Trajectory::reasoning_steps() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(),
                                        [](const Step& s) { return !s.expression.empty(); }));
}

Trajectory Trajectory::extended(std::string thought, std::string expression) const {
  Trajectory next = *this;
  next.steps.push_back(Step{std::move(thought), std::move(expression), depth()});
  return next;
}

Trajectory finish(const Trajectory& state, std::optional<Answer> answer) {
  Trajectory done = state.extended(std::string(kStopPhrase), "");
  done.terminal = true;
  // A terminal state always carries an answer; an empty text answer never verifies.
  done.final_answer = answer ? std::move(answer) : std::optional<Answer>(Answer{});
  return done;
}

namespace {
std::string_view trim_left(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\n' ||
                        s.front() == '\r')) {
    s.remove_prefix(1);
  }
  return s;
}
}  // namespace

bool is_stop_thought(std::string_view thought) {
  return trim_left(thought).starts_with(kStopPhrase);
}

bool is_answer_thought(std::string_view thought) {
  return trim_left(thought).starts_with(kAnswerPhrase);
}

double node_value(const SearchNode& node) {
  if (node.visits <= 0) {
    throw UndefinedValue("undefined value: node " + std::to_string(node.node_id) +
                         " has no visits");
  }
  return static_cast<double>(node.correct) / static_cast<double>(node.visits);
}

}  // namespace stepsearch
