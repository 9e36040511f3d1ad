#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace stepsearch {

using Rational = boost::multiprecision::cpp_rational;

/// Current on-disk schema for tree, trajectory, pair and transcript files.
inline constexpr int kSchemaVersion = 1;

/// Thought emitted by the agent once the final answer has been obtained.
inline constexpr std::string_view kStopPhrase = "The math problem has been solved.";
/// Prefix of a thought telling the world model to produce the final answer.
inline constexpr std::string_view kAnswerPhrase = "Now you can answer the problem in this step.";

enum class AnswerKind { number, latex_boxed, text };

struct Answer {
  std::string raw;
  std::optional<Rational> numeric;
  AnswerKind kind = AnswerKind::text;

  bool operator==(const Answer&) const = default;
};

struct Problem {
  std::string id;
  std::string statement;
  Answer gold_answer;
  std::string source_tag;

  bool operator==(const Problem&) const = default;
};

/// One reasoning step: a natural-language thought and its executed expression.
struct Step {
  std::string thought;
  std::string expression;
  int index = 0;

  bool operator==(const Step&) const = default;
};

/// A problem plus the ordered steps taken so far (the MDP state).
struct Trajectory {
  std::string problem_id;
  std::vector<Step> steps;
  bool terminal = false;
  std::optional<Answer> final_answer;

  int depth() const { return static_cast<int>(steps.size()); }
  /// Number of steps that carry an expression (excludes the terminal marker).
  int reasoning_steps() const;

  /// Copy of this state extended by one step. Sets the step index.
  Trajectory extended(std::string thought, std::string expression) const;

  bool operator==(const Trajectory&) const = default;
};

/// Trajectory with a terminal marker appended and the final answer filled in.
Trajectory finish(const Trajectory& state, std::optional<Answer> answer);

bool is_stop_thought(std::string_view thought);
bool is_answer_thought(std::string_view thought);

using NodeId = std::int64_t;

struct SearchNode {
  NodeId node_id = 0;
  Trajectory state;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  std::int64_t visits = 0;
  std::int64_t correct = 0;
  std::optional<std::string> action_taken;
  /// Rollouts (or terminal evaluations) launched directly from this node.
  std::int64_t rollouts = 0;
  /// Agent produced no usable proposal here; the node scores 0 on traversal.
  bool dead_end = false;

  bool operator==(const SearchNode&) const = default;
};

struct PreferencePair {
  std::string problem_id;
  std::string problem_statement;
  Trajectory prefix;
  std::vector<Step> chosen;
  std::vector<Step> rejected;
  double value_chosen = 0.0;
  double value_rejected = 0.0;
  double gap = 0.0;
  std::string tree_id;

  bool operator==(const PreferencePair&) const = default;
};

/// Raised when a value is requested for a node that has never been visited.
class UndefinedValue : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// c(s) / N(s). Throws UndefinedValue when the node has no visits.
double node_value(const SearchNode& node);

}  // namespace stepsearch
