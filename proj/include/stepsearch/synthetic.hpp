#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stepsearch/backend.hpp"
#include "stepsearch/types.hpp"

namespace stepsearch {

/// One arithmetic move of the synthetic environment ("add 3", "mul 2").
struct SyntheticOp {
  enum class Kind { add, sub, mul };
  Kind kind = Kind::add;
  std::int64_t operand = 0;

  std::string label() const;
  /// Throws std::overflow_error if the result leaves int64.
  std::int64_t apply(std::int64_t value) const;

  bool operator==(const SyntheticOp&) const = default;
};

/// Parses "add 3", "add:3" or "add3".
SyntheticOp parse_op(std::string_view text);

/// Reach `target` from `start` using `allowed_ops` within `max_depth` steps.
struct SyntheticProblem {
  std::int64_t start = 0;
  std::int64_t target = 0;
  std::vector<SyntheticOp> allowed_ops;
  int max_depth = 3;

  std::string statement() const;
  Problem to_problem(std::string id, std::string source_tag = "synthetic") const;

  bool operator==(const SyntheticProblem&) const = default;
};

/// Position in the synthetic MDP: current value after `depth` executed steps.
struct SyntheticState {
  std::int64_t value = 0;
  int depth = 0;

  bool operator==(const SyntheticState&) const = default;
};

/// Reconstructs the synthetic state from a trajectory's expressions.
SyntheticState synthetic_state(const SyntheticProblem& problem, const Trajectory& state,
                               const AnswerSpec& spec = {});

/// Op named by an agent thought ("apply add 3"), if any.
std::optional<SyntheticOp> op_from_thought(std::string_view thought);

/// Text of the thought that applies `op`; prefixed with the answer phrase
/// when it lands on the target.
std::string op_thought(const SyntheticProblem& problem, std::int64_t value, const SyntheticOp& op);

class StateSpaceTooLarge : public std::runtime_error {
 public:
  StateSpaceTooLarge(std::size_t count, std::size_t limit)
      : std::runtime_error("state space too large: " + std::to_string(count) +
                           " states exceed the limit of " + std::to_string(limit)),
        count_(count) {}
  std::size_t count() const { return count_; }

 private:
  std::size_t count_;
};

/// Exact V* and Q* for every reachable state, by backward induction.
class ValueTable {
 public:
  struct Entry {
    double v = 0.0;
    /// Q*(s, a) per allowed op; empty at solved or depth-capped states.
    std::vector<double> q;
  };

  const Entry& at(const SyntheticState& s) const;
  const Entry* find(const SyntheticState& s) const;
  double v(const SyntheticState& s) const { return at(s).v; }
  std::size_t size() const { return entries_.size(); }

  std::vector<SyntheticState> states() const;

 private:
  friend ValueTable brute_force_values(const SyntheticProblem&, std::size_t);
  struct Hash {
    std::size_t operator()(const SyntheticState& s) const {
      return std::hash<std::int64_t>{}(s.value) * 31 + static_cast<std::size_t>(s.depth);
    }
  };
  std::unordered_map<SyntheticState, Entry, Hash> entries_;
};

inline constexpr std::size_t kMaxSyntheticStates = 100000;

ValueTable brute_force_values(const SyntheticProblem& problem,
                              std::size_t max_states = kMaxSyntheticStates);

/// Deterministic stand-in for the LLM agent and world model.
///
/// Proposals are drawn without replacement from the allowed ops. Each draw
/// comes from the off-optimal ops (Q* < V*) with probability `noise` and from
/// the optimal ones otherwise, falling back to whichever group is non-empty.
/// Solved or depth-capped states propose only the stop phrase. Temperature is
/// ignored; the per-call seed drives all sampling.
class SyntheticBackend final : public ChatBackend {
 public:
  SyntheticBackend(SyntheticProblem problem, double noise);

  std::string name() const override { return "synthetic"; }
  std::vector<std::string> propose(const Problem& problem, const Trajectory& state, int n,
                                   const CallOptions& options) override;
  std::string execute(const Problem& problem, const Trajectory& state, std::string_view thought,
                      const CallOptions& options) override;

  const SyntheticProblem& problem() const { return problem_; }
  const ValueTable& values() const { return values_; }
  double noise() const { return noise_; }

 private:
  SyntheticProblem problem_;
  double noise_;
  ValueTable values_;
};

/// Entry of a synthetic corpus: the problem and the agent noise to use.
struct SyntheticCase {
  std::string id;
  SyntheticProblem problem;
  double noise = 0.0;
};

/// Generator behind `--synthetic start,target,ops,depth,noise,count,seed`.
/// start: N or LO..HI; target: N, LO..HI, or `walk` (reachable by a random
/// op sequence of length 1..depth); ops: `|`-separated, e.g. add3|sub1|mul2.
struct GeneratorSpec {
  std::int64_t start_lo = 0, start_hi = 0;
  bool target_walk = true;
  std::int64_t target_lo = 0, target_hi = 0;
  std::vector<SyntheticOp> ops;
  int depth = 3;
  double noise = 0.0;
  int count = 1;
  std::uint64_t seed = 0;
};

GeneratorSpec parse_generator_spec(std::string_view text);
std::vector<SyntheticCase> generate_corpus(const GeneratorSpec& spec);

}  // namespace stepsearch
