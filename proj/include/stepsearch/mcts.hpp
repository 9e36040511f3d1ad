#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepsearch/answer.hpp"
#include "stepsearch/backend.hpp"
#include "stepsearch/tree.hpp"
#include "stepsearch/types.hpp"

namespace stepsearch {

/// MCTS hyperparameters. Defaults are the collection settings: six
/// candidates per expansion, depth 8, w_exp 1.0, 500 iterations, agent at
/// temperature 1.3 and world model at 0.7, pairs kept above a 0.7 gap.
struct MctsConfig {
  int n_candidates = 6;
  int depth_limit = 8;
  double w_exp = 1.0;
  int n_iteration = 500;
  double agent_temperature = 1.3;
  double world_temperature = 0.7;
  double pair_gap_threshold = 0.7;
  /// Both siblings need this many visits before their values are compared.
  int min_child_visits = 5;
  std::uint64_t rng_seed = 0;
  /// Consecutive transport failures tolerated before a run is aborted.
  int failure_budget = 20;
  /// Run the world-model calls of one expansion in parallel.
  bool concurrent_expansion = false;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Everything an MCTS phase needs to talk to the models.
struct SearchContext {
  const Problem& problem;
  ChatBackend& backend;
  AnswerSpec answer_spec;
};

/// c(child)/N(child) + w_exp * sqrt(ln N(parent) / N(child)).
/// Requires parent.visits >= 1 and child.visits >= 1.
double uct_score(const SearchNode& child, const SearchNode& parent, double w_exp);

/// First unvisited child in insertion order, else the UCT argmax with ties
/// going to the lowest node_id. Throws std::logic_error on a childless parent.
NodeId select_child(const SearchTree& tree, NodeId parent, const MctsConfig& cfg);

/// Adds one child per distinct proposed thought (stop phrases become
/// terminal marker children). Children are committed only after every
/// world-model call succeeded; a TransportError leaves the tree unchanged.
/// Exhausted proposals mark the leaf as a dead end and return no children.
std::vector<NodeId> expand(SearchTree& tree, NodeId leaf, SearchContext& ctx,
                           const MctsConfig& cfg, std::mt19937_64& rng);

struct RolloutResult {
  int reward = 0;
  /// Backend failed mid-rollout; the reward was forced to 0.
  bool flagged = false;
};

/// Simulates from `state` with one sampled thought and expression per step
/// until terminal or the depth limit, then scores the final answer 0/1. The
/// simulated steps are not added to any tree.
RolloutResult rollout(const Trajectory& state, SearchContext& ctx, const MctsConfig& cfg,
                      std::mt19937_64& rng);

/// Reward of a state that will not be simulated further (terminal or capped).
int score_state(const Trajectory& state, const Problem& problem, const AnswerSpec& spec);

/// visits += 1 and correct += reward on `node` and each ancestor.
void backpropagate(SearchTree& tree, NodeId node, int reward);

/// Tree id for a run: a name-based UUID over problem, seed and config.
std::string make_tree_id(const Problem& problem, const MctsConfig& cfg);

/// Runs cfg.n_iteration successful iterations of select, expand, rollout
/// and back-propagate. Transport failures do not count; more than
/// cfg.failure_budget of them in a row end the run with status aborted.
SearchTree run_mcts(const Problem& problem, ChatBackend& backend, const MctsConfig& cfg,
                    const AnswerSpec& spec = {});

/// Sibling pairs whose value gap exceeds cfg.pair_gap_threshold, both with at
/// least cfg.min_child_visits visits. Ordered by parent id, then child order.
std::vector<PreferencePair> extract_pairs(const SearchTree& tree, const MctsConfig& cfg,
                                          std::string_view problem_statement = {});

}  // namespace stepsearch
