#include "stepsearch/mcts.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <optional>

#include "stepsearch/hashing.hpp"

namespace stepsearch {

using nlohmann::json;

void MctsConfig::validate() const {
  if (n_candidates < 2) throw ConfigError("n_candidates must be >= 2");
  if (depth_limit < 1) throw ConfigError("depth_limit must be >= 1");
  if (!(pair_gap_threshold > 0.0 && pair_gap_threshold < 1.0)) {
    throw ConfigError("pair_gap_threshold must lie in (0, 1)");
  }
  if (n_iteration < 0) throw ConfigError("n_iteration must be >= 0");
  if (w_exp < 0.0) throw ConfigError("w_exp must be >= 0");
  if (min_child_visits < 1) throw ConfigError("min_child_visits must be >= 1");
  if (failure_budget < 0) throw ConfigError("failure_budget must be >= 0");
}

json MctsConfig::to_json() const {
  return json{{"n_candidates", n_candidates},
              {"depth_limit", depth_limit},
              {"w_exp", w_exp},
              {"n_iteration", n_iteration},
              {"agent_temperature", agent_temperature},
              {"world_temperature", world_temperature},
              {"pair_gap_threshold", pair_gap_threshold},
              {"min_child_visits", min_child_visits},
              {"rng_seed", rng_seed},
              {"failure_budget", failure_budget},
              {"concurrent_expansion", concurrent_expansion}};
}

double uct_score(const SearchNode& child, const SearchNode& parent, double w_exp) {
  if (parent.visits < 1 || child.visits < 1) {
    throw std::logic_error("uct_score needs visited parent and child");
  }
  const double n_child = static_cast<double>(child.visits);
  const double exploit = static_cast<double>(child.correct) / n_child;
  return exploit + w_exp * std::sqrt(std::log(static_cast<double>(parent.visits)) / n_child);
}

NodeId select_child(const SearchTree& tree, NodeId parent_id, const MctsConfig& cfg) {
  const SearchNode& parent = tree.at(parent_id);
  if (parent.children.empty()) {
    throw std::logic_error("select_child on childless node " + std::to_string(parent_id));
  }
  for (NodeId c : parent.children) {
    if (tree.at(c).visits == 0) return c;
  }
  NodeId best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (NodeId c : parent.children) {
    const double score = uct_score(tree.at(c), parent, cfg.w_exp);
    if (score > best_score || (score == best_score && c < best)) {
      best = c;
      best_score = score;
    }
  }
  return best;
}

int score_state(const Trajectory& state, const Problem& problem, const AnswerSpec& spec) {
  std::optional<Answer> answer = state.terminal ? state.final_answer : trajectory_answer(state, spec);
  return answer && verify_answer(*answer, problem.gold_answer) ? 1 : 0;
}

namespace {

CallOptions agent_call(const MctsConfig& cfg, std::mt19937_64& rng) {
  return CallOptions{cfg.agent_temperature, rng()};
}

CallOptions world_call(const MctsConfig& cfg, std::mt19937_64& rng) {
  return CallOptions{cfg.world_temperature, rng()};
}

}  // namespace

std::vector<NodeId> expand(SearchTree& tree, NodeId leaf_id, SearchContext& ctx,
                           const MctsConfig& cfg, std::mt19937_64& rng) {
  const Trajectory state = tree.at(leaf_id).state;
  if (state.terminal) throw std::logic_error("expand on terminal node");
  if (state.depth() >= cfg.depth_limit) return {};

  std::vector<std::string> thoughts;
  try {
    thoughts = propose_thoughts(ctx.backend, ctx.problem, state, cfg.n_candidates,
                                agent_call(cfg, rng));
  } catch (const ExhaustedProposals&) {
    tree.at(leaf_id).dead_end = true;
    return {};
  }

  // Seeds are drawn up front so concurrent execution stays deterministic.
  std::vector<CallOptions> options;
  options.reserve(thoughts.size());
  for (std::size_t i = 0; i < thoughts.size(); ++i) options.push_back(world_call(cfg, rng));

  std::vector<std::future<std::optional<std::string>>> pending;
  pending.reserve(thoughts.size());
  for (std::size_t i = 0; i < thoughts.size(); ++i) {
    if (is_stop_thought(thoughts[i])) {
      std::promise<std::optional<std::string>> done;
      done.set_value(std::nullopt);
      pending.push_back(done.get_future());
      continue;
    }
    const auto policy = cfg.concurrent_expansion ? std::launch::async : std::launch::deferred;
    pending.push_back(std::async(policy, [&, i]() -> std::optional<std::string> {
      try {
        return execute_thought(ctx.backend, ctx.problem, state, thoughts[i], options[i],
                               ctx.answer_spec);
      } catch (const UnansweredFinalStep& e) {
        // Kept as a child; its missing answer scores 0 downstream.
        return e.expression();
      }
    }));
  }
  std::vector<std::optional<std::string>> expressions;
  std::exception_ptr failure;
  for (auto& f : pending) {
    try {
      expressions.push_back(f.get());
    } catch (...) {
      if (!failure) failure = std::current_exception();
      expressions.emplace_back();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<NodeId> children;
  for (std::size_t i = 0; i < thoughts.size(); ++i) {
    Trajectory next = expressions[i] ? state.extended(thoughts[i], *expressions[i])
                                     : finish(state, trajectory_answer(state, ctx.answer_spec));
    children.push_back(tree.add_child(leaf_id, std::move(next), thoughts[i]));
  }
  return children;
}

RolloutResult rollout(const Trajectory& start, SearchContext& ctx, const MctsConfig& cfg,
                      std::mt19937_64& rng) {
  Trajectory state = start;
  try {
    while (!state.terminal && state.depth() < cfg.depth_limit) {
      const auto thoughts = propose_thoughts(ctx.backend, ctx.problem, state, 1, agent_call(cfg, rng));
      const std::string& thought = thoughts.front();
      if (is_stop_thought(thought)) {
        state = finish(state, trajectory_answer(state, ctx.answer_spec));
        break;
      }
      std::string expression = execute_thought(ctx.backend, ctx.problem, state, thought,
                                               world_call(cfg, rng), ctx.answer_spec);
      state = state.extended(thought, std::move(expression));
    }
  } catch (const ExhaustedProposals&) {
    return {0, false};
  } catch (const UnansweredFinalStep&) {
    return {0, false};
  } catch (const TransportError&) {
    return {0, true};
  }
  return {score_state(state, ctx.problem, ctx.answer_spec), false};
}

void backpropagate(SearchTree& tree, NodeId node, int reward) {
  std::optional<NodeId> current = node;
  while (current) {
    SearchNode& n = tree.at(*current);
    n.visits += 1;
    n.correct += reward;
    current = n.parent;
  }
}

std::string make_tree_id(const Problem& problem, const MctsConfig& cfg) {
  return name_uuid(problem.id + "\n" + problem.statement + "\n" + cfg.to_json().dump());
}

namespace {

// One select/expand/rollout/backup pass. Throws TransportError when the
// iteration has to be discarded.
void iterate(SearchTree& tree, SearchContext& ctx, const MctsConfig& cfg, std::mt19937_64& rng) {
  NodeId node = 0;
  while (!tree.at(node).children.empty()) node = select_child(tree, node, cfg);

  NodeId launch = node;
  int reward = 0;
  const SearchNode& leaf = tree.at(node);
  if (leaf.state.terminal || leaf.state.depth() >= cfg.depth_limit) {
    reward = score_state(leaf.state, ctx.problem, ctx.answer_spec);
  } else if (leaf.dead_end) {
    reward = 0;
  } else {
    const auto children = expand(tree, node, ctx, cfg, rng);
    if (!children.empty()) {
      launch = children.front();
      const auto result = rollout(tree.at(launch).state, ctx, cfg, rng);
      reward = result.reward;
      if (result.flagged) ++tree.run.flagged_rollouts;
    }
  }
  tree.at(launch).rollouts += 1;
  backpropagate(tree, launch, reward);
}

}  // namespace

SearchTree run_mcts(const Problem& problem, ChatBackend& backend, const MctsConfig& cfg,
                    const AnswerSpec& spec) {
  cfg.validate();
  Trajectory root_state;
  root_state.problem_id = problem.id;
  SearchTree tree = SearchTree::with_root(make_tree_id(problem, cfg), std::move(root_state));
  tree.run.seed = cfg.rng_seed;
  tree.run.config = cfg.to_json();

  std::mt19937_64 rng(hash_combine(fnv1a(problem.id), cfg.rng_seed));
  SearchContext ctx{problem, backend, spec};
  int consecutive_failures = 0;
  while (tree.run.completed_iterations < cfg.n_iteration) {
    try {
      iterate(tree, ctx, cfg, rng);
      ++tree.run.completed_iterations;
      consecutive_failures = 0;
    } catch (const TransportError&) {
      ++tree.run.failed_iterations;
      if (++consecutive_failures > cfg.failure_budget) {
        tree.run.status = RunStatus::aborted;
        break;
      }
    }
  }
  return tree;
}

std::vector<PreferencePair> extract_pairs(const SearchTree& tree, const MctsConfig& cfg,
                                          std::string_view problem_statement) {
  std::vector<PreferencePair> pairs;
  for (const auto& parent : tree.nodes) {
    const auto& kids = parent.children;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const SearchNode& u = tree.at(kids[i]);
      if (u.visits < cfg.min_child_visits) continue;
      for (std::size_t j = i + 1; j < kids.size(); ++j) {
        const SearchNode& v = tree.at(kids[j]);
        if (v.visits < cfg.min_child_visits) continue;
        // Exact integer cross-multiplication, then a single rounding, so a
        // gap of exactly 0.7 compares equal to the threshold.
        const std::int64_t cross = u.correct * v.visits - v.correct * u.visits;
        const double gap = static_cast<double>(cross < 0 ? -cross : cross) /
                           static_cast<double>(u.visits * v.visits);
        if (!(gap > cfg.pair_gap_threshold)) continue;
        const SearchNode& hi = cross > 0 ? u : v;
        const SearchNode& lo = cross > 0 ? v : u;
        PreferencePair pair;
        pair.problem_id = tree.problem_id;
        pair.problem_statement = std::string(problem_statement);
        pair.prefix = parent.state;
        pair.chosen = {hi.state.steps.back()};
        pair.rejected = {lo.state.steps.back()};
        pair.value_chosen = node_value(hi);
        pair.value_rejected = node_value(lo);
        pair.gap = gap;
        pair.tree_id = tree.tree_id;
        pairs.push_back(std::move(pair));
      }
    }
  }
  return pairs;
}

}  // namespace stepsearch
