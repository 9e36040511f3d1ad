#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fstream>
#include <nlohmann/json.hpp>

#include "stepsearch/answer.hpp"
#include "stepsearch/backend.hpp"
#include "stepsearch/synthetic.hpp"
#include "stepsearch/tree.hpp"
#include "stepsearch/views.hpp"

namespace testing {

using namespace stepsearch;

inline std::filesystem::path source_dir() { return STEPSEARCH_SOURCE_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("stepsearch-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Backend driven by lambdas; counts calls.
class FakeBackend final : public ChatBackend {
 public:
  std::function<std::vector<std::string>(const Trajectory&, int, const CallOptions&)> on_propose;
  std::function<std::string(const Trajectory&, std::string_view, const CallOptions&)> on_execute;
  std::atomic<int> propose_calls{0};
  std::atomic<int> execute_calls{0};

  std::string name() const override { return "fake"; }
  std::vector<std::string> propose(const Problem&, const Trajectory& state, int n,
                                   const CallOptions& options) override {
    ++propose_calls;
    return on_propose(state, n, options);
  }
  std::string execute(const Problem&, const Trajectory& state, std::string_view thought,
                      const CallOptions& options) override {
    ++execute_calls;
    return on_execute(state, thought, options);
  }
};

inline Problem make_problem(std::string id, std::string statement, std::string gold) {
  Problem p;
  p.id = std::move(id);
  p.statement = std::move(statement);
  p.gold_answer = parse_gold_answer(gold);
  p.source_tag = "test";
  return p;
}

inline SyntheticProblem synthetic(std::int64_t start, std::int64_t target, const std::string& ops,
                                  int depth) {
  SyntheticProblem p;
  p.start = start;
  p.target = target;
  p.max_depth = depth;
  std::stringstream in(ops);
  std::string op;
  while (std::getline(in, op, '|')) p.allowed_ops.push_back(parse_op(op));
  return p;
}

/// Optimal value by plain recursion over op sequences; independent of the
/// layered backward induction in the library.
inline double reference_value(const SyntheticProblem& p, std::int64_t value, int depth) {
  if (value == p.target) return 1.0;
  if (depth >= p.max_depth) return 0.0;
  double best = 0.0;
  for (const auto& op : p.allowed_ops) {
    std::int64_t next = 0;
    try {
      next = op.apply(value);
    } catch (const std::overflow_error&) {
      continue;
    }
    best = std::max(best, reference_value(p, next, depth + 1));
  }
  return best;
}

/// Random tree with arbitrary counts for pair-extraction checks. Visits are
/// drawn small so the min-visit and gap filters both bite.
inline SearchTree random_tree(std::mt19937_64& rng, int max_nodes = 40) {
  Trajectory root;
  root.problem_id = "rand";
  SearchTree tree = SearchTree::with_root("tree-" + std::to_string(rng() % 100000), root);
  std::uniform_int_distribution<int> kids(0, 5);
  std::uniform_int_distribution<int> visits(0, 12);
  std::vector<NodeId> frontier{0};
  while (!frontier.empty() && static_cast<int>(tree.nodes.size()) < max_nodes) {
    const NodeId parent = frontier.front();
    frontier.erase(frontier.begin());
    const int k = kids(rng);
    for (int i = 0; i < k && static_cast<int>(tree.nodes.size()) < max_nodes; ++i) {
      const Trajectory& ps = tree.at(parent).state;
      const std::string thought = "think " + std::to_string(tree.nodes.size());
      const NodeId c = tree.add_child(parent, ps.extended(thought, "x = " + std::to_string(i)), thought);
      frontier.push_back(c);
    }
  }
  for (auto& n : tree.nodes) {
    n.visits = visits(rng);
    n.correct = n.visits == 0 ? 0 : std::uniform_int_distribution<std::int64_t>(0, n.visits)(rng);
  }
  return tree;
}

struct AnswerCase {
  std::string text;
  AnswerSpec spec;
  std::optional<Rational> number;
  std::optional<std::string> text_answer;
};

inline std::vector<AnswerCase> answer_cases() {
  std::ifstream in(source_dir() / "tests" / "fixtures" / "answer_cases.jsonl");
  std::vector<AnswerCase> cases;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    AnswerCase c;
    c.text = j.at("text").get<std::string>();
    c.spec.kind = answer_kind_from_string(j.at("spec").get<std::string>());
    if (j.contains("number")) c.number = Rational(j.at("number").get<std::string>());
    if (j.contains("text_answer")) c.text_answer = j.at("text_answer").get<std::string>();
    cases.push_back(std::move(c));
  }
  return cases;
}

/// Empty string when the extraction matches the fixture, else a description.
inline std::string check_answer_case(const AnswerCase& c) {
  const auto found = extract_answer(c.text, c.spec);
  if (!c.number && !c.text_answer) return found ? "expected no answer, got " + found->raw : "";
  if (!found) return "expected an answer, got none";
  if (c.number) {
    if (!found->numeric || *found->numeric != *c.number) return "wrong number " + found->raw;
    return "";
  }
  if (found->numeric || found->raw != *c.text_answer) return "wrong text " + found->raw;
  return "";
}

/// Sibling pair found by the brute-force enumerator, by node id.
struct BrutePair {
  NodeId chosen = 0;
  NodeId rejected = 0;
  auto operator<=>(const BrutePair&) const = default;
};

/// Every unordered pair of nodes sharing a parent, both with at least
/// `min_visits` visits, whose value gap exceeds 7/10. Exact integer
/// arithmetic; scans all node pairs rather than child lists.
inline std::set<BrutePair> brute_force_pairs(const SearchTree& tree, std::int64_t min_visits = 5) {
  std::set<BrutePair> out;
  for (const auto& a : tree.nodes) {
    for (const auto& b : tree.nodes) {
      if (a.node_id >= b.node_id || !a.parent || a.parent != b.parent) continue;
      if (a.visits < min_visits || b.visits < min_visits) continue;
      const std::int64_t cross = a.correct * b.visits - b.correct * a.visits;
      if (10 * (cross < 0 ? -cross : cross) <= 7 * a.visits * b.visits) continue;
      out.insert(cross > 0 ? BrutePair{a.node_id, b.node_id} : BrutePair{b.node_id, a.node_id});
    }
  }
  return out;
}

/// Random pair whose every thought carries a unique "@T<n>@" token and
/// every expression a unique "@E<n>@" token.
inline PreferencePair sentinel_pair(std::mt19937_64& rng, int serial) {
  std::uniform_int_distribution<int> depth(0, 4);
  std::uniform_int_distribution<int> word(0, 9);
  const std::vector<std::string> words{"add", "the", "halve", "x", "=", "7", "total", "+", "so", "3"};
  int token = 0;
  auto text = [&](char kind) {
    std::string out;
    for (int i = 0; i < 3; ++i) out += words[static_cast<std::size_t>(word(rng))] + " ";
    out += "@" + std::string(1, kind) + std::to_string(serial) + "." + std::to_string(token++) + "@";
    return out;
  };
  PreferencePair p;
  p.problem_id = "sent-" + std::to_string(serial);
  p.problem_statement = "Problem " + std::to_string(serial) + ": find the total.";
  p.prefix.problem_id = p.problem_id;
  const int d = depth(rng);
  for (int i = 0; i < d; ++i) p.prefix = p.prefix.extended(text('T'), text('E'));
  p.chosen = {Step{text('T'), text('E'), d}};
  p.rejected = {Step{text('T'), text('E'), d}};
  p.value_chosen = 0.9;
  p.value_rejected = 0.1;
  p.gap = 0.8;
  p.tree_id = "tree-" + std::to_string(serial);
  return p;
}

/// Sentinel token in a text, e.g. "@T3.1@" from "add x @T3.1@".
inline std::string sentinel_of(const std::string& text) {
  const auto at = text.find('@');
  return text.substr(at, text.find('@', at + 1) - at + 1);
}

/// Empty when the pair's renders satisfy the purity rules, else a description.
inline std::string view_purity_violation(const PreferencePair& p) {
  const std::string& s = p.problem_statement;
  for (const auto* side : {&p.chosen, &p.rejected}) {
    const Step& step = side->front();
    const std::string mo = render(p.prefix, step, ViewKind::math_only, s);
    const std::string ssmo = render(p.prefix, step, ViewKind::single_step_math_only, s);
    const std::string nt = render(p.prefix, step, ViewKind::next_thought, s);
    if (mo.find("@T") != std::string::npos) return "thought sentinel in math_only";
    if (ssmo.find("@T") != std::string::npos) return "thought sentinel in single_step_math_only";
    if (mo.find(ssmo) == std::string::npos) return "single_step_math_only not inside math_only";
    if (nt.find(sentinel_of(step.thought)) == std::string::npos) return "next_thought lacks its thought";
    if (nt.find(sentinel_of(step.expression)) != std::string::npos) return "next_thought leaks its expression";
  }
  return "";
}

/// One-sided binomial sign-test p-value for `wins` successes out of `n`.
inline double sign_test_p(int wins, int n) {
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                  n * std::log(2.0));
  }
  return p;
}

}  // namespace testing
