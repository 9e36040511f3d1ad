#include <doctest.h>

#include "stepsearch/json_io.hpp"
#include "support.hpp"

using namespace stepsearch;

namespace {

SearchTree full_tree(int branching, int levels) {
  Trajectory root;
  root.problem_id = "p";
  SearchTree tree = SearchTree::with_root("tree-1", root);
  tree.problem_id = "p";
  std::vector<NodeId> layer{0};
  for (int level = 0; level < levels; ++level) {
    std::vector<NodeId> next;
    for (NodeId parent : layer) {
      for (int k = 0; k < branching; ++k) {
        const auto& ps = tree.at(parent).state;
        const std::string thought = "step " + std::to_string(level) + "." + std::to_string(k);
        next.push_back(tree.add_child(parent, ps.extended(thought, "e = " + std::to_string(k)), thought));
      }
    }
    layer = std::move(next);
  }
  // Counts that satisfy conservation: every leaf had one rollout.
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    if (it->children.empty()) {
      it->rollouts = 1;
      it->visits = 1;
      it->correct = it->node_id % 2;
    } else {
      for (NodeId c : it->children) {
        it->visits += tree.at(c).visits;
        it->correct += tree.at(c).correct;
      }
    }
  }
  tree.run.completed_iterations = tree.root().visits;
  tree.run.seed = 7;
  tree.run.config = {{"n_iteration", 5}};
  return tree;
}

}  // namespace

TEST_CASE("a bare root round trips") {
  const SearchTree tree = full_tree(0, 0);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(deserialize_tree(serialize_tree(tree)) == tree);
}

TEST_CASE("a three-level tree with six children per node round trips") {
  const SearchTree tree = full_tree(6, 3);
  CHECK(tree.nodes.size() == 1 + 6 + 36 + 216);
  CHECK(validate_counts(tree).empty());
  const std::string bytes = serialize_tree(tree);
  const SearchTree back = deserialize_tree(bytes);
  CHECK(back == tree);
  CHECK(serialize_tree(back) == bytes);
}

TEST_CASE("tree files round trip through disk") {
  testing::TempDir dir;
  const SearchTree tree = full_tree(2, 2);
  write_tree_file(dir / "t.tree.jsonl", tree);
  CHECK(read_tree_file(dir / "t.tree.jsonl") == tree);
  CHECK_THROWS(read_tree_file(dir / "missing.tree.jsonl"));
}

TEST_CASE("a truncated file is a parse error") {
  const std::string bytes = serialize_tree(full_tree(3, 2));
  const auto cut = bytes.rfind('\n', bytes.size() - 2);
  const std::string truncated = bytes.substr(0, cut + 1);
  try {
    deserialize_tree(truncated);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
  CHECK_THROWS_AS(deserialize_tree(""), ParseError);
  // Cut mid-line: the broken JSON is reported inside the last line.
  const std::string mid = bytes.substr(0, cut + 10);
  try {
    deserialize_tree(mid);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() > cut);
    CHECK(e.byte_offset() <= mid.size());
  }
}

TEST_CASE("malformed bytes report the offending byte offset") {
  std::string bytes = serialize_tree(full_tree(2, 1));
  const auto colon = bytes.find(':', bytes.find('\n') + 1);
  bytes[colon] = '#';
  try {
    deserialize_tree(bytes);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() == colon);
  }
}

TEST_CASE("cycles and broken links are rejected") {
  SearchTree tree = full_tree(2, 2);
  SearchTree cyclic = tree;
  cyclic.at(1).children.push_back(1);
  CHECK_THROWS_AS(check_structure(cyclic), TreeError);
  CHECK_THROWS_AS(serialize_tree(cyclic), TreeError);

  SearchTree two_roots = tree;
  two_roots.at(2).parent.reset();
  CHECK_THROWS_AS(check_structure(two_roots), TreeError);

  SearchTree orphan = tree;
  orphan.root().children.pop_back();
  CHECK_THROWS_AS(check_structure(orphan), TreeError);
}

TEST_CASE("count validation finds conservation and bound violations") {
  SearchTree tree = full_tree(2, 2);
  REQUIRE(validate_counts(tree).empty());

  SearchTree extra = tree;
  extra.at(1).visits += 1;
  CHECK_FALSE(validate_counts(extra).empty());

  SearchTree bounds = tree;
  bounds.at(3).correct = bounds.at(3).visits + 1;
  CHECK_FALSE(validate_counts(bounds).empty());

  SearchTree iterations = tree;
  iterations.run.completed_iterations += 1;
  const auto problems = validate_counts(iterations);
  REQUIRE(problems.size() == 1);
  CHECK(problems.front().find("completed iterations") != std::string::npos);
}
