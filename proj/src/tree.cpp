#include "stepsearch/tree.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include "stepsearch/json_io.hpp"

namespace stepsearch {

using nlohmann::json;

NodeId SearchTree::add_child(NodeId parent, Trajectory state, std::string action) {
  SearchNode child;
  child.node_id = static_cast<NodeId>(nodes.size());
  child.state = std::move(state);
  child.parent = parent;
  child.action_taken = std::move(action);
  nodes.push_back(std::move(child));
  at(parent).children.push_back(nodes.back().node_id);
  return nodes.back().node_id;
}

SearchTree SearchTree::with_root(std::string tree_id, Trajectory root_state) {
  SearchTree tree;
  tree.tree_id = std::move(tree_id);
  tree.problem_id = root_state.problem_id;
  SearchNode root;
  root.state = std::move(root_state);
  tree.nodes.push_back(std::move(root));
  return tree;
}

void check_structure(const SearchTree& tree) {
  const auto n = static_cast<NodeId>(tree.nodes.size());
  if (n == 0) throw TreeError("tree has no nodes");
  for (NodeId i = 0; i < n; ++i) {
    const auto& node = tree.at(i);
    if (node.node_id != i) {
      throw TreeError("node at position " + std::to_string(i) + " has id " +
                      std::to_string(node.node_id));
    }
    if (i == 0) {
      if (node.parent) throw TreeError("root has a parent");
      continue;
    }
    if (!node.parent) throw TreeError("second root: node " + std::to_string(i));
    if (*node.parent < 0 || *node.parent >= n) {
      throw TreeError("node " + std::to_string(i) + " has dangling parent");
    }
    const auto& siblings = tree.at(*node.parent).children;
    if (std::count(siblings.begin(), siblings.end(), i) != 1) {
      throw TreeError("node " + std::to_string(i) + " is not listed exactly once by its parent");
    }
  }
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::deque<NodeId> queue{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const auto& node = tree.at(queue.front());
    queue.pop_front();
    for (NodeId c : node.children) {
      if (c < 0 || c >= n) throw TreeError("dangling child " + std::to_string(c));
      if (tree.at(c).parent != node.node_id) {
        throw TreeError("child " + std::to_string(c) + " disagrees about its parent");
      }
      if (seen[static_cast<std::size_t>(c)]) throw TreeError("cycle through node " + std::to_string(c));
      seen[static_cast<std::size_t>(c)] = true;
      ++reached;
      queue.push_back(c);
    }
  }
  if (reached != tree.nodes.size()) throw TreeError("tree contains nodes unreachable from root (cycle)");
}

std::vector<std::string> validate_counts(const SearchTree& tree) {
  std::vector<std::string> problems;
  try {
    check_structure(tree);
  } catch (const TreeError& e) {
    problems.emplace_back(e.what());
    return problems;
  }
  for (const auto& node : tree.nodes) {
    const std::string id = "node " + std::to_string(node.node_id);
    if (node.visits < 0 || node.correct < 0 || node.correct > node.visits) {
      problems.push_back(id + ": bounds violated (correct " + std::to_string(node.correct) +
                         ", visits " + std::to_string(node.visits) + ")");
    }
    std::int64_t child_visits = 0;
    for (NodeId c : node.children) child_visits += tree.at(c).visits;
    if (node.visits != child_visits + node.rollouts) {
      problems.push_back(id + ": visits " + std::to_string(node.visits) + " != child visits " +
                         std::to_string(child_visits) + " + rollouts " +
                         std::to_string(node.rollouts));
    }
  }
  if (tree.root().visits != tree.run.completed_iterations) {
    problems.push_back("root visits " + std::to_string(tree.root().visits) +
                       " != completed iterations " + std::to_string(tree.run.completed_iterations));
  }
  return problems;
}

namespace {

std::string_view status_name(RunStatus s) { return s == RunStatus::aborted ? "aborted" : "complete"; }

RunStatus status_from(const std::string& name) {
  if (name == "complete") return RunStatus::complete;
  if (name == "aborted") return RunStatus::aborted;
  throw std::invalid_argument("unknown status '" + name + "'");
}

}  // namespace

std::string serialize_tree(const SearchTree& tree) {
  check_structure(tree);
  json header{{"schema_version", kSchemaVersion},
              {"record", "header"},
              {"tree_id", tree.tree_id},
              {"problem_id", tree.problem_id},
              {"status", status_name(tree.run.status)},
              {"seed", tree.run.seed},
              {"config", tree.run.config},
              {"completed_iterations", tree.run.completed_iterations},
              {"failed_iterations", tree.run.failed_iterations},
              {"flagged_rollouts", tree.run.flagged_rollouts},
              {"node_count", tree.nodes.size()}};
  std::string out = header.dump();
  out += '\n';
  for (const auto& node : tree.nodes) {
    out += json(node).dump();
    out += '\n';
  }
  return out;
}

SearchTree deserialize_tree(std::string_view bytes) {
  const auto lines = split_lines(bytes);
  if (lines.empty()) throw ParseError("empty tree file", 0);

  auto parse_line = [](const Line& line) {
    try {
      return json::parse(line.text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(),
                       line.offset + (e.byte > 0 ? e.byte - 1 : 0));
    }
  };

  SearchTree tree;
  std::size_t expected_nodes = 0;
  try {
    json header = parse_line(lines.front());
    if (header.at("schema_version").get<int>() != kSchemaVersion) {
      throw ParseError("unsupported schema_version", lines.front().offset);
    }
    if (header.at("record").get<std::string>() != "header") {
      throw ParseError("first line is not a header", lines.front().offset);
    }
    tree.tree_id = header.at("tree_id").get<std::string>();
    tree.problem_id = header.at("problem_id").get<std::string>();
    tree.run.status = status_from(header.at("status").get<std::string>());
    tree.run.seed = header.at("seed").get<std::uint64_t>();
    tree.run.config = header.at("config");
    tree.run.completed_iterations = header.at("completed_iterations").get<std::int64_t>();
    tree.run.failed_iterations = header.at("failed_iterations").get<std::int64_t>();
    tree.run.flagged_rollouts = header.value("flagged_rollouts", std::int64_t{0});
    expected_nodes = header.at("node_count").get<std::size_t>();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), lines.front().offset);
  }

  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].text.empty()) continue;
    json node = parse_line(lines[i]);
    try {
      tree.nodes.push_back(node.get<SearchNode>());
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad node record: ") + e.what(), lines[i].offset);
    }
  }
  if (tree.nodes.size() != expected_nodes) {
    throw ParseError("truncated tree: expected " + std::to_string(expected_nodes) +
                         " nodes, found " + std::to_string(tree.nodes.size()),
                     bytes.size());
  }
  check_structure(tree);
  return tree;
}

void write_tree_file(const std::string& path, const SearchTree& tree) {
  write_text_file(path, serialize_tree(tree));
}

SearchTree read_tree_file(const std::string& path) { return deserialize_tree(read_text_file(path)); }

}  // namespace stepsearch
