#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepsearch/types.hpp"

namespace stepsearch {

enum class RunStatus { complete, aborted };

/// Run metadata stored in the header line of a tree file.
struct RunInfo {
  RunStatus status = RunStatus::complete;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::int64_t completed_iterations = 0;
  std::int64_t failed_iterations = 0;
  std::int64_t flagged_rollouts = 0;

  bool operator==(const RunInfo&) const = default;
};

/// MCTS tree stored as a dense node arena; node_id equals the index.
struct SearchTree {
  std::string tree_id;
  std::string problem_id;
  std::vector<SearchNode> nodes;
  RunInfo run;

  SearchNode& root() { return nodes.front(); }
  const SearchNode& root() const { return nodes.front(); }
  SearchNode& at(NodeId id) { return nodes.at(static_cast<std::size_t>(id)); }
  const SearchNode& at(NodeId id) const { return nodes.at(static_cast<std::size_t>(id)); }

  /// Appends a child of `parent` and returns its id.
  NodeId add_child(NodeId parent, Trajectory state, std::string action);

  static SearchTree with_root(std::string tree_id, Trajectory root_state);

  bool operator==(const SearchTree&) const = default;
};

class TreeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::size_t byte_offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Structural checks: single root, one parent per node, parent/child links
/// agree, no cycles, every node reachable. Throws TreeError.
void check_structure(const SearchTree& tree);

/// Count checks on top of check_structure: 0 <= correct <= visits and
/// visits == sum(child visits) + direct rollouts at every node.
/// Returns human-readable violations (empty when the tree is sound).
std::vector<std::string> validate_counts(const SearchTree& tree);

std::string serialize_tree(const SearchTree& tree);
SearchTree deserialize_tree(std::string_view bytes);

void write_tree_file(const std::string& path, const SearchTree& tree);
SearchTree read_tree_file(const std::string& path);

}  // namespace stepsearch
