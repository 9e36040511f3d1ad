#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepsearch/types.hpp"

namespace stepsearch {

/// The four reward-model input structures.
enum class ViewKind { full_context, math_only, single_step_math_only, next_thought };

inline constexpr ViewKind kAllViews[] = {ViewKind::full_context, ViewKind::math_only,
                                         ViewKind::single_step_math_only, ViewKind::next_thought};

std::string_view to_string(ViewKind view);
/// Accepts the full names and the short forms fc, mo, ssmo, nt.
std::optional<ViewKind> view_from_string(std::string_view name);

struct RenderOptions {
  /// Also prefix single_step_math_only renders with the problem statement.
  bool ssmo_include_statement = false;
};

class EmptyRender : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Renders `prefix` extended by `candidate` under `view`.
///
///   full_context           [PROBLEM] statement, then [STEP k] [THOUGHT] [MATH]
///                          blocks for every step including the candidate
///   math_only              [PROBLEM] statement, then [STEP k] [MATH] blocks
///   single_step_math_only  the candidate's expression, nothing else
///   next_thought           full_context of the prefix plus the candidate's
///                          [THOUGHT] block; its expression is left out
///
/// Throws EmptyRender for an empty expression on a non-terminal candidate in
/// the math views, std::invalid_argument if candidate does not extend prefix.
std::string render(const Trajectory& prefix, const Step& candidate, ViewKind view,
                   std::string_view statement, const RenderOptions& options = {});

/// Renders the newest step of a non-empty state (what a step scorer sees).
std::string render_state(const Trajectory& state, ViewKind view, std::string_view statement,
                         const RenderOptions& options = {});

struct RenderedExample {
  ViewKind view = ViewKind::full_context;
  std::string chosen_text;
  std::string rejected_text;
  std::string problem_id;
  std::string tree_id;
  double gap = 0.0;
};

struct DatasetStats {
  std::size_t input_pairs = 0;
  std::size_t count = 0;
  double mean_gap = 0.0;
  double mean_prefix_depth = 0.0;
  /// Pairs dropped because the render was a duplicate (identical chosen and
  /// rejected texts, or a repeat of an earlier example).
  std::size_t dedup_count = 0;
  /// Pairs dropped because a render was impossible (EmptyRender).
  std::size_t render_errors = 0;

  nlohmann::json to_json() const;
};

struct Dataset {
  std::vector<RenderedExample> examples;
  DatasetStats stats;
};

Dataset build_dataset(const std::vector<PreferencePair>& pairs, ViewKind view,
                      const RenderOptions& options = {});

/// Pair-level JSONL: {view, chosen_text, rejected_text, gap, problem_id, tree_id}.
std::string dataset_jsonl(const Dataset& dataset);
/// Pointwise JSONL for binary-label trainers: one {view, text, label, ...}
/// record per side of each example.
std::string pointwise_jsonl(const Dataset& dataset);

/// Writes `path` and `path + ".stats.json"`. I/O errors name the path.
void write_dataset(const std::string& path, const Dataset& dataset, bool pointwise = false);

}  // namespace stepsearch
