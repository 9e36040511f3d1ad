#include "stepsearch/views.hpp"

#include <set>

#include "stepsearch/json_io.hpp"

namespace stepsearch {

using nlohmann::json;

std::string_view to_string(ViewKind view) {
  switch (view) {
    case ViewKind::full_context: return "full_context";
    case ViewKind::math_only: return "math_only";
    case ViewKind::single_step_math_only: return "single_step_math_only";
    case ViewKind::next_thought: return "next_thought";
  }
  return "full_context";
}

std::optional<ViewKind> view_from_string(std::string_view name) {
  if (name == "full_context" || name == "fc") return ViewKind::full_context;
  if (name == "math_only" || name == "mo") return ViewKind::math_only;
  if (name == "single_step_math_only" || name == "ssmo") return ViewKind::single_step_math_only;
  if (name == "next_thought" || name == "nt") return ViewKind::next_thought;
  return std::nullopt;
}

namespace {

void append_block(std::string& out, std::string_view marker, std::string_view body) {
  if (!out.empty()) out += '\n';
  out += marker;
  out += '\n';
  out += body;
}

void append_step_header(std::string& out, int index) {
  if (!out.empty()) out += '\n';
  out += "[STEP " + std::to_string(index) + "]";
}

}  // namespace

std::string render(const Trajectory& prefix, const Step& candidate, ViewKind view,
                   std::string_view statement, const RenderOptions& options) {
  if (candidate.index != prefix.depth()) {
    throw std::invalid_argument("candidate step " + std::to_string(candidate.index) +
                                " does not extend a prefix of depth " +
                                std::to_string(prefix.depth()));
  }
  const bool math_view = view == ViewKind::math_only || view == ViewKind::single_step_math_only;
  if (math_view && candidate.expression.empty() && !is_stop_thought(candidate.thought)) {
    throw EmptyRender("empty-render: non-terminal candidate step " +
                      std::to_string(candidate.index) + " has no expression");
  }

  std::string out;
  switch (view) {
    case ViewKind::single_step_math_only:
      if (options.ssmo_include_statement) {
        append_block(out, "[PROBLEM]", statement);
        append_block(out, "[MATH]", candidate.expression);
        return out;
      }
      return candidate.expression;

    case ViewKind::math_only:
      append_block(out, "[PROBLEM]", statement);
      for (const auto& step : prefix.steps) {
        append_step_header(out, step.index);
        append_block(out, "[MATH]", step.expression);
      }
      append_step_header(out, candidate.index);
      append_block(out, "[MATH]", candidate.expression);
      return out;

    case ViewKind::full_context:
    case ViewKind::next_thought:
      append_block(out, "[PROBLEM]", statement);
      for (const auto& step : prefix.steps) {
        append_step_header(out, step.index);
        append_block(out, "[THOUGHT]", step.thought);
        append_block(out, "[MATH]", step.expression);
      }
      append_step_header(out, candidate.index);
      append_block(out, "[THOUGHT]", candidate.thought);
      if (view == ViewKind::full_context) append_block(out, "[MATH]", candidate.expression);
      return out;
  }
  return out;
}

std::string render_state(const Trajectory& state, ViewKind view, std::string_view statement,
                         const RenderOptions& options) {
  if (state.steps.empty()) throw std::invalid_argument("render_state: state has no steps");
  Trajectory prefix;
  prefix.problem_id = state.problem_id;
  prefix.steps.assign(state.steps.begin(), state.steps.end() - 1);
  return render(prefix, state.steps.back(), view, statement, options);
}

json DatasetStats::to_json() const {
  return json{{"input_pairs", input_pairs},     {"count", count},
              {"mean_gap", mean_gap},           {"mean_prefix_depth", mean_prefix_depth},
              {"dedup_count", dedup_count},     {"render_errors", render_errors}};
}

namespace {

// Renders a (possibly multi-step) suffix: all but its last step join the prefix.
std::string render_suffix(const Trajectory& prefix, const std::vector<Step>& suffix, ViewKind view,
                          std::string_view statement, const RenderOptions& options) {
  Trajectory extended = prefix;
  for (std::size_t i = 0; i + 1 < suffix.size(); ++i) extended.steps.push_back(suffix[i]);
  return render(extended, suffix.back(), view, statement, options);
}

}  // namespace

Dataset build_dataset(const std::vector<PreferencePair>& pairs, ViewKind view,
                      const RenderOptions& options) {
  Dataset dataset;
  dataset.stats.input_pairs = pairs.size();
  std::set<std::pair<std::string, std::string>> seen;
  double gap_sum = 0.0;
  double depth_sum = 0.0;
  for (const auto& pair : pairs) {
    RenderedExample example;
    try {
      example.chosen_text =
          render_suffix(pair.prefix, pair.chosen, view, pair.problem_statement, options);
      example.rejected_text =
          render_suffix(pair.prefix, pair.rejected, view, pair.problem_statement, options);
    } catch (const EmptyRender&) {
      ++dataset.stats.render_errors;
      continue;
    }
    if (example.chosen_text == example.rejected_text ||
        !seen.emplace(example.chosen_text, example.rejected_text).second) {
      ++dataset.stats.dedup_count;
      continue;
    }
    example.view = view;
    example.problem_id = pair.problem_id;
    example.tree_id = pair.tree_id;
    example.gap = pair.gap;
    gap_sum += pair.gap;
    depth_sum += pair.prefix.depth();
    dataset.examples.push_back(std::move(example));
  }
  dataset.stats.count = dataset.examples.size();
  if (dataset.stats.count > 0) {
    dataset.stats.mean_gap = gap_sum / static_cast<double>(dataset.stats.count);
    dataset.stats.mean_prefix_depth = depth_sum / static_cast<double>(dataset.stats.count);
  }
  return dataset;
}

std::string dataset_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& e : dataset.examples) {
    out += json{{"view", to_string(e.view)},
                {"chosen_text", e.chosen_text},
                {"rejected_text", e.rejected_text},
                {"gap", e.gap},
                {"problem_id", e.problem_id},
                {"tree_id", e.tree_id}}
               .dump();
    out += '\n';
  }
  return out;
}

std::string pointwise_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& e : dataset.examples) {
    for (int label : {1, 0}) {
      out += json{{"view", to_string(e.view)},
                  {"text", label ? e.chosen_text : e.rejected_text},
                  {"label", label},
                  {"gap", e.gap},
                  {"problem_id", e.problem_id},
                  {"tree_id", e.tree_id}}
                 .dump();
      out += '\n';
    }
  }
  return out;
}

void write_dataset(const std::string& path, const Dataset& dataset, bool pointwise) {
  write_text_file(path, pointwise ? pointwise_jsonl(dataset) : dataset_jsonl(dataset));
  write_text_file(path + ".stats.json", dataset.stats.to_json().dump(2) + "\n");
}

}  // namespace stepsearch
