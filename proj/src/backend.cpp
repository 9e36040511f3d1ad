#include "stepsearch/backend.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace stepsearch {

namespace prompt_data {
extern const std::string_view kAgent;
extern const std::string_view kWorldGsm8k;
extern const std::string_view kWorldMath;
}  // namespace prompt_data

std::string_view default_agent_prompt() { return prompt_data::kAgent; }

std::string_view default_world_prompt(WorldStyle style) {
  return style == WorldStyle::math ? prompt_data::kWorldMath : prompt_data::kWorldGsm8k;
}

PromptConfig PromptConfig::for_style(WorldStyle style) {
  PromptConfig config;
  config.world_system = std::string(default_world_prompt(style));
  config.answer_spec.kind =
      style == WorldStyle::math ? AnswerSpec::Kind::boxed : AnswerSpec::Kind::the_answer_is;
  return config;
}

namespace {

void append_shots(std::vector<ChatMessage>& messages, const PromptConfig& prompts) {
  const auto shots = std::min<std::size_t>(static_cast<std::size_t>(std::max(prompts.n_shots, 0)),
                                           prompts.shot_examples.size());
  for (std::size_t i = 0; i < shots; ++i) {
    messages.insert(messages.end(), prompts.shot_examples[i].begin(),
                    prompts.shot_examples[i].end());
  }
}

}  // namespace

std::vector<ChatMessage> agent_messages(const PromptConfig& prompts, const Problem& problem,
                                        const Trajectory& state) {
  std::vector<ChatMessage> messages{{"system", prompts.agent_system}};
  append_shots(messages, prompts);
  messages.push_back({"user", problem.statement});
  for (const auto& step : state.steps) {
    messages.push_back({"assistant", step.thought});
    messages.push_back({"user", step.expression});
  }
  return messages;
}

std::vector<ChatMessage> world_messages(const PromptConfig& prompts, const Problem& problem,
                                        const Trajectory& state, std::string_view thought) {
  std::vector<ChatMessage> messages{{"system", prompts.world_system}};
  append_shots(messages, prompts);
  messages.push_back({"user", problem.statement});
  for (const auto& step : state.steps) {
    messages.push_back({"user", step.thought});
    messages.push_back({"assistant", step.expression});
  }
  messages.push_back({"user", std::string(thought)});
  return messages;
}

std::string normalize_thought(std::string_view thought) {
  std::string out;
  out.reserve(thought.size());
  bool pending_space = false;
  for (char c : thought) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> propose_thoughts(ChatBackend& backend, const Problem& problem,
                                          const Trajectory& state, int n,
                                          const CallOptions& options) {
  if (n < 1) throw std::invalid_argument("propose_thoughts: n must be >= 1");
  if (state.terminal) throw std::invalid_argument("propose_thoughts: state is terminal");
  std::vector<std::string> raw = backend.propose(problem, state, n, options);
  std::vector<std::string> kept;
  std::unordered_set<std::string> seen;
  for (auto& thought : raw) {
    std::string key = normalize_thought(thought);
    if (key.empty() || !seen.insert(key).second) continue;
    kept.push_back(std::move(thought));
    if (static_cast<int>(kept.size()) == n) break;
  }
  if (kept.empty()) {
    throw ExhaustedProposals("exhausted proposals for problem " + problem.id + " at depth " +
                             std::to_string(state.depth()));
  }
  return kept;
}

std::string execute_thought(ChatBackend& backend, const Problem& problem, const Trajectory& state,
                            std::string_view thought, const CallOptions& options,
                            const AnswerSpec& spec) {
  if (normalize_thought(thought).empty()) throw std::invalid_argument("execute_thought: empty thought");
  if (is_stop_thought(thought)) throw std::invalid_argument("execute_thought: stop phrase is not executable");
  std::string expression = backend.execute(problem, state, thought, options);
  if (is_answer_thought(thought) && !extract_answer(expression, spec)) {
    throw UnansweredFinalStep("unanswered final step for problem " + problem.id,
                              std::move(expression));
  }
  return expression;
}

}  // namespace stepsearch
