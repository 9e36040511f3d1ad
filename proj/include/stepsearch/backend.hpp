#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stepsearch/answer.hpp"
#include "stepsearch/types.hpp"

namespace stepsearch {

// ---------------------------------------------------------------------------
// Prompts

enum class WorldStyle { gsm8k, math };

/// Default system prompts, versioned and compiled in from resources/prompts.
std::string_view default_agent_prompt();
std::string_view default_world_prompt(WorldStyle style);
inline constexpr int kPromptVersion = 1;

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct PromptConfig {
  std::string agent_system{default_agent_prompt()};
  std::string world_system{default_world_prompt(WorldStyle::gsm8k)};
  int n_shots = 0;
  /// Few-shot transcripts, prepended verbatim after the system message.
  std::vector<std::vector<ChatMessage>> shot_examples;
  AnswerSpec answer_spec;

  static PromptConfig for_style(WorldStyle style);
};

/// Agent conversation: the problem, then one (assistant thought, user
/// expression) exchange per completed step.
std::vector<ChatMessage> agent_messages(const PromptConfig& prompts, const Problem& problem,
                                        const Trajectory& state);
/// World-model conversation: the problem, one (user thought, assistant
/// expression) exchange per step, and finally the thought to execute.
std::vector<ChatMessage> world_messages(const PromptConfig& prompts, const Problem& problem,
                                        const Trajectory& state, std::string_view thought);

// ---------------------------------------------------------------------------
// Backends

/// Sampling parameters passed through to a backend.
struct CallOptions {
  double temperature = 1.0;
  /// Per-call sampling seed; backends that cannot seed ignore it.
  std::uint64_t seed = 0;
};

/// Retryable failure talking to a model backend.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No usable thought survived normalization and filtering.
class ExhaustedProposals : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The agent (thought proposer) and world model (expression executor).
/// Implementations must be callable from several threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  virtual std::string name() const = 0;

  /// Raw candidate thoughts; at most n. Callers normalize via propose_thoughts().
  virtual std::vector<std::string> propose(const Problem& problem, const Trajectory& state, int n,
                                           const CallOptions& options) = 0;

  /// Exactly one expression for `thought` applied to `state`.
  virtual std::string execute(const Problem& problem, const Trajectory& state,
                              std::string_view thought, const CallOptions& options) = 0;
};

/// Case-folds and collapses whitespace; the key for duplicate detection.
std::string normalize_thought(std::string_view thought);

/// Asks the backend for up to n thoughts and returns the distinct non-empty
/// ones in proposal order. Throws ExhaustedProposals when none remain.
std::vector<std::string> propose_thoughts(ChatBackend& backend, const Problem& problem,
                                          const Trajectory& state, int n,
                                          const CallOptions& options);

/// Thrown by execute_thought() when an answer step produced no answer.
class UnansweredFinalStep : public std::runtime_error {
 public:
  UnansweredFinalStep(const std::string& what, std::string expression)
      : std::runtime_error(what), expression_(std::move(expression)) {}
  /// The world model's output that lacked the answer.
  const std::string& expression() const { return expression_; }

 private:
  std::string expression_;
};

/// Executes `thought` and enforces the final-step answer contract.
std::string execute_thought(ChatBackend& backend, const Problem& problem, const Trajectory& state,
                            std::string_view thought, const CallOptions& options,
                            const AnswerSpec& spec);

}  // namespace stepsearch
