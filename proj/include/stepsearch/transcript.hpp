#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepsearch/backend.hpp"

namespace stepsearch {

enum class CallKind { propose, execute };

std::string_view to_string(CallKind kind);

/// Replay key: hash of the full request (problem id, messages, n,
/// temperature), the call kind, and how many identical requests came before it.
struct ReplayKey {
  CallKind kind = CallKind::propose;
  std::uint64_t state_hash = 0;
  std::int64_t ordinal = 0;

  std::string describe() const;
  auto operator<=>(const ReplayKey&) const = default;
};

std::uint64_t request_hash(CallKind kind, std::string_view problem_id,
                           const std::vector<ChatMessage>& messages, int n, double temperature);

class ReplayMiss : public std::runtime_error {
 public:
  explicit ReplayMiss(const ReplayKey& key)
      : std::runtime_error("replay miss: no recorded entry for " + key.describe()), key_(key) {}
  const ReplayKey& key() const { return key_; }

 private:
  ReplayKey key_;
};

/// Append-only, thread-safe line-delimited JSON transcript.
class TranscriptLog {
 public:
  /// Truncates `path` unless `append` is set.
  explicit TranscriptLog(std::string path, bool append = false);

  void append(const nlohmann::json& entry);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mutex_;
};

/// Hands out per-key ordinals; shared by recorder and replayer.
class OrdinalCounter {
 public:
  std::int64_t next(CallKind kind, std::uint64_t hash);

 private:
  std::mutex mutex_;
  std::map<std::pair<CallKind, std::uint64_t>, std::int64_t> counts_;
};

/// Forwards to an inner backend and logs every call with its inputs,
/// outputs, temperature, seed and a wall-clock timestamp. The API key of a
/// remote backend never reaches the log.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(std::shared_ptr<ChatBackend> inner, PromptConfig prompts,
                   std::shared_ptr<TranscriptLog> log);

  std::string name() const override { return "recording(" + inner_->name() + ")"; }
  std::vector<std::string> propose(const Problem& problem, const Trajectory& state, int n,
                                    const CallOptions& options) override;
  std::string execute(const Problem& problem, const Trajectory& state, std::string_view thought,
                      const CallOptions& options) override;

 private:
  std::shared_ptr<ChatBackend> inner_;
  PromptConfig prompts_;
  std::shared_ptr<TranscriptLog> log_;
  OrdinalCounter ordinals_;
};

/// Reproduces recorded outputs by key; any unrecorded request is a ReplayMiss.
class ReplayBackend final : public ChatBackend {
 public:
  ReplayBackend(PromptConfig prompts, const std::string& transcript_path);
  static std::unique_ptr<ReplayBackend> from_bytes(PromptConfig prompts,
                                                   std::string_view transcript_bytes);

  std::string name() const override { return "replay"; }
  std::vector<std::string> propose(const Problem& problem, const Trajectory& state, int n,
                                    const CallOptions& options) override;
  std::string execute(const Problem& problem, const Trajectory& state, std::string_view thought,
                      const CallOptions& options) override;

  std::size_t size() const { return entries_.size(); }

 private:
  explicit ReplayBackend(PromptConfig prompts) : prompts_(std::move(prompts)) {}
  void load(std::string_view bytes);
  const nlohmann::json& lookup(CallKind kind, std::uint64_t hash);

  PromptConfig prompts_;
  std::map<ReplayKey, nlohmann::json> entries_;
  OrdinalCounter ordinals_;
};

}  // namespace stepsearch
