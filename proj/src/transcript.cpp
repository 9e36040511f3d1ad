#include "stepsearch/transcript.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "stepsearch/hashing.hpp"
#include "stepsearch/json_io.hpp"

namespace stepsearch {

using nlohmann::json;

std::string_view to_string(CallKind kind) {
  return kind == CallKind::propose ? "propose" : "execute";
}

namespace {

CallKind call_kind_from(const std::string& name) {
  if (name == "propose") return CallKind::propose;
  if (name == "execute") return CallKind::execute;
  throw std::invalid_argument("unknown call kind '" + name + "'");
}

json messages_json(const std::vector<ChatMessage>& messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"role", m.role}, {"content", m.content}});
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string ReplayKey::describe() const {
  return std::string(to_string(kind)) + "/" + hex64(state_hash) + "/" + std::to_string(ordinal);
}

std::uint64_t request_hash(CallKind kind, std::string_view problem_id,
                           const std::vector<ChatMessage>& messages, int n, double temperature) {
  std::uint64_t h = fnv1a(to_string(kind));
  h = fnv1a(problem_id, hash_combine(h, problem_id.size()));
  for (const auto& m : messages) {
    h = fnv1a(m.role, hash_combine(h, m.role.size()));
    h = fnv1a(m.content, hash_combine(h, m.content.size()));
  }
  h = hash_combine(h, static_cast<std::uint64_t>(n));
  return fnv1a(json(temperature).dump(), h);
}

TranscriptLog::TranscriptLog(std::string path, bool append) : path_(std::move(path)) {
  std::ofstream out(path_, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open transcript log: " + path_);
}

void TranscriptLog::append(const json& entry) {
  const std::string line = entry.dump() + "\n";
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << line;
  if (!out) throw std::runtime_error("cannot append to transcript log: " + path_);
}

std::int64_t OrdinalCounter::next(CallKind kind, std::uint64_t hash) {
  std::lock_guard lock(mutex_);
  return counts_[{kind, hash}]++;
}

// ---------------------------------------------------------------------------

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner, PromptConfig prompts,
                                   std::shared_ptr<TranscriptLog> log)
    : inner_(std::move(inner)), prompts_(std::move(prompts)), log_(std::move(log)) {}

std::vector<std::string> RecordingBackend::propose(const Problem& problem, const Trajectory& state,
                                                   int n, const CallOptions& options) {
  const auto messages = agent_messages(prompts_, problem, state);
  const auto hash = request_hash(CallKind::propose, problem.id, messages, n, options.temperature);
  auto thoughts = inner_->propose(problem, state, n, options);
  const auto ordinal = ordinals_.next(CallKind::propose, hash);
  log_->append({{"schema_version", kSchemaVersion},
                {"kind", "propose"},
                {"key", hex64(hash)},
                {"ordinal", ordinal},
                {"problem_id", problem.id},
                {"request",
                 {{"messages", messages_json(messages)},
                  {"n", n},
                  {"temperature", options.temperature},
                  {"seed", options.seed}}},
                {"response", thoughts},
                {"timestamp", utc_timestamp()}});
  return thoughts;
}

std::string RecordingBackend::execute(const Problem& problem, const Trajectory& state,
                                      std::string_view thought, const CallOptions& options) {
  const auto messages = world_messages(prompts_, problem, state, thought);
  const auto hash = request_hash(CallKind::execute, problem.id, messages, 1, options.temperature);
  auto expression = inner_->execute(problem, state, thought, options);
  const auto ordinal = ordinals_.next(CallKind::execute, hash);
  log_->append({{"schema_version", kSchemaVersion},
                {"kind", "execute"},
                {"key", hex64(hash)},
                {"ordinal", ordinal},
                {"problem_id", problem.id},
                {"request",
                 {{"messages", messages_json(messages)},
                  {"n", 1},
                  {"temperature", options.temperature},
                  {"seed", options.seed}}},
                {"response", expression},
                {"timestamp", utc_timestamp()}});
  return expression;
}

// ---------------------------------------------------------------------------

ReplayBackend::ReplayBackend(PromptConfig prompts, const std::string& transcript_path)
    : prompts_(std::move(prompts)) {
  load(read_text_file(transcript_path));
}

std::unique_ptr<ReplayBackend> ReplayBackend::from_bytes(PromptConfig prompts,
                                                        std::string_view transcript_bytes) {
  std::unique_ptr<ReplayBackend> backend(new ReplayBackend(std::move(prompts)));
  backend->load(transcript_bytes);
  return backend;
}

void ReplayBackend::load(std::string_view bytes) {
  for (const auto& line : split_lines(bytes)) {
    if (line.text.empty()) continue;
    try {
      json entry = json::parse(line.text);
      if (entry.at("schema_version").get<int>() != kSchemaVersion) {
        throw std::invalid_argument("unsupported schema_version");
      }
      ReplayKey key{call_kind_from(entry.at("kind").get<std::string>()),
                    std::stoull(entry.at("key").get<std::string>(), nullptr, 16),
                    entry.at("ordinal").get<std::int64_t>()};
      entries_[key] = entry.at("response");
    } catch (const std::exception& e) {
      throw std::runtime_error("transcript byte " + std::to_string(line.offset) + ": " + e.what());
    }
  }
}

const json& ReplayBackend::lookup(CallKind kind, std::uint64_t hash) {
  const ReplayKey key{kind, hash, ordinals_.next(kind, hash)};
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ReplayMiss(key);
  return it->second;
}

std::vector<std::string> ReplayBackend::propose(const Problem& problem, const Trajectory& state,
                                                int n, const CallOptions& options) {
  const auto messages = agent_messages(prompts_, problem, state);
  const auto hash = request_hash(CallKind::propose, problem.id, messages, n, options.temperature);
  return lookup(CallKind::propose, hash)
      .get<std::vector<std::string>>();
}

std::string ReplayBackend::execute(const Problem& problem, const Trajectory& state,
                                   std::string_view thought, const CallOptions& options) {
  const auto messages = world_messages(prompts_, problem, state, thought);
  const auto hash = request_hash(CallKind::execute, problem.id, messages, 1, options.temperature);
  return lookup(CallKind::execute, hash)
      .get<std::string>();
}

}  // namespace stepsearch
