#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepsearch/answer.hpp"
#include "stepsearch/backend.hpp"
#include "stepsearch/http.hpp"
#include "stepsearch/synthetic.hpp"
#include "stepsearch/views.hpp"

namespace stepsearch {

/// Retryable scorer failure (unreachable service, bad status).
class ScorerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The scorer broke the contract: wrong number of scores or non-finite values.
class ScorerProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Step-level reward model. score() must return one finite value per text,
/// in order, and must be safe to call from several threads.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  /// Rendering the scorer consumes.
  virtual ViewKind view() const = 0;
  /// Largest number of texts per score() call.
  virtual std::size_t batch_limit() const = 0;
  virtual std::vector<double> score(const std::vector<std::string>& texts) = 0;
};

/// Exact V* (or Q* for next_thought renders) for synthetic problems, read
/// back from the rendered text. Texts of unknown problems score 0.
class OracleScorer final : public Scorer {
 public:
  OracleScorer(const std::vector<SyntheticProblem>& problems, ViewKind view = ViewKind::full_context,
               std::size_t batch_limit = 64);
  std::string name() const override { return "oracle"; }
  ViewKind view() const override { return view_; }
  std::size_t batch_limit() const override { return batch_limit_; }
  std::vector<double> score(const std::vector<std::string>& texts) override;
  double score_one(const std::string& text) const;

 private:
  struct Entry {
    SyntheticProblem problem;
    ValueTable values;
  };
  ViewKind view_;
  std::size_t batch_limit_;
  std::unordered_map<std::string, Entry> by_statement_;
};

/// Oracle value plus Gaussian noise. The noise is a pure function of
/// (seed, text), so identical texts always get identical scores.
class NoisyOracleScorer final : public Scorer {
 public:
  NoisyOracleScorer(const std::vector<SyntheticProblem>& problems, double sigma, std::uint64_t seed,
                    ViewKind view = ViewKind::full_context);
  std::string name() const override { return "noisy-oracle"; }
  ViewKind view() const override { return oracle_.view(); }
  std::size_t batch_limit() const override { return oracle_.batch_limit(); }
  std::vector<double> score(const std::vector<std::string>& texts) override;

 private:
  OracleScorer oracle_;
  double sigma_;
  std::uint64_t seed_;
};

/// Uniform [0, 1) score hashed from (seed, text).
class RandomScorer final : public Scorer {
 public:
  explicit RandomScorer(std::uint64_t seed, ViewKind view = ViewKind::full_context)
      : seed_(seed), view_(view) {}
  std::string name() const override { return "random"; }
  ViewKind view() const override { return view_; }
  std::size_t batch_limit() const override { return 256; }
  std::vector<double> score(const std::vector<std::string>& texts) override;

 private:
  std::uint64_t seed_;
  ViewKind view_;
};

/// Remote reward model: POST {base}/score {"texts": [...]} -> {"scores": [...]},
/// GET {base}/healthz answers 200 when ready.
class HttpScorer final : public Scorer {
 public:
  HttpScorer(std::string base_url, ViewKind view, std::size_t batch_limit = 32,
             RetryPolicy retry = {});
  std::string name() const override { return "http(" + base_url_ + ")"; }
  ViewKind view() const override { return view_; }
  std::size_t batch_limit() const override { return batch_limit_; }
  std::vector<double> score(const std::vector<std::string>& texts) override;
  /// Polls /healthz up to retry.attempts times; false if it never answers 200.
  bool wait_healthy() const;

 private:
  std::string base_url_;
  HttpEndpoint endpoint_;
  ViewKind view_;
  std::size_t batch_limit_;
  RetryPolicy retry_;
};

/// Scores pre-rendered texts in batches of at most scorer.batch_limit().
std::vector<double> score_texts(const std::vector<std::string>& texts, Scorer& scorer);

/// Renders each state's newest step under scorer.view() and scores it.
std::vector<double> score_states(const std::vector<Trajectory>& states, Scorer& scorer,
                                 std::string_view statement, const RenderOptions& options = {});

/// Beam search settings. B = 1 is greedy search.
struct BeamConfig {
  int beam_size = 1;
  int candidate_count = 5;
  int max_depth = 8;
  double agent_temperature = 0.7;
  double world_temperature = 0.0;
  std::uint64_t rng_seed = 0;
  RenderOptions render;

  void validate() const;
  nlohmann::json to_json() const;
};

enum class SearchStatus { ok, degraded, exhausted };
std::string_view to_string(SearchStatus status);

struct TraceCandidate {
  /// Position of the expanded state in the level's beam.
  int parent = 0;
  std::string thought;
  /// Empty for candidates never executed (unkept next_thought candidates).
  std::string expression;
  double score = 0.0;
  bool kept = false;
};

struct TraceLevel {
  int level = 0;
  std::vector<TraceCandidate> candidates;
};

struct SearchResult {
  std::string problem_id;
  SearchStatus status = SearchStatus::ok;
  std::optional<Trajectory> best;
  std::optional<double> best_score;
  std::vector<TraceLevel> trace;
  std::string message;
};

/// Beam search with a step scorer. Each level expands every live state into
/// up to c thoughts, scores the resulting states (or, for next_thought
/// scorers, the thoughts before execution) and keeps the top B, ties going
/// to the earlier candidate. Kept terminal states leave the beam as
/// finished candidates. Returns the best finished state by score, ties to
/// the deeper one, else the best state kept at the depth cap.
SearchResult beam_search(const Problem& problem, ChatBackend& backend, Scorer& scorer,
                         const BeamConfig& cfg, const AnswerSpec& spec = {});

/// One JSON line per level: {problem_id, level, candidates: [...]}.
std::string trace_jsonl(const SearchResult& result);

struct ProblemReport {
  std::string problem_id;
  std::string status;
  bool correct = false;
  int steps = 0;
  std::optional<std::string> answer;
  std::optional<double> score;
  std::string error;
};

struct EvalReport {
  std::vector<ProblemReport> problems;
  std::vector<SearchResult> results;
  double accuracy = 0.0;
  /// Mean reasoning steps over correctly solved problems.
  std::optional<double> mean_steps_to_correct;
  int failures = 0;

  nlohmann::json to_json() const;
};

using BackendProvider = std::function<ChatBackend&(const Problem&)>;

/// Runs beam_search on every problem; a failing problem is recorded and the
/// rest continue. `workers` > 1 searches problems in parallel.
EvalReport evaluate(const std::vector<Problem>& corpus, const BackendProvider& backend_for,
                    Scorer& scorer, const BeamConfig& cfg, const AnswerSpec& spec = {},
                    int workers = 1);

}  // namespace stepsearch
