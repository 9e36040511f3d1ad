#include "stepsearch/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <httplib.h>

#include "stepsearch/hashing.hpp"

namespace stepsearch {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Scorers

namespace {

struct RenderedStep {
  std::optional<std::string> thought;
  std::optional<std::string> math;
};

struct ParsedRender {
  std::string statement;
  std::vector<RenderedStep> steps;
};

bool is_step_marker(std::string_view line) {
  return line.size() > 7 && line.substr(0, 6) == "[STEP " && line.back() == ']';
}

// Inverse of the full_context / math_only / next_thought renderers.
std::optional<ParsedRender> parse_render(const std::string& text) {
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (true) {
    const auto nl = rest.find('\n');
    lines.push_back(rest.substr(0, nl));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  if (lines.empty() || lines.front() != "[PROBLEM]") return std::nullopt;

  ParsedRender parsed;
  std::string* block = &parsed.statement;
  bool first_line = true;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (is_step_marker(line)) {
      parsed.steps.emplace_back();
      block = nullptr;
      continue;
    }
    if ((line == "[THOUGHT]" || line == "[MATH]") && !parsed.steps.empty()) {
      auto& field = line == "[THOUGHT]" ? parsed.steps.back().thought : parsed.steps.back().math;
      field.emplace();
      block = &*field;
      first_line = true;
      continue;
    }
    if (block == nullptr) return std::nullopt;
    if (!first_line) *block += '\n';
    *block += line;
    first_line = false;
  }
  return parsed;
}

}  // namespace

OracleScorer::OracleScorer(const std::vector<SyntheticProblem>& problems, ViewKind view,
                           std::size_t batch_limit)
    : view_(view), batch_limit_(std::max<std::size_t>(batch_limit, 1)) {
  if (view == ViewKind::single_step_math_only) {
    throw ConfigError("oracle scorer cannot read single_step_math_only renders");
  }
  for (const auto& p : problems) {
    const std::string statement = p.statement();
    if (by_statement_.count(statement) == 0) {
      by_statement_.emplace(statement, Entry{p, brute_force_values(p)});
    }
  }
}

double OracleScorer::score_one(const std::string& text) const {
  const auto parsed = parse_render(text);
  if (!parsed || parsed->steps.empty()) return 0.0;
  const auto it = by_statement_.find(parsed->statement);
  if (it == by_statement_.end()) return 0.0;
  const SyntheticProblem& problem = it->second.problem;
  const ValueTable& values = it->second.values;

  Trajectory state;
  for (const auto& step : parsed->steps) {
    if (!step.math) break;
    state.steps.push_back(Step{step.thought.value_or(""), *step.math, state.depth()});
  }
  const SyntheticState s = synthetic_state(problem, state);
  const RenderedStep& last = parsed->steps.back();

  if (!last.math) {
    // next_thought render: value of taking the candidate thought.
    const std::string thought = last.thought.value_or("");
    if (is_stop_thought(thought)) return s.value == problem.target ? 1.0 : 0.0;
    const auto op = op_from_thought(thought);
    if (!op) return 0.0;
    try {
      const ValueTable::Entry* next = values.find({op->apply(s.value), s.depth + 1});
      return next ? next->v : 0.0;
    } catch (const std::overflow_error&) {
      return 0.0;
    }
  }
  const bool terminal = last.math->empty() || (last.thought && is_stop_thought(*last.thought));
  if (terminal) return s.value == problem.target ? 1.0 : 0.0;
  const ValueTable::Entry* entry = values.find(s);
  return entry ? entry->v : 0.0;
}

std::vector<double> OracleScorer::score(const std::vector<std::string>& texts) {
  std::vector<double> scores;
  scores.reserve(texts.size());
  for (const auto& t : texts) scores.push_back(score_one(t));
  return scores;
}

NoisyOracleScorer::NoisyOracleScorer(const std::vector<SyntheticProblem>& problems, double sigma,
                                     std::uint64_t seed, ViewKind view)
    : oracle_(problems, view), sigma_(sigma), seed_(seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
}

std::vector<double> NoisyOracleScorer::score(const std::vector<std::string>& texts) {
  std::vector<double> scores;
  scores.reserve(texts.size());
  for (const auto& t : texts) {
    std::mt19937_64 rng(hash_combine(seed_, fnv1a(t)));
    std::normal_distribution<double> noise(0.0, sigma_);
    scores.push_back(oracle_.score_one(t) + (sigma_ > 0.0 ? noise(rng) : 0.0));
  }
  return scores;
}

std::vector<double> RandomScorer::score(const std::vector<std::string>& texts) {
  std::vector<double> scores;
  scores.reserve(texts.size());
  for (const auto& t : texts) {
    const std::uint64_t h = hash_combine(seed_, fnv1a(t));
    scores.push_back(static_cast<double>(h >> 11) * 0x1.0p-53);
  }
  return scores;
}

HttpScorer::HttpScorer(std::string base_url, ViewKind view, std::size_t batch_limit,
                       RetryPolicy retry)
    : base_url_(std::move(base_url)),
      endpoint_(HttpEndpoint::parse(base_url_)),
      view_(view),
      batch_limit_(std::max<std::size_t>(batch_limit, 1)),
      retry_(retry) {}

std::vector<double> HttpScorer::score(const std::vector<std::string>& texts) {
  json response;
  try {
    response = post_json(endpoint_, "/score", json{{"texts", texts}}, retry_);
  } catch (const TransportError& e) {
    throw ScorerError(e.what());
  }
  const auto scores = response.find("scores");
  if (scores == response.end() || !scores->is_array()) {
    throw ScorerProtocolError("scorer response has no \"scores\" array");
  }
  std::vector<double> out;
  for (const auto& s : *scores) {
    if (!s.is_number()) throw ScorerProtocolError("scorer returned a non-numeric score");
    out.push_back(s.get<double>());
  }
  return out;
}

bool HttpScorer::wait_healthy() const {
  auto backoff = retry_.initial_backoff;
  const int attempts = std::max(retry_.attempts, 1);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(endpoint_.origin);
    client.set_connection_timeout(std::chrono::seconds(5));
    client.set_read_timeout(std::chrono::seconds(5));
    auto result = client.Get(endpoint_.prefix + "/healthz");
    if (result && result->status == 200) return true;
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  return false;
}

std::vector<double> score_texts(const std::vector<std::string>& texts, Scorer& scorer) {
  const std::size_t limit = std::max<std::size_t>(scorer.batch_limit(), 1);
  std::vector<double> scores;
  scores.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += limit) {
    const std::size_t end = std::min(texts.size(), begin + limit);
    const std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                         texts.begin() + static_cast<std::ptrdiff_t>(end));
    const std::vector<double> got = scorer.score(batch);
    if (got.size() != batch.size()) {
      throw ScorerProtocolError("scorer " + scorer.name() + " returned " +
                                std::to_string(got.size()) + " scores for " +
                                std::to_string(batch.size()) + " texts");
    }
    for (double s : got) {
      if (!std::isfinite(s)) throw ScorerProtocolError("scorer " + scorer.name() + " returned a non-finite score");
      scores.push_back(s);
    }
  }
  return scores;
}

std::vector<double> score_states(const std::vector<Trajectory>& states, Scorer& scorer,
                                 std::string_view statement, const RenderOptions& options) {
  if (states.empty()) throw std::invalid_argument("score_states: no states");
  std::vector<std::string> texts;
  texts.reserve(states.size());
  for (const auto& s : states) texts.push_back(render_state(s, scorer.view(), statement, options));
  return score_texts(texts, scorer);
}

// ---------------------------------------------------------------------------
// Beam search

void BeamConfig::validate() const {
  if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
  if (candidate_count < 1) throw ConfigError("candidate_count must be >= 1");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
}

json BeamConfig::to_json() const {
  return json{{"beam_size", beam_size},
              {"candidate_count", candidate_count},
              {"max_depth", max_depth},
              {"agent_temperature", agent_temperature},
              {"world_temperature", world_temperature},
              {"rng_seed", rng_seed},
              {"ssmo_include_statement", render.ssmo_include_statement}};
}

std::string_view to_string(SearchStatus status) {
  switch (status) {
    case SearchStatus::ok: return "ok";
    case SearchStatus::degraded: return "degraded";
    case SearchStatus::exhausted: return "search-exhausted";
  }
  return "ok";
}

namespace {

struct Scored {
  Trajectory state;
  double score = 0.0;
};

struct Candidate {
  int parent = 0;
  std::string thought;
  std::uint64_t world_seed = 0;
  std::optional<Trajectory> next;
};

std::vector<double> score_with_retry(const std::vector<std::string>& texts, Scorer& scorer) {
  try {
    return score_texts(texts, scorer);
  } catch (const ScorerError&) {
    return score_texts(texts, scorer);
  }
}

}  // namespace

SearchResult beam_search(const Problem& problem, ChatBackend& backend, Scorer& scorer,
                         const BeamConfig& cfg, const AnswerSpec& spec) {
  cfg.validate();
  SearchResult result;
  result.problem_id = problem.id;
  std::mt19937_64 rng(hash_combine(fnv1a(problem.id), cfg.rng_seed));
  const ViewKind view = scorer.view();

  Trajectory root;
  root.problem_id = problem.id;
  std::vector<Scored> beam{{root, 0.0}};
  std::vector<Scored> finished;
  std::vector<Scored> capped;
  bool degraded = false;

  auto execute = [&](const Trajectory& parent, Candidate& c) {
    if (is_stop_thought(c.thought)) {
      c.next = finish(parent, trajectory_answer(parent, spec));
      return;
    }
    std::string expression;
    try {
      expression = execute_thought(backend, problem, parent, c.thought,
                                   CallOptions{cfg.world_temperature, c.world_seed}, spec);
    } catch (const UnansweredFinalStep& e) {
      expression = e.expression();
    }
    c.next = parent.extended(c.thought, std::move(expression));
  };

  for (int level = 0; !beam.empty(); ++level) {
    std::vector<Candidate> candidates;
    for (std::size_t p = 0; p < beam.size(); ++p) {
      std::vector<std::string> thoughts;
      try {
        thoughts = propose_thoughts(backend, problem, beam[p].state, cfg.candidate_count,
                                    CallOptions{cfg.agent_temperature, rng()});
      } catch (const ExhaustedProposals&) {
        continue;
      }
      for (auto& t : thoughts) candidates.push_back({static_cast<int>(p), std::move(t), 0, {}});
    }
    if (candidates.empty()) break;
    for (auto& c : candidates) c.world_seed = rng();

    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (auto& c : candidates) {
      const Trajectory& parent = beam[static_cast<std::size_t>(c.parent)].state;
      if (view == ViewKind::next_thought) {
        texts.push_back(render(parent, Step{c.thought, "", parent.depth()}, view, problem.statement,
                               cfg.render));
      } else {
        execute(parent, c);
        texts.push_back(render_state(*c.next, view, problem.statement, cfg.render));
      }
    }

    std::vector<double> scores;
    try {
      scores = score_with_retry(texts, scorer);
    } catch (const ScorerError& e) {
      degraded = true;
      result.message = "level " + std::to_string(level) + " aborted: " + e.what();
      break;
    }

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.beam_size));

    TraceLevel trace{level, {}};
    trace.candidates.resize(candidates.size());
    std::vector<Scored> next_beam;
    for (std::size_t r = 0; r < keep; ++r) {
      Candidate& c = candidates[order[r]];
      if (!c.next) execute(beam[static_cast<std::size_t>(c.parent)].state, c);
      Scored kept{*c.next, scores[order[r]]};
      if (kept.state.terminal) {
        finished.push_back(std::move(kept));
      } else if (kept.state.depth() >= cfg.max_depth) {
        capped.push_back(std::move(kept));
      } else {
        next_beam.push_back(std::move(kept));
      }
      trace.candidates[order[r]].kept = true;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      auto& tc = trace.candidates[i];
      tc.parent = candidates[i].parent;
      tc.thought = candidates[i].thought;
      if (candidates[i].next && !candidates[i].next->steps.empty()) {
        tc.expression = candidates[i].next->steps.back().expression;
      }
      tc.score = scores[i];
    }
    result.trace.push_back(std::move(trace));
    beam = std::move(next_beam);
  }

  const Scored* best = nullptr;
  for (const auto& f : finished) {
    if (!best || f.score > best->score ||
        (f.score == best->score && f.state.depth() > best->state.depth())) {
      best = &f;
    }
  }
  if (!best) {
    for (const auto& c : capped) {
      if (!best || c.score > best->score) best = &c;
    }
  }
  if (!best && degraded && !result.trace.empty() && !beam.empty()) best = &beam.front();

  if (best) {
    result.best = best->state;
    result.best_score = best->score;
  }
  if (degraded) {
    result.status = SearchStatus::degraded;
  } else if (!best) {
    result.status = SearchStatus::exhausted;
    result.message = "search-exhausted: no live states and no finished states";
  }
  return result;
}

std::string trace_jsonl(const SearchResult& result) {
  std::string out;
  for (const auto& level : result.trace) {
    json candidates = json::array();
    for (const auto& c : level.candidates) {
      candidates.push_back({{"parent", c.parent},
                            {"thought", c.thought},
                            {"expression", c.expression},
                            {"score", c.score},
                            {"kept", c.kept}});
    }
    out += json{{"problem_id", result.problem_id}, {"level", level.level}, {"candidates", candidates}}
               .dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

json EvalReport::to_json() const {
  json per_problem = json::array();
  int solved = 0;
  json status_counts = json::object();
  for (const auto& p : problems) {
    solved += p.correct ? 1 : 0;
    status_counts[p.status] = status_counts.value(p.status, 0) + 1;
    json entry{{"problem_id", p.problem_id},
               {"status", p.status},
               {"correct", p.correct},
               {"steps", p.steps},
               {"answer", p.answer ? json(*p.answer) : json(nullptr)},
               {"score", p.score ? json(*p.score) : json(nullptr)}};
    if (!p.error.empty()) entry["error"] = p.error;
    per_problem.push_back(std::move(entry));
  }
  return json{{"problems", problems.size()},
              {"solved", solved},
              {"accuracy", accuracy},
              {"mean_steps_to_correct",
               mean_steps_to_correct ? json(*mean_steps_to_correct) : json(nullptr)},
              {"failures", failures},
              {"status_counts", status_counts},
              {"per_problem", per_problem}};
}

EvalReport evaluate(const std::vector<Problem>& corpus, const BackendProvider& backend_for,
                    Scorer& scorer, const BeamConfig& cfg, const AnswerSpec& spec, int workers) {
  if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
  cfg.validate();
  EvalReport report;
  report.problems.resize(corpus.size());
  report.results.resize(corpus.size());

  auto run_one = [&](std::size_t i) {
    const Problem& problem = corpus[i];
    ProblemReport& pr = report.problems[i];
    SearchResult& sr = report.results[i];
    pr.problem_id = problem.id;
    sr.problem_id = problem.id;
    try {
      sr = beam_search(problem, backend_for(problem), scorer, cfg, spec);
      pr.status = std::string(to_string(sr.status));
      pr.error = sr.message;
      if (sr.best) {
        const auto answer = sr.best->terminal ? sr.best->final_answer : trajectory_answer(*sr.best, spec);
        if (answer && !answer->raw.empty()) pr.answer = answer->raw;
        pr.correct = answer && verify_answer(*answer, problem.gold_answer);
        pr.steps = sr.best->reasoning_steps();
        pr.score = sr.best_score;
      }
    } catch (const std::exception& e) {
      pr.status = "failed";
      pr.error = e.what();
    }
  };

  const std::size_t n_workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, corpus.size());
  if (n_workers == 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < corpus.size(); i = next++) run_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  int solved = 0;
  long steps = 0;
  for (const auto& p : report.problems) {
    if (p.status == "failed") ++report.failures;
    if (p.correct) {
      ++solved;
      steps += p.steps;
    }
  }
  report.accuracy = static_cast<double>(solved) / static_cast<double>(corpus.size());
  if (solved > 0) report.mean_steps_to_correct = static_cast<double>(steps) / solved;
  return report;
}

}  // namespace stepsearch
