#include "stepsearch/cli.hpp"

#include <atomic>
#include <filesystem>
#include <iomanip>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stepsearch/config.hpp"
#include "stepsearch/hashing.hpp"
#include "stepsearch/json_io.hpp"
#include "stepsearch/mcts.hpp"
#include "stepsearch/search.hpp"
#include "stepsearch/transcript.hpp"
#include "stepsearch/tree.hpp"
#include "stepsearch/views.hpp"

namespace stepsearch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string file_stem(std::string_view problem_id) {
  std::string stem;
  bool changed = problem_id.empty();
  for (char c : problem_id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    stem.push_back(safe ? c : '_');
    changed |= !safe;
  }
  if (!stem.empty() && stem.front() == '.') changed = true;
  if (changed) stem += "-" + hex64(fnv1a(problem_id)).substr(0, 8);
  return stem;
}

namespace {

// Failure that maps straight to an exit code.
struct CommandError : std::runtime_error {
  CommandError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

constexpr std::string_view kManifestName = "manifest.json";
constexpr std::string_view kTranscriptName = "transcripts.jsonl";

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path.string(), j.dump(2) + "\n");
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path.string()));
  } catch (const json::exception& e) {
    throw CommandError(kUsage, path.string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw CommandError(kUsage, e.what());
  }
}

// ---------------------------------------------------------------------------
// Shared run setup

struct RunInputs {
  RunConfig config;
  Corpus corpus;
  json corpus_source;
  std::optional<std::string> replay_log;
  bool record = false;
};

struct InputFlags {
  std::string config_path;
  std::string corpus_path;
  std::string synthetic;
  std::string replay_log;
  std::string backend;
  bool record = false;
};

void add_input_flags(CLI::App* cmd, InputFlags& flags) {
  cmd->add_option("--config", flags.config_path, "TOML-style key = value config file");
  cmd->add_option("--corpus", flags.corpus_path, "Problem corpus (JSONL)");
  cmd->add_option("--synthetic", flags.synthetic,
                  "Generate a synthetic corpus: start,target,ops,depth,noise,count,seed");
  cmd->add_option("--backend", flags.backend, "Backend: synthetic, http or replay");
  cmd->add_option("--replay", flags.replay_log, "Serve model calls from a recorded transcript");
  cmd->add_flag("--record", flags.record, "Record every model call to <out>/transcripts.jsonl");
}

Corpus corpus_from_source(const json& source) {
  if (source.contains("path")) return load_corpus(source["path"].get<std::string>());
  try {
    return synthetic_corpus(parse_generator_spec(source.at("synthetic").get<std::string>()));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunInputs resolve_inputs(const InputFlags& flags) {
  RunInputs in;
  if (!flags.config_path.empty()) in.config = load_run_config(flags.config_path);
  if (!flags.backend.empty()) in.config.apply({{"backend.kind", flags.backend}});
  if (flags.corpus_path.empty() == flags.synthetic.empty()) {
    throw ConfigError("give exactly one of --corpus or --synthetic");
  }
  in.corpus_source = flags.corpus_path.empty()
                         ? json{{"synthetic", flags.synthetic}}
                         : json{{"path", fs::absolute(flags.corpus_path).lexically_normal().string()}};
  in.corpus = corpus_from_source(in.corpus_source);
  if (!flags.replay_log.empty()) {
    in.config.backend = BackendKind::replay;
    in.replay_log = fs::absolute(flags.replay_log).lexically_normal().string();
  }
  if (in.config.backend == BackendKind::replay && !in.replay_log) {
    throw ConfigError("backend.kind = replay needs --replay <transcript>");
  }
  if (in.replay_log && !fs::exists(*in.replay_log)) {
    throw ConfigError("transcript log not found: " + *in.replay_log);
  }
  in.record = flags.record;
  return in;
}

// One backend per corpus entry; replay and http share a single instance.
class BackendPool {
 public:
  BackendPool(const RunInputs& in, const fs::path& out_dir) {
    const auto& entries = in.corpus.entries;
    backends_.resize(entries.size());
    errors_.resize(entries.size());
    std::shared_ptr<TranscriptLog> log;
    if (in.record && in.config.backend != BackendKind::replay) {
      log = std::make_shared<TranscriptLog>((out_dir / kTranscriptName).string(), true);
    }
    auto wrap = [&](std::shared_ptr<ChatBackend> inner) -> std::shared_ptr<ChatBackend> {
      if (!log) return inner;
      return std::make_shared<RecordingBackend>(std::move(inner), in.config.prompts(), log);
    };
    switch (in.config.backend) {
      case BackendKind::replay: {
        std::shared_ptr<ChatBackend> shared =
            std::make_shared<ReplayBackend>(in.config.prompts(), *in.replay_log);
        name_ = "replay";
        for (auto& b : backends_) b = shared;
        break;
      }
      case BackendKind::http: {
        auto shared = wrap(std::make_shared<HttpChatBackend>(in.config.http, in.config.prompts()));
        name_ = "http";
        for (auto& b : backends_) b = shared;
        break;
      }
      case BackendKind::synthetic:
        name_ = "synthetic";
        for (std::size_t i = 0; i < entries.size(); ++i) {
          if (!entries[i].synthetic) {
            errors_[i] = "synthetic backend needs a synthetic problem";
            continue;
          }
          try {
            backends_[i] = wrap(std::make_shared<SyntheticBackend>(entries[i].synthetic->problem,
                                                                   entries[i].synthetic->noise));
          } catch (const std::exception& e) {
            errors_[i] = e.what();
          }
        }
        break;
    }
  }

  ChatBackend* at(std::size_t i) const { return backends_[i].get(); }
  const std::string& error(std::size_t i) const { return errors_[i]; }
  const std::string& name() const { return name_; }

 private:
  std::vector<std::shared_ptr<ChatBackend>> backends_;
  std::vector<std::string> errors_;
  std::string name_;
};

template <typename Fn>
void for_each_parallel(std::size_t count, int workers, Fn&& fn) {
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)),
                                              std::max<std::size_t>(count, 1));
  if (n <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

json corpus_errors_json(const Corpus& corpus) {
  json errors = json::array();
  for (const auto& e : corpus.errors) {
    errors.push_back({{"line", e.line}, {"problem_id", e.problem_id}, {"message", e.message}});
  }
  return errors;
}

void print_errors(const json& manifest, std::ostream& err) {
  for (const auto& e : manifest["errors"]) {
    std::string where = e.value("problem_id", std::string());
    if (where.empty() && e.contains("line")) where = "corpus line " + e["line"].dump();
    err << "error: " << where << ": " << e["message"].get<std::string>() << "\n";
  }
}

json base_manifest(std::string_view command, const RunInputs& in, const BackendPool& pool) {
  return json{{"schema_version", kSchemaVersion},
              {"command", command},
              {"config", in.config.to_json()},
              {"config_hash", in.config.hash()},
              {"corpus", in.corpus_source},
              {"backend", pool.name()},
              {"transcript", in.record && in.config.backend != BackendKind::replay
                                 ? json(std::string(kTranscriptName))
                                 : json(nullptr)},
              {"errors", corpus_errors_json(in.corpus)},
              {"warnings", json::array()}};
}

// ---------------------------------------------------------------------------
// collect

struct CollectRecord {
  std::string id;
  std::string tree_file;
  std::optional<SearchTree> tree;
  bool resumed = false;
  std::string error;
  std::vector<std::string> violations;
};

bool resumable(const fs::path& path, const MctsConfig& cfg, SearchTree& out) {
  if (!fs::exists(path)) return false;
  try {
    SearchTree tree = read_tree_file(path.string());
    if (tree.run.status != RunStatus::complete || tree.run.config != cfg.to_json() ||
        tree.run.completed_iterations != cfg.n_iteration) {
      return false;
    }
    out = std::move(tree);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

int collect(const RunInputs& in, const fs::path& out_dir, int workers, std::ostream& out,
            std::ostream& err, json* manifest_out = nullptr) {
  in.config.validate();
  fs::create_directories(out_dir / "trees");
  BackendPool pool(in, out_dir);
  const auto& entries = in.corpus.entries;
  std::vector<CollectRecord> records(entries.size());

  for_each_parallel(entries.size(), workers, [&](std::size_t i) {
    const Problem& problem = entries[i].problem;
    CollectRecord& rec = records[i];
    rec.id = problem.id;
    rec.tree_file = "trees/" + file_stem(problem.id) + ".tree.jsonl";
    const fs::path path = out_dir / rec.tree_file;
    SearchTree existing;
    if (resumable(path, in.config.mcts, existing)) {
      rec.tree = std::move(existing);
      rec.resumed = true;
      return;
    }
    if (pool.at(i) == nullptr) {
      rec.error = pool.error(i);
      return;
    }
    try {
      SearchTree tree = run_mcts(problem, *pool.at(i), in.config.mcts, in.config.answer_spec());
      check_structure(tree);
      rec.violations = validate_counts(tree);
      write_tree_file(path.string(), tree);
      rec.tree = std::move(tree);
    } catch (const TreeError& e) {
      rec.violations.push_back(e.what());
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  });

  json manifest = base_manifest("collect", in, pool);
  json problems = json::array();
  json outputs = json::array();
  std::vector<PreferencePair> pairs;
  int new_trees = 0, resumed = 0, count = 0;
  bool violated = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    json p{{"problem_id", rec.id}};
    if (!rec.error.empty()) {
      manifest["errors"].push_back({{"problem_id", rec.id}, {"message", rec.error}});
      p["status"] = "error";
      problems.push_back(std::move(p));
      continue;
    }
    if (!rec.violations.empty()) {
      violated = true;
      for (const auto& v : rec.violations) {
        manifest["errors"].push_back({{"problem_id", rec.id}, {"message", "invariant: " + v}});
      }
    }
    if (!rec.tree) continue;
    const SearchTree& tree = *rec.tree;
    auto tree_pairs = extract_pairs(tree, in.config.mcts, entries[i].problem.statement);
    p["tree_file"] = rec.tree_file;
    p["tree_id"] = tree.tree_id;
    p["status"] = tree.run.status == RunStatus::complete ? "complete" : "aborted";
    p["completed_iterations"] = tree.run.completed_iterations;
    p["failed_iterations"] = tree.run.failed_iterations;
    p["flagged_rollouts"] = tree.run.flagged_rollouts;
    p["nodes"] = tree.nodes.size();
    p["pairs"] = tree_pairs.size();
    p["resumed"] = rec.resumed;
    if (tree.run.status == RunStatus::aborted) {
      manifest["warnings"].push_back("run for " + rec.id + " aborted after " +
                                     std::to_string(tree.run.failed_iterations) +
                                     " failed iterations");
    }
    if (tree.run.flagged_rollouts > 0) {
      manifest["warnings"].push_back(rec.id + ": " + std::to_string(tree.run.flagged_rollouts) +
                                     " rollouts hit backend failures");
    }
    outputs.push_back(rec.tree_file);
    pairs.insert(pairs.end(), std::make_move_iterator(tree_pairs.begin()),
                 std::make_move_iterator(tree_pairs.end()));
    ++count;
    (rec.resumed ? resumed : new_trees)++;
    problems.push_back(std::move(p));
  }
  write_text_file((out_dir / "pairs.jsonl").string(), to_jsonl(pairs));
  outputs.push_back("pairs.jsonl");

  manifest["count"] = count;
  manifest["new_trees"] = new_trees;
  manifest["resumed"] = resumed;
  manifest["pairs"] = pairs.size();
  manifest["problems"] = std::move(problems);
  manifest["outputs"] = std::move(outputs);
  write_json_file(out_dir / kManifestName, manifest);

  out << "collect: " << count << " trees (" << new_trees << " new, " << resumed << " resumed), "
      << pairs.size() << " pairs, " << manifest["errors"].size() << " errors\n";
  print_errors(manifest, err);
  for (const auto& w : manifest["warnings"]) err << "warning: " << w.get<std::string>() << "\n";
  if (manifest_out) *manifest_out = manifest;
  if (violated) return kInvariant;
  if (in.config.backend == BackendKind::http && count > 0 && new_trees > 0) {
    bool all_failed = true;
    for (const auto& rec : records) {
      if (rec.tree && !rec.resumed && rec.tree->run.completed_iterations > 0) all_failed = false;
    }
    if (all_failed) {
      err << "error: model backend unavailable, no iteration completed\n";
      return kUnavailable;
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// search

std::vector<SyntheticProblem> synthetic_problems(const Corpus& corpus) {
  std::vector<SyntheticProblem> problems;
  for (const auto& e : corpus.entries) {
    if (e.synthetic) problems.push_back(e.synthetic->problem);
  }
  return problems;
}

// Problem set named in an oracle spec: empty or "corpus" means the search
// corpus, a value with commas is a generator spec, anything else a path.
std::vector<SyntheticProblem> oracle_problem_set(std::string_view set, const Corpus& corpus) {
  if (set.empty() || set == "corpus") return synthetic_problems(corpus);
  if (set.find(',') != std::string_view::npos) {
    try {
      return synthetic_problems(synthetic_corpus(parse_generator_spec(set)));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  return synthetic_problems(load_corpus(std::string(set)));
}

ViewKind parse_view(const std::string& name) {
  const auto view = view_from_string(name);
  if (!view) throw ConfigError("unknown view '" + name + "'");
  return *view;
}

std::uint64_t parse_seed(std::string_view text, std::string_view what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(std::string(text), &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
}

/// Scorer specs: oracle[:<problem-set>], noisy:<sigma>:<seed>[:<problem-set>],
/// random:<seed>, http:<url>:<view>.
std::unique_ptr<Scorer> make_scorer(const std::string& spec, ViewKind view, const Corpus& corpus) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "oracle") {
    return std::make_unique<OracleScorer>(oracle_problem_set(rest, corpus), view);
  }
  if (kind == "noisy") {
    const auto c1 = rest.find(':');
    if (c1 == std::string::npos) throw ConfigError("noisy scorer spec is noisy:<sigma>:<seed>[:<set>]");
    const auto c2 = rest.find(':', c1 + 1);
    double sigma = 0.0;
    try {
      sigma = std::stod(rest.substr(0, c1));
    } catch (const std::exception&) {
      throw ConfigError("invalid noise sigma in '" + spec + "'");
    }
    const auto seed = parse_seed(rest.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1), "scorer seed");
    const std::string set = c2 == std::string::npos ? "" : rest.substr(c2 + 1);
    return std::make_unique<NoisyOracleScorer>(oracle_problem_set(set, corpus), sigma, seed, view);
  }
  if (kind == "random") {
    return std::make_unique<RandomScorer>(parse_seed(rest, "scorer seed"), view);
  }
  if (kind == "http") {
    const auto last = rest.rfind(':');
    if (last == std::string::npos) throw ConfigError("http scorer spec is http:<url>:<view>");
    const ViewKind http_view = parse_view(rest.substr(last + 1));
    return std::make_unique<HttpScorer>(rest.substr(0, last), http_view);
  }
  throw ConfigError("unknown scorer spec '" + spec + "' (oracle, noisy, random, http)");
}

struct SearchOptions {
  std::string scorer_spec;
  std::string scorer_view = "full_context";
};

int search(const RunInputs& in, const SearchOptions& opts, const fs::path& out_dir, int workers,
           std::ostream& out, std::ostream& err, json* manifest_out = nullptr) {
  in.config.validate();
  const ViewKind view = parse_view(opts.scorer_view);
  std::unique_ptr<Scorer> scorer = make_scorer(opts.scorer_spec, view, in.corpus);
  if (auto* http = dynamic_cast<HttpScorer*>(scorer.get()); http && !http->wait_healthy()) {
    throw CommandError(kUnavailable, "scorer " + http->name() + " is not healthy");
  }
  fs::create_directories(out_dir / "traces");
  BackendPool pool(in, out_dir);

  const auto& entries = in.corpus.entries;
  std::vector<Problem> problems;
  std::vector<std::size_t> index;
  json manifest = base_manifest("search", in, pool);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (pool.at(i) == nullptr) {
      manifest["errors"].push_back({{"problem_id", entries[i].problem.id}, {"message", pool.error(i)}});
      continue;
    }
    problems.push_back(entries[i].problem);
    index.push_back(i);
  }
  if (problems.empty()) throw ConfigError("no searchable problems in corpus");

  std::unordered_map<std::string, ChatBackend*> by_id;
  for (std::size_t k = 0; k < problems.size(); ++k) by_id[problems[k].id] = pool.at(index[k]);
  BackendProvider provider = [&](const Problem& p) -> ChatBackend& { return *by_id.at(p.id); };

  EvalReport report = evaluate(problems, provider, *scorer, in.config.search,
                               in.config.answer_spec(), workers);

  json outputs = json::array();
  for (const auto& result : report.results) {
    const std::string file = "traces/" + file_stem(result.problem_id) + ".trace.jsonl";
    write_text_file((out_dir / file).string(), trace_jsonl(result));
    outputs.push_back(file);
  }
  json report_json = report.to_json();
  report_json["scorer"] = opts.scorer_spec;
  report_json["scorer_view"] = to_string(scorer->view());
  report_json["search"] = in.config.search.to_json();
  write_json_file(out_dir / "report.json", report_json);
  outputs.push_back("report.json");

  for (const auto& p : report.problems) {
    if (p.status == "failed") {
      manifest["errors"].push_back({{"problem_id", p.problem_id}, {"message", p.error}});
    } else if (p.status != "ok") {
      manifest["warnings"].push_back(p.problem_id + ": " + p.status +
                                     (p.error.empty() ? "" : " (" + p.error + ")"));
    }
  }
  manifest["scorer"] = opts.scorer_spec;
  manifest["scorer_view"] = std::string(to_string(scorer->view()));
  manifest["count"] = problems.size();
  manifest["outputs"] = std::move(outputs);
  write_json_file(out_dir / kManifestName, manifest);

  std::ostringstream table;
  table << std::fixed << std::setprecision(4);
  table << "scorer     " << opts.scorer_spec << " (" << to_string(scorer->view()) << ")\n"
        << "beam       B=" << in.config.search.beam_size << " c=" << in.config.search.candidate_count
        << "\n"
        << "problems   " << problems.size() << "\n"
        << "accuracy   " << report.accuracy << "\n"
        << "mean steps "
        << (report.mean_steps_to_correct ? std::to_string(*report.mean_steps_to_correct) : "n/a")
        << "\n"
        << "failures   " << report.failures << "\n";
  out << table.str();
  print_errors(manifest, err);
  if (manifest_out) *manifest_out = manifest;
  return kOk;
}

// ---------------------------------------------------------------------------
// replay

fs::path make_temp_dir() {
  std::random_device rd;
  const fs::path base = fs::temp_directory_path();
  for (int i = 0; i < 100; ++i) {
    fs::path candidate = base / ("stepsearch-replay-" + hex64((std::uint64_t{rd()} << 32) | rd()));
    if (fs::create_directory(candidate)) return candidate;
  }
  throw std::runtime_error("cannot create a temporary directory");
}

struct TempDir {
  fs::path path = make_temp_dir();
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

int replay(const fs::path& manifest_path, const std::string& log_flag, std::ostream& out,
           std::ostream& err) {
  if (!fs::exists(manifest_path)) throw ConfigError("manifest not found: " + manifest_path.string());
  const json manifest = read_json_file(manifest_path);
  const fs::path run_dir = manifest_path.parent_path();
  std::string log = log_flag;
  if (log.empty()) {
    if (!manifest.contains("transcript") || manifest["transcript"].is_null()) {
      throw ConfigError("manifest records no transcript; pass --log");
    }
    log = (run_dir / manifest["transcript"].get<std::string>()).string();
  }
  if (!fs::exists(log)) throw ConfigError("transcript log not found: " + log);

  RunInputs in;
  try {
    in.config = RunConfig::from_json(manifest.at("config"));
    in.corpus_source = manifest.at("corpus");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  in.corpus = corpus_from_source(in.corpus_source);
  in.config.backend = BackendKind::replay;
  in.replay_log = log;

  TempDir temp;
  std::ostringstream sink;
  json replayed;
  const std::string command = manifest.value("command", std::string());
  int code = kOk;
  if (command == "collect") {
    code = collect(in, temp.path, 1, sink, sink, &replayed);
  } else if (command == "search") {
    SearchOptions opts{manifest.at("scorer").get<std::string>(),
                       manifest.at("scorer_view").get<std::string>()};
    code = search(in, opts, temp.path, 1, sink, sink, &replayed);
  } else {
    throw ConfigError("manifest has unknown command '" + command + "'");
  }

  std::vector<std::string> failures;
  if (code != kOk) failures.push_back("replayed " + command + " exited with " + std::to_string(code));
  for (const auto& e : replayed.value("errors", json::array())) {
    const std::string msg = e.value("message", std::string());
    if (msg.rfind("replay miss", 0) == 0) {
      failures.push_back(e.value("problem_id", std::string()) + ": " + msg);
    }
  }
  const json original_outputs = manifest.value("outputs", json::array());
  if (original_outputs != replayed.value("outputs", json::array())) {
    failures.push_back("output file list differs");
  }
  for (const auto& f : original_outputs) {
    const std::string rel = f.get<std::string>();
    const fs::path a = run_dir / rel;
    const fs::path b = temp.path / rel;
    if (!fs::exists(a)) {
      failures.push_back(rel + " missing from the recorded run");
    } else if (!fs::exists(b)) {
      failures.push_back(rel + " not produced by the replay");
    } else if (read_text_file(a.string()) != read_text_file(b.string())) {
      failures.push_back(rel + " differs");
    }
  }
  if (failures.empty()) {
    out << "PASS " << manifest_path.string() << " (" << original_outputs.size()
        << " files byte-identical)\n";
    return kOk;
  }
  for (const auto& f : failures) out << "FAIL " << f << "\n";
  (void)err;
  return kReplayFailed;
}

// ---------------------------------------------------------------------------
// views, corpus, validate

int views(const std::string& pairs_path, const std::string& view_name, const fs::path& out_path,
          bool include_statement, bool pointwise, std::ostream& out) {
  std::vector<ViewKind> kinds;
  if (view_name == "all") {
    kinds.assign(std::begin(kAllViews), std::end(kAllViews));
  } else {
    kinds.push_back(parse_view(view_name));
  }
  if (!fs::exists(pairs_path)) throw ConfigError("pairs file not found: " + pairs_path);
  std::vector<PreferencePair> pairs;
  try {
    pairs = read_pairs_file(pairs_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  RenderOptions options{include_statement};
  for (ViewKind kind : kinds) {
    fs::path target = out_path;
    if (view_name == "all") {
      fs::create_directories(out_path);
      target = out_path / (std::string(to_string(kind)) + ".jsonl");
    } else if (target.has_parent_path()) {
      fs::create_directories(target.parent_path());
    }
    const Dataset dataset = build_dataset(pairs, kind, options);
    write_dataset(target.string(), dataset, pointwise);
    out << to_string(kind) << ": " << dataset.stats.count << " examples from "
        << dataset.stats.input_pairs << " pairs (" << dataset.stats.dedup_count << " deduplicated, "
        << dataset.stats.render_errors << " render errors) -> " << target.string() << "\n";
  }
  return kOk;
}

int write_corpus(const std::string& spec, const fs::path& out_path, std::ostream& out) {
  Corpus corpus;
  try {
    corpus = synthetic_corpus(parse_generator_spec(spec));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::string text;
  for (const auto& e : corpus.entries) text += corpus_entry_json(e).dump() + "\n";
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_text_file(out_path.string(), text);
  out << corpus.entries.size() << " problems -> " << out_path.string() << "\n";
  return kOk;
}

int validate_run(const fs::path& run_dir, std::ostream& out) {
  const fs::path trees = run_dir / "trees";
  if (!fs::is_directory(trees)) throw ConfigError("no trees directory under " + run_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(trees)) {
    if (e.path().string().ends_with(".tree.jsonl")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t bad = 0;
  for (const auto& f : files) {
    std::vector<std::string> problems;
    try {
      const SearchTree tree = read_tree_file(f.string());
      check_structure(tree);
      problems = validate_counts(tree);
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
    for (const auto& p : problems) out << f.filename().string() << ": " << p << "\n";
    bad += problems.empty() ? 0 : 1;
  }
  out << files.size() << " trees checked, " << bad << " with violations\n";
  return bad == 0 ? kOk : kInvariant;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Step-level preference collection and reward-guided search"};
  app.require_subcommand(1);

  InputFlags collect_in;
  std::string collect_out;
  int collect_workers = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations, n_candidates, depth_limit;
  auto* collect_cmd = app.add_subcommand("collect", "Run MCTS per problem and extract preference pairs");
  add_input_flags(collect_cmd, collect_in);
  collect_cmd->add_option("--out", collect_out, "Run directory")->required();
  collect_cmd->add_option("--workers", collect_workers, "Problems searched in parallel");
  collect_cmd->add_option("--seed", seed, "Overrides seed");
  collect_cmd->add_option("--iterations", iterations, "Overrides mcts.n_iteration");
  collect_cmd->add_option("--n-candidates", n_candidates, "Overrides mcts.n_candidates");
  collect_cmd->add_option("--depth-limit", depth_limit, "Overrides mcts.depth_limit");

  std::string pairs_path, view_name, views_out;
  bool include_statement = false, pointwise = false;
  auto* views_cmd = app.add_subcommand("views", "Render preference pairs into a reward-model dataset");
  views_cmd->add_option("--pairs", pairs_path, "pairs.jsonl from collect")->required();
  views_cmd->add_option("--view", view_name,
                        "full_context, math_only, single_step_math_only, next_thought or all")
      ->required();
  views_cmd->add_option("--out", views_out, "Dataset file (a directory for --view all)")->required();
  views_cmd->add_flag("--include-statement", include_statement,
                      "Prefix single_step_math_only renders with the problem statement");
  views_cmd->add_flag("--pointwise", pointwise, "Write one labelled record per side");

  InputFlags search_in;
  SearchOptions search_opts;
  std::string search_out;
  int search_workers = 1;
  std::optional<int> beam, candidates, max_depth;
  std::optional<std::uint64_t> search_seed;
  auto* search_cmd = app.add_subcommand("search", "Beam search guided by a step scorer");
  add_input_flags(search_cmd, search_in);
  search_cmd->add_option("--scorer", search_opts.scorer_spec,
                         "oracle[:<set>], noisy:<sigma>:<seed>[:<set>], random:<seed>, http:<url>:<view>")
      ->required();
  search_cmd->add_option("--scorer-view", search_opts.scorer_view, "View for oracle/noisy/random scorers");
  search_cmd->add_option("--out", search_out, "Run directory")->required();
  search_cmd->add_option("--beam,-B", beam, "Overrides search.beam_size");
  search_cmd->add_option("--candidates,-c", candidates, "Overrides search.candidate_count");
  search_cmd->add_option("--max-depth", max_depth, "Overrides search.max_depth");
  search_cmd->add_option("--seed", search_seed, "Overrides search.seed");
  search_cmd->add_option("--workers", search_workers, "Problems searched in parallel");

  std::string manifest_path, log_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded command and compare outputs");
  replay_cmd->add_option("--manifest", manifest_path, "manifest.json of the recorded run")->required();
  replay_cmd->add_option("--log", log_path, "Transcript (defaults to the one named in the manifest)");

  std::string corpus_spec, corpus_out;
  auto* corpus_cmd = app.add_subcommand("corpus", "Write a synthetic corpus as JSONL");
  corpus_cmd->add_option("--synthetic", corpus_spec, "start,target,ops,depth,noise,count,seed")->required();
  corpus_cmd->add_option("--out", corpus_out, "Output file")->required();

  std::string validate_dir;
  auto* validate_cmd = app.add_subcommand("validate", "Check every tree of a collect run");
  validate_cmd->add_option("--run", validate_dir, "Run directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (collect_cmd->parsed()) {
      RunInputs in = resolve_inputs(collect_in);
      if (seed) in.config.mcts.rng_seed = *seed;
      if (iterations) in.config.mcts.n_iteration = *iterations;
      if (n_candidates) in.config.mcts.n_candidates = *n_candidates;
      if (depth_limit) in.config.mcts.depth_limit = *depth_limit;
      return collect(in, collect_out, collect_workers, out, err);
    }
    if (views_cmd->parsed()) {
      return views(pairs_path, view_name, views_out, include_statement, pointwise, out);
    }
    if (search_cmd->parsed()) {
      RunInputs in = resolve_inputs(search_in);
      if (beam) in.config.search.beam_size = *beam;
      if (candidates) in.config.search.candidate_count = *candidates;
      if (max_depth) in.config.search.max_depth = *max_depth;
      if (search_seed) in.config.search.rng_seed = *search_seed;
      return search(in, search_opts, search_out, search_workers, out, err);
    }
    if (replay_cmd->parsed()) return replay(manifest_path, log_path, out, err);
    if (corpus_cmd->parsed()) return write_corpus(corpus_spec, corpus_out, out);
    if (validate_cmd->parsed()) return validate_run(validate_dir, out);
  } catch (const CommandError& e) {
    err << "error: " << e.what() << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const TransportError& e) {
    err << "error: " << e.what() << "\n";
    return kUnavailable;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInvariant;
  }
  return kUsage;
}

}  // namespace stepsearch::cli
