// Python bindings. Structured values cross the boundary as JSON text; the
// stepsearch package decodes them.

#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stepsearch/answer.hpp"
#include "stepsearch/cli.hpp"
#include "stepsearch/config.hpp"
#include "stepsearch/json_io.hpp"
#include "stepsearch/mcts.hpp"
#include "stepsearch/search.hpp"
#include "stepsearch/transcript.hpp"
#include "stepsearch/tree.hpp"
#include "stepsearch/views.hpp"

namespace py = pybind11;
using namespace stepsearch;
using nlohmann::json;

namespace {

RunConfig config_from(const std::string& overrides_json) {
  RunConfig cfg;
  const json j = json::parse(overrides_json.empty() ? "{}" : overrides_json);
  if (!j.is_object()) throw ConfigError("config overrides must be an object");
  ConfigValues values;
  for (const auto& [key, value] : j.items()) values[key] = value;
  cfg.apply(values);
  cfg.validate();
  return cfg;
}

Corpus corpus_from(const std::string& jsonl) {
  Corpus corpus = parse_corpus(jsonl);
  if (!corpus.errors.empty()) {
    const auto& e = corpus.errors.front();
    throw ConfigError("corpus line " + std::to_string(e.line) + ": " + e.message);
  }
  return corpus;
}

CorpusEntry synthetic_entry(const std::string& entry_json) {
  Corpus corpus = corpus_from(entry_json);
  if (corpus.entries.size() != 1) throw ConfigError("expected exactly one corpus entry");
  if (!corpus.entries.front().synthetic) throw ConfigError("corpus entry has no synthetic section");
  return std::move(corpus.entries.front());
}

ViewKind view_from(const std::string& name) {
  const auto view = view_from_string(name);
  if (!view) throw ConfigError("unknown view '" + name + "'");
  return *view;
}

std::vector<PreferencePair> pairs_from(const std::string& jsonl) {
  std::vector<PreferencePair> pairs;
  for (const auto& line : split_lines(jsonl)) {
    if (!line.text.empty()) pairs.push_back(json::parse(line.text).get<PreferencePair>());
  }
  return pairs;
}

std::optional<std::string> extract(const std::string& text, const std::string& spec) {
  const auto answer = extract_answer(text, AnswerSpec{answer_kind_from_string(spec)});
  if (!answer) return std::nullopt;
  return json(*answer).dump();
}

bool verify(const std::string& found, const std::string& gold) {
  return verify_answer(canonicalize_answer(found), parse_gold_answer(gold));
}

std::string generate(const std::string& spec) {
  std::string out;
  for (const auto& e : synthetic_corpus(parse_generator_spec(spec)).entries) {
    out += corpus_entry_json(e).dump() + "\n";
  }
  return out;
}

std::string mcts(const std::string& entry_json, const std::string& config_json) {
  const CorpusEntry entry = synthetic_entry(entry_json);
  const RunConfig cfg = config_from(config_json);
  SyntheticBackend backend(entry.synthetic->problem, entry.synthetic->noise);
  return serialize_tree(run_mcts(entry.problem, backend, cfg.mcts, cfg.answer_spec()));
}

std::string pairs(const std::string& tree_text, const std::string& config_json,
                  const std::string& statement) {
  const RunConfig cfg = config_from(config_json);
  return to_jsonl(extract_pairs(deserialize_tree(tree_text), cfg.mcts, statement));
}

std::vector<std::string> check_tree(const std::string& tree_text) {
  try {
    const SearchTree tree = deserialize_tree(tree_text);
    check_structure(tree);
    return validate_counts(tree);
  } catch (const std::exception& e) {
    return {e.what()};
  }
}

std::string dataset(const std::string& pairs_jsonl, const std::string& view, bool include_statement,
                    bool pointwise) {
  const Dataset d = build_dataset(pairs_from(pairs_jsonl), view_from(view), {include_statement});
  return pointwise ? pointwise_jsonl(d) : dataset_jsonl(d);
}

std::string render_pair(const std::string& pair_json, const std::string& view, bool include_statement) {
  const auto p = json::parse(pair_json).get<PreferencePair>();
  const ViewKind kind = view_from(view);
  const RenderOptions options{include_statement};
  return json{{"chosen", render(p.prefix, p.chosen.front(), kind, p.problem_statement, options)},
              {"rejected", render(p.prefix, p.rejected.front(), kind, p.problem_statement, options)}}
      .dump();
}

std::unique_ptr<Scorer> synthetic_scorer(const std::string& spec, const std::vector<SyntheticProblem>& set,
                                         ViewKind view) {
  const auto parts = [&] {
    std::vector<std::string> out;
    std::stringstream in(spec);
    for (std::string part; std::getline(in, part, ':');) out.push_back(part);
    return out;
  }();
  if (parts.size() == 1 && parts[0] == "oracle") return std::make_unique<OracleScorer>(set, view);
  if (parts.size() == 3 && parts[0] == "noisy") {
    return std::make_unique<NoisyOracleScorer>(set, std::stod(parts[1]), std::stoull(parts[2]), view);
  }
  if (parts.size() == 2 && parts[0] == "random") {
    return std::make_unique<RandomScorer>(std::stoull(parts[1]), view);
  }
  throw ConfigError("scorer spec must be oracle, noisy:<sigma>:<seed> or random:<seed>, not '" + spec + "'");
}

std::string evaluate_corpus(const std::string& corpus_jsonl, const std::string& scorer_spec,
                            const std::string& view, const std::string& config_json, int workers) {
  const Corpus corpus = corpus_from(corpus_jsonl);
  const RunConfig cfg = config_from(config_json);
  std::vector<Problem> problems;
  std::vector<SyntheticProblem> set;
  std::unordered_map<std::string, std::unique_ptr<SyntheticBackend>> backends;
  for (const auto& e : corpus.entries) {
    if (!e.synthetic) throw ConfigError("problem '" + e.problem.id + "' has no synthetic section");
    problems.push_back(e.problem);
    set.push_back(e.synthetic->problem);
    backends[e.problem.id] = std::make_unique<SyntheticBackend>(e.synthetic->problem, e.synthetic->noise);
  }
  auto scorer = synthetic_scorer(scorer_spec, set, view_from(view));
  const BackendProvider provider = [&](const Problem& p) -> ChatBackend& { return *backends.at(p.id); };
  const EvalReport report = evaluate(problems, provider, *scorer, cfg.search, cfg.answer_spec(), workers);
  json j = report.to_json();
  j["traces"] = json::array();
  for (const auto& r : report.results) j["traces"].push_back(trace_jsonl(r));
  return j.dump();
}

std::tuple<int, std::string, std::string> run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Step-level MCTS preference collection and reward-guided beam search";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TransportError>(m, "TransportError", PyExc_ConnectionError);
  py::register_exception<ReplayMiss>(m, "ReplayMiss", PyExc_LookupError);
  py::register_exception<TreeError>(m, "TreeError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<EmptyRender>(m, "EmptyRender", PyExc_ValueError);

  const auto release = py::call_guard<py::gil_scoped_release>();
  m.def("extract_answer", &extract, py::arg("text"), py::arg("spec") = "the_answer_is");
  m.def("verify", &verify, py::arg("found"), py::arg("gold"));
  m.def("generate_corpus", &generate, py::arg("spec"));
  m.def("run_mcts", &mcts, py::arg("entry"), py::arg("config"), release);
  m.def("extract_pairs", &pairs, py::arg("tree"), py::arg("config"), py::arg("statement") = "");
  m.def("validate_tree", &check_tree, py::arg("tree"));
  m.def("build_dataset", &dataset, py::arg("pairs"), py::arg("view"), py::arg("include_statement") = false,
        py::arg("pointwise") = false);
  m.def("render_pair", &render_pair, py::arg("pair"), py::arg("view"), py::arg("include_statement") = false);
  m.def("evaluate", &evaluate_corpus, py::arg("corpus"), py::arg("scorer"), py::arg("view"),
        py::arg("config"), py::arg("workers") = 1, release);
  m.def("run_cli", &run_cli, py::arg("args"), release);
}
