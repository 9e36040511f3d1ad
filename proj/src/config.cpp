#include "stepsearch/config.hpp"

#include <cctype>
#include <functional>
#include <set>

#include "stepsearch/hashing.hpp"
#include "stepsearch/json_io.hpp"

namespace stepsearch {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Drops a trailing `# comment`, leaving `#` inside quoted strings alone.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
  }
  return true;
}

}  // namespace

ConfigValues parse_config_text(std::string_view text) {
  ConfigValues values;
  std::string section;
  int line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    const std::string_view body = trim(strip_comment(line.text));
    if (body.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (body.front() == '[') {
      if (body.back() != ']' || !valid_key(trim(body.substr(1, body.size() - 2)))) {
        throw ConfigError(where + "malformed section header");
      }
      section = std::string(trim(body.substr(1, body.size() - 2)));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string_view key = trim(body.substr(0, eq));
    const std::string_view raw = trim(body.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + "invalid key '" + std::string(key) + "'");
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      throw ConfigError(where + "cannot parse value '" + std::string(raw) +
                        "' (strings must be quoted)");
    }
    if (!value.is_primitive() || value.is_null()) {
      throw ConfigError(where + "value must be a string, number or boolean");
    }
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (!values.emplace(full, std::move(value)).second) {
      throw ConfigError(where + "duplicate key '" + full + "'");
    }
  }
  return values;
}

namespace {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::synthetic: return "synthetic";
    case BackendKind::http: return "http";
    case BackendKind::replay: return "replay";
  }
  return "synthetic";
}

BackendKind backend_from(const std::string& s) {
  if (s == "synthetic") return BackendKind::synthetic;
  if (s == "http") return BackendKind::http;
  if (s == "replay") return BackendKind::replay;
  throw ConfigError("backend.kind must be synthetic, http or replay, not '" + s + "'");
}

WorldStyle style_from(const std::string& s) {
  if (s == "gsm8k") return WorldStyle::gsm8k;
  if (s == "math") return WorldStyle::math;
  throw ConfigError("backend.style must be gsm8k or math, not '" + s + "'");
}

int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) throw ConfigError(key + " must be an integer");
  return v.get<int>();
}

std::uint64_t as_seed(const std::string& key, const json& v) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double as_real(const std::string& key, const json& v) {
  if (!v.is_number()) throw ConfigError(key + " must be a number");
  return v.get<double>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) throw ConfigError(key + " must be true or false");
  return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) throw ConfigError(key + " must be a quoted string");
  return v.get<std::string>();
}

using Setter = std::function<void(RunConfig&, const std::string&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed",
       [](RunConfig& c, const std::string& k, const json& v) {
         c.mcts.rng_seed = c.search.rng_seed = as_seed(k, v);
       }},
      {"mcts.n_candidates", [](RunConfig& c, auto& k, auto& v) { c.mcts.n_candidates = as_int(k, v); }},
      {"mcts.depth_limit", [](RunConfig& c, auto& k, auto& v) { c.mcts.depth_limit = as_int(k, v); }},
      {"mcts.w_exp", [](RunConfig& c, auto& k, auto& v) { c.mcts.w_exp = as_real(k, v); }},
      {"mcts.n_iteration", [](RunConfig& c, auto& k, auto& v) { c.mcts.n_iteration = as_int(k, v); }},
      {"mcts.agent_temperature",
       [](RunConfig& c, auto& k, auto& v) { c.mcts.agent_temperature = as_real(k, v); }},
      {"mcts.world_temperature",
       [](RunConfig& c, auto& k, auto& v) { c.mcts.world_temperature = as_real(k, v); }},
      {"mcts.pair_gap_threshold",
       [](RunConfig& c, auto& k, auto& v) { c.mcts.pair_gap_threshold = as_real(k, v); }},
      {"mcts.min_child_visits",
       [](RunConfig& c, auto& k, auto& v) { c.mcts.min_child_visits = as_int(k, v); }},
      {"mcts.seed", [](RunConfig& c, auto& k, auto& v) { c.mcts.rng_seed = as_seed(k, v); }},
      {"mcts.failure_budget",
       [](RunConfig& c, auto& k, auto& v) { c.mcts.failure_budget = as_int(k, v); }},
      {"mcts.concurrent_expansion",
       [](RunConfig& c, auto& k, auto& v) { c.mcts.concurrent_expansion = as_bool(k, v); }},
      {"search.beam_size", [](RunConfig& c, auto& k, auto& v) { c.search.beam_size = as_int(k, v); }},
      {"search.candidate_count",
       [](RunConfig& c, auto& k, auto& v) { c.search.candidate_count = as_int(k, v); }},
      {"search.max_depth", [](RunConfig& c, auto& k, auto& v) { c.search.max_depth = as_int(k, v); }},
      {"search.agent_temperature",
       [](RunConfig& c, auto& k, auto& v) { c.search.agent_temperature = as_real(k, v); }},
      {"search.world_temperature",
       [](RunConfig& c, auto& k, auto& v) { c.search.world_temperature = as_real(k, v); }},
      {"search.seed", [](RunConfig& c, auto& k, auto& v) { c.search.rng_seed = as_seed(k, v); }},
      {"backend.kind", [](RunConfig& c, auto& k, auto& v) { c.backend = backend_from(as_string(k, v)); }},
      {"backend.base_url", [](RunConfig& c, auto& k, auto& v) { c.http.base_url = as_string(k, v); }},
      {"backend.model", [](RunConfig& c, auto& k, auto& v) { c.http.model = as_string(k, v); }},
      {"backend.api_key_env",
       [](RunConfig& c, auto& k, auto& v) { c.http.api_key_env = as_string(k, v); }},
      {"backend.max_tokens", [](RunConfig& c, auto& k, auto& v) { c.http.max_tokens = as_int(k, v); }},
      {"backend.retry_attempts",
       [](RunConfig& c, auto& k, auto& v) { c.http.retry.attempts = as_int(k, v); }},
      {"backend.retry_backoff_ms",
       [](RunConfig& c, auto& k, auto& v) {
         c.http.retry.initial_backoff = std::chrono::milliseconds(as_int(k, v));
       }},
      {"backend.timeout_s",
       [](RunConfig& c, auto& k, auto& v) { c.http.timeout = std::chrono::seconds(as_int(k, v)); }},
      {"backend.style", [](RunConfig& c, auto& k, auto& v) { c.style = style_from(as_string(k, v)); }},
      {"backend.n_shots", [](RunConfig& c, auto& k, auto& v) { c.n_shots = as_int(k, v); }},
      {"views.include_statement",
       [](RunConfig& c, auto& k, auto& v) { c.include_statement = as_bool(k, v); }},
  };
  return table;
}

}  // namespace

PromptConfig RunConfig::prompts() const {
  PromptConfig p = PromptConfig::for_style(style);
  p.n_shots = n_shots;
  return p;
}

void RunConfig::apply(const ConfigValues& values) {
  for (const auto& [key, value] : values) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(*this, key, value);
  }
}

void RunConfig::validate() const {
  mcts.validate();
  search.validate();
  if (n_shots < 0) throw ConfigError("backend.n_shots must be >= 0");
  if (http.max_tokens < 1) throw ConfigError("backend.max_tokens must be >= 1");
}

json RunConfig::to_json() const {
  return json{{"mcts.n_candidates", mcts.n_candidates},
              {"mcts.depth_limit", mcts.depth_limit},
              {"mcts.w_exp", mcts.w_exp},
              {"mcts.n_iteration", mcts.n_iteration},
              {"mcts.agent_temperature", mcts.agent_temperature},
              {"mcts.world_temperature", mcts.world_temperature},
              {"mcts.pair_gap_threshold", mcts.pair_gap_threshold},
              {"mcts.min_child_visits", mcts.min_child_visits},
              {"mcts.seed", mcts.rng_seed},
              {"mcts.failure_budget", mcts.failure_budget},
              {"mcts.concurrent_expansion", mcts.concurrent_expansion},
              {"search.beam_size", search.beam_size},
              {"search.candidate_count", search.candidate_count},
              {"search.max_depth", search.max_depth},
              {"search.agent_temperature", search.agent_temperature},
              {"search.world_temperature", search.world_temperature},
              {"search.seed", search.rng_seed},
              {"backend.kind", to_string(backend)},
              {"backend.base_url", http.base_url},
              {"backend.model", http.model},
              {"backend.api_key_env", http.api_key_env},
              {"backend.max_tokens", http.max_tokens},
              {"backend.retry_attempts", http.retry.attempts},
              {"backend.retry_backoff_ms", http.retry.initial_backoff.count()},
              {"backend.timeout_s", http.timeout.count()},
              {"backend.style", style == WorldStyle::math ? "math" : "gsm8k"},
              {"backend.n_shots", n_shots},
              {"views.include_statement", include_statement}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig config;
  ConfigValues values;
  for (const auto& [key, value] : j.items()) values.emplace(key, value);
  config.apply(values);
  return config;
}

std::string RunConfig::hash() const { return hex64(fnv1a(to_json().dump())); }

RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  RunConfig config;
  config.apply(parse_config_text(text));
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------
// Corpus

namespace {

SyntheticProblem synthetic_from_json(const json& j) {
  SyntheticProblem p;
  p.start = j.at("start").get<std::int64_t>();
  p.target = j.at("target").get<std::int64_t>();
  p.max_depth = j.at("max_depth").get<int>();
  const json& ops = j.at("ops");
  if (ops.is_string()) {
    std::string_view rest = ops.get_ref<const std::string&>();
    while (!rest.empty()) {
      const auto bar = rest.find('|');
      p.allowed_ops.push_back(parse_op(rest.substr(0, bar)));
      if (bar == std::string_view::npos) break;
      rest.remove_prefix(bar + 1);
    }
  } else {
    for (const auto& op : ops) p.allowed_ops.push_back(parse_op(op.get<std::string>()));
  }
  if (p.allowed_ops.empty()) throw std::invalid_argument("synthetic problem needs ops");
  if (p.max_depth < 1) throw std::invalid_argument("synthetic max_depth must be >= 1");
  return p;
}

std::string gold_text(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) return j.dump();
  throw std::invalid_argument("gold_answer must be a string or number");
}

}  // namespace

Corpus parse_corpus(std::string_view bytes) {
  Corpus corpus;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(bytes)) {
    ++line_no;
    if (trim(line.text).empty()) continue;
    CorpusError error{line_no, "", ""};
    try {
      const json j = json::parse(line.text);
      if (!j.is_object()) throw std::invalid_argument("problem must be a JSON object");
      if (j.contains("id") && j["id"].is_string()) error.problem_id = j["id"].get<std::string>();
      CorpusEntry entry;
      entry.problem.id = j.at("id").get<std::string>();
      if (entry.problem.id.empty()) throw std::invalid_argument("empty problem id");
      entry.problem.source_tag = j.value("source_tag", std::string());
      if (j.contains("synthetic")) {
        const json& s = j["synthetic"];
        SyntheticCase c{entry.problem.id, synthetic_from_json(s), s.value("noise", 0.0)};
        if (c.noise < 0.0 || c.noise > 1.0) throw std::invalid_argument("noise must lie in [0, 1]");
        Problem generated = c.problem.to_problem(entry.problem.id,
                                                 entry.problem.source_tag.empty()
                                                     ? std::string("synthetic")
                                                     : entry.problem.source_tag);
        if (j.contains("statement")) generated.statement = j["statement"].get<std::string>();
        if (j.contains("gold_answer")) generated.gold_answer = parse_gold_answer(gold_text(j["gold_answer"]));
        entry.problem = std::move(generated);
        entry.synthetic = std::move(c);
      } else {
        entry.problem.statement = j.at("statement").get<std::string>();
        if (entry.problem.statement.empty()) throw std::invalid_argument("empty statement");
        entry.problem.gold_answer = parse_gold_answer(gold_text(j.at("gold_answer")));
      }
      if (!ids.insert(entry.problem.id).second) {
        throw std::invalid_argument("duplicate problem id '" + entry.problem.id + "'");
      }
      corpus.entries.push_back(std::move(entry));
    } catch (const std::exception& e) {
      error.message = e.what();
      corpus.errors.push_back(std::move(error));
    }
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::string bytes;
  try {
    bytes = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_corpus(bytes);
}

Corpus synthetic_corpus(const GeneratorSpec& spec) {
  Corpus corpus;
  for (auto& c : generate_corpus(spec)) {
    CorpusEntry entry{c.problem.to_problem(c.id), std::move(c)};
    corpus.entries.push_back(std::move(entry));
  }
  return corpus;
}

json corpus_entry_json(const CorpusEntry& entry) {
  json j{{"id", entry.problem.id},
         {"statement", entry.problem.statement},
         {"gold_answer", entry.problem.gold_answer.raw},
         {"source_tag", entry.problem.source_tag}};
  if (entry.synthetic) {
    const auto& p = entry.synthetic->problem;
    std::string ops;
    for (const auto& op : p.allowed_ops) {
      if (!ops.empty()) ops += '|';
      ops += op.label();
    }
    j["synthetic"] = {{"start", p.start},
                      {"target", p.target},
                      {"ops", ops},
                      {"max_depth", p.max_depth},
                      {"noise", entry.synthetic->noise}};
  }
  return j;
}

}  // namespace stepsearch
