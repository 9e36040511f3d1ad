#include "stepsearch/json_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stepsearch/answer.hpp"

namespace stepsearch {

using nlohmann::json;

std::string rational_to_string(const Rational& value) { return value.str(); }

namespace {

std::string_view kind_name(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::number: return "number";
    case AnswerKind::latex_boxed: return "latex_boxed";
    case AnswerKind::text: return "text";
  }
  return "text";
}

AnswerKind kind_from_name(const std::string& name) {
  if (name == "number") return AnswerKind::number;
  if (name == "latex_boxed") return AnswerKind::latex_boxed;
  if (name == "text") return AnswerKind::text;
  throw std::invalid_argument("unknown answer kind '" + name + "'");
}

}  // namespace

void to_json(json& j, const Answer& a) {
  j = json{{"raw", a.raw},
           {"numeric", a.numeric ? json(rational_to_string(*a.numeric)) : json(nullptr)},
           {"kind", kind_name(a.kind)}};
}

void from_json(const json& j, Answer& a) {
  a.raw = j.at("raw").get<std::string>();
  a.kind = kind_from_name(j.at("kind").get<std::string>());
  a.numeric.reset();
  if (const auto& n = j.at("numeric"); !n.is_null()) a.numeric = Rational(n.get<std::string>());
  if (a.kind == AnswerKind::number && !a.numeric) {
    throw std::invalid_argument("number answer without numeric value");
  }
}

void to_json(json& j, const Step& s) {
  j = json{{"thought", s.thought}, {"expression", s.expression}, {"index", s.index}};
}

void from_json(const json& j, Step& s) {
  s.thought = j.at("thought").get<std::string>();
  s.expression = j.at("expression").get<std::string>();
  s.index = j.at("index").get<int>();
}

void to_json(json& j, const Trajectory& t) {
  j = json{{"problem_id", t.problem_id},
           {"steps", t.steps},
           {"terminal", t.terminal},
           {"final_answer", t.final_answer ? json(*t.final_answer) : json(nullptr)},
           {"depth", t.depth()}};
}

void from_json(const json& j, Trajectory& t) {
  t.problem_id = j.at("problem_id").get<std::string>();
  t.steps = j.at("steps").get<std::vector<Step>>();
  t.terminal = j.at("terminal").get<bool>();
  t.final_answer.reset();
  if (const auto& fa = j.at("final_answer"); !fa.is_null()) t.final_answer = fa.get<Answer>();
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    if (t.steps[i].index != static_cast<int>(i)) {
      throw std::invalid_argument("step indices must be 0..depth-1 without gaps");
    }
  }
  if (j.at("depth").get<int>() != t.depth()) throw std::invalid_argument("depth mismatch");
  if (t.final_answer.has_value() != t.terminal) {
    throw std::invalid_argument("final_answer must be present iff terminal");
  }
}

void to_json(json& j, const SearchNode& n) {
  j = json{{"node_id", n.node_id},
           {"state", n.state},
           {"parent", n.parent ? json(*n.parent) : json(nullptr)},
           {"children", n.children},
           {"visits", n.visits},
           {"correct", n.correct},
           {"action_taken", n.action_taken ? json(*n.action_taken) : json(nullptr)},
           {"rollouts", n.rollouts},
           {"dead_end", n.dead_end}};
}

void from_json(const json& j, SearchNode& n) {
  n.node_id = j.at("node_id").get<NodeId>();
  n.state = j.at("state").get<Trajectory>();
  n.parent.reset();
  if (const auto& p = j.at("parent"); !p.is_null()) n.parent = p.get<NodeId>();
  n.children = j.at("children").get<std::vector<NodeId>>();
  n.visits = j.at("visits").get<std::int64_t>();
  n.correct = j.at("correct").get<std::int64_t>();
  n.action_taken.reset();
  if (const auto& a = j.at("action_taken"); !a.is_null()) n.action_taken = a.get<std::string>();
  n.rollouts = j.value("rollouts", std::int64_t{0});
  n.dead_end = j.value("dead_end", false);
}

void to_json(json& j, const PreferencePair& p) {
  j = json{{"schema_version", kSchemaVersion},
           {"problem_id", p.problem_id},
           {"problem_statement", p.problem_statement},
           {"prefix", p.prefix},
           {"chosen", p.chosen},
           {"rejected", p.rejected},
           {"value_chosen", p.value_chosen},
           {"value_rejected", p.value_rejected},
           {"gap", p.gap},
           {"tree_id", p.tree_id}};
}

void from_json(const json& j, PreferencePair& p) {
  if (j.value("schema_version", kSchemaVersion) != kSchemaVersion) {
    throw std::invalid_argument("unsupported schema_version");
  }
  p.problem_id = j.at("problem_id").get<std::string>();
  p.problem_statement = j.value("problem_statement", std::string{});
  p.prefix = j.at("prefix").get<Trajectory>();
  p.chosen = j.at("chosen").get<std::vector<Step>>();
  p.rejected = j.at("rejected").get<std::vector<Step>>();
  p.value_chosen = j.at("value_chosen").get<double>();
  p.value_rejected = j.at("value_rejected").get<double>();
  p.gap = j.at("gap").get<double>();
  p.tree_id = j.at("tree_id").get<std::string>();
  if (p.chosen.empty() || p.rejected.empty()) {
    throw std::invalid_argument("pair suffixes must be non-empty");
  }
}

std::string to_jsonl(const std::vector<PreferencePair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += json(p).dump();
    out += '\n';
  }
  return out;
}

std::vector<Line> split_lines(std::string_view bytes) {
  std::vector<Line> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto end = bytes.find('\n', start);
    if (end == std::string_view::npos) end = bytes.size();
    lines.push_back(Line{bytes.substr(start, end - start), start});
    start = end + 1;
  }
  return lines;
}

std::vector<PreferencePair> read_pairs_file(const std::string& path) {
  const std::string bytes = read_text_file(path);
  std::vector<PreferencePair> pairs;
  for (const auto& line : split_lines(bytes)) {
    if (line.text.empty()) continue;
    try {
      pairs.push_back(json::parse(line.text).get<PreferencePair>());
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": byte " + std::to_string(line.offset) + ": " + e.what());
    }
  }
  return pairs;
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace stepsearch
