#include "stepsearch/synthetic.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <regex>
#include <sstream>

namespace stepsearch {

namespace {

const std::regex& op_regex() {
  static const std::regex re(R"((add|sub|mul)\s*:?\s*(-?\d+))");
  return re;
}

SyntheticOp::Kind kind_from(const std::string& name) {
  if (name == "add") return SyntheticOp::Kind::add;
  if (name == "sub") return SyntheticOp::Kind::sub;
  return SyntheticOp::Kind::mul;
}

std::string_view symbol(SyntheticOp::Kind kind) {
  switch (kind) {
    case SyntheticOp::Kind::add: return "+";
    case SyntheticOp::Kind::sub: return "-";
    case SyntheticOp::Kind::mul: return "*";
  }
  return "?";
}

}  // namespace

std::string SyntheticOp::label() const {
  std::string name = kind == Kind::add ? "add" : kind == Kind::sub ? "sub" : "mul";
  return name + " " + std::to_string(operand);
}

std::int64_t SyntheticOp::apply(std::int64_t value) const {
  std::int64_t out = 0;
  bool overflow = false;
  switch (kind) {
    case Kind::add: overflow = __builtin_add_overflow(value, operand, &out); break;
    case Kind::sub: overflow = __builtin_sub_overflow(value, operand, &out); break;
    case Kind::mul: overflow = __builtin_mul_overflow(value, operand, &out); break;
  }
  if (overflow) throw std::overflow_error("synthetic op overflows: " + label());
  return out;
}

SyntheticOp parse_op(std::string_view text) {
  std::string s(text);
  std::smatch m;
  if (!std::regex_match(s, m, op_regex())) {
    throw std::invalid_argument("bad synthetic op '" + s + "' (expected e.g. add3, sub 1, mul:2)");
  }
  return SyntheticOp{kind_from(m[1].str()), std::stoll(m[2].str())};
}

std::string SyntheticProblem::statement() const {
  std::ostringstream out;
  out << "Start with " << start << ". Using only the operations ";
  for (std::size_t i = 0; i < allowed_ops.size(); ++i) {
    out << (i ? ", " : "") << allowed_ops[i].label();
  }
  out << ", reach " << target << " in at most " << max_depth << " steps.";
  return out.str();
}

Problem SyntheticProblem::to_problem(std::string id, std::string source_tag) const {
  Problem p;
  p.id = std::move(id);
  p.statement = statement();
  p.gold_answer = parse_gold_answer(std::to_string(target));
  p.source_tag = std::move(source_tag);
  return p;
}

SyntheticState synthetic_state(const SyntheticProblem& problem, const Trajectory& state,
                               const AnswerSpec& spec) {
  SyntheticState s{problem.start, 0};
  for (const auto& step : state.steps) {
    if (step.expression.empty()) continue;
    ++s.depth;
    auto answer = extract_answer(step.expression, spec);
    if (answer && answer->numeric && boost::multiprecision::denominator(*answer->numeric) == 1) {
      s.value = static_cast<std::int64_t>(boost::multiprecision::numerator(*answer->numeric));
    }
  }
  return s;
}

std::optional<SyntheticOp> op_from_thought(std::string_view thought) {
  static const std::regex re(R"(apply (add|sub|mul) (-?\d+))");
  std::string s(thought);
  std::smatch m;
  if (!std::regex_search(s, m, re)) return std::nullopt;
  return SyntheticOp{kind_from(m[1].str()), std::stoll(m[2].str())};
}

std::string op_thought(const SyntheticProblem& problem, std::int64_t value, const SyntheticOp& op) {
  std::string thought = "apply " + op.label();
  try {
    if (op.apply(value) == problem.target) return std::string(kAnswerPhrase) + " " + thought;
  } catch (const std::overflow_error&) {
  }
  return thought;
}

// ---------------------------------------------------------------------------

const ValueTable::Entry& ValueTable::at(const SyntheticState& s) const {
  if (const Entry* e = find(s)) return *e;
  throw std::out_of_range("state (" + std::to_string(s.value) + ", depth " +
                          std::to_string(s.depth) + ") was not enumerated");
}

const ValueTable::Entry* ValueTable::find(const SyntheticState& s) const {
  auto it = entries_.find(s);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<SyntheticState> ValueTable::states() const {
  std::vector<SyntheticState> out;
  out.reserve(entries_.size());
  for (const auto& [state, entry] : entries_) out.push_back(state);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.value < b.value;
  });
  return out;
}

ValueTable brute_force_values(const SyntheticProblem& problem, std::size_t max_states) {
  auto expandable = [&](const SyntheticState& s) {
    return s.value != problem.target && s.depth < problem.max_depth;
  };

  // Forward enumeration, one layer per depth.
  std::vector<std::vector<SyntheticState>> layers{{SyntheticState{problem.start, 0}}};
  std::size_t total = 1;
  for (int d = 0; d < problem.max_depth; ++d) {
    std::vector<std::int64_t> next;
    for (const auto& s : layers.back()) {
      if (!expandable(s)) continue;
      for (const auto& op : problem.allowed_ops) {
        try {
          next.push_back(op.apply(s.value));
        } catch (const std::overflow_error&) {
        }
      }
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    total += next.size();
    if (total > max_states) throw StateSpaceTooLarge(total, max_states);
    std::vector<SyntheticState> layer;
    layer.reserve(next.size());
    for (auto v : next) layer.push_back({v, d + 1});
    layers.push_back(std::move(layer));
  }

  // Backward induction: V*(solved) = 1, V*(capped) = 0, V*(s) = max_a V*(succ(s, a)).
  ValueTable table;
  for (int d = static_cast<int>(layers.size()) - 1; d >= 0; --d) {
    for (const auto& s : layers[static_cast<std::size_t>(d)]) {
      ValueTable::Entry entry;
      if (s.value == problem.target) {
        entry.v = 1.0;
      } else if (s.depth >= problem.max_depth) {
        entry.v = 0.0;
      } else {
        for (const auto& op : problem.allowed_ops) {
          double q = 0.0;
          try {
            q = table.at({op.apply(s.value), s.depth + 1}).v;
          } catch (const std::overflow_error&) {
          }
          entry.q.push_back(q);
          entry.v = std::max(entry.v, q);
        }
      }
      table.entries_.emplace(s, std::move(entry));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

SyntheticBackend::SyntheticBackend(SyntheticProblem problem, double noise)
    : problem_(std::move(problem)), noise_(noise), values_(brute_force_values(problem_)) {
  if (noise < 0.0 || noise > 1.0) throw std::invalid_argument("noise must lie in [0, 1]");
}

std::vector<std::string> SyntheticBackend::propose(const Problem&, const Trajectory& state, int n,
                                                   const CallOptions& options) {
  const SyntheticState s = synthetic_state(problem_, state);
  const ValueTable::Entry* entry = values_.find(s);
  if (s.value == problem_.target || s.depth >= problem_.max_depth || entry == nullptr ||
      entry->q.empty()) {
    return {std::string(kStopPhrase)};
  }

  std::vector<std::size_t> optimal, off;
  for (std::size_t i = 0; i < entry->q.size(); ++i) {
    (entry->q[i] >= entry->v ? optimal : off).push_back(i);
  }
  std::mt19937_64 rng(options.seed);
  std::bernoulli_distribution pick_off(noise_);
  std::vector<std::string> thoughts;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(n, 0)),
                                       problem_.allowed_ops.size());
  while (thoughts.size() < k) {
    const bool from_off = off.empty() ? false : optimal.empty() ? true : pick_off(rng);
    auto& group = from_off ? off : optimal;
    std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
    const std::size_t at = pick(rng);
    const SyntheticOp& op = problem_.allowed_ops[group[at]];
    thoughts.push_back(op_thought(problem_, s.value, op));
    group.erase(group.begin() + static_cast<std::ptrdiff_t>(at));
  }
  return thoughts;
}

std::string SyntheticBackend::execute(const Problem&, const Trajectory& state,
                                      std::string_view thought, const CallOptions&) {
  const SyntheticState s = synthetic_state(problem_, state);
  const auto op = op_from_thought(thought);
  std::int64_t result = s.value;
  std::string lhs = std::to_string(s.value);
  if (op) {
    try {
      result = op->apply(s.value);
      lhs += " " + std::string(symbol(op->kind)) + " " + std::to_string(op->operand);
    } catch (const std::overflow_error&) {
      result = s.value;
    }
  }
  return lhs + " = " + std::to_string(result) + ". The answer is " + std::to_string(result) + ".";
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  return parts;
}

std::pair<std::int64_t, std::int64_t> parse_range(const std::string& text) {
  auto dots = text.find("..");
  if (dots == std::string::npos) {
    auto v = std::stoll(text);
    return {v, v};
  }
  auto lo = std::stoll(text.substr(0, dots));
  auto hi = std::stoll(text.substr(dots + 2));
  if (hi < lo) throw std::invalid_argument("empty range '" + text + "'");
  return {lo, hi};
}

}  // namespace

GeneratorSpec parse_generator_spec(std::string_view text) {
  auto fields = split(text, ',');
  if (fields.size() != 7) {
    throw std::invalid_argument("--synthetic expects start,target,ops,depth,noise,count,seed");
  }
  GeneratorSpec spec;
  try {
    std::tie(spec.start_lo, spec.start_hi) = parse_range(fields[0]);
    spec.target_walk = fields[1] == "walk";
    if (!spec.target_walk) std::tie(spec.target_lo, spec.target_hi) = parse_range(fields[1]);
    for (const auto& op : split(fields[2], '|')) spec.ops.push_back(parse_op(op));
    spec.depth = std::stoi(fields[3]);
    spec.noise = std::stod(fields[4]);
    spec.count = std::stoi(fields[5]);
    spec.seed = std::stoull(fields[6]);
  } catch (const std::logic_error& e) {
    throw std::invalid_argument(std::string("--synthetic: ") + e.what());
  }
  if (spec.ops.empty() || spec.depth < 1 || spec.count < 0 || spec.noise < 0.0 || spec.noise > 1.0) {
    throw std::invalid_argument("--synthetic: need ops, depth >= 1, count >= 0, noise in [0,1]");
  }
  return spec;
}

std::vector<SyntheticCase> generate_corpus(const GeneratorSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<SyntheticCase> cases;
  for (int i = 0; i < spec.count; ++i) {
    SyntheticProblem p;
    p.allowed_ops = spec.ops;
    p.max_depth = spec.depth;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw std::invalid_argument("--synthetic: cannot draw start != target");
      p.start = std::uniform_int_distribution<std::int64_t>(spec.start_lo, spec.start_hi)(rng);
      if (spec.target_walk) {
        int length = std::uniform_int_distribution<int>(1, spec.depth)(rng);
        std::int64_t v = p.start;
        std::uniform_int_distribution<std::size_t> pick(0, spec.ops.size() - 1);
        for (int k = 0; k < length; ++k) v = spec.ops[pick(rng)].apply(v);
        p.target = v;
      } else {
        p.target = std::uniform_int_distribution<std::int64_t>(spec.target_lo, spec.target_hi)(rng);
      }
      if (p.target != p.start) break;
    }
    cases.push_back({"syn-" + std::to_string(spec.seed) + "-" + std::to_string(i), p, spec.noise});
  }
  return cases;
}

}  // namespace stepsearch
