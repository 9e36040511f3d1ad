#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepsearch/backend.hpp"
#include "stepsearch/http.hpp"
#include "stepsearch/mcts.hpp"
#include "stepsearch/search.hpp"
#include "stepsearch/synthetic.hpp"

namespace stepsearch {

/// Flat key/value view of a TOML-style file. `[section]` headers prefix the
/// following keys ("search.beam_size"). Values keep their JSON type: quoted
/// strings, integers, reals, true/false.
using ConfigValues = std::map<std::string, nlohmann::json>;

/// Throws ConfigError naming the line on malformed input.
ConfigValues parse_config_text(std::string_view text);

enum class BackendKind { synthetic, http, replay };

struct RunConfig {
  MctsConfig mcts;
  BeamConfig search;
  BackendKind backend = BackendKind::synthetic;
  HttpChatConfig http;
  WorldStyle style = WorldStyle::gsm8k;
  int n_shots = 0;
  bool include_statement = false;

  PromptConfig prompts() const;
  AnswerSpec answer_spec() const { return prompts().answer_spec; }

  /// Applies values over the current settings. Unknown keys and values of
  /// the wrong type raise ConfigError.
  void apply(const ConfigValues& values);
  void validate() const;
  /// Canonical form; round-trips through apply(from_json(...)).
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  /// Hex FNV-1a of the canonical JSON.
  std::string hash() const;
};

RunConfig load_run_config(const std::string& path);

struct CorpusEntry {
  Problem problem;
  std::optional<SyntheticCase> synthetic;
};

struct CorpusError {
  std::size_t line = 0;
  std::string problem_id;
  std::string message;
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  std::vector<CorpusError> errors;
};

/// Line-delimited JSON problems:
///   {id, statement, gold_answer, source_tag?,
///    synthetic?: {start, target, ops: "add3|mul2" or [..], max_depth, noise}}
/// Synthetic entries may omit statement and gold_answer. A malformed line
/// is recorded in `errors` and the rest still load.
Corpus parse_corpus(std::string_view bytes);
Corpus load_corpus(const std::string& path);

/// Corpus from a `--synthetic` generator spec.
Corpus synthetic_corpus(const GeneratorSpec& spec);

nlohmann::json corpus_entry_json(const CorpusEntry& entry);

}  // namespace stepsearch
