#pragma once

// JSON mappings for the domain types. Field names follow the type
// definitions; every line-delimited file carries schema_version.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepsearch/types.hpp"

namespace stepsearch {

std::string rational_to_string(const Rational& value);

void to_json(nlohmann::json& j, const Answer& a);
void from_json(const nlohmann::json& j, Answer& a);
void to_json(nlohmann::json& j, const Step& s);
void from_json(const nlohmann::json& j, Step& s);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);
void to_json(nlohmann::json& j, const SearchNode& n);
void from_json(const nlohmann::json& j, SearchNode& n);
void to_json(nlohmann::json& j, const PreferencePair& p);
void from_json(const nlohmann::json& j, PreferencePair& p);

std::string to_jsonl(const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);
std::string read_text_file(const std::string& path);

/// Splits on '\n', dropping a trailing empty line. Offsets are byte offsets
/// of each line start.
struct Line {
  std::string_view text;
  std::size_t offset;
};
std::vector<Line> split_lines(std::string_view bytes);

}  // namespace stepsearch
