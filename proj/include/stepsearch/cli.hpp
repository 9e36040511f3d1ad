#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace stepsearch::cli {

enum ExitCode : int {
  kOk = 0,
  kReplayFailed = 1,
  kUsage = 2,
  kUnavailable = 3,
  kInvariant = 4,
};

/// Entry point behind the `stepsearch` binary; `args` excludes the program
/// name. Commands: collect, views, search, replay, corpus, validate.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// File-name-safe form of a problem id.
std::string file_stem(std::string_view problem_id);

}  // namespace stepsearch::cli
