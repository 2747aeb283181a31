#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sman::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;
inline constexpr int kMissingInput = 3;
inline constexpr int kBadData = 4;

// Runs one subcommand (generate | train | eval | early | ablate). args[0] is
// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sman::cli
