#pragma once

// Command-line front end: gen-data, train, eval, gradcheck, render.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <iosfwd>
#include <string>
#include <vector>

namespace rgcseg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

// Ablation variant letter for the two toggles: A (neither), B (rgc),
// C (aug), E (both).
char variant_letter(bool use_aug, bool use_rgc);

}  // namespace rgcseg
