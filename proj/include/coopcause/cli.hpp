#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coopcause/evidence.hpp"

namespace coopcause::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name) and returns the exit
/// code. Results go to files under --out or to `out`; diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Mass file: one focal element per line as `subset:mass` ("We,Re:0.3",
/// "OMEGA:0.3"); blank lines separate mass functions, '#' starts a comment.
/// Throws ConfigError with the line number on malformed input or a mass
/// function that does not sum to 1.
std::vector<MassFunction> parse_masses(std::istream& in);

/// Output directory used when --out is absent: $COOPCAUSE_OUT, else "out".
std::string default_out_dir();

}  // namespace coopcause::cli
