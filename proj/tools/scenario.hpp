#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rqdet::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,          // numerical failure or failed acceptance checks
  kValidation = 2,       // config, schema or input-file errors
  kStrictWarnings = 3,   // --strict-warnings and a numerical warning was raised
};

struct RunOptions {
  std::string config;
  std::string out_dir = ".";
  int threads = 0;  // 0: RQDET_THREADS, then hardware concurrency
  bool check = false;
  bool strict_warnings = false;
};

/// Runs one scenario file (or, with `check`, an acceptance-suite file).
/// Progress and warnings go to `err`; the returned value is the exit code.
int run(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Command-line entry point: `rqdet run <config.json> [--check] [--out DIR]
/// [--threads N] [--strict-warnings]`.
int main(int argc, char** argv);

}  // namespace rqdet::cli
