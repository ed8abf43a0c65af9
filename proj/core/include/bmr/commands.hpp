#pragma once

// The three tool verbs, factored out of the executable so they are testable
// without spawning processes. Each returns the process exit code.

#include <string>

namespace bmr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;       // usage, config, or image trouble
inline constexpr int kExitFootprint = 3;   // verify: unexpected byte changes
inline constexpr int kExitDivergence = 4;  // verify: behavior mismatch

struct CommandOptions {
  std::string config_path;  // --config
  std::string input_path;   // --in
  std::string output_path;  // --out
  std::string report_path;  // --report, stdout when empty
  std::string range;        // --range lo:hi, inspect listing window
  bool emit_config = false; // inspect: print a config skeleton instead
};

// Reads --in, installs the hooks named by --config, writes --out and the
// instrument report.
int run_instrument(const CommandOptions& opt);

// Treats --in as the original and --out as the instrumented artifact and
// checks the pair: byte footprint first, then emulated behavior.
int run_verify(const CommandOptions& opt);

// Decodes and screens the image (or emits a starter config with
// emit_config set).
int run_inspect(const CommandOptions& opt);

}  // namespace bmr
