#pragma once

// Line-oriented tool configuration: one `key value...` pair per line, `#`
// comments, hex or decimal numerics. Deliberately not a general format;
// every key is listed here and unknown keys are hard errors so that typos
// surface at parse time instead of as silently-default behavior.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmr/emu.hpp"
#include "bmr/patcher.hpp"
#include "bmr/types.hpp"

namespace bmr {

struct ConfigError : std::runtime_error {
  int line;  // 0 for whole-file problems such as a missing required key
  ConfigError(int l, const std::string& what)
      : std::runtime_error(l > 0 ? "line " + std::to_string(l) + ": " + what : what), line(l) {}
};

struct ToolConfig {
  u32 base_address = 0x08000000;
  u32 evt_offset = 0;
  u32 ram_base = 0x20000000;
  u32 ram_size = 0x10000;
  u32 entry = 0;           // 0 means: take the reset vector from the image
  int vector_index = 3;    // hardfault unless the config says usagefault
  u64 budget = 200000;     // retired-instruction limit for emulated runs
  std::vector<SiteRequest> sites;
  std::vector<ExcludedRange> ignore;  // RAM ranges left out of state comparison

  RamConfig ram() const { return {ram_base, ram_size}; }
};

// Accepted lines:
//   base_address <num>      image load address
//   evt_offset <num>        vector table offset inside the image
//   ram_base <num>          start of the emulated RAM window
//   ram_size <num>          size of the emulated RAM window
//   entry <num>             run entry point (bit 0 optional)
//   vector hardfault|usagefault
//   budget <num>            emulated instruction limit
//   site <num> [payload <hex>|@<file>]
//   ignore <num> <num>      base and size of RAM the comparison skips
// Payload files named with @ resolve relative to `payload_dir`.
ToolConfig parse_config(std::istream& in, const std::string& payload_dir = ".");

ToolConfig load_config(const std::string& path);

// Emits a file that parses back to `cfg`, payloads inline.
void write_config(std::ostream& out, const ToolConfig& cfg);

}  // namespace bmr
