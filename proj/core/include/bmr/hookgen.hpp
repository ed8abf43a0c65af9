#pragma once

// Generates the self-contained hook system appended to an instrumented
// image: fault handler entry, dispatch over the stacked return address,
// per-site workers realizing the translation plans, and the shared
// exception-return tail. All code is fully linked against its final
// addresses; nothing outside the appended region is referenced except the
// displaced original fault handler.

#include <string>
#include <vector>

#include "bmr/translator.hpp"

namespace bmr {

// Hardware-stacked exception frame layout, offsets from the frame base.
struct ExceptionFrame {
  static constexpr u32 kR0 = 0x00;
  static constexpr u32 kR1 = 0x04;
  static constexpr u32 kR2 = 0x08;
  static constexpr u32 kR3 = 0x0C;
  static constexpr u32 kR12 = 0x10;
  static constexpr u32 kLR = 0x14;
  static constexpr u32 kReturnAddress = 0x18;
  static constexpr u32 kXpsr = 0x1C;
  static constexpr u32 kSize = 0x20;
  static constexpr u32 kPadBit = 9;  // stacked-xPSR bit: alignment pad inserted
};

// Upper bound on stack bytes the hook path uses below the pre-fault sp:
// 8-word frame (32) + alignment pad (4) + saved exception-return word (4) +
// payload envelope r0-r12 (52) + one spill slot (4).
constexpr u32 kHookStackBudget = 96;

struct HookSite {
  u32 address = 0;
  TranslationPlan plan;
  std::vector<u8> payload;  // position-independent code, empty = none
};

struct DispatchEntry {
  u32 site_address;    // frame return-address key
  u32 worker_address;  // bit 0 set
};

// Per-site placement inside the blob, offsets relative to region_base.
struct SiteLayout {
  u32 site_address = 0;
  u32 worker_offset = 0;
  u32 worker_size = 0;
  u32 payload_offset = 0;  // 0 when the site has no payload
  u32 payload_size = 0;
  u32 plan_size = 0;       // number of plan steps

  bool operator==(const SiteLayout&) const = default;
};

struct HookBlob {
  std::vector<u8> code;
  u32 region_base = 0;
  u32 handler_entry = 0;  // absolute, bit 0 set
  u32 original_fault_handler = 0;
  std::vector<DispatchEntry> dispatch_table;  // sorted by site_address
  std::vector<SiteLayout> sites;              // same order as the table
  u32 handler_size = 0;
  u32 dispatcher_size = 0;
  u32 table_offset = 0;
  u32 ret_offset = 0;
};

// Assembles the complete blob for `region_base`. Sites may arrive in any
// order; the dispatch table is emitted sorted by site address. Throws
// std::runtime_error on an internal emission failure (indicates a bug, not
// bad input: infeasible plans are rejected by the translator).
HookBlob assemble_hook_blob(const std::vector<HookSite>& sites, u32 region_base,
                            u32 original_fault_handler);

}  // namespace bmr
