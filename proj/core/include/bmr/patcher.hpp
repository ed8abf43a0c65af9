#pragma once

// Orchestrates instrumentation of a firmware image: screens the requested
// sites, builds the hook region, writes the trap opcodes and the vector
// entry, and renders the text reports. Also the reverse direction: checking
// that an instrumented binary touches only what instrumentation may touch
// and that it still behaves like the original.

#include <iosfwd>
#include <string>
#include <vector>

#include "bmr/emu.hpp"
#include "bmr/hookgen.hpp"
#include "bmr/image.hpp"
#include "bmr/translator.hpp"
#include "bmr/types.hpp"

namespace bmr {

// The opcode written over the first halfword of every accepted site. It sits
// in the permanently-undefined encoding space, so any core that fetches it
// raises the configured fault regardless of architecture revision.
inline constexpr u16 kTrapOpcode = 0xDE00;

struct SiteRequest {
  u32 address = 0;
  std::vector<u8> payload;  // optional code blob called from the worker
};

struct SiteOutcome {
  u32 address = 0;
  bool accepted = false;
  std::string reason;      // rejection reason, empty when accepted
  std::string text;        // decoded instruction, empty when undecodable
  TranslationPlan plan;    // meaningful only when accepted
  u32 worker_offset = 0;   // offset of the worker inside the hook region
  u32 plan_size = 0;       // worker code bytes
};

struct PatchResult {
  FirmwareImage image;     // instrumented copy of the input
  HookBlob blob;           // empty code when no site was accepted
  int vector_index = 0;
  u32 evt_original = 0;    // vector entry the hook region displaced
  std::vector<SiteOutcome> outcomes;

  size_t accepted_count() const;
  size_t rejected_count() const;
};

// Screens a single address the way instrument_image would, without changing
// anything. Used by the inspect listing.
SiteOutcome probe_site(const FirmwareImage& image, u32 address);

// Copies the image and installs hooks for every acceptable request. With no
// acceptable site the copy comes back byte-identical. Throws ImageError only
// for structural problems (vector slot out of range); per-site trouble lands
// in the outcome list instead.
PatchResult instrument_image(const FirmwareImage& image,
                             const std::vector<SiteRequest>& requests, int vector_index);

enum class VerifyStatus {
  clean,
  footprint_violation,   // bytes changed that instrumentation may not touch
  behavior_divergence,   // emulated runs ended in different states
};

const char* verify_status_name(VerifyStatus s);

struct VerifyReport {
  VerifyStatus status = VerifyStatus::clean;
  std::string detail;              // first failure, empty when clean
  std::vector<u32> trap_sites;     // recovered from the byte diff
  int evt_index = -1;              // vector slot that was repointed, -1 if none
  u64 reference_retired = 0;
  u64 instrumented_retired = 0;
  size_t trap_count = 0;
  u32 max_trap_stack = 0;
};

// Footprint pass: every byte difference inside the original extent must be
// either the configured vector slot or an aligned halfword now holding the
// trap opcode. Behavior pass: both images run from `entry` for up to
// `max_retired` instructions and must stop in equivalent states, ignoring
// `exclude` ranges and the scratch region below the final stack pointer.
VerifyReport verify_images(const FirmwareImage& original, const FirmwareImage& instrumented,
                           int vector_index, u32 entry, const RamConfig& ram, u64 max_retired,
                           const std::vector<ExcludedRange>& exclude = {});

// Line-oriented report renderers shared by the command-line tool.
void write_instrument_report(std::ostream& out, const PatchResult& result);
void write_verify_report(std::ostream& out, const VerifyReport& report);

}  // namespace bmr
