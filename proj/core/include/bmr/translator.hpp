#pragma once

// Builds relocation plans for displaced instructions. PC-independent
// instructions replay verbatim; PC-involving ones are rewritten against a
// proxy register that carries the reconstructed PC (or branch target), with
// the hook glue feeding context values in and results back into the stacked
// exception frame.

#include <string>
#include <vector>

#include "bmr/decoder.hpp"

namespace bmr {

enum class StepKind : u8 {
  replay,            // original instruction, unchanged
  save_rx,           // preserve the register named in the step
  restore_rx,
  context_read_pc,   // proxy := architectural PC at the site (site + 4)
  context_write_ra,  // continuation address -> stacked return address
  emit,              // synthesized instruction, encoded as-is
  frame_write_lr,    // stacked LR := function return address (bl/blx)
  flag_bridge_begin, // the following steps may clobber live flags
  flag_bridge_end,
};

const char* step_kind_name(StepKind k);

struct EmissionStep {
  StepKind kind;
  Instruction instr;  // replay/emit: the instruction; save/restore: .rd names the register
};

// How the plan involves the application stack pointer.
enum class SpEffect : u8 {
  none,
  substituted,   // sp is read: the reconstructed application sp is substituted
  static_delta,  // sp is written by a compile-time-constant amount
};

struct TranslationPlan {
  u32 site = 0;
  Instruction original;
  Reg proxy = Reg::none;      // scratch carrying PC/target values
  Reg aux_proxy = Reg::none;  // second scratch (table branches, sp rebuild)
  std::vector<EmissionStep> steps;
  bool writes_frame_lr = false;    // bl/blx: stacked lr receives the return address
  bool needs_flag_bridge = false;  // cbz/cbnz: compare sequence is flag-bridged
  SpEffect sp_effect = SpEffect::none;
  i32 sp_delta = 0;  // bytes, static_delta only (pop > 0, push < 0)
};

enum class TranslateErrorKind : u8 {
  unsupported,       // exception-coupled instruction, cannot be displaced
  undecodable,
  no_free_register,  // scratch pool exhausted at this site
  unsupported_form,  // e.g. a stack pointer write by a runtime-computed amount
};

const char* translate_error_name(TranslateErrorKind k);

struct TranslateResult {
  bool ok = false;
  TranslationPlan plan;
  TranslateErrorKind error = TranslateErrorKind::unsupported;
  std::string detail;
};

// Lowest general register the instruction does not touch, skipping
// `also_avoid`; Reg::none when the pool is exhausted.
Reg select_proxy_register(const Instruction& instr, RegisterSet also_avoid = {});

TranslateResult translate(const Instruction& instr);

std::string to_string(const TranslationPlan& plan);

}  // namespace bmr
