#pragma once

// Deterministic interpreter for the instruction subset the decoder accepts,
// plus the exception entry/return mechanics the trap hooks rely on. Used as
// the differential oracle: run the original and the instrumented image from
// the same entry point and compare terminal states.

#include <optional>
#include <string>
#include <vector>

#include "bmr/decoder.hpp"
#include "bmr/image.hpp"
#include "bmr/types.hpp"

namespace bmr {

struct RamConfig {
  u32 base = 0x20000000;
  u32 size = 0x10000;
};

enum class StopCause {
  running,              // internal: not stopped yet
  breakpoint,           // bkpt sentinel reached
  retired_limit,        // instruction budget exhausted
  memory_fault,         // access outside the map, store to flash, misalignment
  undefined_no_handler, // undefined instruction and no usable vector entry
  harness_fault,        // emulator-level error: subset gap or broken hook code
};

const char* stop_cause_name(StopCause c);

struct MachineState {
  u32 r[16] = {};  // r13 = sp, r14 = lr, r15 = pc (bit 0 never stored)
  u32 xpsr = 0;
  bool handler_mode = false;
  u64 retired = 0;

  u32 sp() const { return r[13]; }
  bool flag_n() const { return (xpsr >> 31) & 1; }
  bool flag_z() const { return (xpsr >> 30) & 1; }
  bool flag_c() const { return (xpsr >> 29) & 1; }
  bool flag_v() const { return (xpsr >> 28) & 1; }
};

struct TraceSample {
  u32 pc;
  u64 retired;
};

// One handler episode: from exception entry to the matching exception return.
struct TrapEpisode {
  u32 site;        // faulting instruction address (frame return address)
  u64 cost;        // instructions retired inside the episode
  u32 stack_bytes; // bytes used below the pre-fault application sp
};

struct Trace {
  StopCause cause = StopCause::running;
  std::string detail;
  MachineState final_state;
  std::vector<u8> final_ram;
  std::vector<TrapEpisode> traps;
  u32 max_trap_stack_bytes = 0;
  std::vector<TraceSample> samples;  // only filled when recording is enabled
};

class Machine {
 public:
  Machine(const FirmwareImage& image, RamConfig ram, int vector_index);

  // Resets registers, zeroes RAM, loads sp from vector slot 0, and runs
  // until a stop cause fires or `max_retired` instructions have retired.
  Trace run(u32 entry, u64 max_retired, bool record = false);

  MachineState& state() { return st_; }
  const RamConfig& ram_config() const { return ram_cfg_; }

 private:
  struct Episode {
    bool active = false;
    u32 site = 0;
    u32 app_sp = 0;
    u64 entry_retired = 0;
    u32 min_sp = 0;
  };

  void reset(u32 entry);
  void stop(StopCause c, const std::string& detail);
  bool read_mem(u32 addr, u32 size, u32& out);
  bool write_mem(u32 addr, u32 size, u32 value);
  void exec(const Instruction& i, bool in_it);
  void enter_exception(u32 faulting_address);
  void exception_return(u32 magic);
  void write_pc_branch(u32 target);       // bit 0 discarded
  void write_pc_interworking(u32 target); // bit 0 required set
  void set_nz(u32 result);
  u32 add_with_carry(u32 x, u32 y, u32 carry_in, bool set);
  u32 shifted(u32 value, ShiftKind kind, u32 amount, bool set_carry);
  u8 itstate() const;
  void set_itstate(u8 v);

  FirmwareImage flash_;
  RamConfig ram_cfg_;
  std::vector<u8> ram_;
  int vector_index_;
  MachineState st_;
  StopCause cause_ = StopCause::running;
  std::string detail_;
  Episode episode_;
  std::vector<TrapEpisode> traps_;
  u32 max_trap_stack_ = 0;
  bool pc_written_ = false;
};

// Address ranges excluded from RAM comparison (payload-owned state, hook
// scratch below the stack pointer).
struct ExcludedRange {
  u32 base;
  u32 size;
};

struct DivergenceReport {
  bool equivalent;
  std::string what;  // first divergent item, empty when equivalent
};

// Compares termination cause, r0-r12, sp, lr, flags, and RAM outside the
// excluded ranges. Traces with different stop causes are incomparable.
DivergenceReport diff(const Trace& a, const Trace& b, const RamConfig& ram,
                      const std::vector<ExcludedRange>& exclude = {});

// Retired-instruction cost of the trap episode for `site`; empty if that
// site never trapped during the run.
std::optional<u64> measure_trap_cost(const Trace& t, u32 site);

}  // namespace bmr
