#pragma once

// Shared fixtures for the test suites: a builder for tiny firmware images,
// a corpus of programs that collectively exercises every translation rule,
// and the differential harness comparing original vs instrumented runs.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bmr/assembler.hpp"
#include "bmr/emu.hpp"
#include "bmr/image.hpp"
#include "bmr/patcher.hpp"

namespace bmr::testing {

inline constexpr u32 kBase = 0x08000000;
inline constexpr u32 kRamBase = 0x20000000;
inline constexpr u32 kRamSize = 0x10000;
inline constexpr u32 kScratch = 0x20000400;  // program data area, far from the stack

// Wraps the assembler so every emitted instruction start is recorded; those
// addresses are the candidate hook sites.
struct Prog {
  CodeBuffer& cb;
  std::vector<u32>& starts;

  u32 cursor() const { return cb.cursor(); }
  Label label() { return cb.label(); }
  Label here() { return cb.here(); }
  void bind(Label l) { cb.bind(l); }

  void put(const Instruction& i) {
    starts.push_back(cb.cursor());
    cb.put(i);
  }
  // Raw encodings for forms without builders; still candidate sites.
  void ins16(u16 hw) {
    starts.push_back(cb.cursor());
    cb.put_half(hw);
  }
  void ins32(u16 hw1, u16 hw2) {
    starts.push_back(cb.cursor());
    cb.put_half(hw1);
    cb.put_half(hw2);
  }
  void b(Label t, bool wide = true) {
    starts.push_back(cb.cursor());
    cb.b(t, wide);
  }
  void b(Cond c, Label t, bool wide = true) {
    starts.push_back(cb.cursor());
    cb.b(c, t, wide);
  }
  void bl(Label t) {
    starts.push_back(cb.cursor());
    cb.bl(t);
  }
  void cbz(Reg rn, Label t) {
    starts.push_back(cb.cursor());
    cb.cbz(rn, t);
  }
  void cbnz(Reg rn, Label t) {
    starts.push_back(cb.cursor());
    cb.cbnz(rn, t);
  }
  // Inline data: never a candidate site.
  void data_half(u16 v) { cb.put_half(v); }
  void data_word(u32 v) { cb.put_word(v); }
  void data_byte(u8 v) { cb.put_byte(v); }
  void align(u32 n) { cb.align(n); }
  void stop() { put(ins::bkpt(0)); }
};

using Generator = std::function<void(Prog&)>;

struct TestProgram {
  std::string name;
  FirmwareImage image;
  u32 entry = 0;            // bit 0 set
  u32 default_handler = 0;  // the bkpt 0xAA catch-all every vector points at
  std::vector<u32> instruction_starts;
};

// Lays out EVT(16) + default handler + generated body. The generator runs
// twice so it may capture its own addresses (label-free absolute constants).
TestProgram make_program(const std::string& name, const Generator& gen);

// Programs covering, between them, every supported translation rule.
const std::vector<TestProgram>& corpus();

// Instruction starts the patcher would accept as hook sites.
std::vector<u32> eligible_sites(const TestProgram& p);

// IT mask nibble for a first condition and the T/E pattern of the remaining
// block instructions ("": length 1, "TE": length 3, and so on).
u8 it_mask(Cond c, const std::string& suffix);

struct EquivalenceOutcome {
  bool ok = false;
  std::string what;   // first divergence, empty when ok
  Trace original;
  Trace instrumented;
  PatchResult patch;
};

// Instruments `sites` (optionally with payloads), runs both images, and
// compares terminal states. Extra exclusions join the standard scratch zone
// below the final stack pointer.
EquivalenceOutcome check_equivalence(const TestProgram& p, const std::vector<u32>& sites,
                                     const std::vector<std::pair<u32, std::vector<u8>>>& payloads = {},
                                     const std::vector<ExcludedRange>& extra_exclude = {},
                                     int vector_index = 3, u64 budget = 200000);

// Least-squares line fit, for the dispatcher scaling checks.
struct LineFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};
LineFit fit_line(const std::vector<std::pair<double, double>>& points);

}  // namespace bmr::testing
