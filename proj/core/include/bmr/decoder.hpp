#pragma once

// Thumb/Thumb-2 subset decoder and re-encoder.
//
// Supported surface: every 16-bit Thumb encoding, plus the 32-bit encodings
// needed by the translator, the generated hook code, and the interpreter:
// B.W/BL, data-processing (modified immediate, plain immediate, shifted
// register), single loads/stores (imm12/imm8/register/literal), LDM/STM
// (IA and DB), TBB/TBH, MOVW/MOVT, MRS/MSR. Everything else decodes as
// `undecodable` and is reported, never guessed at.

#include <cstdint>
#include <string>

#include "bmr/types.hpp"

namespace bmr {

enum class OpKind : u8 {
  undecodable,
  dp,          // ALU op selected by DpOp; immediate or (shifted) register operand
  shift,       // LSL/LSR/ASR/ROR/RRX, by immediate or register
  movw, movt,
  adr,         // PC-relative address generation
  mul,
  sxth, sxtb, uxth, uxtb,
  rev, rev16, revsh,
  mem,         // single load/store; rn == PC means literal form
  mem_multi,   // LDM/STM family, incl. 16-bit PUSH/POP
  b, bl, bx, blx,
  cbz, cbnz,
  tbb, tbh,
  it,
  nop, yield,
  // exception-coupled instructions (the classifier's rejection set)
  bkpt, cps, mrs, msr, sev, wfe, wfi, svc,
  udf,
};

enum class DpOp : u8 {
  and_, bic, orr, orn, eor, add, adc, sbc, sub, rsb,
  cmp, cmn, tst, teq, mov, mvn,
};

enum class ShiftKind : u8 { lsl, lsr, asr, ror, rrx };

enum class MemSize : u8 { byte, half, word };

// Instruction classes driving the translation strategy.
enum class InstrClass : u8 {
  c1,           // PC-independent: relocation-safe as-is
  c2,           // PC-involving: needs proxy translation
  unsupported,  // exception-coupled set that cannot be hooked
  undecodable,
};

const char* instr_class_name(InstrClass c);

// One decoded instruction. `form` information is spread over the fields
// below; which fields are meaningful depends on `kind`.
struct Instruction {
  u32 address = 0;
  u16 hw1 = 0, hw2 = 0;
  u8 length = 2;        // 2 or 4 bytes

  OpKind kind = OpKind::undecodable;
  Cond cond = Cond::al;          // b only
  DpOp dp = DpOp::mov;
  ShiftKind shift_kind = ShiftKind::lsl;

  Reg rd = Reg::none, rn = Reg::none, rm = Reg::none, rt = Reg::none;
  Reg rs = Reg::none;            // shift-amount register for register shifts
  u32 imm = 0;                   // immediate / branch offset (sign-extended)
  u8 shift_amount = 0;           // imm shift on dp/mem register operands
  bool has_imm_operand = false;  // dp: immediate vs register operand2
  bool plain_imm = false;        // dp add/sub: marks the alternate immediate
                                 // template (wide: zero-extended imm12 rather
                                 // than modified-immediate; 16-bit: the
                                 // three-operand imm3 form)

  bool set_flags = false;

  // mem
  bool load = false;
  MemSize size = MemSize::word;
  bool sign_extend = false;
  bool add_offset = true;        // U bit
  bool writeback = false;
  bool pre_indexed = true;       // false = post-indexed (only with writeback)

  // mem_multi
  u16 reglist = 0;
  bool before = false;           // DB vs IA

  // it
  u8 it_firstcond = 0, it_mask = 0;

  u8 sysm = 0;                   // mrs/msr

  // use/def summary, filled by decode()
  RegisterSet reads, writes;
  bool reads_flags = false;
  bool sets_flags = false;

  bool wide() const { return length == 4; }
  u32 next_address() const { return address + length; }
  // Architectural value of PC as read by this instruction.
  u32 pc_value() const { return address + 4; }

  bool is_mem_literal() const { return kind == OpKind::mem && rn == Reg::pc; }
};

// Length of the encoding starting with `first_halfword`: 4 iff the top five
// bits are 0b11101/0b11110/0b11111, else 2.
int instr_length(u16 first_halfword);

// Decode one instruction. `hw2` is ignored when instr_length(hw1) == 2.
// Total: unknown patterns yield kind == undecodable with raw bytes kept.
Instruction decode(u16 hw1, u16 hw2, u32 address);

struct EncodeResult {
  bool ok = false;
  u16 hw1 = 0, hw2 = 0;
  u8 length = 0;
  std::string error;

  static EncodeResult narrow(u16 hw) { return {true, hw, 0, 2, {}}; }
  static EncodeResult wide(u16 h1, u16 h2) { return {true, h1, h2, 4, {}}; }
  static EncodeResult fail(std::string why) { return {false, 0, 0, 0, std::move(why)}; }
};

// Re-encode a (possibly synthesized) instruction. Honors instr.length as the
// target width; fails with the violated field named when the form does not
// fit that encoding.
EncodeResult encode(const Instruction& instr);

// C1/C2/unsupported/undecodable, per the translation strategy. Total.
InstrClass classify(const Instruction& instr);

// reads ∪ writes restricted to the proxy pool R0-R12.
RegisterSet registers_used(const Instruction& instr);

// Disassembly-style rendering for listings and diagnostics.
std::string to_string(const Instruction& instr);

namespace thumb {
// Modified-immediate expansion (i:imm3:imm8 -> value). Returns false if the
// 12-bit pattern is not a valid encoding input (never happens; kept total).
u32 expand_imm(u16 imm12);
u32 expand_imm_carry(u16 imm12, bool carry_in, bool& carry_out);
// Reverse direction: find the canonical 12-bit pattern for a value.
bool compress_imm(u32 value, u16& imm12_out);
}  // namespace thumb

}  // namespace bmr
