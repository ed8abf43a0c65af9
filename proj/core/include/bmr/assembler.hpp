#pragma once

// Small two-pass assembler over the instruction model: a byte buffer with
// labels and branch fixups, plus builder functions for the encodings the
// code generators and tests compose by hand.

#include <string>
#include <vector>

#include "bmr/decoder.hpp"

namespace bmr {

struct Label {
  int id = -1;
};

class CodeBuffer {
 public:
  explicit CodeBuffer(u32 base_address) : base_(base_address) {}

  u32 base() const { return base_; }
  u32 cursor() const { return base_ + u32(bytes_.size()); }
  size_t size() const { return bytes_.size(); }

  Label label();          // fresh, unbound
  Label here();           // fresh, bound to the current cursor
  void bind(Label l);

  // Encode and append. Encoding failures latch into error().
  void put(const Instruction& instr);

  void put_half(u16 v);
  void put_word(u32 v);
  void put_byte(u8 v);
  void align(u32 n, u8 fill = 0);

  // Label-relative control flow; resolved when take() is called.
  void b(Label target, bool wide = true);
  void b(Cond c, Label target, bool wide = true);
  void bl(Label target);
  void cbz(Reg rn, Label target);
  void cbnz(Reg rn, Label target);

  bool ok() const { return error_.empty(); }
  const std::string& error() const { return error_; }

  // Resolve all fixups and hand over the bytes. Unbound labels and
  // out-of-range branches latch into error().
  std::vector<u8> take();

 private:
  struct Fixup {
    size_t offset;
    OpKind kind;
    Cond cond;
    Reg rn;
    int label;
    bool wide;
  };

  void fail(const std::string& why);
  void patch(const Fixup& f);

  u32 base_;
  std::vector<u8> bytes_;
  std::vector<u32> label_addr_;   // UINT32_MAX while unbound
  std::vector<Fixup> fixups_;
  std::string error_;
};

// Instruction builders. Naming: a `s` suffix on the mnemonic root means the
// flag-setting form; a `_w` suffix means the 32-bit encoding.
namespace ins {

Instruction movs_imm(Reg rd, u32 imm8);
Instruction mov_imm_w(Reg rd, u32 value);        // modified-immediate, no flags
Instruction movw(Reg rd, u32 imm16);
Instruction movt(Reg rd, u32 imm16);
Instruction mov_reg(Reg rd, Reg rm);             // 16-bit, any registers, no flags
Instruction movs_reg(Reg rd, Reg rm);

Instruction adds_imm3(Reg rd, Reg rn, u32 imm3);
Instruction adds_imm8(Reg rdn, u32 imm8);
Instruction subs_imm3(Reg rd, Reg rn, u32 imm3);
Instruction subs_imm8(Reg rdn, u32 imm8);
Instruction addw(Reg rd, Reg rn, u32 imm12);     // zero-extended, no flags
Instruction subw(Reg rd, Reg rn, u32 imm12);
Instruction add_imm_w(Reg rd, Reg rn, u32 value);  // modified-immediate, no flags
Instruction sub_imm_w(Reg rd, Reg rn, u32 value);
Instruction adds_reg(Reg rd, Reg rn, Reg rm);
Instruction subs_reg(Reg rd, Reg rn, Reg rm);
Instruction add_reg(Reg rdn, Reg rm);            // 16-bit, any registers, no flags
Instruction add_sp_imm(Reg rd, u32 imm);         // rd = sp + imm, 16-bit
Instruction add_sp_sp(u32 imm);
Instruction sub_sp_sp(u32 imm);

Instruction ands_reg(Reg rdn, Reg rm);
Instruction orrs_reg(Reg rdn, Reg rm);
Instruction eors_reg(Reg rdn, Reg rm);
Instruction and_imm_w(Reg rd, Reg rn, u32 value);
Instruction orr_imm_w(Reg rd, Reg rn, u32 value);
Instruction bic_imm_w(Reg rd, Reg rn, u32 value);
Instruction orr_reg_w(Reg rd, Reg rn, Reg rm);
Instruction tst_imm_w(Reg rn, u32 value);
Instruction cmp_imm8(Reg rn, u32 imm8);
Instruction cmp_imm_w(Reg rn, u32 value);
Instruction cmp_reg(Reg rn, Reg rm);

Instruction lsls_imm(Reg rd, Reg rm, u32 amount);
Instruction lsrs_imm(Reg rd, Reg rm, u32 amount);
Instruction asrs_imm(Reg rd, Reg rm, u32 amount);

Instruction ldr_imm(Reg rt, Reg rn, u32 imm);    // 16-bit word form (incl. sp/pc base)
Instruction str_imm(Reg rt, Reg rn, u32 imm);
Instruction ldrb_imm(Reg rt, Reg rn, u32 imm);
Instruction strb_imm(Reg rt, Reg rn, u32 imm);
Instruction ldrh_imm(Reg rt, Reg rn, u32 imm);
Instruction strh_imm(Reg rt, Reg rn, u32 imm);
Instruction ldr_reg(Reg rt, Reg rn, Reg rm);
Instruction str_reg(Reg rt, Reg rn, Reg rm);
Instruction ldrsb_reg(Reg rt, Reg rn, Reg rm);
Instruction ldrsh_reg(Reg rt, Reg rn, Reg rm);
Instruction ldr_lit(Reg rt, u32 imm);            // 16-bit pc-relative word load
Instruction ldr_lit_w(Reg rt, u32 imm12, bool add);
Instruction ldr_imm_w(Reg rt, Reg rn, u32 imm12);
Instruction str_imm_w(Reg rt, Reg rn, u32 imm12);
Instruction ldrb_imm_w(Reg rt, Reg rn, u32 imm12);
Instruction ldrh_imm_w(Reg rt, Reg rn, u32 imm12);
Instruction ldr_pre_w(Reg rt, Reg rn, i32 offset);   // writeback, pre-indexed
Instruction ldr_post_w(Reg rt, Reg rn, i32 offset);  // writeback, post-indexed
Instruction str_pre_w(Reg rt, Reg rn, i32 offset);
Instruction str_post_w(Reg rt, Reg rn, i32 offset);

Instruction push16(u16 reglist);                 // r0-r7 | lr
Instruction pop16(u16 reglist);                  // r0-r7 | pc
Instruction stm16(Reg rn, u16 reglist);          // stmia rn!, {...}
Instruction ldm16(Reg rn, u16 reglist);
Instruction stmdb_w(Reg rn, bool writeback, u16 reglist);
Instruction stmia_w(Reg rn, bool writeback, u16 reglist);
Instruction ldmdb_w(Reg rn, bool writeback, u16 reglist);
Instruction ldmia_w(Reg rn, bool writeback, u16 reglist);

Instruction b16(Cond c, i32 offset);
Instruction b16(i32 offset);
Instruction b_w(Cond c, i32 offset);
Instruction b_w(i32 offset);
Instruction bl(i32 offset);
Instruction bx(Reg rm);
Instruction blx(Reg rm);
Instruction cbz(Reg rn, u32 offset);
Instruction cbnz(Reg rn, u32 offset);
Instruction tbb(Reg rn, Reg rm);
Instruction tbh(Reg rn, Reg rm);

Instruction adr(Reg rd, u32 imm);                // 16-bit
Instruction adr_w(Reg rd, u32 imm12, bool add);
Instruction it(Cond c, u8 mask = 0x8);
Instruction nop();
Instruction bkpt(u32 imm8);
Instruction udf(u32 imm8);
Instruction svc(u32 imm8);

Instruction muls(Reg rdm, Reg rn);
Instruction sxtb(Reg rd, Reg rm);
Instruction sxth(Reg rd, Reg rm);
Instruction uxtb(Reg rd, Reg rm);
Instruction uxth(Reg rd, Reg rm);
Instruction rev(Reg rd, Reg rm);

// APSR transfers used by the generated glue.
Instruction mrs_apsr(Reg rd);
Instruction msr_apsr_nzcvq(Reg rn);

}  // namespace ins

}  // namespace bmr
