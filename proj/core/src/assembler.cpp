#include "bmr/assembler.hpp"

namespace bmr {

Label CodeBuffer::label() {
  label_addr_.push_back(UINT32_MAX);
  return Label{int(label_addr_.size()) - 1};
}

Label CodeBuffer::here() {
  Label l = label();
  bind(l);
  return l;
}

void CodeBuffer::bind(Label l) {
  if (l.id < 0 || size_t(l.id) >= label_addr_.size()) {
    fail("bind of a label this buffer did not create");
    return;
  }
  if (label_addr_[l.id] != UINT32_MAX) {
    fail("label bound twice");
    return;
  }
  label_addr_[l.id] = cursor();
}

void CodeBuffer::fail(const std::string& why) {
  if (error_.empty()) error_ = why;
}

void CodeBuffer::put_byte(u8 v) { bytes_.push_back(v); }

void CodeBuffer::put_half(u16 v) {
  bytes_.push_back(u8(v & 0xFF));
  bytes_.push_back(u8(v >> 8));
}

void CodeBuffer::put_word(u32 v) {
  put_half(u16(v & 0xFFFF));
  put_half(u16(v >> 16));
}

void CodeBuffer::align(u32 n, u8 fill) {
  while (bytes_.size() % n) bytes_.push_back(fill);
}

void CodeBuffer::put(const Instruction& instr) {
  EncodeResult r = encode(instr);
  if (!r.ok) {
    fail("encode: " + r.error + " (" + to_string(instr) + ")");
    // Keep the cursor honest so later labels stay consistent.
    for (int k = 0; k < instr.length; ++k) bytes_.push_back(0);
    return;
  }
  put_half(r.hw1);
  if (r.length == 4) put_half(r.hw2);
}

void CodeBuffer::b(Label target, bool wide) { b(Cond::al, target, wide); }

void CodeBuffer::b(Cond c, Label target, bool wide) {
  fixups_.push_back({bytes_.size(), OpKind::b, c, Reg::none, target.id, wide});
  put_half(0);
  if (wide) put_half(0);
}

void CodeBuffer::bl(Label target) {
  fixups_.push_back({bytes_.size(), OpKind::bl, Cond::al, Reg::none, target.id, true});
  put_half(0);
  put_half(0);
}

void CodeBuffer::cbz(Reg rn, Label target) {
  fixups_.push_back({bytes_.size(), OpKind::cbz, Cond::al, rn, target.id, false});
  put_half(0);
}

void CodeBuffer::cbnz(Reg rn, Label target) {
  fixups_.push_back({bytes_.size(), OpKind::cbnz, Cond::al, rn, target.id, false});
  put_half(0);
}

void CodeBuffer::patch(const Fixup& f) {
  if (f.label < 0 || size_t(f.label) >= label_addr_.size() ||
      label_addr_[f.label] == UINT32_MAX) {
    fail("branch to an unbound label");
    return;
  }
  u32 at = base_ + u32(f.offset);
  i32 rel = i32(label_addr_[f.label]) - i32(at + 4);

  Instruction instr;
  instr.address = at;
  instr.kind = f.kind;
  instr.length = f.wide ? 4 : 2;
  switch (f.kind) {
    case OpKind::b:
      instr.cond = f.cond;
      instr.imm = u32(rel);
      break;
    case OpKind::bl:
      instr.imm = u32(rel);
      break;
    case OpKind::cbz:
    case OpKind::cbnz:
      instr.rn = f.rn;
      if (rel < 0) {
        fail("cbz/cbnz cannot branch backwards");
        return;
      }
      instr.imm = u32(rel);
      break;
    default:
      fail("unsupported fixup kind");
      return;
  }
  EncodeResult r = encode(instr);
  if (!r.ok) {
    fail("fixup: " + r.error);
    return;
  }
  bytes_[f.offset] = u8(r.hw1 & 0xFF);
  bytes_[f.offset + 1] = u8(r.hw1 >> 8);
  if (r.length == 4) {
    bytes_[f.offset + 2] = u8(r.hw2 & 0xFF);
    bytes_[f.offset + 3] = u8(r.hw2 >> 8);
  }
}

std::vector<u8> CodeBuffer::take() {
  for (const Fixup& f : fixups_) patch(f);
  fixups_.clear();
  return std::move(bytes_);
}

namespace ins {

namespace {

Instruction make(OpKind kind, u8 length) {
  Instruction i;
  i.kind = kind;
  i.length = length;
  return i;
}

Instruction dp(DpOp op, u8 length, bool s) {
  Instruction i = make(OpKind::dp, length);
  i.dp = op;
  i.set_flags = s;
  return i;
}

Instruction mem(bool load, MemSize sz, u8 length) {
  Instruction i = make(OpKind::mem, length);
  i.load = load;
  i.size = sz;
  return i;
}

Instruction mem_indexed(bool load, Reg rt, Reg rn, i32 offset, bool pre) {
  Instruction i = mem(load, MemSize::word, 4);
  i.rt = rt; i.rn = rn;
  i.add_offset = offset >= 0;
  i.imm = u32(offset >= 0 ? offset : -offset);
  i.writeback = true;
  i.pre_indexed = pre;
  return i;
}

Instruction multi(bool load, bool before, Reg rn, bool wb, u16 list, u8 length) {
  Instruction i = make(OpKind::mem_multi, length);
  i.load = load; i.before = before; i.rn = rn; i.writeback = wb; i.reglist = list;
  return i;
}

}  // namespace

Instruction movs_imm(Reg rd, u32 imm8) {
  Instruction i = dp(DpOp::mov, 2, true);
  i.rd = rd; i.has_imm_operand = true; i.imm = imm8;
  return i;
}

Instruction mov_imm_w(Reg rd, u32 value) {
  Instruction i = dp(DpOp::mov, 4, false);
  i.rd = rd; i.has_imm_operand = true; i.imm = value;
  return i;
}

Instruction movw(Reg rd, u32 imm16) {
  Instruction i = make(OpKind::movw, 4);
  i.rd = rd; i.imm = imm16;
  return i;
}

Instruction movt(Reg rd, u32 imm16) {
  Instruction i = make(OpKind::movt, 4);
  i.rd = rd; i.imm = imm16;
  return i;
}

Instruction mov_reg(Reg rd, Reg rm) {
  Instruction i = dp(DpOp::mov, 2, false);
  i.rd = rd; i.rm = rm;
  return i;
}

Instruction movs_reg(Reg rd, Reg rm) {
  Instruction i = dp(DpOp::mov, 2, true);
  i.rd = rd; i.rm = rm;
  return i;
}

Instruction adds_imm3(Reg rd, Reg rn, u32 imm3) {
  Instruction i = dp(DpOp::add, 2, true);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.plain_imm = true; i.imm = imm3;
  return i;
}

Instruction adds_imm8(Reg rdn, u32 imm8) {
  Instruction i = dp(DpOp::add, 2, true);
  i.rd = i.rn = rdn; i.has_imm_operand = true; i.imm = imm8;
  return i;
}

Instruction subs_imm3(Reg rd, Reg rn, u32 imm3) {
  Instruction i = dp(DpOp::sub, 2, true);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.plain_imm = true; i.imm = imm3;
  return i;
}

Instruction subs_imm8(Reg rdn, u32 imm8) {
  Instruction i = dp(DpOp::sub, 2, true);
  i.rd = i.rn = rdn; i.has_imm_operand = true; i.imm = imm8;
  return i;
}

Instruction addw(Reg rd, Reg rn, u32 imm12) {
  Instruction i = dp(DpOp::add, 4, false);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.plain_imm = true; i.imm = imm12;
  return i;
}

Instruction subw(Reg rd, Reg rn, u32 imm12) {
  Instruction i = dp(DpOp::sub, 4, false);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.plain_imm = true; i.imm = imm12;
  return i;
}

Instruction add_imm_w(Reg rd, Reg rn, u32 value) {
  Instruction i = dp(DpOp::add, 4, false);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.imm = value;
  return i;
}

Instruction sub_imm_w(Reg rd, Reg rn, u32 value) {
  Instruction i = dp(DpOp::sub, 4, false);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.imm = value;
  return i;
}

Instruction adds_reg(Reg rd, Reg rn, Reg rm) {
  Instruction i = dp(DpOp::add, 2, true);
  i.rd = rd; i.rn = rn; i.rm = rm;
  return i;
}

Instruction subs_reg(Reg rd, Reg rn, Reg rm) {
  Instruction i = dp(DpOp::sub, 2, true);
  i.rd = rd; i.rn = rn; i.rm = rm;
  return i;
}

Instruction add_reg(Reg rdn, Reg rm) {
  Instruction i = dp(DpOp::add, 2, false);
  i.rd = i.rn = rdn; i.rm = rm;
  return i;
}

Instruction add_sp_imm(Reg rd, u32 imm) {
  Instruction i = dp(DpOp::add, 2, false);
  i.rd = rd; i.rn = Reg::sp; i.has_imm_operand = true; i.imm = imm;
  return i;
}

Instruction add_sp_sp(u32 imm) {
  Instruction i = dp(DpOp::add, 2, false);
  i.rd = i.rn = Reg::sp; i.has_imm_operand = true; i.imm = imm;
  return i;
}

Instruction sub_sp_sp(u32 imm) {
  Instruction i = dp(DpOp::sub, 2, false);
  i.rd = i.rn = Reg::sp; i.has_imm_operand = true; i.imm = imm;
  return i;
}

Instruction ands_reg(Reg rdn, Reg rm) {
  Instruction i = dp(DpOp::and_, 2, true);
  i.rd = i.rn = rdn; i.rm = rm;
  return i;
}

Instruction orrs_reg(Reg rdn, Reg rm) {
  Instruction i = dp(DpOp::orr, 2, true);
  i.rd = i.rn = rdn; i.rm = rm;
  return i;
}

Instruction eors_reg(Reg rdn, Reg rm) {
  Instruction i = dp(DpOp::eor, 2, true);
  i.rd = i.rn = rdn; i.rm = rm;
  return i;
}

Instruction and_imm_w(Reg rd, Reg rn, u32 value) {
  Instruction i = dp(DpOp::and_, 4, false);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.imm = value;
  return i;
}

Instruction orr_imm_w(Reg rd, Reg rn, u32 value) {
  Instruction i = dp(DpOp::orr, 4, false);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.imm = value;
  return i;
}

Instruction bic_imm_w(Reg rd, Reg rn, u32 value) {
  Instruction i = dp(DpOp::bic, 4, false);
  i.rd = rd; i.rn = rn; i.has_imm_operand = true; i.imm = value;
  return i;
}

Instruction orr_reg_w(Reg rd, Reg rn, Reg rm) {
  Instruction i = dp(DpOp::orr, 4, false);
  i.rd = rd; i.rn = rn; i.rm = rm;
  return i;
}

Instruction tst_imm_w(Reg rn, u32 value) {
  Instruction i = dp(DpOp::tst, 4, true);
  i.rn = rn; i.has_imm_operand = true; i.imm = value;
  return i;
}

Instruction cmp_imm8(Reg rn, u32 imm8) {
  Instruction i = dp(DpOp::cmp, 2, true);
  i.rn = rn; i.has_imm_operand = true; i.imm = imm8;
  return i;
}

Instruction cmp_imm_w(Reg rn, u32 value) {
  Instruction i = dp(DpOp::cmp, 4, true);
  i.rn = rn; i.has_imm_operand = true; i.imm = value;
  return i;
}

Instruction cmp_reg(Reg rn, Reg rm) {
  Instruction i = dp(DpOp::cmp, 2, true);
  i.rn = rn; i.rm = rm;
  return i;
}

Instruction lsls_imm(Reg rd, Reg rm, u32 amount) {
  Instruction i = make(OpKind::shift, 2);
  i.shift_kind = ShiftKind::lsl; i.set_flags = true;
  i.rd = rd; i.rm = rm; i.shift_amount = u8(amount);
  return i;
}

Instruction lsrs_imm(Reg rd, Reg rm, u32 amount) {
  Instruction i = make(OpKind::shift, 2);
  i.shift_kind = ShiftKind::lsr; i.set_flags = true;
  i.rd = rd; i.rm = rm; i.shift_amount = u8(amount);
  return i;
}

Instruction asrs_imm(Reg rd, Reg rm, u32 amount) {
  Instruction i = make(OpKind::shift, 2);
  i.shift_kind = ShiftKind::asr; i.set_flags = true;
  i.rd = rd; i.rm = rm; i.shift_amount = u8(amount);
  return i;
}

Instruction ldr_imm(Reg rt, Reg rn, u32 imm) {
  Instruction i = mem(true, MemSize::word, 2);
  i.rt = rt; i.rn = rn; i.imm = imm;
  return i;
}

Instruction str_imm(Reg rt, Reg rn, u32 imm) {
  Instruction i = mem(false, MemSize::word, 2);
  i.rt = rt; i.rn = rn; i.imm = imm;
  return i;
}

Instruction ldrb_imm(Reg rt, Reg rn, u32 imm) {
  Instruction i = mem(true, MemSize::byte, 2);
  i.rt = rt; i.rn = rn; i.imm = imm;
  return i;
}

Instruction strb_imm(Reg rt, Reg rn, u32 imm) {
  Instruction i = mem(false, MemSize::byte, 2);
  i.rt = rt; i.rn = rn; i.imm = imm;
  return i;
}

Instruction ldrh_imm(Reg rt, Reg rn, u32 imm) {
  Instruction i = mem(true, MemSize::half, 2);
  i.rt = rt; i.rn = rn; i.imm = imm;
  return i;
}

Instruction strh_imm(Reg rt, Reg rn, u32 imm) {
  Instruction i = mem(false, MemSize::half, 2);
  i.rt = rt; i.rn = rn; i.imm = imm;
  return i;
}

Instruction ldr_reg(Reg rt, Reg rn, Reg rm) {
  Instruction i = mem(true, MemSize::word, 2);
  i.rt = rt; i.rn = rn; i.rm = rm;
  return i;
}

Instruction str_reg(Reg rt, Reg rn, Reg rm) {
  Instruction i = mem(false, MemSize::word, 2);
  i.rt = rt; i.rn = rn; i.rm = rm;
  return i;
}

Instruction ldrsb_reg(Reg rt, Reg rn, Reg rm) {
  Instruction i = mem(true, MemSize::byte, 2);
  i.sign_extend = true;
  i.rt = rt; i.rn = rn; i.rm = rm;
  return i;
}

Instruction ldrsh_reg(Reg rt, Reg rn, Reg rm) {
  Instruction i = mem(true, MemSize::half, 2);
  i.sign_extend = true;
  i.rt = rt; i.rn = rn; i.rm = rm;
  return i;
}

Instruction ldr_lit(Reg rt, u32 imm) {
  Instruction i = mem(true, MemSize::word, 2);
  i.rt = rt; i.rn = Reg::pc; i.imm = imm;
  return i;
}

Instruction ldr_lit_w(Reg rt, u32 imm12, bool add) {
  Instruction i = mem(true, MemSize::word, 4);
  i.rt = rt; i.rn = Reg::pc; i.imm = imm12; i.add_offset = add;
  return i;
}

Instruction ldr_imm_w(Reg rt, Reg rn, u32 imm12) {
  Instruction i = mem(true, MemSize::word, 4);
  i.rt = rt; i.rn = rn; i.imm = imm12;
  return i;
}

Instruction str_imm_w(Reg rt, Reg rn, u32 imm12) {
  Instruction i = mem(false, MemSize::word, 4);
  i.rt = rt; i.rn = rn; i.imm = imm12;
  return i;
}

Instruction ldrb_imm_w(Reg rt, Reg rn, u32 imm12) {
  Instruction i = mem(true, MemSize::byte, 4);
  i.rt = rt; i.rn = rn; i.imm = imm12;
  return i;
}

Instruction ldrh_imm_w(Reg rt, Reg rn, u32 imm12) {
  Instruction i = mem(true, MemSize::half, 4);
  i.rt = rt; i.rn = rn; i.imm = imm12;
  return i;
}

Instruction ldr_pre_w(Reg rt, Reg rn, i32 offset) {
  return mem_indexed(true, rt, rn, offset, true);
}

Instruction ldr_post_w(Reg rt, Reg rn, i32 offset) {
  return mem_indexed(true, rt, rn, offset, false);
}

Instruction str_pre_w(Reg rt, Reg rn, i32 offset) {
  return mem_indexed(false, rt, rn, offset, true);
}

Instruction str_post_w(Reg rt, Reg rn, i32 offset) {
  return mem_indexed(false, rt, rn, offset, false);
}

Instruction push16(u16 reglist) { return multi(false, true, Reg::sp, true, reglist, 2); }
Instruction pop16(u16 reglist) { return multi(true, false, Reg::sp, true, reglist, 2); }

Instruction stm16(Reg rn, u16 reglist) {
  return multi(false, false, rn, true, reglist, 2);
}

Instruction ldm16(Reg rn, u16 reglist) {
  bool wb = !((reglist >> idx(rn)) & 1);
  return multi(true, false, rn, wb, reglist, 2);
}

Instruction stmdb_w(Reg rn, bool wb, u16 reglist) {
  return multi(false, true, rn, wb, reglist, 4);
}

Instruction stmia_w(Reg rn, bool wb, u16 reglist) {
  return multi(false, false, rn, wb, reglist, 4);
}

Instruction ldmdb_w(Reg rn, bool wb, u16 reglist) {
  return multi(true, true, rn, wb, reglist, 4);
}

Instruction ldmia_w(Reg rn, bool wb, u16 reglist) {
  return multi(true, false, rn, wb, reglist, 4);
}

Instruction b16(Cond c, i32 offset) {
  Instruction i = make(OpKind::b, 2);
  i.cond = c; i.imm = u32(offset);
  return i;
}

Instruction b16(i32 offset) { return b16(Cond::al, offset); }

Instruction b_w(Cond c, i32 offset) {
  Instruction i = make(OpKind::b, 4);
  i.cond = c; i.imm = u32(offset);
  return i;
}

Instruction b_w(i32 offset) { return b_w(Cond::al, offset); }

Instruction bl(i32 offset) {
  Instruction i = make(OpKind::bl, 4);
  i.imm = u32(offset);
  return i;
}

Instruction bx(Reg rm) {
  Instruction i = make(OpKind::bx, 2);
  i.rm = rm;
  return i;
}

Instruction blx(Reg rm) {
  Instruction i = make(OpKind::blx, 2);
  i.rm = rm;
  return i;
}

Instruction cbz(Reg rn, u32 offset) {
  Instruction i = make(OpKind::cbz, 2);
  i.rn = rn; i.imm = offset;
  return i;
}

Instruction cbnz(Reg rn, u32 offset) {
  Instruction i = make(OpKind::cbnz, 2);
  i.rn = rn; i.imm = offset;
  return i;
}

Instruction tbb(Reg rn, Reg rm) {
  Instruction i = make(OpKind::tbb, 4);
  i.rn = rn; i.rm = rm;
  return i;
}

Instruction tbh(Reg rn, Reg rm) {
  Instruction i = make(OpKind::tbh, 4);
  i.rn = rn; i.rm = rm;
  return i;
}

Instruction adr(Reg rd, u32 imm) {
  Instruction i = make(OpKind::adr, 2);
  i.rd = rd; i.imm = imm; i.add_offset = true;
  return i;
}

Instruction adr_w(Reg rd, u32 imm12, bool add) {
  Instruction i = make(OpKind::adr, 4);
  i.rd = rd; i.imm = imm12; i.add_offset = add;
  return i;
}

Instruction it(Cond c, u8 mask) {
  Instruction i = make(OpKind::it, 2);
  i.it_firstcond = static_cast<u8>(c); i.it_mask = mask;
  return i;
}

Instruction nop() { return make(OpKind::nop, 2); }

Instruction bkpt(u32 imm8) {
  Instruction i = make(OpKind::bkpt, 2);
  i.imm = imm8;
  return i;
}

Instruction udf(u32 imm8) {
  Instruction i = make(OpKind::udf, 2);
  i.imm = imm8;
  return i;
}

Instruction svc(u32 imm8) {
  Instruction i = make(OpKind::svc, 2);
  i.imm = imm8;
  return i;
}

Instruction muls(Reg rdm, Reg rn) {
  Instruction i = make(OpKind::mul, 2);
  i.set_flags = true;
  i.rd = i.rm = rdm; i.rn = rn;
  return i;
}

Instruction sxtb(Reg rd, Reg rm) {
  Instruction i = make(OpKind::sxtb, 2);
  i.rd = rd; i.rm = rm;
  return i;
}

Instruction sxth(Reg rd, Reg rm) {
  Instruction i = make(OpKind::sxth, 2);
  i.rd = rd; i.rm = rm;
  return i;
}

Instruction uxtb(Reg rd, Reg rm) {
  Instruction i = make(OpKind::uxtb, 2);
  i.rd = rd; i.rm = rm;
  return i;
}

Instruction uxth(Reg rd, Reg rm) {
  Instruction i = make(OpKind::uxth, 2);
  i.rd = rd; i.rm = rm;
  return i;
}

Instruction rev(Reg rd, Reg rm) {
  Instruction i = make(OpKind::rev, 2);
  i.rd = rd; i.rm = rm;
  return i;
}

Instruction mrs_apsr(Reg rd) {
  Instruction i = make(OpKind::mrs, 4);
  i.rd = rd; i.sysm = 0;
  return i;
}

Instruction msr_apsr_nzcvq(Reg rn) {
  Instruction i = make(OpKind::msr, 4);
  i.rn = rn; i.sysm = 0; i.imm = 2;  // nzcvq mask
  return i;
}

}  // namespace ins

}  // namespace bmr
