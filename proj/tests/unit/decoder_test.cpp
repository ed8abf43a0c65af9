#include "doctest.h"

#include "bmr/decoder.hpp"

using namespace bmr;

namespace {

Instruction d16(u16 hw, u32 addr = 0x08000100) { return decode(hw, 0, addr); }
Instruction d32(u16 hw1, u16 hw2, u32 addr = 0x08000100) { return decode(hw1, hw2, addr); }

}  // namespace

TEST_SUITE("decoder") {

TEST_CASE("narrow ALU immediate forms") {
  Instruction i = d16(0x1CC8);  // adds r0, r1, #3
  CHECK(i.kind == OpKind::dp);
  CHECK(i.dp == DpOp::add);
  CHECK(i.rd == Reg::r0);
  CHECK(i.rn == Reg::r1);
  CHECK(i.imm == 3);
  CHECK(i.has_imm_operand);
  CHECK(i.set_flags);
  CHECK(i.length == 2);
  CHECK(classify(i) == InstrClass::c1);
  CHECK(i.reads.contains(Reg::r1));
  CHECK(i.writes.contains(Reg::r0));
  CHECK(to_string(i) == "adds r0, r1, #3");

  Instruction c = d16(0x2A15);  // cmp r2, #21
  CHECK(c.kind == OpKind::dp);
  CHECK(c.dp == DpOp::cmp);
  CHECK(c.rn == Reg::r2);
  CHECK(c.imm == 21);
  CHECK(c.sets_flags);
  CHECK(c.writes.empty());

  Instruction a = d16(0x3207);  // adds r2, #7
  CHECK(a.dp == DpOp::add);
  CHECK(a.rd == Reg::r2);
  CHECK(a.rn == Reg::r2);
  CHECK(a.imm == 7);
}

TEST_CASE("narrow register forms incl high registers") {
  Instruction i = d16(0x4418);  // add r0, r3
  CHECK(i.kind == OpKind::dp);
  CHECK(i.dp == DpOp::add);
  CHECK(i.rd == Reg::r0);
  CHECK(i.rn == Reg::r0);
  CHECK(i.rm == Reg::r3);
  CHECK(!i.set_flags);
  CHECK(classify(i) == InstrClass::c1);

  Instruction m = d16(0x462C);  // mov r4, r5
  CHECK(m.dp == DpOp::mov);
  CHECK(m.rd == Reg::r4);
  CHECK(m.rm == Reg::r5);

  Instruction mp = d16(0x46A7);  // mov pc, r4
  CHECK(mp.dp == DpOp::mov);
  CHECK(mp.rd == Reg::pc);
  CHECK(mp.rm == Reg::r4);
  CHECK(classify(mp) == InstrClass::c2);
  CHECK(mp.writes.contains(Reg::pc));

  Instruction cr = d16(0x4291);  // cmp r1, r2
  CHECK(cr.dp == DpOp::cmp);
  CHECK(cr.rn == Reg::r1);
  CHECK(cr.rm == Reg::r2);
}

TEST_CASE("narrow shifts") {
  Instruction i = d16(0x0889);  // lsrs r1, r1, #2
  CHECK(i.kind == OpKind::shift);
  CHECK(i.shift_kind == ShiftKind::lsr);
  CHECK(i.rd == Reg::r1);
  CHECK(i.rm == Reg::r1);
  CHECK(i.shift_amount == 2);
  CHECK(i.set_flags);
}

TEST_CASE("narrow loads and stores") {
  Instruction s = d16(0x9801);  // ldr r0, [sp, #4]
  CHECK(s.kind == OpKind::mem);
  CHECK(s.load);
  CHECK(s.rt == Reg::r0);
  CHECK(s.rn == Reg::sp);
  CHECK(s.imm == 4);
  CHECK(s.size == MemSize::word);
  CHECK(classify(s) == InstrClass::c1);
  CHECK(s.reads.contains(Reg::sp));

  Instruction lit = d16(0x4808);  // ldr r0, [pc, #32]
  CHECK(lit.kind == OpKind::mem);
  CHECK(lit.is_mem_literal());
  CHECK(lit.imm == 32);
  CHECK(classify(lit) == InstrClass::c2);

  Instruction rr = d16(0x50D3);  // str r3, [r2, r3]
  CHECK(rr.kind == OpKind::mem);
  CHECK(!rr.load);
  CHECK(rr.rt == Reg::r3);
  CHECK(rr.rn == Reg::r2);
  CHECK(rr.rm == Reg::r3);
}

TEST_CASE("push pop and multi transfer") {
  Instruction p = d16(0xB5F0);  // push {r4-r7, lr}
  CHECK(p.kind == OpKind::mem_multi);
  CHECK(!p.load);
  CHECK(p.rn == Reg::sp);
  CHECK(p.writeback);
  CHECK(p.before);
  CHECK(p.reglist == 0x40F0);
  CHECK(classify(p) == InstrClass::c1);

  Instruction q = d16(0xBD02);  // pop {r1, pc}
  CHECK(q.kind == OpKind::mem_multi);
  CHECK(q.load);
  CHECK(q.reglist == 0x8002);
  CHECK(!q.before);
  CHECK(q.writes.contains(Reg::pc));
  CHECK(classify(q) == InstrClass::c2);
  CHECK(to_string(q) == "pop {r1, pc}");
}

TEST_CASE("branches") {
  Instruction b = d16(0x4770);  // bx lr
  CHECK(b.kind == OpKind::bx);
  CHECK(b.rm == Reg::lr);
  CHECK(classify(b) == InstrClass::c2);

  Instruction cb = d16(0xB17B, 0x20);  // cbz r3, 0x42
  CHECK(cb.kind == OpKind::cbz);
  CHECK(cb.rn == Reg::r3);
  CHECK(cb.pc_value() + cb.imm == 0x42);
  CHECK(classify(cb) == InstrClass::c2);

  Instruction bn = d16(0xE7FE, 0x100);  // b to itself
  CHECK(bn.kind == OpKind::b);
  CHECK(bn.cond == Cond::al);
  CHECK(bn.pc_value() + bn.imm == 0x100);

  Instruction bc = d16(0xD1FC, 0x100);  // bne 0xFC
  CHECK(bc.kind == OpKind::b);
  CHECK(bc.cond == Cond::ne);
  CHECK(bc.pc_value() + bc.imm == 0xFC);
  CHECK(bc.reads_flags);
}

TEST_CASE("it block instruction") {
  Instruction i = d16(0xBF08);  // it eq
  CHECK(i.kind == OpKind::it);
  CHECK(i.it_firstcond == 0);
  CHECK(i.it_mask == 8);

  Instruction e = d16(0xBF0C);  // ite eq
  CHECK(e.kind == OpKind::it);
  CHECK(e.it_mask == 0xC);
}

TEST_CASE("adr") {
  Instruction i = d16(0xA02B, 0x08000100);  // adr r0, pc-relative 0x2B words
  CHECK(i.kind == OpKind::adr);
  CHECK(i.rd == Reg::r0);
  CHECK(i.imm == 0x2B * 4);
  CHECK(classify(i) == InstrClass::c2);
}

TEST_CASE("exception-coupled instructions classify unsupported") {
  // One representative encoding of each kind the hooks can never displace.
  struct Vec { u16 hw1, hw2; OpKind kind; };
  const Vec vecs[] = {
      {0xBE00, 0, OpKind::bkpt},   // bkpt #0
      {0xB662, 0, OpKind::cps},    // cpsie i
      {0xB672, 0, OpKind::cps},    // cpsid i
      {0xF3EF, 0x8200, OpKind::mrs},  // mrs r2, apsr
      {0xF380, 0x8800, OpKind::msr},  // msr apsr, r0
      {0xBF40, 0, OpKind::sev},    // sev
      {0xDF01, 0, OpKind::svc},    // svc #1
      {0xBF20, 0, OpKind::wfe},    // wfe
      {0xBF30, 0, OpKind::wfi},    // wfi
  };
  for (const Vec& v : vecs) {
    Instruction i = decode(v.hw1, v.hw2, 0x100);
    CHECK(i.kind == v.kind);
    CHECK(classify(i) == InstrClass::unsupported);
  }
}

TEST_CASE("permanently undefined space decodes as udf") {
  Instruction i = d16(0xDE00);
  CHECK(i.kind == OpKind::udf);
  CHECK(i.imm == 0);
  Instruction j = d16(0xDE7F);
  CHECK(j.kind == OpKind::udf);
  CHECK(j.imm == 0x7F);
}

TEST_CASE("wide loads") {
  Instruction i = d32(0xF91F, 0x5014);  // ldrsb r5, [pc, #-20]
  CHECK(i.kind == OpKind::mem);
  CHECK(i.load);
  CHECK(i.sign_extend);
  CHECK(i.size == MemSize::byte);
  CHECK(i.rt == Reg::r5);
  CHECK(i.is_mem_literal());
  CHECK(!i.add_offset);
  CHECK(i.imm == 20);
  CHECK(i.length == 4);
  CHECK(classify(i) == InstrClass::c2);
}

TEST_CASE("wide modified immediate") {
  Instruction i = d32(0xF44F, 0x7080);  // mov.w r0, #256
  CHECK(i.kind == OpKind::dp);
  CHECK(i.dp == DpOp::mov);
  CHECK(i.rd == Reg::r0);
  CHECK(i.has_imm_operand);
  CHECK(i.imm == 256);
  CHECK(!i.set_flags);
}

TEST_CASE("wide store multiple") {
  Instruction i = d32(0xE92D, 0x4010);  // stmdb sp!, {r4, lr}
  CHECK(i.kind == OpKind::mem_multi);
  CHECK(!i.load);
  CHECK(i.rn == Reg::sp);
  CHECK(i.writeback);
  CHECK(i.before);
  CHECK(i.reglist == 0x4010);
}

TEST_CASE("undecodable patterns stay total") {
  // A 32-bit pattern outside the supported surface must come back as
  // undecodable with the raw bytes kept, never crash.
  Instruction i = d32(0xEC00, 0x0000);  // coprocessor space
  CHECK(i.kind == OpKind::undecodable);
  CHECK(i.hw1 == 0xEC00);
  CHECK(classify(i) == InstrClass::undecodable);
}

TEST_CASE("length rule matches the top five bits") {
  CHECK(instr_length(0xE92D) == 4);  // 11101..
  CHECK(instr_length(0xF000) == 4);  // 11110..
  CHECK(instr_length(0xF91F) == 4);  // 11111..
  CHECK(instr_length(0xE7FE) == 2);  // 11100.. is the narrow branch
  CHECK(instr_length(0x4770) == 2);
  CHECK(instr_length(0x0000) == 2);
}

TEST_CASE("pc involvement decides the class") {
  // Over a spread of decodable instructions: class is c2 exactly when the
  // instruction touches pc (adr included by definition).
  const u16 samples[] = {0x1CC8, 0x4418, 0x4770, 0xBD02, 0xB5F0, 0x9801,
                         0x4808, 0x46A7, 0xE7FE, 0xA02B, 0x50D3, 0x0889};
  for (u16 hw : samples) {
    Instruction i = d16(hw);
    if (classify(i) != InstrClass::c1 && classify(i) != InstrClass::c2) continue;
    bool touches_pc = i.reads.contains(Reg::pc) || i.writes.contains(Reg::pc) ||
                      i.kind == OpKind::adr || i.is_mem_literal();
    CHECK((classify(i) == InstrClass::c2) == touches_pc);
  }
}

TEST_CASE("registers_used restricts to the proxy pool") {
  Instruction i = d16(0xBD02);  // pop {r1, pc}: uses sp and pc, pool sees r1
  RegisterSet u = registers_used(i);
  CHECK(u.contains(Reg::r1));
  CHECK(!u.contains(Reg::sp));
  CHECK(!u.contains(Reg::pc));
  CHECK((u & ~RegisterSet::general()).empty());
}

TEST_CASE("modified immediate expansion") {
  CHECK(thumb::expand_imm(0x0FF) == 0xFF);
  CHECK(thumb::expand_imm(0x1FF) == 0x00FF00FF);
  CHECK(thumb::expand_imm(0x2FF) == 0xFF00FF00);
  CHECK(thumb::expand_imm(0x3FF) == 0xFFFFFFFF);
  // rotated: imm12 = 0b0100 1000 0000 -> 0x80 ror ... = top bit set pattern
  u16 out = 0;
  CHECK(thumb::compress_imm(0xFF, out));
  CHECK(thumb::expand_imm(out) == 0xFF);
  CHECK(thumb::compress_imm(0x00FF00FF, out));
  CHECK(thumb::expand_imm(out) == 0x00FF00FF);
  CHECK(thumb::compress_imm(0xAB000000, out));
  CHECK(thumb::expand_imm(out) == 0xAB000000);
  CHECK(!thumb::compress_imm(0x12345678, out));
}

}  // TEST_SUITE
