#include "bmr/decoder.hpp"

#include <array>

namespace bmr {

namespace {

constexpr u32 sext(u32 value, int bits) {
  u32 m = 1u << (bits - 1);
  return (value ^ m) - m;
}

Instruction base(u16 hw1, u16 hw2, u32 addr, int len) {
  Instruction i;
  i.address = addr;
  i.hw1 = hw1;
  i.hw2 = hw2;
  i.length = u8(len);
  return i;
}

Instruction undecodable(u16 hw1, u16 hw2, u32 addr, int len) {
  return base(hw1, hw2, addr, len);  // kind defaults to undecodable
}

bool dp_writes_rd(DpOp op) {
  return op != DpOp::cmp && op != DpOp::cmn && op != DpOp::tst && op != DpOp::teq;
}

bool dp_reads_rn(DpOp op) {
  return op != DpOp::mov && op != DpOp::mvn;
}

// ---------------------------------------------------------------- 16-bit --

Instruction decode16(u16 h, u32 addr) {
  Instruction i = base(h, 0, addr, 2);
  const u8 rd3 = h & 7;
  const u8 rn3 = (h >> 3) & 7;
  const u8 rm3 = (h >> 6) & 7;

  switch (h >> 12) {
    case 0x0: case 0x1: {
      u8 op = (h >> 11) & 3;  // within 000x_x
      if (op != 3) {          // shift by immediate
        u8 imm5 = (h >> 6) & 31;
        if (op == 0 && imm5 == 0) {  // MOVS Rd, Rm
          i.kind = OpKind::dp; i.dp = DpOp::mov; i.set_flags = true;
          i.rd = reg(rd3); i.rm = reg(rn3);
          return i;
        }
        i.kind = OpKind::shift; i.set_flags = true;
        i.shift_kind = op == 0 ? ShiftKind::lsl : op == 1 ? ShiftKind::lsr : ShiftKind::asr;
        i.shift_amount = (op != 0 && imm5 == 0) ? 32 : imm5;
        i.rd = reg(rd3); i.rm = reg(rn3);
        return i;
      }
      // add/sub register & 3-bit immediate
      i.kind = OpKind::dp; i.set_flags = true;
      i.dp = ((h >> 9) & 1) ? DpOp::sub : DpOp::add;
      i.rd = reg(rd3); i.rn = reg(rn3);
      if ((h >> 10) & 1) { i.has_imm_operand = true; i.plain_imm = true; i.imm = rm3; }
      else { i.rm = reg(rm3); }
      return i;
    }
    case 0x2: case 0x3: {  // mov/cmp/add/sub with 8-bit immediate
      u8 op = (h >> 11) & 3;
      u8 r = (h >> 8) & 7;
      i.kind = OpKind::dp; i.set_flags = op != 1; i.has_imm_operand = true;
      i.imm = h & 0xFF;
      switch (op) {
        case 0: i.dp = DpOp::mov; i.rd = reg(r); break;
        case 1: i.dp = DpOp::cmp; i.rn = reg(r); i.set_flags = true; break;
        case 2: i.dp = DpOp::add; i.rd = i.rn = reg(r); break;
        case 3: i.dp = DpOp::sub; i.rd = i.rn = reg(r); break;
      }
      return i;
    }
    case 0x4: {
      if ((h >> 10) == 0x10) {  // data-processing, registers
        u8 op = (h >> 6) & 0xF;
        static constexpr DpOp kMap[16] = {
          DpOp::and_, DpOp::eor, DpOp::mov, DpOp::mov,  // 2,3 are shifts
          DpOp::mov, DpOp::adc, DpOp::sbc, DpOp::mov,   // 4,7 are shifts
          DpOp::tst, DpOp::rsb, DpOp::cmp, DpOp::cmn,
          DpOp::orr, DpOp::mov, DpOp::bic, DpOp::mvn,   // 13 is MULS
        };
        i.set_flags = true;
        if (op == 2 || op == 3 || op == 4 || op == 7) {  // register shifts
          i.kind = OpKind::shift;
          i.shift_kind = op == 2 ? ShiftKind::lsl : op == 3 ? ShiftKind::lsr
                       : op == 4 ? ShiftKind::asr : ShiftKind::ror;
          i.rd = i.rm = reg(rd3); i.rs = reg(rn3);
          return i;
        }
        if (op == 13) {  // MULS Rdm, Rn, Rdm
          i.kind = OpKind::mul;
          i.rd = reg(rd3); i.rn = reg(rn3); i.rm = reg(rd3);
          return i;
        }
        i.kind = OpKind::dp; i.dp = kMap[op];
        switch (i.dp) {
          case DpOp::tst: case DpOp::cmp: case DpOp::cmn:
            i.rn = reg(rd3); i.rm = reg(rn3); break;
          case DpOp::rsb:  // RSBS Rd, Rn, #0
            i.rd = reg(rd3); i.rn = reg(rn3); i.has_imm_operand = true; i.imm = 0; break;
          case DpOp::mvn:
            i.rd = reg(rd3); i.rm = reg(rn3); break;
          default:
            i.rd = i.rn = reg(rd3); i.rm = reg(rn3); break;
        }
        return i;
      }
      if ((h >> 10) == 0x11) {  // special data / branch-exchange
        u8 op = (h >> 8) & 3;
        if (op == 3) {
          if (h & 7) return undecodable(h, 0, addr, 2);
          i.kind = ((h >> 7) & 1) ? OpKind::blx : OpKind::bx;
          i.rm = reg((h >> 3) & 0xF);
          return i;
        }
        Reg rm = reg((h >> 3) & 0xF);
        Reg rdn = reg(((h >> 7) & 1) << 3 | rd3);
        i.kind = OpKind::dp;
        switch (op) {
          case 0: i.dp = DpOp::add; i.rd = i.rn = rdn; i.rm = rm; break;
          case 1:
            if (is_low(rdn) && is_low(rm)) return undecodable(h, 0, addr, 2);
            i.dp = DpOp::cmp; i.rn = rdn; i.rm = rm; i.set_flags = true;
            break;
          case 2: i.dp = DpOp::mov; i.rd = rdn; i.rm = rm; break;
        }
        return i;
      }
      // LDR literal
      i.kind = OpKind::mem; i.load = true; i.size = MemSize::word;
      i.rt = reg((h >> 8) & 7); i.rn = Reg::pc;
      i.imm = (h & 0xFF) * 4; i.add_offset = true;
      return i;
    }
    case 0x5: {  // load/store register offset
      static constexpr struct { bool load; MemSize size; bool sign; } kOps[8] = {
        {false, MemSize::word, false}, {false, MemSize::half, false},
        {false, MemSize::byte, false}, {true,  MemSize::byte, true},
        {true,  MemSize::word, false}, {true,  MemSize::half, false},
        {true,  MemSize::byte, false}, {true,  MemSize::half, true},
      };
      auto op = kOps[(h >> 9) & 7];
      i.kind = OpKind::mem; i.load = op.load; i.size = op.size; i.sign_extend = op.sign;
      i.rt = reg(rd3); i.rn = reg(rn3); i.rm = reg(rm3);
      return i;
    }
    case 0x6: case 0x7: {  // STR/LDR/STRB/LDRB immediate
      u8 imm5 = (h >> 6) & 31;
      bool byte = (h >> 12) == 0x7;
      i.kind = OpKind::mem; i.load = (h >> 11) & 1;
      i.size = byte ? MemSize::byte : MemSize::word;
      i.imm = byte ? imm5 : imm5 * 4;
      i.rt = reg(rd3); i.rn = reg(rn3);
      return i;
    }
    case 0x8: {  // STRH/LDRH immediate
      i.kind = OpKind::mem; i.load = (h >> 11) & 1; i.size = MemSize::half;
      i.imm = ((h >> 6) & 31) * 2;
      i.rt = reg(rd3); i.rn = reg(rn3);
      return i;
    }
    case 0x9: {  // STR/LDR [SP, #imm8*4]
      i.kind = OpKind::mem; i.load = (h >> 11) & 1; i.size = MemSize::word;
      i.imm = (h & 0xFF) * 4;
      i.rt = reg((h >> 8) & 7); i.rn = Reg::sp;
      return i;
    }
    case 0xA: {
      if (((h >> 11) & 1) == 0) {  // ADR
        i.kind = OpKind::adr; i.rd = reg((h >> 8) & 7);
        i.imm = (h & 0xFF) * 4; i.add_offset = true;
        return i;
      }
      i.kind = OpKind::dp; i.dp = DpOp::add;  // ADD Rd, SP, #imm8*4
      i.rd = reg((h >> 8) & 7); i.rn = Reg::sp;
      i.has_imm_operand = true; i.imm = (h & 0xFF) * 4;
      return i;
    }
    case 0xB: {  // miscellaneous
      switch ((h >> 8) & 0xF) {
        case 0x0: {  // ADD/SUB SP, #imm7*4
          i.kind = OpKind::dp; i.dp = ((h >> 7) & 1) ? DpOp::sub : DpOp::add;
          i.rd = i.rn = Reg::sp; i.has_imm_operand = true; i.imm = (h & 0x7F) * 4;
          return i;
        }
        case 0x2: {
          static constexpr OpKind kExt[4] = {OpKind::sxth, OpKind::sxtb, OpKind::uxth, OpKind::uxtb};
          i.kind = kExt[(h >> 6) & 3];
          i.rd = reg(rd3); i.rm = reg(rn3);
          return i;
        }
        case 0x1: case 0x3: case 0x9: case 0xB: {  // CBZ/CBNZ
          i.kind = ((h >> 11) & 1) ? OpKind::cbnz : OpKind::cbz;
          i.rn = reg(rd3);
          i.imm = (((h >> 9) & 1) << 6) | (((h >> 3) & 31) << 1);
          return i;
        }
        case 0x4: case 0x5: {  // PUSH
          i.kind = OpKind::mem_multi; i.load = false; i.before = true; i.writeback = true;
          i.rn = Reg::sp;
          i.reglist = u16((h & 0xFF) | (((h >> 8) & 1) << 14));
          if (i.reglist == 0) return undecodable(h, 0, addr, 2);
          return i;
        }
        case 0x6: {
          if ((h & 0xFFE8) == 0xB660) { i.kind = OpKind::cps; i.imm = h & 0x1F; return i; }
          return undecodable(h, 0, addr, 2);
        }
        case 0xA: {
          switch ((h >> 6) & 3) {
            case 0: i.kind = OpKind::rev; break;
            case 1: i.kind = OpKind::rev16; break;
            case 3: i.kind = OpKind::revsh; break;
            default: return undecodable(h, 0, addr, 2);
          }
          i.rd = reg(rd3); i.rm = reg(rn3);
          return i;
        }
        case 0xC: case 0xD: {  // POP
          i.kind = OpKind::mem_multi; i.load = true; i.before = false; i.writeback = true;
          i.rn = Reg::sp;
          i.reglist = u16((h & 0xFF) | (((h >> 8) & 1) << 15));
          if (i.reglist == 0) return undecodable(h, 0, addr, 2);
          return i;
        }
        case 0xE: i.kind = OpKind::bkpt; i.imm = h & 0xFF; return i;
        case 0xF: {
          u8 mask = h & 0xF, op = (h >> 4) & 0xF;
          if (mask != 0) {
            if (op == 0xF || (op == 0xE && mask != 0x8)) return undecodable(h, 0, addr, 2);
            i.kind = OpKind::it; i.it_firstcond = op; i.it_mask = mask;
            return i;
          }
          switch (op) {
            case 0: i.kind = OpKind::nop; return i;
            case 1: i.kind = OpKind::yield; return i;
            case 2: i.kind = OpKind::wfe; return i;
            case 3: i.kind = OpKind::wfi; return i;
            case 4: i.kind = OpKind::sev; return i;
            default: return undecodable(h, 0, addr, 2);
          }
        }
        default: return undecodable(h, 0, addr, 2);
      }
    }
    case 0xC: {  // STM/LDM (IA)
      i.kind = OpKind::mem_multi; i.load = (h >> 11) & 1; i.before = false;
      i.rn = reg((h >> 8) & 7); i.reglist = h & 0xFF;
      if (i.reglist == 0) return undecodable(h, 0, addr, 2);
      i.writeback = !i.load || !(i.reglist >> idx(i.rn) & 1);
      return i;
    }
    case 0xD: {
      u8 cond = (h >> 8) & 0xF;
      if (cond == 0xE) { i.kind = OpKind::udf; i.imm = h & 0xFF; return i; }
      if (cond == 0xF) { i.kind = OpKind::svc; i.imm = h & 0xFF; return i; }
      i.kind = OpKind::b; i.cond = static_cast<Cond>(cond);
      i.imm = sext((h & 0xFF) << 1, 9);
      return i;
    }
    case 0xE: {  // B (T2); top bits 0xE8+ are 32-bit prefixes, not reached here
      i.kind = OpKind::b; i.cond = Cond::al;
      i.imm = sext((h & 0x7FF) << 1, 12);
      return i;
    }
    default:
      return undecodable(h, 0, addr, 2);
  }
}

// ---------------------------------------------------------------- 32-bit --

DpOp dp_from_t32(u8 op, bool& known) {
  known = true;
  switch (op) {
    case 0x0: return DpOp::and_;
    case 0x1: return DpOp::bic;
    case 0x2: return DpOp::orr;
    case 0x3: return DpOp::orn;
    case 0x4: return DpOp::eor;
    case 0x8: return DpOp::add;
    case 0xA: return DpOp::adc;
    case 0xB: return DpOp::sbc;
    case 0xD: return DpOp::sub;
    case 0xE: return DpOp::rsb;
    default: known = false; return DpOp::mov;
  }
}

Instruction decode32(u16 h1, u16 h2, u32 addr) {
  Instruction i = base(h1, h2, addr, 4);

  if ((h1 >> 11) == 0x1D) {  // 11101
    u8 op2 = (h1 >> 9) & 3;
    if (op2 == 0) {
      // Load/store multiple vs table branch vs (unsupported) exclusive/dual
      if ((h1 & 0xFFF0) == 0xE8D0 && (h2 & 0xFFE0) == 0xF000) {
        i.kind = ((h2 >> 4) & 1) ? OpKind::tbh : OpKind::tbb;
        i.rn = reg(h1 & 0xF); i.rm = reg(h2 & 0xF);
        if (i.rn == Reg::sp || i.rm == Reg::sp || i.rm == Reg::pc)
          return undecodable(h1, h2, addr, 4);
        return i;
      }
      u8 mode = (h1 >> 7) & 3;
      if (((h1 >> 6) & 1) == 0 && (mode == 1 || mode == 2)) {
        i.kind = OpKind::mem_multi;
        i.before = mode == 2;
        i.load = (h1 >> 4) & 1;
        i.writeback = (h1 >> 5) & 1;
        i.rn = reg(h1 & 0xF);
        i.reglist = h2;
        if (i.rn == Reg::pc) return undecodable(h1, h2, addr, 4);
        if (__builtin_popcount(i.reglist) < 2 || (h2 & 0x2000))
          return undecodable(h1, h2, addr, 4);
        if (!i.load && (h2 & 0x8000)) return undecodable(h1, h2, addr, 4);  // STM {PC}
        if (i.writeback && ((i.reglist >> idx(i.rn)) & 1))
          return undecodable(h1, h2, addr, 4);
        return i;
      }
      return undecodable(h1, h2, addr, 4);
    }
    if (op2 == 1) {  // data-processing, shifted register
      u8 op = (h1 >> 5) & 0xF;
      bool s = (h1 >> 4) & 1;
      Reg rn = reg(h1 & 0xF);
      Reg rd = reg((h2 >> 8) & 0xF);
      Reg rm = reg(h2 & 0xF);
      u8 imm5 = u8((((h2 >> 12) & 7) << 2) | ((h2 >> 6) & 3));
      u8 type = (h2 >> 4) & 3;
      bool known;
      DpOp dop = dp_from_t32(op, known);
      if (!known || (h2 & 0x8000)) return undecodable(h1, h2, addr, 4);

      if (dop == DpOp::orr && rn == Reg::pc) {  // MOV (register/shift) forms
        if (rd == Reg::pc || rm == Reg::pc) return undecodable(h1, h2, addr, 4);
        if (type == 0 && imm5 == 0) {
          i.kind = OpKind::dp; i.dp = DpOp::mov; i.set_flags = s; i.rd = rd; i.rm = rm;
          return i;
        }
        i.kind = OpKind::shift; i.set_flags = s; i.rd = rd; i.rm = rm;
        if (type == 3 && imm5 == 0) { i.shift_kind = ShiftKind::rrx; i.shift_amount = 1; }
        else {
          i.shift_kind = static_cast<ShiftKind>(type);
          i.shift_amount = (type >= 1 && type <= 2 && imm5 == 0) ? 32 : imm5;
        }
        return i;
      }
      if (dop == DpOp::orn && rn == Reg::pc) { dop = DpOp::mvn; rn = Reg::none; }
      if (rd == Reg::pc) {
        if (!s) return undecodable(h1, h2, addr, 4);
        switch (dop) {  // compare/test forms write no register
          case DpOp::and_: dop = DpOp::tst; break;
          case DpOp::eor: dop = DpOp::teq; break;
          case DpOp::add: dop = DpOp::cmn; break;
          case DpOp::sub: dop = DpOp::cmp; break;
          default: return undecodable(h1, h2, addr, 4);
        }
        rd = Reg::none;
      }
      if (rn == Reg::pc || rm == Reg::pc) return undecodable(h1, h2, addr, 4);
      i.kind = OpKind::dp; i.dp = dop; i.set_flags = s;
      i.rd = rd; i.rn = rn; i.rm = rm;
      i.shift_kind = (type == 3 && imm5 == 0) ? ShiftKind::rrx : static_cast<ShiftKind>(type);
      i.shift_amount = ((type == 1 || type == 2) && imm5 == 0) ? 32
                     : (i.shift_kind == ShiftKind::rrx ? 1 : imm5);
      return i;
    }
    return undecodable(h1, h2, addr, 4);  // coprocessor space
  }

  if ((h1 >> 11) == 0x1E) {  // 11110
    if ((h2 & 0x8000) == 0) {
      // Data processing, immediate
      if (((h1 >> 9) & 1) == 0) {  // modified immediate
        u8 op = (h1 >> 5) & 0xF;
        bool s = (h1 >> 4) & 1;
        Reg rn = reg(h1 & 0xF);
        Reg rd = reg((h2 >> 8) & 0xF);
        u16 imm12 = u16((((h1 >> 10) & 1) << 11) | (((h2 >> 12) & 7) << 8) | (h2 & 0xFF));
        bool known;
        DpOp dop = dp_from_t32(op, known);
        if (!known) return undecodable(h1, h2, addr, 4);
        // Splat patterns with a zero byte are not valid encodings.
        if ((imm12 >> 10) == 0 && (imm12 & 0x300) != 0 && (imm12 & 0xFF) == 0)
          return undecodable(h1, h2, addr, 4);
        if (dop == DpOp::orr && rn == Reg::pc) { dop = DpOp::mov; rn = Reg::none; }
        if (dop == DpOp::orn && rn == Reg::pc) { dop = DpOp::mvn; rn = Reg::none; }
        if (rd == Reg::pc) {
          if (!s) return undecodable(h1, h2, addr, 4);
          switch (dop) {
            case DpOp::and_: dop = DpOp::tst; break;
            case DpOp::eor: dop = DpOp::teq; break;
            case DpOp::add: dop = DpOp::cmn; break;
            case DpOp::sub: dop = DpOp::cmp; break;
            default: return undecodable(h1, h2, addr, 4);
          }
          rd = Reg::none;
        }
        if (rn == Reg::pc) return undecodable(h1, h2, addr, 4);
        i.kind = OpKind::dp; i.dp = dop; i.set_flags = s;
        i.rd = rd; i.rn = rn;
        i.has_imm_operand = true; i.imm = thumb::expand_imm(imm12);
        return i;
      }
      // plain 12/16-bit immediate
      u8 op = (h1 >> 4) & 0x1F;
      Reg rn = reg(h1 & 0xF);
      Reg rd = reg((h2 >> 8) & 0xF);
      u16 imm12 = u16((((h1 >> 10) & 1) << 11) | (((h2 >> 12) & 7) << 8) | (h2 & 0xFF));
      if (rd == Reg::pc) return undecodable(h1, h2, addr, 4);
      switch (op) {
        case 0x00:  // ADDW / ADR (add)
          if (rn == Reg::pc) { i.kind = OpKind::adr; i.rd = rd; i.imm = imm12; i.add_offset = true; }
          else { i.kind = OpKind::dp; i.dp = DpOp::add; i.rd = rd; i.rn = rn;
                 i.has_imm_operand = true; i.plain_imm = true; i.imm = imm12; }
          return i;
        case 0x0A:  // SUBW / ADR (sub)
          if (rn == Reg::pc) { i.kind = OpKind::adr; i.rd = rd; i.imm = imm12; i.add_offset = false; }
          else { i.kind = OpKind::dp; i.dp = DpOp::sub; i.rd = rd; i.rn = rn;
                 i.has_imm_operand = true; i.plain_imm = true; i.imm = imm12; }
          return i;
        case 0x04:  // MOVW
          i.kind = OpKind::movw; i.rd = rd;
          i.imm = u32((h1 & 0xF) << 12) | imm12;
          return i;
        case 0x0C:  // MOVT
          i.kind = OpKind::movt; i.rd = rd;
          i.imm = u32((h1 & 0xF) << 12) | imm12;
          return i;
        default:
          return undecodable(h1, h2, addr, 4);
      }
    }
    // Branches and miscellaneous control
    if (h1 == 0xF3EF && (h2 & 0xF000) == 0x8000) {
      i.kind = OpKind::mrs; i.rd = reg((h2 >> 8) & 0xF); i.sysm = h2 & 0xFF;
      return i;
    }
    if ((h1 & 0xFFF0) == 0xF380 && (h2 & 0xF300) == 0x8000) {
      i.kind = OpKind::msr; i.rn = reg(h1 & 0xF); i.sysm = h2 & 0xFF;
      i.imm = (h2 >> 10) & 3;  // mask bits
      return i;
    }
    switch ((h2 >> 12) & 5) {
      case 0x1: {  // B (T4)
        u32 s = (h1 >> 10) & 1, j1 = (h2 >> 13) & 1, j2 = (h2 >> 11) & 1;
        u32 i1 = !(j1 ^ s), i2 = !(j2 ^ s);
        u32 off = (s << 24) | (i1 << 23) | (i2 << 22) | ((h1 & 0x3FF) << 12) | ((h2 & 0x7FF) << 1);
        i.kind = OpKind::b; i.cond = Cond::al; i.imm = sext(off, 25);
        return i;
      }
      case 0x5: {  // BL
        u32 s = (h1 >> 10) & 1, j1 = (h2 >> 13) & 1, j2 = (h2 >> 11) & 1;
        u32 i1 = !(j1 ^ s), i2 = !(j2 ^ s);
        u32 off = (s << 24) | (i1 << 23) | (i2 << 22) | ((h1 & 0x3FF) << 12) | ((h2 & 0x7FF) << 1);
        i.kind = OpKind::bl; i.imm = sext(off, 25);
        return i;
      }
      case 0x0: {  // B (T3), conditional
        u8 cond = (h1 >> 6) & 0xF;
        if (cond >= 0xE) return undecodable(h1, h2, addr, 4);  // hint/misc space
        u32 s = (h1 >> 10) & 1, j1 = (h2 >> 13) & 1, j2 = (h2 >> 11) & 1;
        u32 off = (s << 20) | (j2 << 19) | (j1 << 18) | ((h1 & 0x3F) << 12) | ((h2 & 0x7FF) << 1);
        i.kind = OpKind::b; i.cond = static_cast<Cond>(cond); i.imm = sext(off, 21);
        return i;
      }
      default:
        return undecodable(h1, h2, addr, 4);  // BLX(imm) is undefined on this profile
    }
  }

  // 11111: load/store single and remaining spaces
  if (((h1 >> 9) & 3) == 0) {
    bool sign = (h1 >> 8) & 1;
    bool imm12_form = (h1 >> 7) & 1;
    u8 sz = (h1 >> 5) & 3;
    bool load = (h1 >> 4) & 1;
    Reg rn = reg(h1 & 0xF);
    Reg rt = reg((h2 >> 12) & 0xF);
    if (sz == 3 || (sign && !load)) return undecodable(h1, h2, addr, 4);
    i.kind = OpKind::mem; i.load = load; i.sign_extend = sign;
    i.size = static_cast<MemSize>(sz);
    i.rt = rt; i.rn = rn;
    if (rt == Reg::pc && (!load || sz != 2)) return undecodable(h1, h2, addr, 4);
    if (rn == Reg::pc) {  // literal; bit7 is U here
      if (!load) return undecodable(h1, h2, addr, 4);
      i.add_offset = imm12_form;
      i.imm = h2 & 0xFFF;
      return i;
    }
    if (imm12_form) {
      i.imm = h2 & 0xFFF; i.add_offset = true;
      return i;
    }
    if ((h2 >> 11) & 1) {  // imm8 with P/U/W
      bool p = (h2 >> 10) & 1, u = (h2 >> 9) & 1, w = (h2 >> 8) & 1;
      if (!p && !w) return undecodable(h1, h2, addr, 4);      // no such addressing mode
      if (p && u && !w) return undecodable(h1, h2, addr, 4);  // unprivileged access forms
      i.imm = h2 & 0xFF; i.add_offset = u; i.writeback = w; i.pre_indexed = p;
      return i;
    }
    if (((h2 >> 6) & 0x3F) == 0) {  // register offset
      i.rm = reg(h2 & 0xF); i.shift_amount = (h2 >> 4) & 3;
      if (i.rm == Reg::sp || i.rm == Reg::pc) return undecodable(h1, h2, addr, 4);
      return i;
    }
    return undecodable(h1, h2, addr, 4);
  }
  return undecodable(h1, h2, addr, 4);
}

// --------------------------------------------------------------- use/def --

void compute_usedef(Instruction& i) {
  RegisterSet r, w;
  bool rf = false, sf = i.set_flags;

  switch (i.kind) {
    case OpKind::dp:
      if (dp_reads_rn(i.dp) && i.rn != Reg::none) r.add(i.rn);
      if (!i.has_imm_operand && i.rm != Reg::none) r.add(i.rm);
      if (dp_writes_rd(i.dp)) w.add(i.rd);
      if (i.dp == DpOp::adc || i.dp == DpOp::sbc) rf = true;
      break;
    case OpKind::shift:
      r.add(i.rm);
      if (i.rs != Reg::none) r.add(i.rs);
      w.add(i.rd);
      if (i.shift_kind == ShiftKind::rrx) rf = true;
      break;
    case OpKind::movw: w.add(i.rd); break;
    case OpKind::movt: r.add(i.rd); w.add(i.rd); break;
    case OpKind::adr: r.add(Reg::pc); w.add(i.rd); break;
    case OpKind::mul: r.add(i.rn); r.add(i.rm); w.add(i.rd); break;
    case OpKind::sxth: case OpKind::sxtb: case OpKind::uxth: case OpKind::uxtb:
    case OpKind::rev: case OpKind::rev16: case OpKind::revsh:
      r.add(i.rm); w.add(i.rd);
      break;
    case OpKind::mem:
      r.add(i.rn);
      if (i.rm != Reg::none) r.add(i.rm);
      if (i.load) w.add(i.rt); else r.add(i.rt);
      if (i.writeback) w.add(i.rn);
      break;
    case OpKind::mem_multi:
      r.add(i.rn);
      if (i.load) w.bits |= i.reglist; else r.bits |= i.reglist;
      if (i.writeback) w.add(i.rn);
      break;
    case OpKind::b:
      r.add(Reg::pc); w.add(Reg::pc);
      rf = i.cond != Cond::al;
      break;
    case OpKind::bl:
      r.add(Reg::pc); w.add(Reg::pc); w.add(Reg::lr);
      break;
    case OpKind::bx: r.add(i.rm); w.add(Reg::pc); break;
    case OpKind::blx: r.add(i.rm); w.add(Reg::pc); w.add(Reg::lr); break;
    case OpKind::cbz: case OpKind::cbnz:
      r.add(i.rn); r.add(Reg::pc); w.add(Reg::pc);
      break;
    case OpKind::tbb: case OpKind::tbh:
      r.add(i.rn); r.add(i.rm); r.add(Reg::pc); w.add(Reg::pc);
      break;
    case OpKind::mrs: w.add(i.rd); break;
    case OpKind::msr: r.add(i.rn); sf = true; break;
    default:
      break;  // it, hints, svc/bkpt/cps/udf, undecodable: no register traffic
  }
  i.reads = r;
  i.writes = w;
  i.reads_flags = rf;
  i.sets_flags = sf;
}

}  // namespace

int instr_length(u16 first_halfword) {
  u16 top5 = first_halfword >> 11;
  return (top5 == 0x1D || top5 == 0x1E || top5 == 0x1F) ? 4 : 2;
}

Instruction decode(u16 hw1, u16 hw2, u32 address) {
  Instruction i = instr_length(hw1) == 2 ? decode16(hw1, address)
                                         : decode32(hw1, hw2, address);
  compute_usedef(i);
  return i;
}

InstrClass classify(const Instruction& i) {
  switch (i.kind) {
    case OpKind::undecodable:
      return InstrClass::undecodable;
    case OpKind::bkpt: case OpKind::cps: case OpKind::mrs: case OpKind::msr:
    case OpKind::sev: case OpKind::svc: case OpKind::wfe: case OpKind::wfi:
      return InstrClass::unsupported;
    case OpKind::b: case OpKind::bl: case OpKind::bx: case OpKind::blx:
    case OpKind::cbz: case OpKind::cbnz: case OpKind::tbb: case OpKind::tbh:
    case OpKind::adr:
      return InstrClass::c2;
    default:
      if (i.is_mem_literal()) return InstrClass::c2;
      if (i.reads.contains(Reg::pc) || i.writes.contains(Reg::pc)) return InstrClass::c2;
      return InstrClass::c1;
  }
}

RegisterSet registers_used(const Instruction& i) {
  return (i.reads | i.writes) & RegisterSet::general();
}

const char* instr_class_name(InstrClass c) {
  switch (c) {
    case InstrClass::c1: return "C1";
    case InstrClass::c2: return "C2";
    case InstrClass::unsupported: return "unsupported";
    case InstrClass::undecodable: return "undecodable";
  }
  return "?";
}

namespace {

const char* dp_name(DpOp op, bool s) {
  switch (op) {
    case DpOp::and_: return s ? "ands" : "and";
    case DpOp::bic: return s ? "bics" : "bic";
    case DpOp::orr: return s ? "orrs" : "orr";
    case DpOp::orn: return s ? "orns" : "orn";
    case DpOp::eor: return s ? "eors" : "eor";
    case DpOp::add: return s ? "adds" : "add";
    case DpOp::adc: return s ? "adcs" : "adc";
    case DpOp::sbc: return s ? "sbcs" : "sbc";
    case DpOp::sub: return s ? "subs" : "sub";
    case DpOp::rsb: return s ? "rsbs" : "rsb";
    case DpOp::cmp: return "cmp";
    case DpOp::cmn: return "cmn";
    case DpOp::tst: return "tst";
    case DpOp::teq: return "teq";
    case DpOp::mov: return s ? "movs" : "mov";
    case DpOp::mvn: return s ? "mvns" : "mvn";
  }
  return "?";
}

const char* shift_name(ShiftKind k, bool s) {
  switch (k) {
    case ShiftKind::lsl: return s ? "lsls" : "lsl";
    case ShiftKind::lsr: return s ? "lsrs" : "lsr";
    case ShiftKind::asr: return s ? "asrs" : "asr";
    case ShiftKind::ror: return s ? "rors" : "ror";
    case ShiftKind::rrx: return s ? "rrxs" : "rrx";
  }
  return "?";
}

std::string hex(u32 v) {
  char buf[16];
  snprintf(buf, sizeof buf, "0x%x", v);
  return buf;
}

std::string shift_suffix(const Instruction& i) {
  if (i.shift_kind == ShiftKind::lsl && i.shift_amount == 0) return "";
  if (i.shift_kind == ShiftKind::rrx) return ", rrx";
  return std::string(", ") + shift_name(i.shift_kind, false) + " #" +
         std::to_string(i.shift_amount);
}

}  // namespace

std::string to_string(const Instruction& i) {
  const std::string w = i.wide() ? ".w" : "";
  auto r = [](Reg x) { return reg_name(x); };

  switch (i.kind) {
    case OpKind::undecodable:
      return "undecodable";
    case OpKind::dp: {
      std::string op2 = i.has_imm_operand ? "#" + std::to_string(i.imm)
                                          : r(i.rm) + shift_suffix(i);
      std::string out = std::string(dp_name(i.dp, i.set_flags)) + w + " ";
      if (i.dp == DpOp::cmp || i.dp == DpOp::cmn || i.dp == DpOp::tst || i.dp == DpOp::teq)
        return out + r(i.rn) + ", " + op2;
      if (i.dp == DpOp::mov || i.dp == DpOp::mvn)
        return out + r(i.rd) + ", " + op2;
      return out + r(i.rd) + ", " + r(i.rn) + ", " + op2;
    }
    case OpKind::shift: {
      std::string out = std::string(shift_name(i.shift_kind, i.set_flags)) + w + " ";
      if (i.shift_kind == ShiftKind::rrx) return out + r(i.rd) + ", " + r(i.rm);
      if (i.rs != Reg::none) return out + r(i.rd) + ", " + r(i.rs);
      return out + r(i.rd) + ", " + r(i.rm) + ", #" + std::to_string(i.shift_amount);
    }
    case OpKind::movw: return "movw " + r(i.rd) + ", #" + std::to_string(i.imm);
    case OpKind::movt: return "movt " + r(i.rd) + ", #" + std::to_string(i.imm);
    case OpKind::adr: {
      u32 target = ((i.pc_value()) & ~3u) + (i.add_offset ? i.imm : u32(-i32(i.imm)));
      return "adr" + w + " " + r(i.rd) + ", " + hex(target);
    }
    case OpKind::mul: return "muls " + r(i.rd) + ", " + r(i.rn) + ", " + r(i.rm);
    case OpKind::sxth: return "sxth " + r(i.rd) + ", " + r(i.rm);
    case OpKind::sxtb: return "sxtb " + r(i.rd) + ", " + r(i.rm);
    case OpKind::uxth: return "uxth " + r(i.rd) + ", " + r(i.rm);
    case OpKind::uxtb: return "uxtb " + r(i.rd) + ", " + r(i.rm);
    case OpKind::rev: return "rev " + r(i.rd) + ", " + r(i.rm);
    case OpKind::rev16: return "rev16 " + r(i.rd) + ", " + r(i.rm);
    case OpKind::revsh: return "revsh " + r(i.rd) + ", " + r(i.rm);
    case OpKind::mem: {
      std::string op = i.load ? "ldr" : "str";
      if (i.sign_extend) op = "ldrs";
      if (i.size == MemSize::byte) op += "b";
      else if (i.size == MemSize::half) op += "h";
      op += w;
      op += " " + r(i.rt) + ", ";
      if (i.rn == Reg::pc) {
        u32 target = (i.pc_value() & ~3u) + (i.add_offset ? i.imm : u32(-i32(i.imm)));
        return op + "[" + hex(target) + "]";
      }
      if (i.rm != Reg::none) {
        std::string idx2 = r(i.rm);
        if (i.shift_amount) idx2 += ", lsl #" + std::to_string(i.shift_amount);
        return op + "[" + r(i.rn) + ", " + idx2 + "]";
      }
      std::string off = std::string(i.add_offset ? "#" : "#-") + std::to_string(i.imm);
      if (!i.writeback) return op + "[" + r(i.rn) + (i.imm ? ", " + off : "") + "]";
      if (i.pre_indexed) return op + "[" + r(i.rn) + ", " + off + "]!";
      return op + "[" + r(i.rn) + "], " + off;
    }
    case OpKind::mem_multi: {
      if (i.rn == Reg::sp && i.writeback && !i.wide()) {
        return (i.load ? "pop " : "push ") + to_string(RegisterSet(i.reglist));
      }
      std::string op = i.load ? "ldm" : "stm";
      op += i.before ? "db" : "ia";
      return op + w + " " + r(i.rn) + (i.writeback ? "!" : "") + ", " +
             to_string(RegisterSet(i.reglist));
    }
    case OpKind::b: {
      std::string op = "b";
      if (i.cond != Cond::al) op += cond_name(i.cond);
      return op + w + " " + hex(i.pc_value() + i.imm);
    }
    case OpKind::bl: return "bl " + hex(i.pc_value() + i.imm);
    case OpKind::bx: return "bx " + r(i.rm);
    case OpKind::blx: return "blx " + r(i.rm);
    case OpKind::cbz: return "cbz " + r(i.rn) + ", " + hex(i.pc_value() + i.imm);
    case OpKind::cbnz: return "cbnz " + r(i.rn) + ", " + hex(i.pc_value() + i.imm);
    case OpKind::tbb: return "tbb [" + r(i.rn) + ", " + r(i.rm) + "]";
    case OpKind::tbh: return "tbh [" + r(i.rn) + ", " + r(i.rm) + ", lsl #1]";
    case OpKind::it: {
      std::string suffix;
      u8 fc0 = i.it_firstcond & 1;
      // Mask encodes the then/else pattern terminated by the lowest set bit.
      for (int bit = 3; bit >= 1; --bit) {
        u8 below = u8(i.it_mask & ((1u << bit) - 1));
        if (below == 0) break;
        suffix += (((i.it_mask >> bit) & 1) == fc0) ? 't' : 'e';
      }
      return "it" + suffix + " " + cond_name(static_cast<Cond>(i.it_firstcond));
    }
    case OpKind::nop: return "nop";
    case OpKind::yield: return "yield";
    case OpKind::bkpt: return "bkpt #" + std::to_string(i.imm);
    case OpKind::cps:
      return std::string("cps") + (((i.imm >> 4) & 1) ? "id" : "ie") + " " +
             ((i.imm & 2) ? "i" : (i.imm & 1) ? "f" : "?");
    case OpKind::mrs: return "mrs " + r(i.rd) + ", sysm#" + std::to_string(i.sysm);
    case OpKind::msr: return "msr sysm#" + std::to_string(i.sysm) + ", " + r(i.rn);
    case OpKind::sev: return "sev";
    case OpKind::wfe: return "wfe";
    case OpKind::wfi: return "wfi";
    case OpKind::svc: return "svc #" + std::to_string(i.imm);
    case OpKind::udf: return "udf #" + std::to_string(i.imm);
  }
  return "?";
}

namespace thumb {

u32 expand_imm(u16 imm12) {
  bool carry = false;
  return expand_imm_carry(imm12, false, carry);
}

u32 expand_imm_carry(u16 imm12, bool carry_in, bool& carry_out) {
  u32 top = (imm12 >> 10) & 3;
  u32 imm8 = imm12 & 0xFF;
  if (top == 0) {
    carry_out = carry_in;
    switch ((imm12 >> 8) & 3) {
      case 0: return imm8;
      case 1: return (imm8 << 16) | imm8;
      case 2: return (imm8 << 24) | (imm8 << 8);
      case 3: return (imm8 << 24) | (imm8 << 16) | (imm8 << 8) | imm8;
    }
  }
  u32 unrotated = 0x80 | (imm8 & 0x7F);
  u32 rot = (imm12 >> 7) & 0x1F;
  u32 value = (unrotated >> rot) | (unrotated << (32 - rot));
  carry_out = (value >> 31) & 1;
  return value;
}

bool compress_imm(u32 value, u16& imm12_out) {
  if (value <= 0xFF) { imm12_out = u16(value); return true; }
  u32 b = value & 0xFF;
  u32 b1 = (value >> 8) & 0xFF;
  if (b && value == ((b << 16) | b)) { imm12_out = u16(0x100 | b); return true; }
  if (b1 && value == ((b1 << 24) | (b1 << 8))) { imm12_out = u16(0x200 | b1); return true; }
  if (b && value == ((b << 24) | (b << 16) | (b << 8) | b)) { imm12_out = u16(0x300 | b); return true; }
  for (u32 rot = 8; rot <= 31; ++rot) {
    u32 unrot = (value << rot) | (value >> (32 - rot));
    if (unrot <= 0xFF && (unrot & 0x80)) {
      imm12_out = u16((rot << 7) | (unrot & 0x7F));
      return true;
    }
  }
  return false;
}

}  // namespace thumb

}  // namespace bmr
