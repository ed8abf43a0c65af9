#include "bmr/decoder.hpp"

namespace bmr {

namespace {

bool low(Reg r) { return r != Reg::none && is_low(r); }

bool fits_u(u32 v, int bits) { return (v >> bits) == 0; }

bool fits_s(i32 v, int bits) {
  i32 lim = 1 << (bits - 1);
  return v >= -lim && v < lim;
}

int t32_dp_opcode(DpOp op) {
  switch (op) {
    case DpOp::and_: case DpOp::tst: return 0x0;
    case DpOp::bic: return 0x1;
    case DpOp::orr: case DpOp::mov: return 0x2;
    case DpOp::orn: case DpOp::mvn: return 0x3;
    case DpOp::eor: case DpOp::teq: return 0x4;
    case DpOp::add: case DpOp::cmn: return 0x8;
    case DpOp::adc: return 0xA;
    case DpOp::sbc: return 0xB;
    case DpOp::sub: case DpOp::cmp: return 0xD;
    case DpOp::rsb: return 0xE;
  }
  return -1;
}

bool is_test_op(DpOp op) {
  return op == DpOp::cmp || op == DpOp::cmn || op == DpOp::tst || op == DpOp::teq;
}

// Operand-register layout shared by the wide dp encodings.
struct T32DpRegs {
  int rn_field, rd_field;
  bool ok;
  std::string error;
};

T32DpRegs t32_dp_regs(const Instruction& i) {
  T32DpRegs out{0, 0, true, {}};
  if (is_test_op(i.dp)) {
    out.rd_field = 0xF;
    if (i.rn == Reg::none || i.rn == Reg::pc)
      return {0, 0, false, "test op needs a valid rn"};
    out.rn_field = idx(i.rn);
    return out;
  }
  if (i.rd == Reg::none || i.rd == Reg::pc) return {0, 0, false, "dp rd missing"};
  out.rd_field = idx(i.rd);
  if (i.dp == DpOp::mov || i.dp == DpOp::mvn) {
    out.rn_field = 0xF;
  } else {
    if (i.rn == Reg::none || i.rn == Reg::pc) return {0, 0, false, "dp rn missing"};
    out.rn_field = idx(i.rn);
  }
  return out;
}

EncodeResult encode_dp16(const Instruction& i) {
  const bool s = i.set_flags;

  if (i.has_imm_operand) {
    switch (i.dp) {
      case DpOp::mov:
        if (!s) return EncodeResult::fail("16-bit mov-imm always sets flags");
        if (!low(i.rd)) return EncodeResult::fail("mov-imm needs a low rd");
        if (!fits_u(i.imm, 8)) return EncodeResult::fail("mov-imm exceeds 8 bits");
        return EncodeResult::narrow(u16(0x2000 | idx(i.rd) << 8 | i.imm));
      case DpOp::cmp:
        if (!low(i.rn)) return EncodeResult::fail("cmp-imm needs a low rn");
        if (!fits_u(i.imm, 8)) return EncodeResult::fail("cmp-imm exceeds 8 bits");
        return EncodeResult::narrow(u16(0x2800 | idx(i.rn) << 8 | i.imm));
      case DpOp::add:
      case DpOp::sub: {
        const bool sub = i.dp == DpOp::sub;
        if (i.rd == Reg::sp && i.rn == Reg::sp) {
          if (s) return EncodeResult::fail("sp adjust cannot set flags");
          if (i.imm % 4 || !fits_u(i.imm / 4, 7))
            return EncodeResult::fail("sp adjust immediate out of range");
          return EncodeResult::narrow(u16(0xB000 | (sub ? 0x80 : 0) | i.imm / 4));
        }
        if (!sub && i.rn == Reg::sp) {
          if (s) return EncodeResult::fail("add rd, sp cannot set flags");
          if (!low(i.rd)) return EncodeResult::fail("add rd, sp needs a low rd");
          if (i.imm % 4 || !fits_u(i.imm / 4, 8))
            return EncodeResult::fail("add rd, sp immediate out of range");
          return EncodeResult::narrow(u16(0xA800 | idx(i.rd) << 8 | i.imm / 4));
        }
        if (!s) return EncodeResult::fail("16-bit add/sub-imm always sets flags");
        if (!low(i.rd) || !low(i.rn))
          return EncodeResult::fail("add/sub-imm needs low registers");
        if (!i.plain_imm && i.rd == i.rn && fits_u(i.imm, 8))
          return EncodeResult::narrow(
              u16((sub ? 0x3800 : 0x3000) | idx(i.rd) << 8 | i.imm));
        if (fits_u(i.imm, 3))
          return EncodeResult::narrow(u16(0x1C00 | (sub ? 0x200 : 0) | i.imm << 6 |
                                          idx(i.rn) << 3 | idx(i.rd)));
        return EncodeResult::fail("add/sub immediate exceeds the 16-bit forms");
      }
      case DpOp::rsb:
        if (!s || i.imm != 0 || !low(i.rd) || !low(i.rn))
          return EncodeResult::fail("16-bit rsb is rsbs rd, rn, #0 only");
        return EncodeResult::narrow(u16(0x4240 | idx(i.rn) << 3 | idx(i.rd)));
      default:
        return EncodeResult::fail("no 16-bit immediate form for this dp op");
    }
  }

  // Register operand.
  if (i.shift_amount != 0)
    return EncodeResult::fail("no shifted-register 16-bit dp form");
  switch (i.dp) {
    case DpOp::add:
      if (s) {
        if (!low(i.rd) || !low(i.rn) || !low(i.rm))
          return EncodeResult::fail("adds-reg needs low registers");
        return EncodeResult::narrow(
            u16(0x1800 | idx(i.rm) << 6 | idx(i.rn) << 3 | idx(i.rd)));
      }
      if (i.rd != i.rn) return EncodeResult::fail("add-reg without flags needs rd == rn");
      if (i.rd == Reg::none || i.rm == Reg::none)
        return EncodeResult::fail("add-reg operands missing");
      return EncodeResult::narrow(
          u16(0x4400 | (idx(i.rd) >> 3) << 7 | idx(i.rm) << 3 | (idx(i.rd) & 7)));
    case DpOp::sub:
      if (!s || !low(i.rd) || !low(i.rn) || !low(i.rm))
        return EncodeResult::fail("16-bit sub-reg is subs with low registers");
      return EncodeResult::narrow(
          u16(0x1A00 | idx(i.rm) << 6 | idx(i.rn) << 3 | idx(i.rd)));
    case DpOp::mov:
      if (s) {
        if (!low(i.rd) || !low(i.rm)) return EncodeResult::fail("movs-reg needs low registers");
        return EncodeResult::narrow(u16(0x0000 | idx(i.rm) << 3 | idx(i.rd)));
      }
      if (i.rd == Reg::none || i.rm == Reg::none)
        return EncodeResult::fail("mov-reg operands missing");
      return EncodeResult::narrow(
          u16(0x4600 | (idx(i.rd) >> 3) << 7 | idx(i.rm) << 3 | (idx(i.rd) & 7)));
    case DpOp::cmp:
      if (low(i.rn) && low(i.rm))
        return EncodeResult::narrow(u16(0x4280 | idx(i.rm) << 3 | idx(i.rn)));
      if (i.rn == Reg::none || i.rm == Reg::none)
        return EncodeResult::fail("cmp-reg operands missing");
      return EncodeResult::narrow(
          u16(0x4500 | (idx(i.rn) >> 3) << 7 | idx(i.rm) << 3 | (idx(i.rn) & 7)));
    default: {
      int op;
      switch (i.dp) {
        case DpOp::and_: op = 0; break;
        case DpOp::eor: op = 1; break;
        case DpOp::adc: op = 5; break;
        case DpOp::sbc: op = 6; break;
        case DpOp::tst: op = 8; break;
        case DpOp::cmn: op = 11; break;
        case DpOp::orr: op = 12; break;
        case DpOp::bic: op = 14; break;
        case DpOp::mvn: op = 15; break;
        default: return EncodeResult::fail("no 16-bit register form for this dp op");
      }
      if (!s) return EncodeResult::fail("16-bit alu-reg always sets flags");
      Reg first = is_test_op(i.dp) ? i.rn : i.rd;
      if (!low(first) || !low(i.rm))
        return EncodeResult::fail("alu-reg needs low registers");
      if (!is_test_op(i.dp) && i.dp != DpOp::mvn && i.rd != i.rn)
        return EncodeResult::fail("16-bit alu-reg needs rd == rn");
      return EncodeResult::narrow(u16(0x4000 | op << 6 | idx(i.rm) << 3 | idx(first)));
    }
  }
}

EncodeResult encode_dp32(const Instruction& i) {
  auto regs = t32_dp_regs(i);
  if (!regs.ok) return EncodeResult::fail(regs.error);
  const int s = i.set_flags ? 1 : 0;

  if (i.has_imm_operand) {
    if (i.plain_imm) {
      if (i.set_flags) return EncodeResult::fail("plain-imm add/sub cannot set flags");
      if (i.dp != DpOp::add && i.dp != DpOp::sub)
        return EncodeResult::fail("plain-imm form is add/sub only");
      if (!fits_u(i.imm, 12)) return EncodeResult::fail("plain immediate exceeds 12 bits");
      u16 base = i.dp == DpOp::add ? 0xF200 : 0xF2A0;
      u16 h1 = u16(base | ((i.imm >> 11) & 1) << 10 | regs.rn_field);
      u16 h2 = u16(((i.imm >> 8) & 7) << 12 | regs.rd_field << 8 | (i.imm & 0xFF));
      return EncodeResult::wide(h1, h2);
    }
    u16 imm12;
    if (!thumb::compress_imm(i.imm, imm12))
      return EncodeResult::fail("immediate has no modified-immediate encoding");
    int op = t32_dp_opcode(i.dp);
    u16 h1 = u16(0xF000 | ((imm12 >> 11) & 1) << 10 | op << 5 | s << 4 | regs.rn_field);
    u16 h2 = u16(((imm12 >> 8) & 7) << 12 | regs.rd_field << 8 | (imm12 & 0xFF));
    if (is_test_op(i.dp) && !i.set_flags)
      return EncodeResult::fail("test op must set flags");
    if (is_test_op(i.dp)) h1 |= 0x10;
    return EncodeResult::wide(h1, h2);
  }

  if (i.rm == Reg::none || i.rm == Reg::pc)
    return EncodeResult::fail("dp-reg rm missing");
  int type, imm5 = i.shift_amount;
  switch (i.shift_kind) {
    case ShiftKind::lsl: type = 0; break;
    case ShiftKind::lsr: type = 1; if (imm5 == 32) imm5 = 0; break;
    case ShiftKind::asr: type = 2; if (imm5 == 32) imm5 = 0; break;
    case ShiftKind::ror:
      type = 3;
      if (imm5 == 0) return EncodeResult::fail("ror #0 is not encodable");
      break;
    case ShiftKind::rrx:
      type = 3; imm5 = 0;
      if (i.shift_amount != 1) return EncodeResult::fail("rrx shifts by exactly one");
      break;
  }
  if (!fits_u(u32(imm5), 5)) return EncodeResult::fail("shift amount exceeds 5 bits");
  int op = t32_dp_opcode(i.dp);
  u16 h1 = u16(0xEA00 | op << 5 | s << 4 | regs.rn_field);
  if (is_test_op(i.dp)) {
    if (!i.set_flags) return EncodeResult::fail("test op must set flags");
    h1 |= 0x10;
  }
  u16 h2 = u16(((imm5 >> 2) & 7) << 12 | regs.rd_field << 8 | (imm5 & 3) << 6 |
               type << 4 | idx(i.rm));
  return EncodeResult::wide(h1, h2);
}

EncodeResult encode_shift(const Instruction& i) {
  if (i.length == 2) {
    if (!i.set_flags) return EncodeResult::fail("16-bit shifts always set flags");
    if (i.rs != Reg::none) {  // register amount
      int op;
      switch (i.shift_kind) {
        case ShiftKind::lsl: op = 2; break;
        case ShiftKind::lsr: op = 3; break;
        case ShiftKind::asr: op = 4; break;
        case ShiftKind::ror: op = 7; break;
        default: return EncodeResult::fail("rrx has no register form");
      }
      if (i.rd != i.rm) return EncodeResult::fail("16-bit register shift needs rd == rm");
      if (!low(i.rd) || !low(i.rs))
        return EncodeResult::fail("register shift needs low registers");
      return EncodeResult::narrow(u16(0x4000 | op << 6 | idx(i.rs) << 3 | idx(i.rd)));
    }
    int op;
    u32 imm5 = i.shift_amount;
    switch (i.shift_kind) {
      case ShiftKind::lsl:
        op = 0;
        if (imm5 == 0 || imm5 > 31) return EncodeResult::fail("lsl amount out of range");
        break;
      case ShiftKind::lsr: op = 1; goto one_to_32;
      case ShiftKind::asr: op = 2; goto one_to_32;
      one_to_32:
        if (imm5 == 0 || imm5 > 32) return EncodeResult::fail("shift amount out of range");
        if (imm5 == 32) imm5 = 0;
        break;
      default:
        return EncodeResult::fail("no 16-bit form for this shift");
    }
    if (!low(i.rd) || !low(i.rm)) return EncodeResult::fail("shift needs low registers");
    return EncodeResult::narrow(u16(op << 11 | imm5 << 6 | idx(i.rm) << 3 | idx(i.rd)));
  }

  // Wide immediate shifts are the mov-shifted-register encoding.
  if (i.rs != Reg::none) return EncodeResult::fail("no wide register-shift form here");
  if (i.rd == Reg::none || i.rm == Reg::none || i.rd == Reg::pc || i.rm == Reg::pc)
    return EncodeResult::fail("shift operands missing");
  int type, imm5 = i.shift_amount;
  switch (i.shift_kind) {
    case ShiftKind::lsl:
      type = 0;
      if (imm5 == 0) return EncodeResult::fail("lsl #0 is mov, not a shift");
      break;
    case ShiftKind::lsr: type = 1; if (imm5 == 32) imm5 = 0; break;
    case ShiftKind::asr: type = 2; if (imm5 == 32) imm5 = 0; break;
    case ShiftKind::ror:
      type = 3;
      if (imm5 == 0) return EncodeResult::fail("ror #0 is not encodable");
      break;
    case ShiftKind::rrx:
      type = 3; imm5 = 0;
      if (i.shift_amount != 1) return EncodeResult::fail("rrx shifts by exactly one");
      break;
  }
  if (!fits_u(u32(imm5), 5)) return EncodeResult::fail("shift amount exceeds 5 bits");
  u16 h1 = u16(0xEA4F | (i.set_flags ? 0x10 : 0));
  u16 h2 = u16(((imm5 >> 2) & 7) << 12 | idx(i.rd) << 8 | (imm5 & 3) << 6 |
               type << 4 | idx(i.rm));
  return EncodeResult::wide(h1, h2);
}

EncodeResult encode_mem(const Instruction& i) {
  if (i.rt == Reg::none || i.rn == Reg::none)
    return EncodeResult::fail("load/store needs rt and rn");

  if (i.length == 2) {
    if (i.writeback) return EncodeResult::fail("no 16-bit writeback addressing");
    if (i.rm != Reg::none) {
      if (!low(i.rt) || !low(i.rn) || !low(i.rm) || i.shift_amount)
        return EncodeResult::fail("16-bit register offset needs low registers, no shift");
      int op;
      if (!i.load) {
        op = i.size == MemSize::word ? 0 : i.size == MemSize::half ? 1 : 2;
      } else if (i.sign_extend) {
        op = i.size == MemSize::byte ? 3 : 7;
      } else {
        op = i.size == MemSize::word ? 4 : i.size == MemSize::half ? 5 : 6;
      }
      return EncodeResult::narrow(
          u16(0x5000 | op << 9 | idx(i.rm) << 6 | idx(i.rn) << 3 | idx(i.rt)));
    }
    if (i.sign_extend) return EncodeResult::fail("no 16-bit signed immediate load");
    if (!i.add_offset) return EncodeResult::fail("no 16-bit negative offset");
    if (i.rn == Reg::pc) {
      if (!i.load || i.size != MemSize::word || !low(i.rt))
        return EncodeResult::fail("16-bit literal form is ldr rt(word), low rt");
      if (i.imm % 4 || !fits_u(i.imm / 4, 8))
        return EncodeResult::fail("literal offset out of range");
      return EncodeResult::narrow(u16(0x4800 | idx(i.rt) << 8 | i.imm / 4));
    }
    if (i.rn == Reg::sp) {
      if (i.size != MemSize::word || !low(i.rt))
        return EncodeResult::fail("16-bit sp-relative form is word, low rt");
      if (i.imm % 4 || !fits_u(i.imm / 4, 8))
        return EncodeResult::fail("sp-relative offset out of range");
      return EncodeResult::narrow(
          u16(0x9000 | (i.load ? 0x800 : 0) | idx(i.rt) << 8 | i.imm / 4));
    }
    if (!low(i.rt) || !low(i.rn))
      return EncodeResult::fail("16-bit immediate offset needs low registers");
    u32 scale = i.size == MemSize::word ? 4 : i.size == MemSize::half ? 2 : 1;
    if (i.imm % scale || !fits_u(i.imm / scale, 5))
      return EncodeResult::fail("immediate offset out of range");
    u16 base = i.size == MemSize::word ? 0x6000
             : i.size == MemSize::byte ? 0x7000 : 0x8000;
    return EncodeResult::narrow(u16(base | (i.load ? 0x800 : 0) | (i.imm / scale) << 6 |
                                    idx(i.rn) << 3 | idx(i.rt)));
  }

  // Wide forms.
  if (i.sign_extend && !i.load) return EncodeResult::fail("stores cannot sign-extend");
  if (i.rt == Reg::pc && (!i.load || i.size != MemSize::word))
    return EncodeResult::fail("only word loads may target pc");
  int sz = static_cast<int>(i.size);
  u16 h1 = u16(0xF800 | (i.sign_extend ? 0x100 : 0) | sz << 5 | (i.load ? 0x10 : 0));
  if (i.rn == Reg::pc) {
    if (!i.load) return EncodeResult::fail("literal form must be a load");
    if (!fits_u(i.imm, 12)) return EncodeResult::fail("literal offset exceeds 12 bits");
    h1 = u16(h1 | (i.add_offset ? 0x80 : 0) | 0xF);
    return EncodeResult::wide(h1, u16(idx(i.rt) << 12 | i.imm));
  }
  h1 |= idx(i.rn);
  if (i.rm != Reg::none) {
    if (i.writeback) return EncodeResult::fail("register offset has no writeback");
    if (i.shift_amount > 3) return EncodeResult::fail("register offset shift exceeds 3");
    if (i.rm == Reg::sp || i.rm == Reg::pc)
      return EncodeResult::fail("register offset rm must be r0-r12 or lr");
    return EncodeResult::wide(
        h1, u16(idx(i.rt) << 12 | i.shift_amount << 4 | idx(i.rm)));
  }
  if (i.add_offset && !i.writeback && i.pre_indexed) {
    if (!fits_u(i.imm, 12)) return EncodeResult::fail("offset exceeds 12 bits");
    return EncodeResult::wide(u16(h1 | 0x80), u16(idx(i.rt) << 12 | i.imm));
  }
  if (!fits_u(i.imm, 8)) return EncodeResult::fail("offset exceeds 8 bits for this mode");
  int p = i.pre_indexed ? 1 : 0, u = i.add_offset ? 1 : 0, w = i.writeback ? 1 : 0;
  if (!p && !w) return EncodeResult::fail("post-indexing requires writeback");
  u16 h2 = u16(idx(i.rt) << 12 | 0x800 | p << 10 | u << 9 | w << 8 | i.imm);
  return EncodeResult::wide(h1, h2);
}

EncodeResult encode_mem_multi(const Instruction& i) {
  if (i.reglist == 0) return EncodeResult::fail("empty register list");
  if (i.length == 2) {
    if (i.rn == Reg::sp && i.writeback) {
      if (!i.load && i.before) {  // push
        if (i.reglist & ~u16(0x40FF))
          return EncodeResult::fail("push takes r0-r7 and lr only");
        return EncodeResult::narrow(
            u16(0xB400 | ((i.reglist >> 14) & 1) << 8 | (i.reglist & 0xFF)));
      }
      if (i.load && !i.before) {  // pop
        if (i.reglist & ~u16(0x80FF))
          return EncodeResult::fail("pop takes r0-r7 and pc only");
        return EncodeResult::narrow(
            u16(0xBC00 | ((i.reglist >> 15) & 1) << 8 | (i.reglist & 0xFF)));
      }
      return EncodeResult::fail("sp-based 16-bit multi is push/pop only");
    }
    if (!low(i.rn) || i.before || (i.reglist & ~u16(0xFF)))
      return EncodeResult::fail("16-bit ldm/stm needs a low base and low list");
    bool rn_in_list = (i.reglist >> idx(i.rn)) & 1;
    if (!i.load && !i.writeback)
      return EncodeResult::fail("16-bit stm always writes back");
    if (i.load && i.writeback == rn_in_list)
      return EncodeResult::fail("16-bit ldm writeback is implied by the list");
    return EncodeResult::narrow(
        u16(0xC000 | (i.load ? 0x800 : 0) | idx(i.rn) << 8 | i.reglist));
  }
  if (i.rn == Reg::none || i.rn == Reg::pc)
    return EncodeResult::fail("wide ldm/stm base must not be pc");
  if (__builtin_popcount(i.reglist) < 2)
    return EncodeResult::fail("wide ldm/stm needs at least two registers");
  if (i.reglist & 0x2000) return EncodeResult::fail("sp cannot appear in the list");
  if (!i.load && (i.reglist & 0x8000))
    return EncodeResult::fail("stm cannot store pc");
  if (i.writeback && ((i.reglist >> idx(i.rn)) & 1))
    return EncodeResult::fail("writeback base cannot appear in the list");
  int mode = i.before ? 2 : 1;
  u16 h1 = u16(0xE800 | mode << 7 | (i.writeback ? 0x20 : 0) | (i.load ? 0x10 : 0) |
               idx(i.rn));
  return EncodeResult::wide(h1, i.reglist);
}

EncodeResult encode_branch(const Instruction& i) {
  i32 off = i32(i.imm);
  if (off & 1) return EncodeResult::fail("branch offset must be even");
  if (i.kind == OpKind::bl) {
    if (i.length == 2) return EncodeResult::fail("bl is 32-bit only");
    if (!fits_s(off, 25)) return EncodeResult::fail("bl offset exceeds 25 bits");
    u32 v = u32(off);
    u32 s = (v >> 24) & 1;
    u32 i1 = (v >> 23) & 1, i2 = (v >> 22) & 1;
    u32 j1 = (~i1 ^ s) & 1, j2 = (~i2 ^ s) & 1;
    u16 h1 = u16(0xF000 | s << 10 | ((v >> 12) & 0x3FF));
    u16 h2 = u16(0xD000 | j1 << 13 | j2 << 11 | ((v >> 1) & 0x7FF));
    return EncodeResult::wide(h1, h2);
  }
  if (i.cond == Cond::al) {
    if (i.length == 2) {
      if (!fits_s(off, 12)) return EncodeResult::fail("branch offset exceeds 12 bits");
      return EncodeResult::narrow(u16(0xE000 | ((u32(off) >> 1) & 0x7FF)));
    }
    if (!fits_s(off, 25)) return EncodeResult::fail("branch offset exceeds 25 bits");
    u32 v = u32(off);
    u32 s = (v >> 24) & 1;
    u32 i1 = (v >> 23) & 1, i2 = (v >> 22) & 1;
    u32 j1 = (~i1 ^ s) & 1, j2 = (~i2 ^ s) & 1;
    u16 h1 = u16(0xF000 | s << 10 | ((v >> 12) & 0x3FF));
    u16 h2 = u16(0x9000 | j1 << 13 | j2 << 11 | ((v >> 1) & 0x7FF));
    return EncodeResult::wide(h1, h2);
  }
  if (i.length == 2) {
    if (!fits_s(off, 9)) return EncodeResult::fail("branch offset exceeds 9 bits");
    return EncodeResult::narrow(
        u16(0xD000 | static_cast<int>(i.cond) << 8 | ((u32(off) >> 1) & 0xFF)));
  }
  if (!fits_s(off, 21)) return EncodeResult::fail("branch offset exceeds 21 bits");
  u32 v = u32(off);
  u32 s = (v >> 20) & 1, j2 = (v >> 19) & 1, j1 = (v >> 18) & 1;
  u16 h1 = u16(0xF000 | s << 10 | static_cast<int>(i.cond) << 6 | ((v >> 12) & 0x3F));
  u16 h2 = u16(0x8000 | j1 << 13 | j2 << 11 | ((v >> 1) & 0x7FF));
  return EncodeResult::wide(h1, h2);
}

}  // namespace

EncodeResult encode(const Instruction& i) {
  if (i.length != 2 && i.length != 4)
    return EncodeResult::fail("instruction length must be 2 or 4");
  const bool want16 = i.length == 2;

  switch (i.kind) {
    case OpKind::undecodable:
      return EncodeResult::fail("cannot encode an undecodable instruction");
    case OpKind::dp:
      return want16 ? encode_dp16(i) : encode_dp32(i);
    case OpKind::shift:
      return encode_shift(i);
    case OpKind::movw:
    case OpKind::movt: {
      if (want16) return EncodeResult::fail("movw/movt are 32-bit only");
      if (i.rd == Reg::none || i.rd == Reg::pc) return EncodeResult::fail("movw/movt rd missing");
      if (!fits_u(i.imm, 16)) return EncodeResult::fail("immediate exceeds 16 bits");
      u16 base = i.kind == OpKind::movw ? 0xF240 : 0xF2C0;
      u16 h1 = u16(base | ((i.imm >> 11) & 1) << 10 | ((i.imm >> 12) & 0xF));
      u16 h2 = u16(((i.imm >> 8) & 7) << 12 | idx(i.rd) << 8 | (i.imm & 0xFF));
      return EncodeResult::wide(h1, h2);
    }
    case OpKind::adr: {
      if (want16) {
        if (!i.add_offset) return EncodeResult::fail("16-bit adr only adds");
        if (!low(i.rd)) return EncodeResult::fail("16-bit adr needs a low rd");
        if (i.imm % 4 || !fits_u(i.imm / 4, 8))
          return EncodeResult::fail("adr offset out of range");
        return EncodeResult::narrow(u16(0xA000 | idx(i.rd) << 8 | i.imm / 4));
      }
      if (!fits_u(i.imm, 12)) return EncodeResult::fail("adr offset exceeds 12 bits");
      if (i.rd == Reg::none || i.rd == Reg::pc) return EncodeResult::fail("adr rd missing");
      u16 base = i.add_offset ? 0xF200 : 0xF2A0;
      u16 h1 = u16(base | ((i.imm >> 11) & 1) << 10 | 0xF);
      u16 h2 = u16(((i.imm >> 8) & 7) << 12 | idx(i.rd) << 8 | (i.imm & 0xFF));
      return EncodeResult::wide(h1, h2);
    }
    case OpKind::mul:
      if (!want16 || !i.set_flags || i.rd != i.rm || !low(i.rd) || !low(i.rn))
        return EncodeResult::fail("mul form is muls rdm, rn, rdm with low registers");
      return EncodeResult::narrow(u16(0x4340 | idx(i.rn) << 3 | idx(i.rd)));
    case OpKind::sxth: case OpKind::sxtb: case OpKind::uxth: case OpKind::uxtb: {
      if (!want16 || !low(i.rd) || !low(i.rm))
        return EncodeResult::fail("extend ops take low registers, 16-bit form");
      int op = i.kind == OpKind::sxth ? 0 : i.kind == OpKind::sxtb ? 1
             : i.kind == OpKind::uxth ? 2 : 3;
      return EncodeResult::narrow(u16(0xB200 | op << 6 | idx(i.rm) << 3 | idx(i.rd)));
    }
    case OpKind::rev: case OpKind::rev16: case OpKind::revsh: {
      if (!want16 || !low(i.rd) || !low(i.rm))
        return EncodeResult::fail("byte-reverse ops take low registers, 16-bit form");
      int op = i.kind == OpKind::rev ? 0 : i.kind == OpKind::rev16 ? 1 : 3;
      return EncodeResult::narrow(u16(0xBA00 | op << 6 | idx(i.rm) << 3 | idx(i.rd)));
    }
    case OpKind::mem:
      return encode_mem(i);
    case OpKind::mem_multi:
      return encode_mem_multi(i);
    case OpKind::b:
    case OpKind::bl:
      return encode_branch(i);
    case OpKind::bx:
      if (!want16 || i.rm == Reg::none) return EncodeResult::fail("bx needs rm, 16-bit form");
      return EncodeResult::narrow(u16(0x4700 | idx(i.rm) << 3));
    case OpKind::blx:
      if (!want16 || i.rm == Reg::none) return EncodeResult::fail("blx needs rm, 16-bit form");
      return EncodeResult::narrow(u16(0x4780 | idx(i.rm) << 3));
    case OpKind::cbz:
    case OpKind::cbnz: {
      if (!want16 || !low(i.rn)) return EncodeResult::fail("cbz/cbnz need a low rn");
      if (i.imm % 2 || i.imm > 126) return EncodeResult::fail("cbz/cbnz offset out of range");
      u16 h = u16(0xB100 | (i.kind == OpKind::cbnz ? 0x800 : 0) |
                  ((i.imm >> 6) & 1) << 9 | ((i.imm >> 1) & 0x1F) << 3 | idx(i.rn));
      return EncodeResult::narrow(h);
    }
    case OpKind::tbb:
    case OpKind::tbh:
      if (want16 || i.rn == Reg::none || i.rm == Reg::none)
        return EncodeResult::fail("table branch needs rn and rm, 32-bit form");
      if (i.rn == Reg::sp || i.rm == Reg::sp || i.rm == Reg::pc)
        return EncodeResult::fail("table branch operands out of range");
      return EncodeResult::wide(u16(0xE8D0 | idx(i.rn)),
                                u16(0xF000 | (i.kind == OpKind::tbh ? 0x10 : 0) | idx(i.rm)));
    case OpKind::it:
      if (!want16 || i.it_mask == 0 || i.it_firstcond > 0xE)
        return EncodeResult::fail("it needs a non-empty mask and a real condition");
      if (i.it_firstcond == 0xE && i.it_mask != 0x8)
        return EncodeResult::fail("it-al cannot have else lanes");
      return EncodeResult::narrow(u16(0xBF00 | i.it_firstcond << 4 | i.it_mask));
    case OpKind::nop: return EncodeResult::narrow(0xBF00);
    case OpKind::yield: return EncodeResult::narrow(0xBF10);
    case OpKind::wfe: return EncodeResult::narrow(0xBF20);
    case OpKind::wfi: return EncodeResult::narrow(0xBF30);
    case OpKind::sev: return EncodeResult::narrow(0xBF40);
    case OpKind::bkpt:
      if (!fits_u(i.imm, 8)) return EncodeResult::fail("bkpt immediate exceeds 8 bits");
      return EncodeResult::narrow(u16(0xBE00 | i.imm));
    case OpKind::udf:
      if (!want16 || !fits_u(i.imm, 8)) return EncodeResult::fail("udf immediate exceeds 8 bits");
      return EncodeResult::narrow(u16(0xDE00 | i.imm));
    case OpKind::svc:
      if (!fits_u(i.imm, 8)) return EncodeResult::fail("svc immediate exceeds 8 bits");
      return EncodeResult::narrow(u16(0xDF00 | i.imm));
    case OpKind::cps:
      if ((i.imm & ~0x17u) != 0) return EncodeResult::fail("cps flag bits out of range");
      return EncodeResult::narrow(u16(0xB660 | i.imm));
    case OpKind::mrs:
      if (want16 || i.rd == Reg::none) return EncodeResult::fail("mrs is 32-bit with rd");
      return EncodeResult::wide(0xF3EF, u16(0x8000 | idx(i.rd) << 8 | i.sysm));
    case OpKind::msr:
      if (want16 || i.rn == Reg::none) return EncodeResult::fail("msr is 32-bit with rn");
      return EncodeResult::wide(u16(0xF380 | idx(i.rn)),
                                u16(0x8000 | (i.imm & 3) << 10 | i.sysm));
  }
  return EncodeResult::fail("unhandled instruction kind");
}

}  // namespace bmr
