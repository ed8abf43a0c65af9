#include "bmr/emu.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>

namespace bmr {

namespace {

std::string hex(u32 v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

bool cond_passed(Cond c, const MachineState& st) {
  bool n = st.flag_n(), z = st.flag_z(), cf = st.flag_c(), v = st.flag_v();
  switch (c) {
    case Cond::eq: return z;
    case Cond::ne: return !z;
    case Cond::cs: return cf;
    case Cond::cc: return !cf;
    case Cond::mi: return n;
    case Cond::pl: return !n;
    case Cond::vs: return v;
    case Cond::vc: return !v;
    case Cond::hi: return cf && !z;
    case Cond::ls: return !cf || z;
    case Cond::ge: return n == v;
    case Cond::lt: return n != v;
    case Cond::gt: return !z && n == v;
    case Cond::le: return z || n != v;
    case Cond::al: return true;
  }
  return true;
}

constexpr u32 kFlagMask = 0xF0000000u;
constexpr u32 kItMaskBits = 0x0600FC00u;  // xPSR bits holding the IT state

}  // namespace

const char* stop_cause_name(StopCause c) {
  switch (c) {
    case StopCause::running: return "running";
    case StopCause::breakpoint: return "breakpoint";
    case StopCause::retired_limit: return "retired-limit";
    case StopCause::memory_fault: return "memory-fault";
    case StopCause::undefined_no_handler: return "undefined-no-handler";
    case StopCause::harness_fault: return "harness-fault";
  }
  return "?";
}

Machine::Machine(const FirmwareImage& image, RamConfig ram, int vector_index)
    : flash_(image), ram_cfg_(ram), ram_(ram.size, 0), vector_index_(vector_index) {
  u32 fl = flash_.base(), fh = flash_.end_address();
  u32 rl = ram.base, rh = ram.base + ram.size;
  if (fl < rh && rl < fh) throw std::runtime_error("flash and RAM ranges overlap");
  if (vector_index < 1 || vector_index > 255) throw std::runtime_error("vector index outside 1..255");
}

void Machine::reset(u32 entry) {
  st_ = MachineState{};
  std::fill(ram_.begin(), ram_.end(), u8(0));
  st_.xpsr = 1u << 24;  // Thumb state
  st_.r[13] = flash_.read_evt_entry(0) & ~3u;
  st_.r[15] = entry & ~1u;
  st_.r[14] = 0xFFFFFFFFu;  // reset value: returning here faults loudly
  cause_ = StopCause::running;
  detail_.clear();
  episode_ = Episode{};
  traps_.clear();
  max_trap_stack_ = 0;
}

void Machine::stop(StopCause c, const std::string& detail) {
  if (cause_ == StopCause::running) {
    cause_ = c;
    detail_ = detail;
  }
}

bool Machine::read_mem(u32 addr, u32 size, u32& out) {
  if (addr % size != 0) {
    stop(StopCause::memory_fault, "misaligned " + std::to_string(size) + "-byte read at " + hex(addr));
    return false;
  }
  out = 0;
  if (flash_.contains(addr, size)) {
    for (u32 k = 0; k < size; ++k) out |= u32(flash_.bytes()[addr - flash_.base() + k]) << (8 * k);
    return true;
  }
  if (addr >= ram_cfg_.base && addr - ram_cfg_.base + size <= ram_cfg_.size) {
    for (u32 k = 0; k < size; ++k) out |= u32(ram_[addr - ram_cfg_.base + k]) << (8 * k);
    return true;
  }
  stop(StopCause::memory_fault, "read outside the memory map at " + hex(addr));
  return false;
}

bool Machine::write_mem(u32 addr, u32 size, u32 value) {
  if (addr % size != 0) {
    stop(StopCause::memory_fault, "misaligned " + std::to_string(size) + "-byte write at " + hex(addr));
    return false;
  }
  if (addr >= ram_cfg_.base && addr - ram_cfg_.base + size <= ram_cfg_.size) {
    for (u32 k = 0; k < size; ++k) ram_[addr - ram_cfg_.base + k] = u8(value >> (8 * k));
    return true;
  }
  if (flash_.contains(addr, size)) {
    stop(StopCause::memory_fault, "store to read-only flash at " + hex(addr));
    return false;
  }
  stop(StopCause::memory_fault, "write outside the memory map at " + hex(addr));
  return false;
}

u8 Machine::itstate() const {
  return u8(((st_.xpsr >> 10) & 0x3F) << 2 | ((st_.xpsr >> 25) & 3));
}

void Machine::set_itstate(u8 v) {
  st_.xpsr = (st_.xpsr & ~kItMaskBits) | (u32(v & 3) << 25) | (u32((v >> 2) & 0x3F) << 10);
}

void Machine::set_nz(u32 result) {
  st_.xpsr = (st_.xpsr & ~0xC0000000u) | (result & 0x80000000u) | (result == 0 ? 0x40000000u : 0);
}

u32 Machine::add_with_carry(u32 x, u32 y, u32 carry_in, bool set) {
  u64 us = u64(x) + u64(y) + carry_in;
  u32 res = u32(us);
  if (set) {
    set_nz(res);
    bool c = (us >> 32) != 0;
    bool v = ((~(x ^ y) & (x ^ res)) >> 31) != 0;
    st_.xpsr = (st_.xpsr & ~0x30000000u) | (c ? 0x20000000u : 0) | (v ? 0x10000000u : 0);
  }
  return res;
}

// Shift with carry-out via the in/out parameter; `carry` must hold the
// current C flag on entry. Amount 0 leaves value and carry untouched
// (except RRX, which always rotates through carry by one).
static u32 shift_c(u32 value, ShiftKind kind, u32 amount, u32& carry) {
  switch (kind) {
    case ShiftKind::lsl:
      if (amount == 0) return value;
      if (amount < 32) { carry = (value >> (32 - amount)) & 1; return value << amount; }
      carry = amount == 32 ? (value & 1) : 0;
      return 0;
    case ShiftKind::lsr:
      if (amount == 0) return value;
      if (amount < 32) { carry = (value >> (amount - 1)) & 1; return value >> amount; }
      carry = amount == 32 ? (value >> 31) : 0;
      return 0;
    case ShiftKind::asr:
      if (amount == 0) return value;
      if (amount >= 32) { carry = value >> 31; return u32(i32(value) >> 31); }
      carry = (value >> (amount - 1)) & 1;
      return u32(i32(value) >> amount);
    case ShiftKind::ror: {
      if (amount == 0) return value;
      u32 m = amount % 32;
      u32 res = m == 0 ? value : ((value >> m) | (value << (32 - m)));
      carry = res >> 31;
      return res;
    }
    case ShiftKind::rrx: {
      u32 res = (carry << 31) | (value >> 1);
      carry = value & 1;
      return res;
    }
  }
  return value;
}

void Machine::write_pc_branch(u32 target) {
  st_.r[15] = target & ~1u;
  pc_written_ = true;
}

void Machine::write_pc_interworking(u32 target) {
  if (st_.handler_mode && (target >> 28) == 0xF) {
    exception_return(target);
    return;
  }
  if (!(target & 1)) {
    // Interworking branch to a non-Thumb target: usage fault, routed through
    // the configured vector like any other in-guest fault.
    enter_exception(target & ~1u);
    return;
  }
  st_.r[15] = target & ~1u;
  pc_written_ = true;
}

void Machine::enter_exception(u32 faulting_address) {
  if (st_.handler_mode) {
    stop(StopCause::harness_fault, "nested fault in handler at " + hex(faulting_address));
    return;
  }
  u32 vec = flash_.read_evt_entry(vector_index_);
  if (vec == 0 || vec == 0xFFFFFFFFu) {
    stop(StopCause::undefined_no_handler,
         "undefined instruction at " + hex(faulting_address) + " and vector slot " +
             std::to_string(vector_index_) + " holds " + hex(vec));
    return;
  }
  u32 sp = st_.sp();
  u32 pad = (sp >> 2) & 1;
  u32 frame = sp - 0x20 - 4 * pad;
  const u32 words[8] = {st_.r[0], st_.r[1], st_.r[2],    st_.r[3],
                        st_.r[12], st_.r[14], faulting_address, st_.xpsr | (pad << 9)};
  for (int k = 0; k < 8; ++k)
    if (!write_mem(frame + 4 * u32(k), 4, words[k])) return;
  st_.r[13] = frame;
  st_.r[14] = 0xFFFFFFF9u;  // return to thread mode, main stack
  st_.xpsr = (st_.xpsr & ~(kItMaskBits | 0x1FFu)) | u32(vector_index_);
  st_.handler_mode = true;
  st_.r[15] = vec & ~1u;
  pc_written_ = true;
  episode_ = Episode{true, faulting_address, sp, st_.retired, frame};
}

void Machine::exception_return(u32 magic) {
  if ((magic & 0xFFFFFFF0u) != 0xFFFFFFF0u || (magic & 0xF) != 0x9) {
    stop(StopCause::harness_fault, "unsupported exception return value " + hex(magic));
    return;
  }
  u32 frame = st_.sp();
  u32 w[8];
  for (int k = 0; k < 8; ++k)
    if (!read_mem(frame + 4 * u32(k), 4, w[k])) return;
  u32 ra = w[6], xp = w[7];
  if (!(ra & 1)) {
    stop(StopCause::harness_fault, "exception return to even address " + hex(ra));
    return;
  }
  st_.r[0] = w[0]; st_.r[1] = w[1]; st_.r[2] = w[2]; st_.r[3] = w[3];
  st_.r[12] = w[4]; st_.r[14] = w[5];
  st_.r[13] = frame + 0x20 + 4 * ((xp >> 9) & 1);
  st_.xpsr = xp & ~(1u << 9);
  st_.handler_mode = false;
  st_.r[15] = ra & ~1u;
  pc_written_ = true;
  if (episode_.active) {
    u32 used = episode_.app_sp - episode_.min_sp;
    traps_.push_back({episode_.site, st_.retired - episode_.entry_retired + 1, used});
    max_trap_stack_ = std::max(max_trap_stack_, used);
    episode_ = Episode{};
  }
}

void Machine::exec(const Instruction& i, bool in_it) {
  // PC reads as the instruction address plus four, whatever the encoding
  // width; r15 itself still holds the fetch address at this point.
  auto R = [&](Reg r) { return r == Reg::pc ? i.address + 4 : st_.r[idx(r)]; };
  auto W = [&](Reg r, u32 v) {
    if (r == Reg::sp) v &= ~3u;
    st_.r[idx(r)] = v;
  };
  // 16-bit ALU encodings stop setting flags inside an IT block; the compare
  // and test forms always set them.
  auto eff_s = [&](void) {
    if (!i.set_flags) return false;
    if (in_it && !i.wide() &&
        !(i.kind == OpKind::dp && (i.dp == DpOp::cmp || i.dp == DpOp::cmn ||
                                   i.dp == DpOp::tst || i.dp == DpOp::teq)))
      return false;
    return true;
  };

  switch (i.kind) {
    case OpKind::dp: {
      bool s = eff_s();
      u32 n = i.rn != Reg::none ? R(i.rn) : 0;
      u32 sh_carry = st_.flag_c() ? 1 : 0;
      u32 op2;
      if (i.has_imm_operand) {
        op2 = i.imm;
        if (i.wide() && !i.plain_imm) {
          // Recover the shifter carry of the modified-immediate form from
          // the raw encoding bits.
          u16 imm12 = u16((((i.hw1 >> 10) & 1) << 11) | (((i.hw2 >> 12) & 7) << 8) | (i.hw2 & 0xFF));
          bool c = sh_carry != 0;
          thumb::expand_imm_carry(imm12, c, c);
          sh_carry = c ? 1 : 0;
        }
      } else {
        op2 = R(i.rm);
        if (i.wide()) op2 = shift_c(op2, i.shift_kind, i.shift_amount, sh_carry);
      }
      u32 res = 0;
      bool logical = true;
      switch (i.dp) {
        case DpOp::and_: res = n & op2; break;
        case DpOp::bic: res = n & ~op2; break;
        case DpOp::orr: res = n | op2; break;
        case DpOp::orn: res = n | ~op2; break;
        case DpOp::eor: res = n ^ op2; break;
        case DpOp::tst: res = n & op2; break;
        case DpOp::teq: res = n ^ op2; break;
        case DpOp::mov: res = op2; break;
        case DpOp::mvn: res = ~op2; break;
        case DpOp::add: logical = false; res = add_with_carry(n, op2, 0, s); break;
        case DpOp::adc: logical = false; res = add_with_carry(n, op2, st_.flag_c(), s); break;
        case DpOp::sub: logical = false; res = add_with_carry(n, ~op2, 1, s); break;
        case DpOp::sbc: logical = false; res = add_with_carry(n, ~op2, st_.flag_c(), s); break;
        case DpOp::rsb: logical = false; res = add_with_carry(~n, op2, 1, s); break;
        case DpOp::cmp: logical = false; res = add_with_carry(n, ~op2, 1, s); break;
        case DpOp::cmn: logical = false; res = add_with_carry(n, op2, 0, s); break;
      }
      if (logical && s) {
        set_nz(res);
        st_.xpsr = (st_.xpsr & ~0x20000000u) | (sh_carry ? 0x20000000u : 0);
      }
      bool writes_rd = !(i.dp == DpOp::cmp || i.dp == DpOp::cmn || i.dp == DpOp::tst || i.dp == DpOp::teq);
      if (writes_rd) {
        if (i.rd == Reg::pc) write_pc_branch(res);  // MOV PC, Rm / ADD PC, Rm
        else W(i.rd, res);
      }
      break;
    }
    case OpKind::shift: {
      bool s = eff_s();
      u32 amount = i.rs != Reg::none ? (R(i.rs) & 0xFF) : i.shift_amount;
      u32 carry = st_.flag_c() ? 1 : 0;
      u32 res = shift_c(R(i.rm), i.shift_kind, amount, carry);
      W(i.rd, res);
      if (s) {
        set_nz(res);
        st_.xpsr = (st_.xpsr & ~0x20000000u) | (carry ? 0x20000000u : 0);
      }
      break;
    }
    case OpKind::movw: W(i.rd, i.imm); break;
    case OpKind::movt: W(i.rd, (R(i.rd) & 0xFFFFu) | (i.imm << 16)); break;
    case OpKind::adr: {
      u32 base = i.pc_value() & ~3u;
      W(i.rd, i.add_offset ? base + i.imm : base - i.imm);
      break;
    }
    case OpKind::mul: {
      u32 res = R(i.rn) * R(i.rm);
      W(i.rd, res);
      if (eff_s()) set_nz(res);
      break;
    }
    case OpKind::sxth: W(i.rd, u32(i32(std::int16_t(R(i.rm) & 0xFFFF)))); break;
    case OpKind::sxtb: W(i.rd, u32(i32(std::int8_t(R(i.rm) & 0xFF)))); break;
    case OpKind::uxth: W(i.rd, R(i.rm) & 0xFFFF); break;
    case OpKind::uxtb: W(i.rd, R(i.rm) & 0xFF); break;
    case OpKind::rev: {
      u32 v = R(i.rm);
      W(i.rd, (v << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24));
      break;
    }
    case OpKind::rev16: {
      u32 v = R(i.rm);
      W(i.rd, ((v & 0x00FF00FF) << 8) | ((v >> 8) & 0x00FF00FF));
      break;
    }
    case OpKind::revsh: {
      u32 v = R(i.rm);
      W(i.rd, u32(i32(std::int16_t(((v & 0xFF) << 8) | ((v >> 8) & 0xFF)))));
      break;
    }
    case OpKind::mem: {
      u32 addr;
      if (i.rn == Reg::pc) {
        u32 base = i.pc_value() & ~3u;
        addr = i.add_offset ? base + i.imm : base - i.imm;
      } else {
        u32 base = R(i.rn);
        u32 off = i.rm != Reg::none ? (R(i.rm) << i.shift_amount) : i.imm;
        u32 eff = i.add_offset ? base + off : base - off;
        addr = i.pre_indexed ? eff : base;
        if (!i.load) {
          u32 value = R(i.rt);
          u32 sz = i.size == MemSize::byte ? 1 : i.size == MemSize::half ? 2 : 4;
          if (!write_mem(addr, sz, value)) return;
          if (i.writeback) W(i.rn, eff);
          return;
        }
        if (i.writeback) W(i.rn, eff);
      }
      u32 sz = i.size == MemSize::byte ? 1 : i.size == MemSize::half ? 2 : 4;
      if (!i.load) {  // literal stores never decode; plain store handled above
        if (!write_mem(addr, sz, R(i.rt))) return;
        return;
      }
      u32 v;
      if (!read_mem(addr, sz, v)) return;
      if (i.sign_extend) v = sz == 1 ? u32(i32(std::int8_t(v))) : u32(i32(std::int16_t(v)));
      if (i.rt == Reg::pc) write_pc_interworking(v);
      else W(i.rt, v);
      break;
    }
    case OpKind::mem_multi: {
      u32 base = R(i.rn);
      u32 count = u32(std::popcount(i.reglist));
      u32 addr = i.before ? base - 4 * count : base;
      u32 final_base = i.before ? base - 4 * count : base + 4 * count;
      bool pc_pending = false;
      u32 pc_value = 0;
      for (int r = 0; r < 16; ++r) {
        if (!((i.reglist >> r) & 1)) continue;
        if (i.load) {
          u32 v;
          if (!read_mem(addr, 4, v)) return;
          if (r == 15) { pc_pending = true; pc_value = v; }
          else st_.r[r] = r == 13 ? (v & ~3u) : v;
        } else {
          if (!write_mem(addr, 4, st_.r[r])) return;
        }
        addr += 4;
      }
      if (i.writeback) W(i.rn, final_base);
      if (pc_pending) write_pc_interworking(pc_value);
      break;
    }
    case OpKind::b:
      if (cond_passed(i.cond, st_)) write_pc_branch(i.pc_value() + i.imm);
      break;
    case OpKind::bl:
      st_.r[14] = (i.address + 4) | 1;
      write_pc_branch(i.pc_value() + i.imm);
      break;
    case OpKind::bx:
      write_pc_interworking(R(i.rm));
      break;
    case OpKind::blx: {
      u32 target = R(i.rm);
      st_.r[14] = (i.address + 2) | 1;
      write_pc_interworking(target);
      break;
    }
    case OpKind::cbz:
    case OpKind::cbnz: {
      bool zero = R(i.rn) == 0;
      if (zero == (i.kind == OpKind::cbz)) write_pc_branch(i.pc_value() + i.imm);
      break;
    }
    case OpKind::tbb:
    case OpKind::tbh: {
      u32 base = i.rn == Reg::pc ? i.pc_value() : R(i.rn);
      u32 index = R(i.rm);
      u32 off;
      if (i.kind == OpKind::tbh) {
        if (!read_mem(base + index * 2, 2, off)) return;
      } else {
        if (!read_mem(base + index, 1, off)) return;
      }
      write_pc_branch(i.pc_value() + 2 * off);
      break;
    }
    case OpKind::it:
      set_itstate(u8((i.it_firstcond << 4) | i.it_mask));
      break;
    case OpKind::nop:
    case OpKind::yield:
      break;
    case OpKind::bkpt:
      stop(StopCause::breakpoint, "bkpt #" + std::to_string(i.imm) + " at " + hex(i.address));
      break;
    case OpKind::mrs:
      switch (i.sysm) {
        case 0: W(i.rd, st_.xpsr & 0xF8000000u); break;           // APSR
        case 5: W(i.rd, st_.xpsr & 0x1FFu); break;                // IPSR
        case 8: W(i.rd, st_.sp()); break;                         // MSP
        default:
          stop(StopCause::harness_fault,
               "mrs of system register " + std::to_string(i.sysm) + " is outside the subset");
      }
      break;
    case OpKind::msr:
      if (i.sysm == 0 && (i.imm & 2)) {
        st_.xpsr = (st_.xpsr & 0x07FFFFFFu) | (R(i.rn) & 0xF8000000u);
      } else {
        stop(StopCause::harness_fault,
             "msr of system register " + std::to_string(i.sysm) + " is outside the subset");
      }
      break;
    case OpKind::svc:
    case OpKind::wfe:
    case OpKind::wfi:
    case OpKind::sev:
    case OpKind::cps:
      stop(StopCause::harness_fault, to_string(i) + " at " + hex(i.address) + " is outside the subset");
      break;
    case OpKind::udf:
    case OpKind::undecodable:
      enter_exception(i.address);
      break;
  }
}

Trace Machine::run(u32 entry, u64 max_retired, bool record) {
  reset(entry);
  Trace t;
  while (cause_ == StopCause::running) {
    if (st_.retired >= max_retired) {
      stop(StopCause::retired_limit, "retired " + std::to_string(max_retired) + " instructions");
      break;
    }
    u32 pc = st_.r[15];
    u32 h1;
    if (!read_mem(pc, 2, h1)) break;
    u32 h2 = 0;
    int len = instr_length(u16(h1));
    if (len == 4 && !read_mem(pc + 2, 2, h2)) break;
    Instruction ins = decode(u16(h1), u16(h2), pc);

    if (ins.kind == OpKind::undecodable || ins.kind == OpKind::udf) {
      enter_exception(pc);  // the trapping instruction does not retire
      continue;
    }

    bool in_it = false;
    bool execute = true;
    u8 it = itstate();
    if (it != 0) {
      in_it = true;
      execute = cond_passed(Cond((it >> 4) & 0xF), st_);
      u8 low = it & 0x1F;
      set_itstate((low & 0x7) == 0 ? u8(0) : u8((it & 0xE0) | ((low << 1) & 0x1F)));
    }

    pc_written_ = false;
    if (execute) exec(ins, in_it);
    if (cause_ != StopCause::running) break;
    if (!pc_written_) st_.r[15] = pc + u32(ins.length);
    st_.retired++;
    if (record) t.samples.push_back({pc, st_.retired});
    if (episode_.active && st_.sp() < episode_.min_sp) episode_.min_sp = st_.sp();
  }
  t.cause = cause_;
  t.detail = detail_;
  t.final_state = st_;
  t.final_ram = ram_;
  t.traps = traps_;
  t.max_trap_stack_bytes = max_trap_stack_;
  return t;
}

DivergenceReport diff(const Trace& a, const Trace& b, const RamConfig& ram,
                      const std::vector<ExcludedRange>& exclude) {
  if (a.cause != b.cause)
    return {false, std::string("termination cause: ") + stop_cause_name(a.cause) + " vs " +
                       stop_cause_name(b.cause) + " (incomparable)"};
  for (int r = 0; r <= 12; ++r)
    if (a.final_state.r[r] != b.final_state.r[r])
      return {false, "r" + std::to_string(r) + ": " + hex(a.final_state.r[r]) + " vs " +
                         hex(b.final_state.r[r])};
  if (a.final_state.r[13] != b.final_state.r[13])
    return {false, "sp: " + hex(a.final_state.r[13]) + " vs " + hex(b.final_state.r[13])};
  if (a.final_state.r[14] != b.final_state.r[14])
    return {false, "lr: " + hex(a.final_state.r[14]) + " vs " + hex(b.final_state.r[14])};
  if ((a.final_state.xpsr & kFlagMask) != (b.final_state.xpsr & kFlagMask))
    return {false, "flags: " + hex(a.final_state.xpsr & kFlagMask) + " vs " +
                       hex(b.final_state.xpsr & kFlagMask)};
  auto excluded = [&](u32 addr) {
    for (const auto& e : exclude)
      if (addr >= e.base && addr - e.base < e.size) return true;
    return false;
  };
  for (u32 off = 0; off < ram.size; ++off) {
    if (excluded(ram.base + off)) continue;
    if (a.final_ram[off] != b.final_ram[off])
      return {false, "ram[" + hex(ram.base + off) + "]: " + std::to_string(a.final_ram[off]) +
                         " vs " + std::to_string(b.final_ram[off])};
  }
  return {true, {}};
}

std::optional<u64> measure_trap_cost(const Trace& t, u32 site) {
  for (const auto& e : t.traps)
    if (e.site == (site & ~1u)) return e.cost;
  return std::nullopt;
}

}  // namespace bmr
