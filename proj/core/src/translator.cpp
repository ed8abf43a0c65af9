#include "bmr/translator.hpp"

#include <cstdio>

#include "bmr/assembler.hpp"

namespace bmr {

namespace {

std::string hex(u32 v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

EmissionStep step(StepKind k) { return {k, {}}; }

EmissionStep step_reg(StepKind k, Reg r) {
  EmissionStep s{k, {}};
  s.instr.rd = r;
  return s;
}

EmissionStep emit(const Instruction& i) { return {StepKind::emit, i}; }

TranslateResult fail(TranslateErrorKind k, std::string detail) {
  TranslateResult r;
  r.ok = false;
  r.error = k;
  r.detail = std::move(detail);
  return r;
}

TranslateResult done(TranslationPlan p) {
  TranslateResult r;
  r.ok = true;
  r.plan = std::move(p);
  return r;
}

// Appends addw/subw steps moving `rd` by the signed delta (at most two
// instructions; |delta| never exceeds 2 * 4095 here).
void append_adjust(std::vector<EmissionStep>& steps, Reg rd, i32 delta) {
  u32 mag = delta >= 0 ? u32(delta) : u32(-delta);
  while (mag > 0) {
    u32 chunk = mag > 4095 ? 4095u : mag;
    steps.push_back(emit(delta >= 0 ? ins::addw(rd, rd, chunk) : ins::subw(rd, rd, chunk)));
    mag -= chunk;
  }
}

// The load emitted in place of a PC-relative or sp-relative original:
// same size/sign, rebased to `rn` at offset 0..imm, always the wide form.
Instruction rebased_load(const Instruction& src, Reg rt, Reg rn, u32 imm) {
  Instruction ld = src;
  ld.hw1 = ld.hw2 = 0;
  ld.length = 4;
  ld.rt = rt;
  ld.rn = rn;
  ld.rm = Reg::none;
  ld.shift_amount = 0;
  ld.imm = imm;
  ld.add_offset = true;
  ld.writeback = false;
  ld.pre_indexed = true;
  return ld;
}

}  // namespace

const char* step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::replay: return "replay";
    case StepKind::save_rx: return "save";
    case StepKind::restore_rx: return "restore";
    case StepKind::context_read_pc: return "read-pc";
    case StepKind::context_write_ra: return "write-ra";
    case StepKind::emit: return "emit";
    case StepKind::frame_write_lr: return "frame-write-lr";
    case StepKind::flag_bridge_begin: return "flag-bridge-begin";
    case StepKind::flag_bridge_end: return "flag-bridge-end";
  }
  return "?";
}

const char* translate_error_name(TranslateErrorKind k) {
  switch (k) {
    case TranslateErrorKind::unsupported: return "unsupported";
    case TranslateErrorKind::undecodable: return "undecodable";
    case TranslateErrorKind::no_free_register: return "no-free-register";
    case TranslateErrorKind::unsupported_form: return "unsupported-form";
  }
  return "?";
}

Reg select_proxy_register(const Instruction& instr, RegisterSet also_avoid) {
  RegisterSet used = registers_used(instr);
  for (int k = 0; k <= 12; ++k) {
    Reg r = reg(u8(k));
    if (!used.contains(r) && !also_avoid.contains(r)) return r;
  }
  return Reg::none;
}

namespace {

// Frame relocation moves sp, which invalidates sp-relative spill slots, so
// plans that relocate must draw every scratch from the frame-saved pool.
Reg select_frame_scratch(const Instruction& instr, RegisterSet also_avoid = {}) {
  RegisterSet used = registers_used(instr);
  for (int k : {0, 1, 2, 3, 12}) {
    Reg r = reg(u8(k));
    if (!used.contains(r) && !also_avoid.contains(r)) return r;
  }
  return Reg::none;
}

}  // namespace

TranslateResult translate(const Instruction& i) {
  InstrClass cls = classify(i);
  if (cls == InstrClass::undecodable)
    return fail(TranslateErrorKind::undecodable,
                "bytes at " + hex(i.address) + " do not decode");
  if (cls == InstrClass::unsupported)
    return fail(TranslateErrorKind::unsupported,
                to_string(i) + " is exception-coupled and cannot be displaced");
  if (i.kind == OpKind::udf)
    return fail(TranslateErrorKind::unsupported_form,
                "replaying a permanently undefined encoding would re-enter the handler: " +
                    to_string(i));

  TranslationPlan p;
  p.site = i.address;
  p.original = i;

  bool reads_sp = i.reads.contains(Reg::sp);
  bool writes_sp = i.writes.contains(Reg::sp);

  // Stack pointer analysis, shared by both classes. Only compile-time
  // constant sp adjustments can be mirrored through the stacked frame.
  if (writes_sp) {
    i32 delta = 0;
    if (i.kind == OpKind::dp && (i.dp == DpOp::add || i.dp == DpOp::sub) && i.rd == Reg::sp &&
        i.rn == Reg::sp && i.has_imm_operand) {
      delta = i.dp == DpOp::add ? i32(i.imm) : -i32(i.imm);
    } else if (i.kind == OpKind::mem && i.writeback && i.rn == Reg::sp) {
      delta = i.add_offset ? i32(i.imm) : -i32(i.imm);
    } else if (i.kind == OpKind::mem_multi && i.writeback && i.rn == Reg::sp) {
      i32 n = 0;
      for (int rbit = 0; rbit < 16; ++rbit) n += (i.reglist >> rbit) & 1;
      delta = i.before ? -4 * n : 4 * n;  // DB walks down, IA walks up
    } else {
      return fail(TranslateErrorKind::unsupported_form,
                  "stack pointer written by a runtime-computed amount: " + to_string(i));
    }
    p.sp_effect = SpEffect::static_delta;
    p.sp_delta = delta;
  } else if (reads_sp) {
    p.sp_effect = SpEffect::substituted;
  }

  if (cls == InstrClass::c1) {
    if (p.sp_effect == SpEffect::substituted) {
      p.aux_proxy = select_proxy_register(i);
      if (p.aux_proxy == Reg::none)
        return fail(TranslateErrorKind::no_free_register,
                    "no scratch register left to rebuild sp for " + to_string(i));
    } else if (p.sp_effect == SpEffect::static_delta) {
      p.aux_proxy = select_frame_scratch(i);
      Reg shuttle = select_frame_scratch(i, regs(p.aux_proxy));
      if (p.aux_proxy == Reg::none || shuttle == Reg::none)
        return fail(TranslateErrorKind::no_free_register,
                    "frame relocation needs two frame-saved scratch registers for " + to_string(i));
    }
    p.steps = {EmissionStep{StepKind::replay, i}};
    return done(std::move(p));
  }

  // C2: PC-involving forms.
  switch (i.kind) {
    case OpKind::adr: {
      p.proxy = select_proxy_register(i);
      if (p.proxy == Reg::none)
        return fail(TranslateErrorKind::no_free_register, "no proxy register for " + to_string(i));
      u32 pc = i.address + 4;
      u32 target = (pc & ~3u) + (i.add_offset ? i.imm : u32(-i32(i.imm)));
      p.steps.push_back(step_reg(StepKind::save_rx, p.proxy));
      p.steps.push_back(step(StepKind::context_read_pc));
      p.steps.push_back(emit(ins::mov_reg(i.rd, p.proxy)));
      append_adjust(p.steps, i.rd, i32(target - pc));
      p.steps.push_back(step(StepKind::context_write_ra));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.proxy));
      return done(std::move(p));
    }

    case OpKind::mem: {
      // Literal form, pc destination, or both; sp bases fold in through the
      // generic substitution fields.
      bool pc_dest = i.rt == Reg::pc;
      bool relocates = p.sp_effect == SpEffect::static_delta;
      if (pc_dest && relocates && p.sp_delta < 0)
        return fail(TranslateErrorKind::unsupported_form,
                    "pc loaded while the stack grows downward: " + to_string(i));
      RegisterSet avoid;
      p.proxy = relocates ? select_frame_scratch(i) : select_proxy_register(i);
      if (p.proxy == Reg::none)
        return fail(TranslateErrorKind::no_free_register, "no proxy register for " + to_string(i));
      avoid.add(p.proxy);
      if (p.sp_effect != SpEffect::none) {
        p.aux_proxy = relocates ? select_frame_scratch(i, avoid) : select_proxy_register(i, avoid);
        if (p.aux_proxy == Reg::none)
          return fail(TranslateErrorKind::no_free_register,
                      "no scratch register left to rebuild sp for " + to_string(i));
        avoid.add(p.aux_proxy);
        if (relocates && select_frame_scratch(i, avoid) == Reg::none)
          return fail(TranslateErrorKind::no_free_register,
                      "frame relocation needs a third frame-saved scratch register for " +
                          to_string(i));
      }
      p.steps.push_back(step_reg(StepKind::save_rx, p.proxy));
      if (p.aux_proxy != Reg::none) p.steps.push_back(step_reg(StepKind::save_rx, p.aux_proxy));

      if (i.rn == Reg::pc) {
        // Literal: materialize the absolute address in the proxy, then load.
        u32 pc = i.address + 4;
        u32 target = (pc & ~3u) + (i.add_offset ? i.imm : u32(-i32(i.imm)));
        p.steps.push_back(step(StepKind::context_read_pc));
        append_adjust(p.steps, p.proxy, i32(target - pc));
        p.steps.push_back(emit(rebased_load(i, pc_dest ? p.proxy : i.rt, p.proxy, 0)));
      } else {
        // pc destination with a register base: same instruction, loading the
        // proxy instead; an sp base becomes the rebuilt application sp.
        Instruction ld = i;
        ld.hw1 = ld.hw2 = 0;
        ld.length = 4;
        ld.rt = p.proxy;
        if (ld.rn == Reg::sp) ld.rn = p.aux_proxy;
        if (ld.rm == Reg::sp) ld.rm = p.aux_proxy;
        p.steps.push_back(emit(ld));
      }
      p.steps.push_back(step(StepKind::context_write_ra));
      if (p.aux_proxy != Reg::none) p.steps.push_back(step_reg(StepKind::restore_rx, p.aux_proxy));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.proxy));
      return done(std::move(p));
    }

    case OpKind::dp: {
      bool writes_pc = i.writes.contains(Reg::pc);
      bool reads_pc = i.reads.contains(Reg::pc);
      if (writes_sp || i.rd == Reg::sp || i.rm == Reg::sp || i.rn == Reg::sp)
        return fail(TranslateErrorKind::unsupported_form,
                    "sp and pc mixed in one ALU operation: " + to_string(i));
      if (writes_pc && reads_pc && i.dp == DpOp::mov)
        return fail(TranslateErrorKind::unsupported_form, "mov pc, pc has no defined meaning");
      p.proxy = select_proxy_register(i);
      if (p.proxy == Reg::none)
        return fail(TranslateErrorKind::no_free_register, "no proxy register for " + to_string(i));
      p.steps.push_back(step_reg(StepKind::save_rx, p.proxy));
      if (writes_pc) {
        // mov pc, rm / add pc, rm: a plain branch, bit 0 of the result is
        // ignored by the architecture, so the continuation forces it set.
        if (i.rm == Reg::pc)
          return fail(TranslateErrorKind::unsupported_form, "pc-to-pc ALU branch: " + to_string(i));
        if (reads_pc) {  // add pc, rm
          p.steps.push_back(step(StepKind::context_read_pc));
          p.steps.push_back(emit(ins::add_reg(p.proxy, i.rm)));
        } else {  // mov pc, rm
          p.steps.push_back(emit(ins::mov_reg(p.proxy, i.rm)));
        }
        p.steps.push_back(emit(ins::orr_imm_w(p.proxy, p.proxy, 1)));
      } else {
        // Reads pc as an operand: substitute the proxy.
        Instruction e = i;
        e.hw1 = e.hw2 = 0;
        if (e.rm == Reg::pc) e.rm = p.proxy;
        if (e.rn == Reg::pc) e.rn = p.proxy;
        p.steps.push_back(step(StepKind::context_read_pc));
        p.steps.push_back(emit(e));
      }
      p.steps.push_back(step(StepKind::context_write_ra));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.proxy));
      return done(std::move(p));
    }

    case OpKind::b:
    case OpKind::bl: {
      p.proxy = select_proxy_register(i);
      p.steps.push_back(step_reg(StepKind::save_rx, p.proxy));
      p.steps.push_back(step(StepKind::context_read_pc));
      if (i.kind == OpKind::bl) {
        p.writes_frame_lr = true;
        p.steps.push_back(step(StepKind::frame_write_lr));
      }
      p.steps.push_back(step(StepKind::context_write_ra));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.proxy));
      return done(std::move(p));
    }

    case OpKind::bx:
    case OpKind::blx: {
      if (i.rm == Reg::pc)
        return fail(TranslateErrorKind::unsupported_form,
                    to_string(i) + " targets pc itself");
      if (i.rm == Reg::sp)
        return fail(TranslateErrorKind::unsupported_form, to_string(i) + " targets sp");
      p.proxy = select_proxy_register(i);
      if (p.proxy == Reg::none)
        return fail(TranslateErrorKind::no_free_register, "no proxy register for " + to_string(i));
      p.steps.push_back(step_reg(StepKind::save_rx, p.proxy));
      p.steps.push_back(emit(ins::mov_reg(p.proxy, i.rm)));
      if (i.kind == OpKind::blx) {
        p.writes_frame_lr = true;
        p.steps.push_back(step(StepKind::frame_write_lr));
      }
      p.steps.push_back(step(StepKind::context_write_ra));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.proxy));
      return done(std::move(p));
    }

    case OpKind::cbz:
    case OpKind::cbnz: {
      p.proxy = select_proxy_register(i);
      if (p.proxy == Reg::none)
        return fail(TranslateErrorKind::no_free_register, "no proxy register for " + to_string(i));
      p.needs_flag_bridge = true;
      p.steps.push_back(step_reg(StepKind::save_rx, p.proxy));
      p.steps.push_back(step(StepKind::context_read_pc));
      p.steps.push_back(step(StepKind::flag_bridge_begin));
      p.steps.push_back(step(StepKind::context_write_ra));
      p.steps.push_back(step(StepKind::flag_bridge_end));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.proxy));
      return done(std::move(p));
    }

    case OpKind::tbb:
    case OpKind::tbh: {
      p.proxy = select_proxy_register(i);
      p.aux_proxy = select_proxy_register(i, regs(p.proxy));
      if (p.proxy == Reg::none || p.aux_proxy == Reg::none)
        return fail(TranslateErrorKind::no_free_register,
                    "table branch needs two scratch registers: " + to_string(i));
      Instruction ld{};
      ld.kind = OpKind::mem;
      ld.length = 4;
      ld.load = true;
      ld.size = i.kind == OpKind::tbh ? MemSize::half : MemSize::byte;
      ld.rt = p.aux_proxy;
      ld.rn = i.rn == Reg::pc ? p.proxy : i.rn;
      ld.rm = i.rm;
      ld.shift_amount = i.kind == OpKind::tbh ? 1 : 0;
      p.steps.push_back(step_reg(StepKind::save_rx, p.proxy));
      p.steps.push_back(step_reg(StepKind::save_rx, p.aux_proxy));
      p.steps.push_back(step(StepKind::context_read_pc));
      p.steps.push_back(emit(ld));
      p.steps.push_back(step(StepKind::context_write_ra));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.aux_proxy));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.proxy));
      return done(std::move(p));
    }

    case OpKind::mem_multi: {
      // Load-multiple with pc in the list (a computed return).
      if (!i.load) break;
      if (i.before)
        return fail(TranslateErrorKind::unsupported_form,
                    "descending load-multiple with pc: " + to_string(i));
      u16 low_list = u16(i.reglist & 0x1FFF);
      bool base_sp = i.rn == Reg::sp;
      if (!base_sp && ((i.reglist >> idx(i.rn)) & 1))
        return fail(TranslateErrorKind::unsupported_form,
                    "load-multiple base inside its own register list: " + to_string(i));
      bool relocates = p.sp_effect == SpEffect::static_delta;
      p.proxy = relocates ? select_frame_scratch(i) : select_proxy_register(i);
      RegisterSet avoid = regs(p.proxy);
      if (base_sp) {
        p.aux_proxy = relocates ? select_frame_scratch(i, avoid) : select_proxy_register(i, avoid);
        avoid.add(p.aux_proxy);
      }
      if (p.proxy == Reg::none || (base_sp && p.aux_proxy == Reg::none) ||
          (relocates && select_frame_scratch(i, avoid) == Reg::none))
        return fail(TranslateErrorKind::no_free_register,
                    "no scratch registers left for " + to_string(i));

      p.steps.push_back(step_reg(StepKind::save_rx, p.proxy));
      if (base_sp) p.steps.push_back(step_reg(StepKind::save_rx, p.aux_proxy));
      Reg base = base_sp ? p.aux_proxy : i.rn;
      if (base_sp || i.writeback) {
        // Pop each listed register, then pop the continuation into the proxy.
        for (int rbit = 0; rbit <= 12; ++rbit)
          if ((low_list >> rbit) & 1)
            p.steps.push_back(emit(ins::ldr_post_w(reg(u8(rbit)), base, 4)));
        if ((i.reglist >> 14) & 1) p.steps.push_back(emit(ins::ldr_post_w(Reg::lr, base, 4)));
        p.steps.push_back(emit(ins::ldr_post_w(p.proxy, base, 4)));
      } else {
        // No writeback: plain indexed loads leave the base untouched.
        u32 off = 0;
        for (int rbit = 0; rbit < 15; ++rbit) {
          if (!((i.reglist >> rbit) & 1)) continue;
          p.steps.push_back(emit(ins::ldr_imm_w(reg(u8(rbit)), base, off)));
          off += 4;
        }
        p.steps.push_back(emit(ins::ldr_imm_w(p.proxy, base, off)));
      }
      p.steps.push_back(step(StepKind::context_write_ra));
      if (base_sp) p.steps.push_back(step_reg(StepKind::restore_rx, p.aux_proxy));
      p.steps.push_back(step_reg(StepKind::restore_rx, p.proxy));
      return done(std::move(p));
    }

    default:
      break;
  }
  return fail(TranslateErrorKind::unsupported_form,
              "no relocation rule for " + to_string(i));
}

std::string to_string(const TranslationPlan& p) {
  std::string out = "site " + hex(p.site) + ": " + to_string(p.original) + " -> [";
  bool first = true;
  for (const auto& s : p.steps) {
    if (!first) out += ", ";
    first = false;
    out += step_kind_name(s.kind);
    if (s.kind == StepKind::save_rx || s.kind == StepKind::restore_rx)
      out += " " + reg_name(s.instr.rd);
    else if (s.kind == StepKind::replay || s.kind == StepKind::emit)
      out += "(" + to_string(s.instr) + ")";
  }
  out += "]";
  if (p.proxy != Reg::none) out += " proxy=" + reg_name(p.proxy);
  if (p.aux_proxy != Reg::none) out += " aux=" + reg_name(p.aux_proxy);
  if (p.sp_effect == SpEffect::substituted) out += " sp=substituted";
  if (p.sp_effect == SpEffect::static_delta)
    out += " sp" + std::string(p.sp_delta >= 0 ? "+" : "") + std::to_string(p.sp_delta);
  if (p.writes_frame_lr) out += " frame-lr";
  if (p.needs_flag_bridge) out += " flag-bridge";
  return out;
}

}  // namespace bmr
