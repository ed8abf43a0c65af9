#include "bmr/hookgen.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "bmr/assembler.hpp"

namespace bmr {

namespace {

constexpr u32 kFrameSize = ExceptionFrame::kSize;
constexpr u32 kXpsrOff = ExceptionFrame::kXpsr;
constexpr u32 kRaOff = ExceptionFrame::kReturnAddress;
constexpr u32 kLrOff = ExceptionFrame::kLR;

[[noreturn]] void die(const std::string& why) {
  throw std::runtime_error("hook assembly: " + why);
}

std::string hex(u32 v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

// Frame slot of a hardware-stacked register, or UINT32_MAX.
u32 frame_slot(Reg r) {
  switch (r) {
    case Reg::r0: return 0x00;
    case Reg::r1: return 0x04;
    case Reg::r2: return 0x08;
    case Reg::r3: return 0x0C;
    case Reg::r12: return 0x10;
    case Reg::lr: return 0x14;
    default: return UINT32_MAX;
  }
}

bool frame_covered(Reg r) { return frame_slot(r) != UINT32_MAX; }

// The registers the hardware stacks and therefore restores on return; any of
// them is fair game as worker scratch once its application value has been
// consumed or committed.
constexpr Reg kScratchPool[] = {Reg::r0, Reg::r1, Reg::r2, Reg::r3, Reg::r12};

Reg pick_scratch(RegisterSet avoid) {
  for (Reg r : kScratchPool)
    if (!avoid.contains(r)) return r;
  die("no stacked scratch register available");
}

Reg pick_low_scratch(RegisterSet avoid) {
  for (Reg r : {Reg::r0, Reg::r1, Reg::r2, Reg::r3})
    if (!avoid.contains(r)) return r;
  die("no low scratch register available");
}

void put_mov32(CodeBuffer& buf, Reg rd, u32 value) {
  buf.put(ins::movw(rd, value & 0xFFFF));
  buf.put(ins::movt(rd, value >> 16));
}

// addw/subw chunks moving rd by a signed delta.
void put_adjust(CodeBuffer& buf, Reg rd, i32 delta) {
  u32 mag = delta >= 0 ? u32(delta) : u32(-delta);
  while (mag > 0) {
    u32 chunk = mag > 4095 ? 4095u : mag;
    buf.put(delta >= 0 ? ins::addw(rd, rd, chunk) : ins::subw(rd, rd, chunk));
    mag -= chunk;
  }
}

// Re-encodes an instruction whose registers were substituted: tries the
// original width first, widens when the narrow forms cannot express it.
void put_reencoded(CodeBuffer& buf, Instruction e) {
  e.hw1 = e.hw2 = 0;
  if (e.length == 2 && !encode(e).ok) e.length = 4;
  buf.put(e);
}

bool branch_target_known(OpKind k) {
  return k == OpKind::b || k == OpKind::cbz || k == OpKind::cbnz;
}

// Branches whose destination arrives in a register with an interworking
// check on real hardware: a clear bit 0 raises a fault instead of branching.
bool needs_interworking_check(const Instruction& i) {
  if (i.kind == OpKind::bx || i.kind == OpKind::blx) return true;
  if (i.kind == OpKind::mem && i.load && i.rt == Reg::pc) return true;
  if (i.kind == OpKind::mem_multi && i.load && (i.reglist & 0x8000)) return true;
  return false;
}

// True when the worker hands the frame return address the value already
// sitting in the proxy register rather than a constant.
bool ra_from_proxy(const Instruction& i) {
  if (needs_interworking_check(i)) return true;
  if (i.kind == OpKind::dp && i.writes.contains(Reg::pc)) return true;
  return false;
}

struct WorkerEmitter {
  CodeBuffer& buf;
  const HookSite& site;
  const TranslationPlan& plan;
  const Instruction& orig;
  Label fallback;
  Label ret;
  Label payload_entry;

  WorkerEmitter(CodeBuffer& b, const HookSite& s, Label fb, Label r, Label pl)
      : buf(b), site(s), plan(s.plan), orig(s.plan.original), fallback(fb), ret(r),
        payload_entry(pl) {}

  // Distance from the live sp to the saved exception-return word; the frame
  // itself starts one word further up. Grows while spills are active.
  u32 sp_bias = 4;
  std::vector<Reg> spilled;

  // Where frame words live for the rest of the worker: the original frame
  // above sp, or the relocated copy pointed at by `shuttle` once the copy
  // has happened. After an early copy the original frame top is partially
  // overwritten by the overlap, so reads must switch over along with writes.
  Reg shuttle = Reg::none;
  Reg store_base = Reg::sp;
  u32 store_bias() const { return store_base == Reg::sp ? sp_bias : 4; }

  u32 frame_addr(u32 slot) const { return sp_bias + slot; }

  RegisterSet held() const { return regs(plan.proxy, plan.aux_proxy, shuttle); }

  void emit();

 private:
  bool relocating() const { return plan.sp_effect == SpEffect::static_delta; }

  void emit_envelope();
  void emit_spills();
  void emit_sp_rebuild();
  void emit_shuttle();
  void emit_frame_copy();
  void emit_entry_state();
  void emit_body();
  void emit_interworking_check();
  void emit_exit_state();
  void emit_flag_capture();
  void emit_return_address();
  void emit_unspills();

  void emit_replay(const Instruction& i);
  void emit_static_sp_replay(const Instruction& i);
  void emit_itstate_write();
  void store_result(Reg r, u32 slot);
  void store_ra_const(u32 value, Reg s);
  u32 branch_target() const { return orig.address + 4 + u32(i32(orig.imm)); }
};

// Stage order. For plans that move sp, the frame is copied to where the
// hardware would have stacked it one instruction later. When sp descends,
// the displaced instruction's own stores overlap the top of the original
// frame, so the copy happens before the body and results commit into the
// relocated frame. When sp ascends, the relocated frame overlaps the words
// the instruction still has to load, so results commit into the original
// frame and the copy runs last.
void WorkerEmitter::emit() {
  bool early_copy = relocating() && plan.sp_delta < 0;
  emit_envelope();
  emit_spills();
  emit_sp_rebuild();
  emit_shuttle();
  if (early_copy) {
    emit_frame_copy();
    store_base = shuttle;
  }
  emit_entry_state();
  emit_body();
  emit_interworking_check();
  emit_exit_state();
  emit_flag_capture();
  emit_return_address();
  if (relocating() && !early_copy) emit_frame_copy();
  if (relocating()) buf.put(ins::mov_reg(Reg::sp, shuttle));
  emit_unspills();
  buf.b(ret, true);
}

// Calls the instrumentation payload with every register it could disturb
// parked: r0-r12 on the stack, r0 pointing at the stacked frame. The lr
// value live here is the exception-return magic, already saved by the
// handler prologue, so the call may clobber it.
void WorkerEmitter::emit_envelope() {
  if (site.payload.empty()) return;
  buf.put(ins::stmdb_w(Reg::sp, true, RegisterSet::general().bits));
  buf.put(ins::add_sp_imm(Reg::r0, 13 * 4 + sp_bias));
  buf.bl(payload_entry);
  buf.put(ins::ldmia_w(Reg::sp, true, RegisterSet::general().bits));
}

// Scratch registers outside the stacked frame keep their application values
// in one-word slots pushed below the saved exception-return word. Plans that
// relocate the frame never reach here: their scratch comes from the stacked
// pool precisely so that sp stays put while slots are live.
void WorkerEmitter::emit_spills() {
  for (Reg r : {plan.proxy, plan.aux_proxy}) {
    if (r == Reg::none || frame_covered(r)) continue;
    if (plan.sp_effect == SpEffect::static_delta)
      die("relocating plan with an unstacked scratch register at " + hex(plan.site));
    buf.put(ins::str_pre_w(r, Reg::sp, -4));
    spilled.push_back(r);
    sp_bias += 4;
  }
}

// aux := the application sp at the faulting instruction, recovered from the
// handler sp plus the frame, the saved word, any spill slots, and the
// alignment pad recorded in the stacked xPSR.
void WorkerEmitter::emit_sp_rebuild() {
  if (plan.sp_effect == SpEffect::none) return;
  Reg aux = plan.aux_proxy;
  if (aux == Reg::none) die("sp-dependent plan without an aux register at " + hex(plan.site));
  Reg s = pick_low_scratch(held());
  buf.put(ins::ldr_imm_w(s, Reg::sp, frame_addr(kXpsrOff)));
  buf.put(ins::and_imm_w(s, s, 1u << ExceptionFrame::kPadBit));
  buf.put(ins::lsrs_imm(s, s, ExceptionFrame::kPadBit - 2));  // 0 or 4 pad bytes
  buf.put(ins::mov_reg(aux, Reg::sp));
  buf.put(ins::add_reg(aux, s));
  buf.put(ins::addw(aux, aux, sp_bias + kFrameSize));
}

// shuttle := address of the relocated frame minus one word, i.e. the value
// sp takes over just before the return. Derived from the pre-instruction
// application sp in aux before the body walks aux forward.
void WorkerEmitter::emit_shuttle() {
  if (!relocating()) return;
  // The shuttle must survive the whole body: entry-state restores write the
  // registers the instruction reads, the replay writes the ones it loads,
  // so both sets are off limits alongside the plan's own scratch.
  RegisterSet avoid = registers_used(orig);
  avoid.add(plan.proxy);
  avoid.add(plan.aux_proxy);
  shuttle = pick_scratch(avoid);
  i32 disp = plan.sp_delta - i32(kFrameSize + 4);
  u32 mag = disp < 0 ? u32(-disp) : u32(disp);
  u32 first = mag < 4095 ? mag : 4095;
  buf.put(disp >= 0 ? ins::addw(shuttle, plan.aux_proxy, first)
                    : ins::subw(shuttle, plan.aux_proxy, first));
  put_adjust(buf, shuttle, disp >= 0 ? i32(mag - first) : -i32(mag - first));
}

// Copies the saved exception-return word plus the eight frame words to the
// relocated position. The walk direction keeps every source word read
// before the destination range overwrites it, and the copied xPSR drops
// the alignment-pad bit because the relocated frame sits exactly at its
// final sp.
void WorkerEmitter::emit_frame_copy() {
  Reg d = pick_scratch(regs(plan.aux_proxy, shuttle));
  auto copy_word = [&](u32 off) {
    buf.put(ins::ldr_imm_w(d, Reg::sp, off));
    if (off == 4 + kXpsrOff) buf.put(ins::bic_imm_w(d, d, 1u << ExceptionFrame::kPadBit));
    buf.put(ins::str_imm_w(d, shuttle, off));
  };
  if (plan.sp_delta < 0) {
    for (u32 off = 0; off <= 4 + kXpsrOff; off += 4) copy_word(off);
  } else {
    for (i32 off = i32(4 + kXpsrOff); off >= 0; off -= 4) copy_word(u32(off));
  }
}

// Brings the application values the displaced instruction consumes back
// into the registers the dispatcher and handler glue may have clobbered.
// Flags first: the loads themselves never touch them, and the scratch used
// for the transfer is free to be reloaded as an operand right after.
// Flag setters also need the restore: an instruction that updates only N
// and Z must leave C and V as the application had them, and the capture
// after the replay stores the whole nibble.
void WorkerEmitter::emit_entry_state() {
  if (orig.reads_flags || orig.sets_flags) {
    Reg s = pick_scratch(held());
    buf.put(ins::ldr_imm_w(s, store_base, store_bias() + kXpsrOff));
    buf.put(ins::msr_apsr_nzcvq(s));
  }
  for (Reg r : {Reg::r0, Reg::r1, Reg::r2, Reg::r3, Reg::r12, Reg::lr})
    if (orig.reads.contains(r))
      buf.put(ins::ldr_imm_w(r, store_base, store_bias() + frame_slot(r)));
}

void WorkerEmitter::emit_body() {
  for (const EmissionStep& st : plan.steps) {
    switch (st.kind) {
      case StepKind::save_rx:
      case StepKind::restore_rx:
        break;  // realized by spills and frame coverage
      case StepKind::context_read_pc:
        put_mov32(buf, plan.proxy, orig.address + 4);
        break;
      case StepKind::emit:
        buf.put(st.instr);
        break;
      case StepKind::replay:
        emit_replay(st.instr);
        break;
      case StepKind::frame_write_lr: {
        Reg s = pick_scratch(held());
        put_mov32(buf, s, (orig.address + orig.length) | 1);
        store_result(s, kLrOff);
        break;
      }
      case StepKind::flag_bridge_begin:
      case StepKind::flag_bridge_end:
        break;  // folded into the return-address write
      case StepKind::context_write_ra:
        return;  // everything after it is restores, handled by later stages
    }
  }
}

// A register-carried branch target with bit 0 clear would fault on the real
// core instead of branching. Unwind any spills and hand the episode to the
// displaced fault handler, which is what an uninstrumented image would run.
void WorkerEmitter::emit_interworking_check() {
  if (!needs_interworking_check(orig)) return;
  Label ok = buf.label();
  buf.put(ins::tst_imm_w(plan.proxy, 1));
  buf.b(Cond::ne, ok, false);
  for (auto it = spilled.rbegin(); it != spilled.rend(); ++it)
    buf.put(ins::ldr_post_w(*it, Reg::sp, 4));
  buf.b(fallback, true);
  buf.bind(ok);
}

void WorkerEmitter::store_result(Reg r, u32 slot) {
  buf.put(ins::str_imm_w(r, store_base, store_bias() + slot));
}

// Commits the instruction's register results into the frame so the return
// restores them. Registers outside the frame already carry their new values
// live. The frame lr slot is skipped when the plan wrote a link address
// there; pc lands via the return-address slot instead.
void WorkerEmitter::emit_exit_state() {
  RegisterSet outs = orig.writes;
  if (plan.writes_frame_lr) outs.remove(Reg::lr);
  for (Reg r : {Reg::r0, Reg::r1, Reg::r2, Reg::r3, Reg::r12, Reg::lr})
    if (outs.contains(r)) store_result(r, frame_slot(r));
}

// Folds freshly computed NZCV into the stacked xPSR, preserving every other
// bit, so the return delivers the replayed instruction's flags.
void WorkerEmitter::emit_flag_capture() {
  if (!orig.sets_flags) return;
  Reg s1 = pick_scratch(held());
  Reg s2 = pick_scratch(held() | regs(s1));
  buf.put(ins::mrs_apsr(s1));
  buf.put(ins::ldr_imm_w(s2, store_base, store_bias() + kXpsrOff));
  buf.put(ins::and_imm_w(s1, s1, 0xF0000000));
  buf.put(ins::bic_imm_w(s2, s2, 0xF0000000));
  buf.put(ins::orr_reg_w(s1, s1, s2));
  store_result(s1, kXpsrOff);
}

void WorkerEmitter::store_ra_const(u32 value, Reg s) {
  put_mov32(buf, s, value);
  store_result(s, kRaOff);
}

// Decides where execution resumes. Straight-line sites continue past the
// displaced instruction; branches pick between target and fall-through;
// register-carried targets come out of the proxy with bit 0 already vetted
// or forced.
void WorkerEmitter::emit_return_address() {
  u32 fallthrough = (orig.address + orig.length) | 1;

  if ((orig.kind == OpKind::b && orig.cond == Cond::al) || orig.kind == OpKind::bl) {
    store_ra_const(branch_target() | 1, plan.proxy);
    return;
  }
  if (branch_target_known(orig.kind)) {
    // Conditional: evaluate against the application state, then write one
    // of two constants. cbz/cbnz synthesize their test first; the live
    // flags are disposable because the stacked copy is what returns.
    Cond taken_cond = orig.cond;
    if (orig.kind == OpKind::cbz || orig.kind == OpKind::cbnz) {
      buf.put(ins::cmp_imm8(orig.rn, 0));
      taken_cond = orig.kind == OpKind::cbz ? Cond::eq : Cond::ne;
    }
    Label taken = buf.label(), done = buf.label();
    buf.b(taken_cond, taken, false);
    store_ra_const(fallthrough, plan.proxy);
    buf.b(done, false);
    buf.bind(taken);
    store_ra_const(branch_target() | 1, plan.proxy);
    buf.bind(done);
    return;
  }
  if (orig.kind == OpKind::tbb || orig.kind == OpKind::tbh) {
    // proxy holds the table base (site + 4), aux the fetched entry.
    buf.put(ins::lsls_imm(plan.aux_proxy, plan.aux_proxy, 1));
    buf.put(ins::add_reg(plan.proxy, plan.aux_proxy));
    buf.put(ins::orr_imm_w(plan.proxy, plan.proxy, 1));
    store_result(plan.proxy, kRaOff);
    return;
  }
  if (ra_from_proxy(orig)) {
    store_result(plan.proxy, kRaOff);
    return;
  }
  store_ra_const(fallthrough, pick_scratch(held()));
}

void WorkerEmitter::emit_unspills() {
  for (auto it = spilled.rbegin(); it != spilled.rend(); ++it)
    buf.put(ins::ldr_post_w(*it, Reg::sp, 4));
  sp_bias = 4;
}

void WorkerEmitter::emit_replay(const Instruction& i) {
  if (i.kind == OpKind::it) {
    emit_itstate_write();
    return;
  }
  switch (plan.sp_effect) {
    case SpEffect::none:
      // Bit-exact replay of the original.
      buf.put_half(i.hw1);
      if (i.length == 4) buf.put_half(i.hw2);
      return;
    case SpEffect::substituted: {
      Instruction e = i;
      if (e.rn == Reg::sp) e.rn = plan.aux_proxy;
      if (e.rm == Reg::sp) e.rm = plan.aux_proxy;
      if (e.rt == Reg::sp) e.rt = plan.aux_proxy;
      put_reencoded(buf, e);
      return;
    }
    case SpEffect::static_delta:
      emit_static_sp_replay(i);
      return;
  }
}

// Mirrors a constant sp adjustment against aux: the data transfers hit the
// same application addresses the original would, and aux walks to the
// post-instruction sp for the relocation stage to consume.
void WorkerEmitter::emit_static_sp_replay(const Instruction& i) {
  Reg aux = plan.aux_proxy;
  switch (i.kind) {
    case OpKind::dp:
      put_adjust(buf, aux, plan.sp_delta);
      return;
    case OpKind::mem: {
      Instruction e = i;
      e.rn = aux;
      e.length = 4;
      put_reencoded(buf, e);
      return;
    }
    case OpKind::mem_multi: {
      auto each = [&](bool ascending, auto fn) {
        if (ascending) {
          for (int k = 0; k < 16; ++k)
            if (k != 13 && ((i.reglist >> k) & 1)) fn(reg(u8(k)));
        } else {
          for (int k = 15; k >= 0; --k)
            if (k != 13 && ((i.reglist >> k) & 1)) fn(reg(u8(k)));
        }
      };
      if (i.load) {
        if (i.before)  // ldmdb sp!
          each(false, [&](Reg r) { buf.put(ins::ldr_pre_w(r, aux, -4)); });
        else  // ldmia sp! (pop without pc; pc lists translate separately)
          each(true, [&](Reg r) { buf.put(ins::ldr_post_w(r, aux, 4)); });
      } else {
        if (i.before)  // stmdb sp! (push)
          each(false, [&](Reg r) { buf.put(ins::str_pre_w(r, aux, -4)); });
        else  // stmia sp!
          each(true, [&](Reg r) { buf.put(ins::str_post_w(r, aux, 4)); });
      }
      return;
    }
    default:
      die("no stack replay rule for " + to_string(i));
  }
}

// An IT site cannot run its block inside the handler, but the block itself
// is ordinary code: setting the IT bits in the stacked xPSR makes the
// return resume right after the displaced IT with the same gating the
// hardware would have latched. The stacked bits are known clear because
// sites inside an IT block are never accepted.
void WorkerEmitter::emit_itstate_write() {
  u32 v = u32(u8(orig.it_firstcond) << 4 | orig.it_mask) & 0xFF;
  Reg s = pick_scratch(held());
  buf.put(ins::ldr_imm_w(s, Reg::sp, frame_addr(kXpsrOff)));
  if (v & 3) buf.put(ins::orr_imm_w(s, s, (v & 3) << 25));
  if (v >> 2) buf.put(ins::orr_imm_w(s, s, (v >> 2) << 10));
  buf.put(ins::str_imm_w(s, Reg::sp, frame_addr(kXpsrOff)));
}

struct Layout {
  u32 handler_size = 0;
  u32 dispatcher_size = 0;
  u32 ret_offset = 0;
  u32 table_offset = 0;
  std::vector<SiteLayout> sites;
  u32 total = 0;

  bool operator==(const Layout&) const = default;
};

// Emits the whole blob once. The first pass runs with a zero layout to
// discover every offset; the second runs with the real one. All emission
// sizes are value-independent (address constants always use a movw/movt
// pair, label branches have a fixed width), so the two passes agree.
Layout emit_blob(CodeBuffer& buf, const std::vector<HookSite>& sorted, u32 region_base,
                 u32 original_fault_handler, const Layout* prev) {
  Layout out;
  out.sites.resize(sorted.size());
  Label fallback = buf.label();
  Label ret = buf.label();

  // Entry: park the exception-return word, key on the frame return address.
  buf.put(ins::push16(regs(Reg::lr).bits));
  buf.put(ins::ldr_imm_w(Reg::r0, Reg::sp, 4 + kRaOff));
  out.handler_size = u32(buf.size());

  // Linear scan over (site, worker) pairs; every miss costs the same five
  // instructions, so dispatch time is affine in the table position.
  if (!sorted.empty()) {
    u32 table_addr = region_base + (prev ? prev->table_offset : 0);
    put_mov32(buf, Reg::r1, table_addr);
    buf.put(ins::movw(Reg::r2, u32(sorted.size())));
    Label scan = buf.here();
    buf.cbz(Reg::r2, fallback);
    buf.put(ins::ldr_post_w(Reg::r3, Reg::r1, 8));
    buf.put(ins::subs_imm8(Reg::r2, 1));
    buf.put(ins::cmp_reg(Reg::r3, Reg::r0));
    buf.b(Cond::ne, scan, false);
    buf.put(ins::ldr_pre_w(Reg::r3, Reg::r1, -4));
    buf.put(ins::bx(Reg::r3));
  }

  // Unclaimed fault: put back everything exception entry left live and
  // tail-chain to the displaced handler, exactly as an untouched vector
  // table would have run it.
  buf.bind(fallback);
  buf.put(ins::ldr_post_w(Reg::lr, Reg::sp, 4));
  buf.put(ins::ldr_imm(Reg::r0, Reg::sp, kXpsrOff));
  buf.put(ins::msr_apsr_nzcvq(Reg::r0));
  buf.put(ins::ldr_imm(Reg::r0, Reg::sp, 0x00));
  buf.put(ins::ldr_imm(Reg::r1, Reg::sp, 0x04));
  buf.put(ins::ldr_imm(Reg::r2, Reg::sp, 0x08));
  buf.put(ins::ldr_imm(Reg::r3, Reg::sp, 0x0C));
  buf.put(ins::ldr_imm_w(Reg::r12, Reg::sp, 0x10));
  u32 lit_imm = buf.cursor() % 4 == 0 ? 0 : 4;
  buf.put(ins::ldr_lit_w(Reg::pc, lit_imm, true));
  buf.align(4);
  buf.put_word(original_fault_handler);
  out.dispatcher_size = u32(buf.size()) - out.handler_size;

  // Shared exit: the word parked at entry is the exception-return magic.
  out.ret_offset = u32(buf.size());
  buf.bind(ret);
  buf.put(ins::pop16(regs(Reg::pc).bits));

  buf.align(4);
  out.table_offset = u32(buf.size());
  for (size_t k = 0; k < sorted.size(); ++k) {
    buf.put_word(sorted[k].address);
    u32 worker = prev ? (region_base + prev->sites[k].worker_offset) | 1 : 0;
    buf.put_word(worker);
  }

  for (size_t k = 0; k < sorted.size(); ++k) {
    buf.align(4);
    SiteLayout& sl = out.sites[k];
    sl.site_address = sorted[k].address;
    sl.worker_offset = u32(buf.size());
    sl.plan_size = u32(sorted[k].plan.steps.size());
    WorkerEmitter we(buf, sorted[k], fallback, ret, buf.label());
    we.emit();
    sl.worker_size = u32(buf.size()) - sl.worker_offset;
    if (!sorted[k].payload.empty()) {
      buf.align(4);
      sl.payload_offset = u32(buf.size());
      sl.payload_size = u32(sorted[k].payload.size());
      buf.bind(we.payload_entry);
      for (u8 b : sorted[k].payload) buf.put_byte(b);
      buf.align(2);
    } else {
      buf.bind(we.payload_entry);  // unused but keeps the buffer consistent
    }
  }
  out.total = u32(buf.size());
  return out;
}

}  // namespace

HookBlob assemble_hook_blob(const std::vector<HookSite>& sites, u32 region_base,
                            u32 original_fault_handler) {
  if (region_base % 4) die("region base " + hex(region_base) + " is not word-aligned");
  if (sites.size() > 0xFFFF) die("site count exceeds the dispatch counter width");

  std::vector<HookSite> sorted = sites;
  std::sort(sorted.begin(), sorted.end(),
            [](const HookSite& a, const HookSite& b) { return a.address < b.address; });
  for (size_t k = 1; k < sorted.size(); ++k)
    if (sorted[k].address == sorted[k - 1].address)
      die("duplicate site " + hex(sorted[k].address));
  for (const HookSite& s : sorted)
    if (s.plan.site != s.address)
      die("plan for " + hex(s.plan.site) + " attached to site " + hex(s.address));

  CodeBuffer first(region_base);
  Layout l1 = emit_blob(first, sorted, region_base, original_fault_handler, nullptr);
  std::vector<u8> bytes1 = first.take();
  if (!first.ok()) die(first.error());

  CodeBuffer second(region_base);
  Layout l2 = emit_blob(second, sorted, region_base, original_fault_handler, &l1);
  std::vector<u8> bytes = second.take();
  if (!second.ok()) die(second.error());
  if (!(l1 == l2) || bytes.size() != bytes1.size())
    die("layout changed between passes");

  HookBlob blob;
  blob.code = std::move(bytes);
  blob.region_base = region_base;
  blob.handler_entry = region_base | 1;
  blob.original_fault_handler = original_fault_handler;
  blob.handler_size = l2.handler_size;
  blob.dispatcher_size = l2.dispatcher_size;
  blob.table_offset = l2.table_offset;
  blob.ret_offset = l2.ret_offset;
  blob.sites = l2.sites;
  for (const SiteLayout& sl : blob.sites)
    blob.dispatch_table.push_back({sl.site_address, (region_base + sl.worker_offset) | 1});
  return blob;
}

}  // namespace bmr
