#include "corpus.hpp"

#include <cmath>
#include <stdexcept>

namespace bmr::testing {

using namespace bmr::ins;
using R = Reg;
using C = Cond;

u8 it_mask(Cond c, const std::string& suffix) {
  u8 fc0 = u8(u8(c) & 1);
  u8 mask = 0;
  int pos = 3;
  for (char ch : suffix) {
    u8 bit = (ch == 'T') ? fc0 : u8(fc0 ^ 1);
    mask |= u8(bit << pos);
    --pos;
  }
  mask |= u8(1u << pos);
  return mask;
}

namespace {

// Offset helpers for self-referential layouts. Address captures start at zero
// on the first pass, so clamp to keep the placeholder encodable; the layout
// loop reruns the generator until the bytes stop changing.
u32 fwd_off(u32 target, u32 from) { return target > from ? target - from : 0; }
u32 back_off(u32 from, u32 target) { return from > target ? from - target : 4; }
u32 pal(u32 site) { return (site + 4) & ~3u; }

}  // namespace

TestProgram make_program(const std::string& name, const Generator& gen) {
  std::vector<u8> prev;
  std::vector<u8> bytes;
  std::vector<u32> starts;
  u32 entry = 0;
  u32 handler = 0;
  bool settled = false;
  for (int pass = 0; pass < 8 && !settled; ++pass) {
    CodeBuffer cb(kBase);
    starts.clear();
    for (int i = 0; i < FirmwareImage::kEvtEntries; ++i) cb.put_word(0);
    handler = cb.cursor();
    cb.put(bkpt(0xAA));
    cb.align(4);
    entry = cb.cursor() | 1;
    Prog p{cb, starts};
    gen(p);
    bytes = cb.take();
    if (cb.ok() && bytes == prev) settled = true;
    prev = bytes;
  }
  if (!settled) throw std::runtime_error(name + ": layout did not settle");

  auto put32 = [&](u32 off, u32 v) {
    for (int k = 0; k < 4; ++k) bytes[off + k] = u8(v >> (8 * k));
  };
  put32(0, kRamBase + kRamSize);  // initial stack pointer
  put32(4, entry);
  for (u32 i = 2; i < FirmwareImage::kEvtEntries; ++i) put32(4 * i, handler | 1);

  TestProgram tp;
  tp.name = name;
  tp.image = FirmwareImage::load(std::move(bytes), kBase, 0);
  tp.entry = entry;
  tp.default_handler = handler;
  tp.instruction_starts = starts;
  return tp;
}

std::vector<u32> eligible_sites(const TestProgram& p) {
  std::vector<u32> out;
  for (u32 a : p.instruction_starts)
    if (probe_site(p.image, a).accepted) out.push_back(a);
  return out;
}

EquivalenceOutcome check_equivalence(const TestProgram& p, const std::vector<u32>& sites,
                                     const std::vector<std::pair<u32, std::vector<u8>>>& payloads,
                                     const std::vector<ExcludedRange>& extra_exclude,
                                     int vector_index, u64 budget) {
  EquivalenceOutcome out;
  std::vector<SiteRequest> reqs;
  for (u32 s : sites) {
    SiteRequest r;
    r.address = s;
    for (const auto& [addr, body] : payloads)
      if (addr == s) r.payload = body;
    reqs.push_back(std::move(r));
  }
  out.patch = instrument_image(p.image, reqs, vector_index);
  for (const auto& o : out.patch.outcomes) {
    if (!o.accepted) {
      out.what = p.name + ": site rejected: " + o.reason;
      return out;
    }
  }

  RamConfig ram{kRamBase, kRamSize};
  Machine ref(p.image, ram, vector_index);
  out.original = ref.run(p.entry, budget);
  Machine ins(out.patch.image, ram, vector_index);
  out.instrumented = ins.run(p.entry, budget);

  std::vector<ExcludedRange> ex = extra_exclude;
  u32 spt = out.instrumented.final_state.sp();
  ex.push_back({spt - 160, 160});
  DivergenceReport d = diff(out.original, out.instrumented, ram, ex);
  if (!d.equivalent) {
    out.what = p.name + ": " + d.what;
    return out;
  }
  if (out.instrumented.max_trap_stack_bytes > kHookStackBudget) {
    out.what = p.name + ": hook stack " + std::to_string(out.instrumented.max_trap_stack_bytes) +
               " over budget";
    return out;
  }
  out.ok = true;
  return out;
}

LineFit fit_line(const std::vector<std::pair<double, double>>& pts) {
  LineFit f;
  double n = double(pts.size());
  if (pts.size() < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double den = n * sxx - sx * sx;
  if (den == 0) return f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ybar = sy / n, ss_res = 0, ss_tot = 0;
  for (auto [x, y] : pts) {
    double e = y - (f.intercept + f.slope * x);
    ss_res += e * e;
    ss_tot += (y - ybar) * (y - ybar);
  }
  f.r2 = ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return f;
}

namespace {

void load_const(Prog& p, Reg rd, u32 value) {
  p.put(movw(rd, value & 0xFFFF));
  if (value >> 16) p.put(movt(rd, value >> 16));
}

std::vector<TestProgram> build_corpus() {
  std::vector<TestProgram> v;
  auto add = [&](const std::string& name, const Generator& g) {
    v.push_back(make_program(name, g));
  };

  add("alu-imm", [](Prog& p) {
    p.put(movs_imm(R::r0, 10));
    p.put(adds_imm8(R::r0, 25));
    p.put(subs_imm3(R::r1, R::r0, 3));
    p.put(subs_imm8(R::r1, 5));
    p.put(adds_imm3(R::r2, R::r1, 7));
    p.put(cmp_imm8(R::r0, 35));
    Label fail = p.label(), done = p.label();
    p.b(C::ne, fail, false);
    p.put(movs_imm(R::r3, 1));
    p.b(done, false);
    p.bind(fail);
    p.put(movs_imm(R::r3, 0xEE));
    p.bind(done);
    p.stop();
  });

  add("alu-reg", [](Prog& p) {
    p.put(movs_imm(R::r0, 9));
    p.put(movs_imm(R::r1, 4));
    p.put(adds_reg(R::r2, R::r0, R::r1));
    p.put(subs_reg(R::r3, R::r2, R::r1));
    p.put(movs_imm(R::r4, 3));
    p.put(mov_reg(R::r8, R::r4));
    p.put(add_reg(R::r8, R::r0));
    p.put(mov_reg(R::r5, R::r8));
    p.put(ands_reg(R::r3, R::r0));
    p.put(orrs_reg(R::r3, R::r1));
    p.put(eors_reg(R::r3, R::r2));
    p.put(movs_reg(R::r6, R::r2));
    p.put(cmp_reg(R::r6, R::r1));
    Label ge = p.label();
    p.b(C::ge, ge, false);
    p.put(movs_imm(R::r7, 0xEE));
    p.bind(ge);
    p.put(movs_imm(R::r7, 2));
    p.stop();
  });

  add("alu-carry", [](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.ins16(0x43C1);  // mvns r1, r0
    p.put(adds_imm8(R::r1, 1));  // wraps to zero, carry out
    p.ins16(0x4142);  // adcs r2, r0
    p.put(movs_imm(R::r3, 5));
    p.ins16(0x4183);  // sbcs r3, r0
    p.ins16(0x425C);  // rsbs r4, r3, #0
    p.ins16(0x42DC);  // cmn r4, r3
    Label z = p.label();
    p.b(C::eq, z, false);
    p.put(movs_imm(R::r7, 0xEE));
    p.bind(z);
    p.ins16(0x421B);  // tst r3, r3
    p.ins16(0x4383);  // bics r3, r0
    p.put(movs_imm(R::r5, 4));
    p.put(movs_imm(R::r6, 0x81));
    p.ins16(0x41EE);  // rors r6, r5
    p.put(movs_imm(R::r0, 3));
    p.put(movs_imm(R::r1, 5));
    p.ins16(0x4081);  // lsls r1, r0
    p.put(movs_imm(R::r2, 0x90));
    p.ins16(0x40C2);  // lsrs r2, r0
    p.put(movs_imm(R::r7, 0xF0));
    p.ins16(0x4107);  // asrs r7, r0
    p.stop();
  });

  add("alu-shift", [](Prog& p) {
    p.put(movs_imm(R::r0, 0x96));
    p.put(lsls_imm(R::r1, R::r0, 24));
    p.put(asrs_imm(R::r2, R::r1, 8));
    p.put(lsrs_imm(R::r3, R::r1, 8));
    p.put(movs_imm(R::r4, 7));
    p.put(movs_imm(R::r5, 6));
    p.put(muls(R::r4, R::r5));
    p.put(lsls_imm(R::r6, R::r4, 1));
    p.stop();
  });

  add("alu-wide", [](Prog& p) {
    p.put(mov_imm_w(R::r0, 0xAB00AB00));
    p.put(add_imm_w(R::r1, R::r0, 0x1000));
    p.put(sub_imm_w(R::r2, R::r1, 0x500));
    p.put(and_imm_w(R::r3, R::r0, 0xFF00FF00));
    p.put(orr_imm_w(R::r4, R::r0, 0xFF));
    p.put(bic_imm_w(R::r4, R::r4, 0x0F));
    p.put(orr_reg_w(R::r4, R::r4, R::r3));
    p.put(tst_imm_w(R::r0, 0x00010000));
    Label nz = p.label(), join = p.label();
    p.b(C::ne, nz);
    p.put(movs_imm(R::r6, 1));
    p.b(join);
    p.bind(nz);
    p.put(movs_imm(R::r6, 2));
    p.bind(join);
    p.put(cmp_imm_w(R::r1, 0xBB00BB00));
    Label lo = p.label();
    p.b(C::cc, lo);
    p.put(movs_imm(R::r7, 0xEE));
    p.bind(lo);
    p.put(movw(R::r5, 0x1234));
    p.put(movt(R::r5, 0x5678));
    p.put(addw(R::r6, R::r5, 0xFFF));
    p.put(subw(R::r7, R::r6, 0x123));
    p.stop();
  });

  add("alu-extend", [](Prog& p) {
    p.put(movw(R::r0, 0x8199));
    p.put(sxtb(R::r1, R::r0));
    p.put(sxth(R::r2, R::r0));
    p.put(uxtb(R::r3, R::r0));
    p.put(uxth(R::r4, R::r0));
    load_const(p, R::r5, 0x12345678);
    p.put(rev(R::r6, R::r5));
    p.stop();
  });

  add("mem-imm", [](Prog& p) {
    load_const(p, R::r5, kScratch);
    p.put(movs_imm(R::r0, 0x5A));
    p.put(str_imm(R::r0, R::r5, 0));
    p.put(movs_imm(R::r1, 0x77));
    p.put(strb_imm(R::r1, R::r5, 5));
    p.put(movw(R::r2, 0xBEEF));
    p.put(strh_imm(R::r2, R::r5, 8));
    p.put(ldr_imm(R::r6, R::r5, 0));
    p.put(ldrb_imm(R::r7, R::r5, 5));
    p.put(ldrh_imm(R::r3, R::r5, 8));
    p.put(adds_reg(R::r0, R::r6, R::r7));
    p.put(add_reg(R::r0, R::r3));
    p.stop();
  });

  add("mem-reg", [](Prog& p) {
    load_const(p, R::r5, kScratch);
    p.put(movs_imm(R::r0, 0x80));
    p.put(strb_imm(R::r0, R::r5, 0x10));
    p.put(movw(R::r1, 0x8001));
    p.put(strh_imm(R::r1, R::r5, 0x12));
    p.put(movs_imm(R::r6, 0x10));
    p.put(ldrsb_reg(R::r2, R::r5, R::r6));
    p.put(movs_imm(R::r6, 0x12));
    p.put(ldrsh_reg(R::r3, R::r5, R::r6));
    p.put(movw(R::r4, 0xCAFE));
    p.put(movs_imm(R::r6, 0x20));
    p.put(str_reg(R::r4, R::r5, R::r6));
    p.put(ldr_reg(R::r7, R::r5, R::r6));
    p.stop();
  });

  add("mem-wide", [](Prog& p) {
    load_const(p, R::r5, kScratch);
    p.put(movw(R::r0, 0x1357));
    p.put(str_imm_w(R::r0, R::r5, 0x204));
    p.put(ldr_imm_w(R::r1, R::r5, 0x204));
    p.put(ldrb_imm_w(R::r2, R::r5, 0x204));
    p.put(ldrh_imm_w(R::r3, R::r5, 0x204));
    p.put(mov_reg(R::r6, R::r5));
    p.put(str_post_w(R::r0, R::r6, 8));
    p.put(str_pre_w(R::r1, R::r6, -4));
    p.put(ldr_post_w(R::r7, R::r6, 4));
    p.put(ldr_pre_w(R::r4, R::r6, -8));
    p.stop();
  });

  add("mem-sp", [](Prog& p) {
    p.put(sub_sp_sp(16));
    p.put(movs_imm(R::r0, 0x11));
    p.put(str_imm(R::r0, R::sp, 4));
    p.put(movs_imm(R::r1, 0x22));
    p.put(str_imm(R::r1, R::sp, 12));
    p.put(ldr_imm(R::r2, R::sp, 4));
    p.put(add_sp_imm(R::r3, 8));
    p.put(ldr_imm_w(R::r4, R::sp, 12));
    p.put(str_imm_w(R::r2, R::sp, 0));
    p.put(add_sp_sp(16));
    p.stop();
  });

  add("mem-multi", [](Prog& p) {
    load_const(p, R::r5, kScratch + 0x40);
    p.put(movs_imm(R::r0, 1));
    p.put(movs_imm(R::r1, 2));
    p.put(movs_imm(R::r2, 3));
    p.put(stm16(R::r5, 0x0007));  // stmia r5!, {r0-r2}
    p.put(sub_imm_w(R::r5, R::r5, 12));
    p.put(mov_reg(R::r6, R::r5));
    p.put(ldm16(R::r6, 0x000E));  // ldmia r6!, {r1-r3}
    load_const(p, R::r7, kScratch + 0x90);
    p.put(movs_imm(R::r3, 9));
    p.put(stmdb_w(R::r7, true, 0x000F));   // stmdb r7!, {r0-r3}
    p.put(ldmia_w(R::r7, true, 0x0F00));   // ldmia r7!, {r8-r11}
    p.put(stmia_w(R::r7, false, 0x0300));  // no writeback
    p.put(ldmdb_w(R::r7, false, 0x0030));  // loads r4, r5
    p.stop();
  });

  add("stack-pushpop", [](Prog& p) {
    p.put(movs_imm(R::r0, 7));
    p.put(movs_imm(R::r1, 8));
    p.put(movs_imm(R::r2, 9));
    p.put(push16(0x0007));  // push {r0-r2}
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r1, 0));
    p.put(pop16(0x0038));  // pop {r3-r5}
    p.put(movs_imm(R::r6, 0x41));
    p.put(push16(0x4040));  // push {r6, lr}
    p.put(movs_imm(R::r6, 0));
    p.put(ldr_imm(R::r6, R::sp, 0));
    p.put(ldr_imm_w(R::r7, R::sp, 4));
    p.put(add_sp_sp(8));
    p.stop();
  });

  add("stack-wide", [](Prog& p) {
    for (int i = 0; i < 8; ++i) p.put(movs_imm(Reg(i), u32(0x10 + i)));
    p.put(stmdb_w(R::sp, true, 0x00FF));  // push.w {r0-r7}
    for (int i = 0; i < 8; ++i) p.put(movs_imm(Reg(i), 0));
    p.put(ldmia_w(R::sp, true, 0x00FF));  // pop.w {r0-r7}
    p.stop();
  });

  // Self-referential programs capture addresses discovered on the previous
  // layout pass, so those captures must outlive the generator invocation.
  u32 adr16_data = 0;
  add("adr-16", [&](Prog& p) {
    p.align(4);
    u32 s1 = p.cursor();  // site at address % 4 == 0
    p.put(adr(R::r0, fwd_off(adr16_data, pal(s1))));
    p.put(ldr_imm(R::r2, R::r0, 0));
    u32 s2 = p.cursor();  // site at address % 4 == 2: aligned-PC base differs
    p.put(adr(R::r4, fwd_off(adr16_data, pal(s2))));
    p.put(ldr_imm(R::r5, R::r4, 0));
    p.put(adds_imm8(R::r2, 1));
    Label over = p.label();
    p.b(over, false);
    p.align(4);
    adr16_data = p.cursor();
    p.data_word(0x11223344);
    p.bind(over);
    p.stop();
  });

  u32 adrw_early = 0, adrw_late = 0;
  add("adr-wide", [&](Prog& p) {
    Label skip = p.label();
    p.b(skip, false);
    p.align(4);
    adrw_early = p.cursor();
    p.data_word(0x55667788);
    p.bind(skip);
    u32 s1 = p.cursor();
    p.put(adr_w(R::r0, back_off(pal(s1), adrw_early), false));
    p.put(ldr_imm(R::r1, R::r0, 0));
    u32 s2 = p.cursor();
    p.put(adr_w(R::r2, fwd_off(adrw_late, pal(s2)), true));
    p.put(ldr_imm(R::r3, R::r2, 0));
    Label over = p.label();
    p.b(over, false);
    p.align(4);
    adrw_late = p.cursor();
    p.data_word(0x99AABBCC);
    p.bind(over);
    p.stop();
  });

  u32 lit16_data = 0;
  add("lit-16", [&](Prog& p) {
    p.align(4);
    u32 s1 = p.cursor();  // site at address % 4 == 0
    p.put(ldr_lit(R::r1, fwd_off(lit16_data, pal(s1))));
    u32 s2 = p.cursor();  // site at address % 4 == 2
    p.put(ldr_lit(R::r3, fwd_off(lit16_data, pal(s2))));
    p.put(adds_imm8(R::r1, 2));
    Label over = p.label();
    p.b(over, false);
    p.align(4);
    lit16_data = p.cursor();
    p.data_word(0x00C0FFEE);
    p.bind(over);
    p.stop();
  });

  u32 litw_early = 0, litw_late = 0, litw_sbyte = 0;
  add("lit-wide", [&](Prog& p) {
    Label skip = p.label();
    p.b(skip, false);
    p.align(4);
    litw_early = p.cursor();
    p.data_word(0xDDCCBBAA);
    litw_sbyte = p.cursor();
    p.data_word(0x00000080);  // byte 0x80 for the sign-extending load
    p.bind(skip);
    u32 s1 = p.cursor();
    p.put(ldr_lit_w(R::r1, back_off(pal(s1), litw_early), false));
    u32 s2 = p.cursor();
    p.put(ldr_lit_w(R::r2, fwd_off(litw_late, pal(s2)), true));
    u32 s3 = p.cursor();
    p.ins32(0xF91F, u16(0x5000 | (back_off(pal(s3), litw_sbyte) & 0xFFF)));  // ldrsb r5, [pc, #-n]
    Label over = p.label();
    p.b(over, false);
    p.align(4);
    litw_late = p.cursor();
    p.data_word(0x13572468);
    p.bind(over);
    p.stop();
  });

  add("b-narrow", [](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r1, 3));
    Label loop = p.here();
    p.put(adds_imm8(R::r0, 2));
    p.put(subs_imm8(R::r1, 1));
    p.b(C::ne, loop, false);  // taken twice, then falls through
    Label over = p.label(), join = p.label(), high = p.label();
    p.b(over, false);
    p.put(movs_imm(R::r0, 0xDD));
    p.bind(over);
    p.put(cmp_imm8(R::r0, 6));
    p.b(C::eq, join, false);  // taken
    p.put(movs_imm(R::r2, 0xEE));
    p.bind(join);
    p.put(cmp_imm8(R::r0, 100));
    p.b(C::hi, high, false);  // not taken
    p.put(movs_imm(R::r3, 5));
    p.bind(high);
    p.stop();
  });

  add("b-wide", [](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r1, 2));
    Label loop = p.here();
    p.put(adds_imm8(R::r0, 3));
    p.put(subs_imm8(R::r1, 1));
    p.b(C::ne, loop, true);
    Label over = p.label(), join = p.label(), nt = p.label();
    p.b(over, true);
    p.put(movs_imm(R::r0, 0xDD));
    p.bind(over);
    p.put(cmp_imm8(R::r0, 6));
    p.b(C::eq, join, true);  // taken
    p.put(movs_imm(R::r2, 0xEE));
    p.bind(join);
    p.b(C::lt, nt, true);  // not taken: 6 >= 6
    p.put(movs_imm(R::r3, 4));
    p.bind(nt);
    p.stop();
  });

  add("bl-bx", [](Prog& p) {
    p.put(movs_imm(R::r0, 5));
    Label fn = p.label();
    p.bl(fn);
    p.put(adds_imm8(R::r0, 1));
    p.stop();
    p.bind(fn);
    p.put(lsls_imm(R::r0, R::r0, 1));
    p.put(bx(R::lr));
  });

  u32 blx_fn = 0;
  add("blx-reg", [&](Prog& p) {
    p.put(movs_imm(R::r0, 3));
    load_const(p, R::r4, blx_fn | 1);
    p.put(blx(R::r4));
    p.put(adds_imm8(R::r0, 0x10));
    p.stop();
    blx_fn = p.cursor();
    p.put(adds_imm8(R::r0, 4));
    p.put(bx(R::lr));
  });

  u32 bxj_tgt = 0;
  add("bx-jump", [&](Prog& p) {
    p.put(movs_imm(R::r0, 1));
    u32 site = p.cursor();
    p.put(adr(R::r3, fwd_off(bxj_tgt, pal(site))));
    p.put(orr_imm_w(R::r3, R::r3, 1));
    p.put(bx(R::r3));
    p.put(movs_imm(R::r0, 0xEE));  // skipped
    p.align(4);
    bxj_tgt = p.cursor();
    p.put(adds_imm8(R::r0, 7));
    p.stop();
  });

  add("cbz-both", [](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r1, 5));
    p.put(movs_imm(R::r2, 0));
    Label a = p.label(), b = p.label();
    p.cbz(R::r0, a);  // taken
    p.put(movs_imm(R::r2, 0xE1));
    p.bind(a);
    p.cbz(R::r1, b);  // not taken
    p.put(adds_imm8(R::r2, 3));
    p.bind(b);
    p.stop();
  });

  add("cbnz-both", [](Prog& p) {
    p.put(movs_imm(R::r0, 5));
    p.put(movs_imm(R::r1, 0));
    p.put(movs_imm(R::r2, 0));
    Label a = p.label(), b = p.label();
    p.cbnz(R::r0, a);  // taken
    p.put(movs_imm(R::r2, 0xE1));
    p.bind(a);
    p.cbnz(R::r1, b);  // not taken
    p.put(adds_imm8(R::r2, 6));
    p.bind(b);
    p.stop();
  });

  u32 movpc_tgt = 0;
  add("mov-pc", [&](Prog& p) {
    p.put(movs_imm(R::r0, 2));
    u32 site = p.cursor();
    p.put(adr(R::r4, fwd_off(movpc_tgt, pal(site))));
    p.put(mov_reg(R::pc, R::r4));
    p.put(movs_imm(R::r0, 0xEE));  // skipped
    p.align(4);
    movpc_tgt = p.cursor();
    p.put(adds_imm8(R::r0, 5));
    p.stop();
  });

  u32 addpc_tgt = 0, addpc_site = 0;
  add("add-pc", [&](Prog& p) {
    p.put(movs_imm(R::r0, 1));
    p.put(movw(R::r4, fwd_off(addpc_tgt, addpc_site + 4) & 0xFFFF));
    addpc_site = p.cursor();
    p.put(add_reg(R::pc, R::r4));
    p.put(movs_imm(R::r0, 0xEE));  // skipped
    p.put(movs_imm(R::r0, 0xEF));  // skipped
    addpc_tgt = p.cursor();
    p.put(adds_imm8(R::r0, 9));
    p.stop();
  });

  u32 tbb_arm0 = 0, tbb_arm1 = 0, tbb_arm2 = 0;
  add("tbb-3", [&](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r6, 0));
    Label loop = p.here();
    u32 site = p.cursor();
    u32 tb = site + 4;
    p.put(tbb(R::pc, R::r6));
    p.data_byte(u8(fwd_off(tbb_arm0, tb) / 2));
    p.data_byte(u8(fwd_off(tbb_arm1, tb) / 2));
    p.data_byte(u8(fwd_off(tbb_arm2, tb) / 2));
    p.data_byte(0);
    Label next = p.label();
    tbb_arm0 = p.cursor();
    p.put(adds_imm8(R::r0, 1));
    p.b(next, false);
    tbb_arm1 = p.cursor();
    p.put(adds_imm8(R::r0, 4));
    p.b(next, false);
    tbb_arm2 = p.cursor();
    p.put(adds_imm8(R::r0, 9));
    p.bind(next);
    p.put(adds_imm8(R::r6, 1));
    p.put(cmp_imm8(R::r6, 3));
    p.b(C::lt, loop, true);
    p.stop();  // r0 = 14
  });

  u32 tbh_arm[4] = {0, 0, 0, 0};
  add("tbh-4", [&](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r6, 0));
    Label loop = p.here();
    u32 site = p.cursor();
    u32 tb = site + 4;
    p.put(tbh(R::pc, R::r6));
    for (int i = 0; i < 4; ++i) p.data_half(u16(fwd_off(tbh_arm[i], tb) / 2));
    Label next = p.label();
    for (int i = 0; i < 4; ++i) {
      tbh_arm[i] = p.cursor();
      p.put(adds_imm8(R::r0, u32(1) << (2 * i)));
      if (i != 3) p.b(next, false);
    }
    p.bind(next);
    p.put(adds_imm8(R::r6, 1));
    p.put(cmp_imm8(R::r6, 4));
    p.b(C::lt, loop, true);
    p.stop();  // r0 = 0x55
  });

  add("it-1", [](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r1, 1));
    p.put(cmp_imm8(R::r1, 1));
    p.put(it(C::eq, it_mask(C::eq, "")));
    p.put(adds_imm8(R::r0, 5));  // executes
    p.put(movs_imm(R::r2, 1));
    p.put(cmp_imm8(R::r2, 3));
    p.put(it(C::eq, it_mask(C::eq, "")));
    p.put(adds_imm8(R::r0, 0x40));  // skipped
    p.stop();  // r0 = 5
  });

  add("it-2", [](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r1, 7));
    p.put(cmp_imm8(R::r1, 7));
    p.put(it(C::eq, it_mask(C::eq, "E")));
    p.put(adds_imm8(R::r0, 1));     // then arm executes
    p.put(adds_imm8(R::r0, 0x10));  // else arm skipped
    p.put(cmp_imm8(R::r1, 9));
    p.put(it(C::eq, it_mask(C::eq, "E")));
    p.put(adds_imm8(R::r0, 2));     // skipped
    p.put(adds_imm8(R::r0, 0x20));  // executes
    p.stop();  // r0 = 0x21
  });

  add("it-3", [](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r2, 5));
    p.put(cmp_imm8(R::r2, 3));
    p.put(it(C::ge, it_mask(C::ge, "TE")));
    p.put(adds_imm8(R::r0, 1));     // executes
    p.put(adds_imm8(R::r0, 2));     // executes
    p.put(adds_imm8(R::r0, 0x40));  // skipped
    p.put(cmp_imm8(R::r2, 9));
    p.put(it(C::ge, it_mask(C::ge, "TE")));
    p.put(adds_imm8(R::r0, 4));     // skipped
    p.put(adds_imm8(R::r0, 8));     // skipped
    p.put(adds_imm8(R::r0, 0x80));  // executes
    p.stop();  // r0 = 0x83
  });

  add("it-4", [](Prog& p) {
    p.put(movs_imm(R::r0, 0));
    p.put(movs_imm(R::r1, 2));
    p.put(cmp_imm8(R::r1, 2));
    p.put(it(C::eq, it_mask(C::eq, "ETE")));
    p.put(adds_imm8(R::r0, 1));  // eq: executes
    p.put(adds_imm8(R::r0, 2));  // ne: skipped
    p.put(adds_imm8(R::r0, 4));  // eq: executes
    p.put(adds_imm8(R::r0, 8));  // ne: skipped
    p.put(cmp_imm8(R::r1, 9));
    p.put(it(C::eq, it_mask(C::eq, "TTT")));
    p.put(adds_imm8(R::r0, 0x10));  // skipped
    p.put(adds_imm8(R::r0, 0x20));  // skipped
    p.put(adds_imm8(R::r0, 0x40));  // skipped
    p.put(movs_imm(R::r3, 6));
    p.stop();  // r0 = 5
  });

  add("call-frame", [](Prog& p) {
    p.put(movs_imm(R::r0, 3));
    p.put(movs_imm(R::r1, 4));
    Label fn = p.label();
    p.bl(fn);
    p.put(adds_imm8(R::r0, 0x30));
    p.stop();
    p.bind(fn);
    p.put(push16(0x4010));  // push {r4, lr}
    p.put(adds_reg(R::r4, R::r0, R::r1));
    p.put(lsls_imm(R::r0, R::r4, 1));
    p.put(pop16(0x8010));  // pop {r4, pc}
  });

  add("copy-loop", [](Prog& p) {
    load_const(p, R::r5, kScratch);
    p.put(add_imm_w(R::r4, R::r5, 0x20));
    p.put(movs_imm(R::r6, 0));
    Label seed = p.here();
    p.put(adds_imm3(R::r1, R::r6, 1));
    p.put(lsls_imm(R::r2, R::r1, 4));
    p.put(lsls_imm(R::r3, R::r6, 2));
    p.put(str_reg(R::r2, R::r5, R::r3));
    p.put(adds_imm8(R::r6, 1));
    p.put(cmp_imm8(R::r6, 4));
    p.b(C::lt, seed, false);
    p.put(movs_imm(R::r6, 0));
    Label cl = p.here();
    p.put(lsls_imm(R::r3, R::r6, 2));
    p.put(ldr_reg(R::r2, R::r5, R::r3));
    p.put(str_reg(R::r2, R::r4, R::r3));
    p.put(adds_imm8(R::r6, 1));
    p.put(cmp_imm8(R::r6, 4));
    p.b(C::lt, cl, false);
    p.put(movs_imm(R::r0, 0));
    p.put(ldr_imm(R::r1, R::r4, 0));
    p.put(add_reg(R::r0, R::r1));
    p.put(ldr_imm(R::r1, R::r4, 12));
    p.put(add_reg(R::r0, R::r1));
    p.stop();  // r0 = 0x10 + 0x40 = 0x50
  });

  u32 ldmpc_tgt = 0;
  add("ldm-pc", [&](Prog& p) {
    load_const(p, R::r7, kScratch + 0x60);
    load_const(p, R::r0, ldmpc_tgt | 1);
    p.put(str_imm(R::r0, R::r7, 4));
    p.put(movw(R::r2, 0x77));
    p.put(str_imm(R::r2, R::r7, 0));
    p.put(movs_imm(R::r1, 0));
    p.put(ldmia_w(R::r7, false, 0x8002));  // ldmia r7, {r1, pc}
    p.put(movs_imm(R::r0, 0xEE));          // skipped
    ldmpc_tgt = p.cursor();
    p.put(adds_imm8(R::r1, 1));
    p.stop();  // r1 = 0x78
  });

  add("stray-trap", [](Prog& p) {
    p.put(movs_imm(R::r0, 7));
    p.put(adds_imm8(R::r0, 1));
    p.put(udf(0));  // faults straight to the configured vector
    p.put(movs_imm(R::r0, 0xEE));  // unreachable
  });

  return v;
}

}  // namespace

const std::vector<TestProgram>& corpus() {
  static const std::vector<TestProgram> progs = build_corpus();
  return progs;
}

}  // namespace bmr::testing
