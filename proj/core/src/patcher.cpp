#include "bmr/patcher.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "bmr/decoder.hpp"

namespace bmr {

namespace {

std::string hex(u32 v) {
  char b[16];
  std::snprintf(b, sizeof b, "0x%08x", v);
  return b;
}

// `it` with a nonzero mask; anything else in the 0xBFxx row is a hint.
bool looks_like_it(u16 hw) { return (hw & 0xFF00u) == 0xBF00u && (hw & 0x000Fu) != 0; }

u32 it_block_length(u16 hw) {
  u32 mask = hw & 0xF;
  u32 trailing = 0;
  while (((mask >> trailing) & 1) == 0) ++trailing;
  return 4 - trailing;
}

// A trap inside an if-then block would return with stale condition state, so
// such sites are refused. Preceding bytes are scanned as halfwords without
// knowing real instruction boundaries, which errs toward rejecting sites
// that merely sit near something shaped like `it`.
bool near_it_block(const FirmwareImage& img, u32 address, u32& it_at) {
  for (u32 k = 1; k <= 4; ++k) {
    u32 a = address - 2 * k;
    if (!img.contains(a, 2)) break;
    u16 hw = img.read_half(a);
    if (!looks_like_it(hw)) continue;
    // L instructions of at most four bytes each follow the `it` itself.
    if (2 * k - 2 < 4 * it_block_length(hw)) {
      it_at = a;
      return true;
    }
  }
  return false;
}

std::string vector_label(int index) {
  if (index == 3) return "hardfault";
  if (index == 6) return "usagefault";
  return std::to_string(index);
}

}  // namespace

size_t PatchResult::accepted_count() const {
  return size_t(std::count_if(outcomes.begin(), outcomes.end(),
                              [](const SiteOutcome& o) { return o.accepted; }));
}

size_t PatchResult::rejected_count() const { return outcomes.size() - accepted_count(); }

SiteOutcome probe_site(const FirmwareImage& image, u32 address) {
  SiteOutcome o;
  o.address = address;
  if (address % 2 != 0) {
    o.reason = "misaligned address";
    return o;
  }
  if (!image.contains(address, 2)) {
    o.reason = "outside the image";
    return o;
  }
  u16 hw1 = image.read_half(address);
  if (hw1 == kTrapOpcode) {
    o.reason = "already holds the trap opcode";
    return o;
  }
  u16 hw2 = image.contains(address + 2, 2) ? image.read_half(address + 2) : 0;
  Instruction in = decode(hw1, hw2, address);
  if (classify(in) == InstrClass::undecodable) {
    o.reason = "undecodable instruction";
    return o;
  }
  o.text = to_string(in);
  if (!image.contains(address, in.length)) {
    o.reason = "extends past the image end";
    return o;
  }
  u32 it_at = 0;
  if (near_it_block(image, address, it_at)) {
    o.reason = "within reach of an it block at " + hex(it_at);
    return o;
  }
  TranslateResult tr = translate(in);
  if (!tr.ok) {
    o.reason = tr.detail;
    return o;
  }
  o.accepted = true;
  o.plan = tr.plan;
  return o;
}

PatchResult instrument_image(const FirmwareImage& image,
                             const std::vector<SiteRequest>& requests, int vector_index) {
  if (vector_index < 1 || vector_index >= FirmwareImage::kEvtEntries)
    throw ImageError(ImageError::Kind::out_of_range,
                     "vector index " + std::to_string(vector_index) + " is not a system entry");

  PatchResult result;
  result.image = image;
  result.vector_index = vector_index;
  result.evt_original = image.read_evt_entry(vector_index);

  for (const SiteRequest& rq : requests) {
    SiteOutcome o = probe_site(image, rq.address);
    if (o.accepted && rq.payload.size() % 2 != 0) {
      o.accepted = false;
      o.reason = "payload length is odd";
    }
    bool duplicate = std::any_of(result.outcomes.begin(), result.outcomes.end(),
                                 [&](const SiteOutcome& p) { return p.address == rq.address; });
    if (o.accepted && duplicate) {
      o.accepted = false;
      o.reason = "duplicate request";
    }
    result.outcomes.push_back(std::move(o));
  }

  // Sites must not touch each other: the second halfword of a displaced
  // 32-bit instruction stays in place and may not double as another site.
  std::vector<size_t> order(result.outcomes.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return result.outcomes[a].address < result.outcomes[b].address;
  });
  u32 prev_end = 0;
  u32 prev_site = 0;
  bool have_prev = false;
  for (size_t k : order) {
    SiteOutcome& o = result.outcomes[k];
    if (!o.accepted) continue;
    if (have_prev && o.address < prev_end) {
      o.accepted = false;
      o.reason = "overlaps the site at " + hex(prev_site);
      continue;
    }
    prev_site = o.address;
    prev_end = o.address + o.plan.original.length;
    have_prev = true;
  }

  std::vector<HookSite> sites;
  for (size_t k = 0; k < result.outcomes.size(); ++k)
    if (result.outcomes[k].accepted)
      sites.push_back({result.outcomes[k].address, result.outcomes[k].plan,
                       requests[k].payload});
  if (sites.empty()) return result;

  u32 region_base = (image.end_address() + 3) & ~3u;
  result.blob = assemble_hook_blob(sites, region_base, result.evt_original);
  u32 landed = result.image.append_region(result.blob.code, 4);
  if (landed != region_base)
    throw ImageError(ImageError::Kind::out_of_range, "hook region landed at " + hex(landed) +
                                                         " instead of " + hex(region_base));
  for (const HookSite& s : sites) result.image.write_half(s.address, kTrapOpcode);
  result.image.write_evt_entry(vector_index, result.blob.handler_entry);

  for (SiteOutcome& o : result.outcomes) {
    if (!o.accepted) continue;
    auto it = std::find_if(result.blob.sites.begin(), result.blob.sites.end(),
                           [&](const SiteLayout& sl) { return sl.site_address == o.address; });
    o.worker_offset = it->worker_offset;
    o.plan_size = it->worker_size;
  }
  return result;
}

const char* verify_status_name(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::clean: return "clean";
    case VerifyStatus::footprint_violation: return "footprint_violation";
    case VerifyStatus::behavior_divergence: return "behavior_divergence";
  }
  return "?";
}

VerifyReport verify_images(const FirmwareImage& original, const FirmwareImage& instrumented,
                           int vector_index, u32 entry, const RamConfig& ram, u64 max_retired,
                           const std::vector<ExcludedRange>& exclude) {
  VerifyReport r;
  auto fail = [&](VerifyStatus s, const std::string& why) {
    r.status = s;
    r.detail = why;
    return r;
  };

  if (instrumented.base() != original.base())
    return fail(VerifyStatus::footprint_violation, "images have different base addresses");
  if (instrumented.evt_offset() != original.evt_offset())
    return fail(VerifyStatus::footprint_violation, "images have different vector table offsets");
  if (instrumented.size() < original.size())
    return fail(VerifyStatus::footprint_violation, "instrumented image is smaller");

  u32 evt_lo = original.base() + original.evt_offset() + 4 * u32(vector_index);
  for (u32 off = 0; off + 1 < original.size(); off += 2) {
    u32 addr = original.base() + off;
    u16 a = original.read_half(addr);
    u16 b = instrumented.read_half(addr);
    if (a == b) continue;
    if (addr >= evt_lo && addr < evt_lo + 4) {
      r.evt_index = vector_index;
      continue;
    }
    if (b == kTrapOpcode) {
      r.trap_sites.push_back(addr);
      continue;
    }
    return fail(VerifyStatus::footprint_violation, "unexpected change at " + hex(addr));
  }
  if (original.size() % 2 != 0) {
    u32 last = original.base() + original.size() - 1;
    if (original.read_byte(last) != instrumented.read_byte(last))
      return fail(VerifyStatus::footprint_violation, "unexpected change at " + hex(last));
  }
  if (r.evt_index >= 0) {
    u32 v = instrumented.read_evt_entry(vector_index);
    bool into_tail = (v & 1) != 0 && (v & ~1u) >= original.end_address() &&
                     (v & ~1u) < instrumented.end_address();
    if (!into_tail)
      return fail(VerifyStatus::footprint_violation,
                  "vector entry " + hex(v) + " does not target the appended region");
  } else if (!r.trap_sites.empty()) {
    return fail(VerifyStatus::footprint_violation,
                "trap opcodes present but the vector entry is untouched");
  }

  Machine ref(original, ram, vector_index);
  Trace ta = ref.run(entry, max_retired);
  Machine ins(instrumented, ram, vector_index);
  Trace tb = ins.run(entry, max_retired);
  r.reference_retired = ta.final_state.retired;
  r.instrumented_retired = tb.final_state.retired;
  r.trap_count = tb.traps.size();
  r.max_trap_stack = tb.max_trap_stack_bytes;

  std::vector<ExcludedRange> ex = exclude;
  ex.push_back({tb.final_state.sp() - kHookStackBudget - 64, kHookStackBudget + 64});
  DivergenceReport d = diff(ta, tb, ram, ex);
  if (!d.equivalent) return fail(VerifyStatus::behavior_divergence, d.what);
  return r;
}

void write_instrument_report(std::ostream& out, const PatchResult& result) {
  out << "region_base " << hex(result.blob.region_base) << "\n";
  out << "blob_size " << result.blob.code.size() << "\n";
  out << "vector " << vector_label(result.vector_index) << "\n";
  out << "evt_index " << result.vector_index << "\n";
  out << "evt_original " << hex(result.evt_original) << "\n";
  out << "handler_entry " << hex(result.blob.handler_entry) << "\n";
  out << "sites_requested " << result.outcomes.size() << "\n";
  out << "sites_accepted " << result.accepted_count() << "\n";
  out << "sites_rejected " << result.rejected_count() << "\n";
  for (const SiteOutcome& o : result.outcomes) {
    out << "site " << hex(o.address);
    if (o.accepted) {
      out << " status accepted proxy "
          << (o.plan.proxy != Reg::none ? reg_name(o.plan.proxy) : "none") << " worker_offset 0x"
          << std::hex << o.worker_offset << std::dec << " plan_size " << o.plan_size;
    } else {
      out << " status rejected reason " << o.reason;
    }
    out << "\n";
  }
}

void write_verify_report(std::ostream& out, const VerifyReport& report) {
  out << "status " << verify_status_name(report.status) << "\n";
  if (!report.detail.empty()) out << "detail " << report.detail << "\n";
  out << "evt_index " << report.evt_index << "\n";
  out << "trap_sites " << report.trap_sites.size() << "\n";
  for (u32 s : report.trap_sites) out << "site " << hex(s) << "\n";
  out << "reference_retired " << report.reference_retired << "\n";
  out << "instrumented_retired " << report.instrumented_retired << "\n";
  out << "traps " << report.trap_count << "\n";
  out << "max_trap_stack " << report.max_trap_stack << "\n";
}

}  // namespace bmr
