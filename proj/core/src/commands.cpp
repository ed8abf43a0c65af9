#include "bmr/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bmr/config.hpp"
#include "bmr/decoder.hpp"
#include "bmr/image.hpp"
#include "bmr/patcher.hpp"

namespace bmr {

namespace {

// BMR_LOG=info or BMR_LOG=debug turns on progress output on stderr.
int log_level() {
  static int level = [] {
    const char* v = std::getenv("BMR_LOG");
    if (!v) return 0;
    if (std::strcmp(v, "debug") == 0) return 2;
    if (std::strcmp(v, "info") == 0) return 1;
    return 0;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "bmr: " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "bmr: " << msg << "\n";
}

std::string hex(u32 v) {
  char b[16];
  std::snprintf(b, sizeof b, "0x%08x", v);
  return b;
}

FirmwareImage load_image(const std::string& path, const ToolConfig& cfg) {
  return FirmwareImage::load(read_binary_file(path), cfg.base_address, cfg.evt_offset);
}

u32 resolve_entry(const ToolConfig& cfg, const FirmwareImage& img) {
  if (cfg.entry != 0) return cfg.entry | 1;
  return img.read_evt_entry(1) | 1;  // reset vector
}

// Report sinks default to stdout so the verbs work pipeline-style.
template <typename Fn>
int with_report(const std::string& path, Fn fn) {
  if (path.empty()) {
    fn(std::cout);
    return kExitOk;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "bmr: cannot write report file " << path << "\n";
    return kExitError;
  }
  fn(out);
  return kExitOk;
}

bool parse_range(const std::string& spec, u32& lo, u32& hi) {
  size_t colon = spec.find(':');
  if (colon == std::string::npos) return false;
  char* end = nullptr;
  lo = u32(std::strtoul(spec.c_str(), &end, 0));
  if (end != spec.c_str() + colon) return false;
  hi = u32(std::strtoul(spec.c_str() + colon + 1, &end, 0));
  return *end == '\0' && lo < hi;
}

}  // namespace

int run_instrument(const CommandOptions& opt) {
  if (opt.config_path.empty() || opt.input_path.empty() || opt.output_path.empty()) {
    std::cerr << "bmr: instrument needs --config, --in, and --out\n";
    return kExitError;
  }
  try {
    ToolConfig cfg = load_config(opt.config_path);
    FirmwareImage img = load_image(opt.input_path, cfg);
    log_info("instrumenting " + std::to_string(cfg.sites.size()) + " requested site(s)");
    PatchResult result = instrument_image(img, cfg.sites, cfg.vector_index);
    for (const SiteOutcome& o : result.outcomes)
      log_debug("site " + hex(o.address) + " " +
                (o.accepted ? "accepted: " + o.text : "rejected: " + o.reason));
    write_binary_file(opt.output_path, result.image.serialize());
    log_info("wrote " + opt.output_path + ", hook region at " + hex(result.blob.region_base) +
             " (" + std::to_string(result.blob.code.size()) + " bytes)");
    // Per-site rejections are data, not errors: they appear in the report
    // and leave the exit status alone.
    return with_report(opt.report_path,
                       [&](std::ostream& out) { write_instrument_report(out, result); });
  } catch (const std::exception& e) {
    std::cerr << "bmr: " << e.what() << "\n";
    return kExitError;
  }
}

int run_verify(const CommandOptions& opt) {
  if (opt.config_path.empty() || opt.input_path.empty() || opt.output_path.empty()) {
    std::cerr << "bmr: verify needs --config, --in (original), and --out (instrumented)\n";
    return kExitError;
  }
  try {
    ToolConfig cfg = load_config(opt.config_path);
    FirmwareImage original = load_image(opt.input_path, cfg);
    FirmwareImage instrumented = load_image(opt.output_path, cfg);
    u32 entry = resolve_entry(cfg, original);
    log_info("running both images from " + hex(entry) + " for up to " +
             std::to_string(cfg.budget) + " instructions");
    VerifyReport report = verify_images(original, instrumented, cfg.vector_index, entry,
                                        cfg.ram(), cfg.budget, cfg.ignore);
    int rc = with_report(opt.report_path,
                         [&](std::ostream& out) { write_verify_report(out, report); });
    if (rc != kExitOk) return rc;
    switch (report.status) {
      case VerifyStatus::clean: return kExitOk;
      case VerifyStatus::footprint_violation: return kExitFootprint;
      case VerifyStatus::behavior_divergence: return kExitDivergence;
    }
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "bmr: " << e.what() << "\n";
    return kExitError;
  }
}

int run_inspect(const CommandOptions& opt) {
  if (opt.input_path.empty()) {
    std::cerr << "bmr: inspect needs --in\n";
    return kExitError;
  }
  try {
    ToolConfig cfg = opt.config_path.empty() ? ToolConfig{} : load_config(opt.config_path);
    FirmwareImage img = load_image(opt.input_path, cfg);

    if (opt.emit_config) {
      ToolConfig skeleton = cfg;
      skeleton.entry = img.read_evt_entry(1) & ~1u;
      skeleton.sites.clear();
      return with_report(opt.report_path,
                         [&](std::ostream& out) { write_config(out, skeleton); });
    }

    u32 lo = img.base() + cfg.evt_offset + 4 * FirmwareImage::kEvtEntries;
    u32 hi = img.end_address();
    if (!opt.range.empty() && !parse_range(opt.range, lo, hi)) {
      std::cerr << "bmr: --range wants lo:hi with lo < hi\n";
      return kExitError;
    }
    return with_report(opt.report_path, [&](std::ostream& out) {
      u32 a = lo < img.base() ? img.base() : lo;
      while (a + 1 < hi && img.contains(a, 2)) {
        SiteOutcome o = probe_site(img, a);
        u32 len = 2;
        if (o.text.empty()) {
          char raw[8];
          std::snprintf(raw, sizeof raw, "%04x", img.read_half(a));
          out << hex(a) << "  raw 0x" << raw << "  # " << o.reason << "\n";
        } else {
          u16 hw1 = img.read_half(a);
          u16 hw2 = img.contains(a + 2, 2) ? img.read_half(a + 2) : 0;
          Instruction in = decode(hw1, hw2, a);
          len = in.length;
          out << hex(a) << "  " << instr_class_name(classify(in)) << "  "
              << (o.accepted ? "accepted" : "rejected") << "  " << o.text;
          if (!o.accepted) out << "  # " << o.reason;
          out << "\n";
        }
        a += len;
      }
    });
  } catch (const std::exception& e) {
    std::cerr << "bmr: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace bmr
