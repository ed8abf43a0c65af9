#include "bmr/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bmr/image.hpp"

namespace bmr {

namespace {

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string w;
  while (ss >> w) {
    if (w[0] == '#') break;
    out.push_back(w);
  }
  return out;
}

u64 parse_num(const std::string& s, int line) {
  int base = 10;
  size_t start = 0;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    start = 2;
  }
  u64 v = 0;
  auto [p, ec] = std::from_chars(s.data() + start, s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(line, "bad number '" + s + "'");
  return v;
}

u32 parse_u32(const std::string& s, int line) {
  u64 v = parse_num(s, line);
  if (v > 0xFFFFFFFFull) throw ConfigError(line, "value '" + s + "' does not fit 32 bits");
  return u32(v);
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::vector<u8> parse_payload(const std::string& spec, const std::string& dir, int line) {
  if (!spec.empty() && spec[0] == '@') {
    std::string path = spec.substr(1);
    if (!path.empty() && path[0] != '/') path = dir + "/" + path;
    try {
      return read_binary_file(path);
    } catch (const std::exception& e) {
      throw ConfigError(line, e.what());
    }
  }
  if (spec.size() % 2 != 0) throw ConfigError(line, "payload hex has an odd digit count");
  std::vector<u8> out;
  for (size_t k = 0; k < spec.size(); k += 2) {
    int hi = hex_digit(spec[k]), lo = hex_digit(spec[k + 1]);
    if (hi < 0 || lo < 0) throw ConfigError(line, "payload hex has a non-hex character");
    out.push_back(u8(hi << 4 | lo));
  }
  return out;
}

}  // namespace

ToolConfig parse_config(std::istream& in, const std::string& payload_dir) {
  ToolConfig cfg;
  std::string line;
  int n = 0;
  bool saw_base = false, saw_evt = false;
  while (std::getline(in, line)) {
    ++n;
    std::vector<std::string> w = split_words(line);
    if (w.empty()) continue;
    const std::string& key = w[0];
    auto want = [&](size_t count) {
      if (w.size() != count + 1)
        throw ConfigError(n, key + " takes " + std::to_string(count) + " value(s)");
    };
    if (key == "base_address") {
      want(1);
      cfg.base_address = parse_u32(w[1], n);
      saw_base = true;
    } else if (key == "evt_offset") {
      want(1);
      cfg.evt_offset = parse_u32(w[1], n);
      saw_evt = true;
    } else if (key == "ram_base") {
      want(1);
      cfg.ram_base = parse_u32(w[1], n);
    } else if (key == "ram_size") {
      want(1);
      cfg.ram_size = parse_u32(w[1], n);
    } else if (key == "entry") {
      want(1);
      cfg.entry = parse_u32(w[1], n);
    } else if (key == "budget") {
      want(1);
      cfg.budget = parse_num(w[1], n);
    } else if (key == "vector") {
      want(1);
      if (w[1] == "hardfault")
        cfg.vector_index = 3;
      else if (w[1] == "usagefault")
        cfg.vector_index = 6;
      else
        throw ConfigError(n, "vector must be hardfault or usagefault, not '" + w[1] + "'");
    } else if (key == "site") {
      if (w.size() != 2 && w.size() != 4)
        throw ConfigError(n, "site takes an address and an optional payload");
      SiteRequest rq;
      rq.address = parse_u32(w[1], n) & ~1u;  // tolerate a set thumb bit
      if (w.size() == 4) {
        if (w[2] != "payload") throw ConfigError(n, "expected 'payload', got '" + w[2] + "'");
        rq.payload = parse_payload(w[3], payload_dir, n);
      }
      cfg.sites.push_back(std::move(rq));
    } else if (key == "ignore") {
      want(2);
      cfg.ignore.push_back({parse_u32(w[1], n), parse_u32(w[2], n)});
    } else {
      throw ConfigError(n, "unknown key '" + key + "'");
    }
  }
  if (!saw_base) throw ConfigError(0, "missing required key 'base_address'");
  if (!saw_evt) throw ConfigError(0, "missing required key 'evt_offset'");
  return cfg;
}

ToolConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  size_t slash = path.find_last_of('/');
  std::string dir = slash == std::string::npos ? "." : path.substr(0, slash);
  return parse_config(in, dir);
}

void write_config(std::ostream& out, const ToolConfig& cfg) {
  char b[64];
  auto hex = [&](u32 v) {
    std::snprintf(b, sizeof b, "0x%08x", v);
    return std::string(b);
  };
  out << "base_address " << hex(cfg.base_address) << "\n";
  out << "evt_offset " << hex(cfg.evt_offset) << "\n";
  out << "ram_base " << hex(cfg.ram_base) << "\n";
  out << "ram_size " << hex(cfg.ram_size) << "\n";
  if (cfg.entry != 0) out << "entry " << hex(cfg.entry) << "\n";
  out << "vector " << (cfg.vector_index == 6 ? "usagefault" : "hardfault") << "\n";
  out << "budget " << cfg.budget << "\n";
  for (const ExcludedRange& r : cfg.ignore)
    out << "ignore " << hex(r.base) << " " << hex(r.size) << "\n";
  for (const SiteRequest& s : cfg.sites) {
    out << "site " << hex(s.address);
    if (!s.payload.empty()) {
      out << " payload ";
      for (u8 byte : s.payload) {
        std::snprintf(b, sizeof b, "%02x", byte);
        out << b;
      }
    }
    out << "\n";
  }
}

}  // namespace bmr
