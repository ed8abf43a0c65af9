#include "bmr/types.hpp"

namespace bmr {

std::string reg_name(Reg r) {
  switch (r) {
    case Reg::sp: return "sp";
    case Reg::lr: return "lr";
    case Reg::pc: return "pc";
    case Reg::none: return "<none>";
    default: return "r" + std::to_string(idx(r));
  }
}

std::string to_string(RegisterSet s) {
  std::string out = "{";
  bool first = true;
  for (int n = 0; n <= 15; ++n) {
    if (!((s.bits >> n) & 1)) continue;
    if (!first) out += ", ";
    out += reg_name(static_cast<Reg>(n));
    first = false;
  }
  out += "}";
  return out;
}

const char* cond_name(Cond c) {
  static constexpr const char* kNames[] = {
    "eq", "ne", "cs", "cc", "mi", "pl", "vs", "vc",
    "hi", "ls", "ge", "lt", "gt", "le", "al",
  };
  return kNames[static_cast<u8>(c) & 0xF];
}

}  // namespace bmr
