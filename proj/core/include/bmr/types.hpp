#pragma once

#include <cstdint>
#include <string>

namespace bmr {

using u8 = uint8_t;
using u16 = uint16_t;
using u32 = uint32_t;
using u64 = uint64_t;
using i32 = int32_t;

// Core register file indices. R0-R12 are the general registers; SP/LR/PC
// have dedicated roles in the exception model.
enum class Reg : u8 {
  r0 = 0, r1, r2, r3, r4, r5, r6, r7, r8, r9, r10, r11, r12,
  sp = 13, lr = 14, pc = 15,
  none = 16,
};

constexpr int idx(Reg r) { return static_cast<int>(r); }
constexpr Reg reg(int n) { return static_cast<Reg>(n & 0xF); }
constexpr bool is_low(Reg r) { return idx(r) < 8; }
constexpr bool is_general(Reg r) { return idx(r) <= 12; }

std::string reg_name(Reg r);

// Bitmask over R0-PC. Bit n corresponds to register n.
struct RegisterSet {
  u16 bits = 0;

  constexpr RegisterSet() = default;
  constexpr explicit RegisterSet(u16 mask) : bits(mask) {}

  static constexpr RegisterSet general() { return RegisterSet{0x1FFF}; }  // R0-R12

  constexpr bool contains(Reg r) const { return r != Reg::none && (bits >> idx(r)) & 1; }
  constexpr void add(Reg r) { if (r != Reg::none) bits |= u16(1u << idx(r)); }
  constexpr void remove(Reg r) { if (r != Reg::none) bits &= u16(~(1u << idx(r))); }
  constexpr bool empty() const { return bits == 0; }
  constexpr int count() const { return __builtin_popcount(bits); }

  constexpr RegisterSet operator|(RegisterSet o) const { return RegisterSet(u16(bits | o.bits)); }
  constexpr RegisterSet operator&(RegisterSet o) const { return RegisterSet(u16(bits & o.bits)); }
  constexpr RegisterSet operator~() const { return RegisterSet(u16(~bits)); }
  constexpr bool operator==(const RegisterSet&) const = default;
};

template <typename... R>
constexpr RegisterSet regs(R... rs) {
  RegisterSet s;
  (s.add(rs), ...);
  return s;
}

std::string to_string(RegisterSet s);

// Condition codes, numeric values match the instruction encodings.
enum class Cond : u8 {
  eq = 0, ne, cs, cc, mi, pl, vs, vc, hi, ls, ge, lt, gt, le, al,
};

constexpr Cond invert(Cond c) { return static_cast<Cond>(static_cast<u8>(c) ^ 1); }
const char* cond_name(Cond c);

}  // namespace bmr
