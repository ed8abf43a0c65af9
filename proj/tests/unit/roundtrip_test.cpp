#include "doctest.h"

#include <cstdint>

#include "bmr/decoder.hpp"

using namespace bmr;

namespace {

// Deterministic sample stream for the 32-bit sweep.
struct Lcg {
  u64 s;
  explicit Lcg(u64 seed) : s(seed) {}
  u32 next() {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    return u32(s >> 33);
  }
};

}  // namespace

TEST_SUITE("roundtrip") {

TEST_CASE("length rule agrees with decode over every first halfword") {
  int mismatches = 0;
  for (u32 hw = 0; hw <= 0xFFFF; ++hw) {
    int len = instr_length(u16(hw));
    Instruction i = decode(u16(hw), 0x0000, 0x08000000);
    if (i.length != len) ++mismatches;
    // and the rule itself: wide exactly for 11101/11110/11111 prefixes
    bool wide = (hw >> 11) == 0x1D || (hw >> 11) == 0x1E || (hw >> 11) == 0x1F;
    if ((len == 4) != wide) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("classification is total over every first halfword") {
  for (u32 hw = 0; hw <= 0xFFFF; ++hw) {
    Instruction i = decode(u16(hw), 0x4010, 0x08000000);
    InstrClass c = classify(i);
    bool valid = c == InstrClass::c1 || c == InstrClass::c2 ||
                 c == InstrClass::unsupported || c == InstrClass::undecodable;
    if (!valid) {
      CHECK(valid);
      break;
    }
  }
  CHECK(true);
}

TEST_CASE("16-bit encodings survive decode then encode unchanged") {
  int decodable = 0, failures = 0;
  u32 first_bad = 0;
  for (u32 hw = 0; hw <= 0xFFFF; ++hw) {
    if (instr_length(u16(hw)) != 2) continue;
    Instruction i = decode(u16(hw), 0, 0x08000000);
    if (i.kind == OpKind::undecodable) continue;
    ++decodable;
    EncodeResult e = encode(i);
    if (!e.ok || e.length != 2 || e.hw1 != hw) {
      if (!failures) first_bad = hw;
      ++failures;
    }
  }
  INFO("first failing halfword: 0x", std::hex, first_bad);
  CHECK(decodable > 20000);  // the 16-bit space is dense
  CHECK(failures == 0);
}

TEST_CASE("32-bit encodings survive decode then encode unchanged") {
  // Every wide first halfword, with a deterministic spread of second
  // halfwords plus corner values.
  Lcg rng(12345);
  const u16 corners[] = {0x0000, 0xFFFF, 0x8000, 0x7FFF, 0x0F0F, 0xF0F0};
  int decodable = 0, failures = 0;
  u32 bad1 = 0, bad2 = 0;
  for (u32 hw1 = 0; hw1 <= 0xFFFF; ++hw1) {
    if (instr_length(u16(hw1)) != 4) continue;
    for (int k = 0; k < 14; ++k) {
      u16 hw2 = k < 6 ? corners[k] : u16(rng.next());
      Instruction i = decode(u16(hw1), hw2, 0x08000000);
      if (i.kind == OpKind::undecodable) continue;
      ++decodable;
      EncodeResult e = encode(i);
      if (!e.ok || e.length != 4 || e.hw1 != hw1 || e.hw2 != hw2) {
        if (!failures) { bad1 = hw1; bad2 = hw2; }
        ++failures;
      }
    }
  }
  INFO("first failing encoding: 0x", std::hex, bad1, " 0x", bad2);
  CHECK(decodable > 10000);
  CHECK(failures == 0);
}

TEST_CASE("decode is deterministic") {
  for (u32 hw = 0; hw <= 0xFFFF; hw += 97) {
    Instruction a = decode(u16(hw), 0x1234, 0x08000040);
    Instruction b = decode(u16(hw), 0x1234, 0x08000040);
    CHECK(a.kind == b.kind);
    CHECK(a.reads == b.reads);
    CHECK(a.writes == b.writes);
    CHECK(to_string(a) == to_string(b));
  }
}

TEST_CASE("undecodable instructions carry no use-def claims") {
  int nonempty = 0;
  for (u32 hw = 0; hw <= 0xFFFF; hw += 13) {
    Instruction i = decode(u16(hw), 0xF00F, 0x08000000);
    if (i.kind == OpKind::undecodable && (!i.reads.empty() || !i.writes.empty())) ++nonempty;
  }
  CHECK(nonempty == 0);
}

}  // TEST_SUITE
