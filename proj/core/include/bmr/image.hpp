#pragma once

// Raw firmware image container: flat little-endian byte buffer at a fixed
// base address, with accessors for the exception vector table and an
// append-only tail for generated code. Out-of-band metadata (base address,
// vector table offset) comes from the caller; no object-file containers.

#include <stdexcept>
#include <string>
#include <vector>

#include "bmr/types.hpp"

namespace bmr {

struct ImageError : std::runtime_error {
  enum class Kind { out_of_range, misaligned_base, misaligned };
  Kind kind;
  ImageError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

// Ownership is exclusive: mutating methods edit this instance in place.
// Copy the image first when the original must stay untouched.
class FirmwareImage {
 public:
  static constexpr int kEvtEntries = 16;  // minimum system entries

  FirmwareImage() = default;

  // Validates alignment and that the vector table fits in the buffer.
  static FirmwareImage load(std::vector<u8> bytes, u32 base_address, u32 evt_offset);

  u32 base() const { return base_; }
  u32 evt_offset() const { return evt_offset_; }
  u32 size() const { return u32(bytes_.size()); }
  u32 end_address() const { return base_ + size(); }
  bool contains(u32 addr, u32 len = 1) const {
    return addr >= base_ && addr - base_ + len <= size();
  }

  const std::vector<u8>& bytes() const { return bytes_; }
  std::vector<u8> serialize() const { return bytes_; }

  u8 read_byte(u32 addr) const;
  u16 read_half(u32 addr) const;
  u32 read_word(u32 addr) const;
  void write_half(u32 addr, u16 value);
  void write_word(u32 addr, u32 value);

  // Vector table slots. Writes to code entries (index >= 1) force bit 0 set.
  u32 read_evt_entry(int index) const;
  void write_evt_entry(int index, u32 value);

  // Pads the image with zero bytes up to `align`, appends `blob`, and
  // returns the address the blob landed at.
  u32 append_region(const std::vector<u8>& blob, u32 align = 4);

 private:
  u32 offset_of(u32 addr, u32 len, u32 align) const;

  u32 base_ = 0;
  u32 evt_offset_ = 0;
  std::vector<u8> bytes_;
};

// Whole-file helpers for the .bin input/output surface.
std::vector<u8> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, const std::vector<u8>& bytes);

}  // namespace bmr
