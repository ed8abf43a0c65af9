#include "bmr/image.hpp"

#include <cstdio>
#include <fstream>

namespace bmr {

namespace {
std::string hex(u32 v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}
}  // namespace

FirmwareImage FirmwareImage::load(std::vector<u8> bytes, u32 base_address, u32 evt_offset) {
  if (base_address % 4 != 0)
    throw ImageError(ImageError::Kind::misaligned_base,
                     "image base " + hex(base_address) + " is not 4-byte aligned");
  if (evt_offset % 4 != 0)
    throw ImageError(ImageError::Kind::misaligned,
                     "vector table offset " + hex(evt_offset) + " is not 4-byte aligned");
  u64 evt_end = u64(evt_offset) + 4u * kEvtEntries;
  if (evt_end > bytes.size())
    throw ImageError(ImageError::Kind::out_of_range,
                     "vector table at offset " + hex(evt_offset) + " does not fit in a " +
                         std::to_string(bytes.size()) + " byte image");
  FirmwareImage img;
  img.base_ = base_address;
  img.evt_offset_ = evt_offset;
  img.bytes_ = std::move(bytes);
  return img;
}

u32 FirmwareImage::offset_of(u32 addr, u32 len, u32 align) const {
  if (!contains(addr, len))
    throw ImageError(ImageError::Kind::out_of_range,
                     "address " + hex(addr) + " is outside the image [" + hex(base_) + ", " +
                         hex(end_address()) + ")");
  if (addr % align != 0)
    throw ImageError(ImageError::Kind::misaligned, "address " + hex(addr) + " is not " +
                                                       std::to_string(align) + "-byte aligned");
  return addr - base_;
}

u8 FirmwareImage::read_byte(u32 addr) const { return bytes_[offset_of(addr, 1, 1)]; }

u16 FirmwareImage::read_half(u32 addr) const {
  u32 off = offset_of(addr, 2, 2);
  return u16(bytes_[off] | (bytes_[off + 1] << 8));
}

u32 FirmwareImage::read_word(u32 addr) const {
  u32 off = offset_of(addr, 4, 4);
  return u32(bytes_[off]) | (u32(bytes_[off + 1]) << 8) | (u32(bytes_[off + 2]) << 16) |
         (u32(bytes_[off + 3]) << 24);
}

void FirmwareImage::write_half(u32 addr, u16 value) {
  u32 off = offset_of(addr, 2, 2);
  bytes_[off] = u8(value);
  bytes_[off + 1] = u8(value >> 8);
}

void FirmwareImage::write_word(u32 addr, u32 value) {
  u32 off = offset_of(addr, 4, 4);
  bytes_[off] = u8(value);
  bytes_[off + 1] = u8(value >> 8);
  bytes_[off + 2] = u8(value >> 16);
  bytes_[off + 3] = u8(value >> 24);
}

u32 FirmwareImage::read_evt_entry(int index) const {
  if (index < 0 || index > 255)
    throw ImageError(ImageError::Kind::out_of_range,
                     "vector index " + std::to_string(index) + " is outside 0..255");
  return read_word(base_ + evt_offset_ + 4u * u32(index));
}

void FirmwareImage::write_evt_entry(int index, u32 value) {
  if (index < 0 || index > 255)
    throw ImageError(ImageError::Kind::out_of_range,
                     "vector index " + std::to_string(index) + " is outside 0..255");
  if (index >= 1) value |= 1;  // code entries carry the Thumb bit
  write_word(base_ + evt_offset_ + 4u * u32(index), value);
}

u32 FirmwareImage::append_region(const std::vector<u8>& blob, u32 align) {
  if (align == 0 || (align & (align - 1)) != 0)
    throw ImageError(ImageError::Kind::misaligned,
                     "append alignment must be a power of two, got " + std::to_string(align));
  u32 addr = end_address();
  while (addr % align != 0) {
    bytes_.push_back(0);
    ++addr;
  }
  bytes_.insert(bytes_.end(), blob.begin(), blob.end());
  return addr;
}

std::vector<u8> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path + " for reading");
  return std::vector<u8>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_binary_file(const std::string& path, const std::vector<u8>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace bmr
