#pragma once

// DTNS tensor files: "DTNS", version 0x01, rank byte, rank x u32 LE dims,
// then numel x f32 LE values.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "disguise/errors.hpp"
#include "disguise/tensor.hpp"

namespace disguise::io {

inline constexpr std::array<char, 4> kDtnsMagic{'D', 'T', 'N', 'S'};
inline constexpr std::uint8_t kDtnsVersion = 0x01;

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  const Bytes& bytes() const noexcept { return bytes_; }
  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

  void expect(std::size_t n, std::string_view what) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError("truncated input while reading " + std::string(what), pos_);
  }
  std::uint8_t u8(std::string_view what) {
    expect(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(std::string_view what) {
    expect(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(std::string_view what) {
    expect(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, std::string_view what) {
    expect(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void write_dtns(ByteWriter& w, const Tensor<float>& t) {
  w.raw(kDtnsMagic.data(), kDtnsMagic.size());
  w.u8(kDtnsVersion);
  const Shape& s = t.shape();
  w.u8(static_cast<std::uint8_t>(s.rank()));
  for (int i = 0; i < s.rank(); ++i) w.u32(static_cast<std::uint32_t>(s[i]));
  for (float v : t.data()) w.f32(v);
}

inline Tensor<float> read_dtns(ByteReader& r) {
  const std::size_t start = r.offset();
  const std::string magic = r.str(4, "DTNS magic");
  if (std::memcmp(magic.data(), kDtnsMagic.data(), 4) != 0) throw FormatError("bad DTNS magic", start);
  const std::size_t vpos = r.offset();
  const std::uint8_t version = r.u8("DTNS version");
  if (version != kDtnsVersion)
    throw FormatError("unsupported DTNS version " + std::to_string(version), vpos);
  const std::size_t rpos = r.offset();
  const std::uint8_t rank = r.u8("DTNS rank");
  if (rank < 1 || rank > kMaxRank) throw FormatError("DTNS rank out of range: " + std::to_string(rank), rpos);
  Shape shape;
  std::size_t numel = 1;
  for (int i = 0; i < rank; ++i) {
    const std::size_t dpos = r.offset();
    const std::uint32_t d = r.u32("DTNS dims");
    if (d == 0 || d > (1u << 24)) throw FormatError("DTNS dimension out of range", dpos);
    shape.push(static_cast<int>(d));
    numel *= d;
  }
  r.expect(numel * 4, "DTNS data");
  std::vector<float> data(numel);
  for (auto& v : data) v = r.f32("DTNS data");
  return Tensor<float>(shape, std::move(data));
}

inline Bytes encode_dtns(const Tensor<float>& t) {
  ByteWriter w;
  write_dtns(w, t);
  return w.take();
}

inline Tensor<float> decode_dtns(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Tensor<float> t = read_dtns(r);
  if (!r.at_end()) throw FormatError("trailing bytes after DTNS tensor", r.offset());
  return t;
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void save_tensor(const std::filesystem::path& path, const Tensor<float>& t) {
  write_file(path, encode_dtns(t));
}

inline Tensor<float> load_tensor(const std::filesystem::path& path) { return decode_dtns(read_file(path)); }

}  // namespace disguise::io
