#pragma once

// Little-endian primitives shared by every binary file format in the kit.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "cgrkit/common.hpp"

namespace cgrkit::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

using Magic = std::array<char, 8>;

constexpr Magic make_magic(std::string_view tag) {
  Magic m{};
  for (std::size_t i = 0; i < tag.size() && i < 8; ++i) m[i] = tag[i];
  return m;
}

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void magic(const Magic& m) { os_.write(m.data(), m.size()); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(double v) {
    const float f = static_cast<float>(v);
    raw(&f, 4);
  }
  void f32_raw(float f) { raw(&f, 4); }
  void bytes(std::string_view s) { os_.write(s.data(), static_cast<std::streamsize>(s.size())); }

  void check() const {
    if (!os_) throw Error("write failed");
  }

 private:
  void raw(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  /// Accepts the 8-byte header; a matching 6-byte family with a different
  /// version byte is reported as a version mismatch.
  void expect_magic(const Magic& m) {
    Magic got{};
    raw(got.data(), got.size());
    if (got == m) return;
    if (std::memcmp(got.data(), m.data(), 6) == 0) throw Error("version mismatch");
    throw Error("bad magic");
  }
  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  float f32() { return get<float>(); }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  template <typename T>
  T get() {
    T v{};
    raw(&v, sizeof(T));
    return v;
  }
  void raw(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw Error("truncated file");
  }
  std::istream& is_;
};

}  // namespace cgrkit::io
