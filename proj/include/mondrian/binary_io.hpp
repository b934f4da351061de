#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal little-endian framing used by the snapshot formats.

namespace mondrian::io {

static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("snapshot: unexpected end of stream");
}

inline void write_u8(std::ostream& out, std::uint8_t v) { write_bytes(out, &v, 1); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_bytes(out, &v, 4); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_bytes(out, &v, 8); }
inline void write_f64(std::ostream& out, double v) { write_bytes(out, &v, 8); }

inline std::uint8_t read_u8(std::istream& in) {
  std::uint8_t v;
  read_bytes(in, &v, 1);
  return v;
}
inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
  read_bytes(in, &v, 4);
  return v;
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  read_bytes(in, &v, 8);
  return v;
}
inline double read_f64(std::istream& in) {
  double v;
  read_bytes(in, &v, 8);
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  write_bytes(out, s.data(), s.size());
}

inline std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  if (n > 0) read_bytes(in, s.data(), n);
  return s;
}

template <typename T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  write_u64(out, v.size());
  if (!v.empty()) write_bytes(out, v.data(), v.size() * sizeof(T));
}

template <typename T>
std::vector<T> read_vec(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  const std::uint64_t n = read_u64(in);
  std::vector<T> v(n);
  if (n > 0) read_bytes(in, v.data(), n * sizeof(T));
  return v;
}

}  // namespace mondrian::io
