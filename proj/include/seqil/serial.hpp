#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian binary stream helpers. Reads throw on truncation so a
// short or corrupt file never yields a silently partial object.

namespace seqil::io {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw std::runtime_error("write failed");
}

inline void read_bytes(std::istream& is, void* p, size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n)
    throw std::runtime_error(std::string("truncated input while reading ") + what);
}

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 4);
}

inline uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  read_bytes(is, b, 4, what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 8);
}

inline uint64_t read_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  read_bytes(is, b, 8, what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

inline double read_f64(std::istream& is, const char* what) {
  const uint64_t bits = read_u64(is, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void write_f64_array(std::ostream& os, const std::vector<double>& a) {
  write_u64(os, a.size());
  for (double v : a) write_f64(os, v);
}

inline std::vector<double> read_f64_array(std::istream& is, const char* what) {
  const uint64_t n = read_u64(is, what);
  if (n > (1ull << 32)) throw std::runtime_error(std::string("implausible array size in ") + what);
  std::vector<double> a(n);
  for (uint64_t i = 0; i < n; ++i) a[i] = read_f64(is, what);
  return a;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const char* what) {
  const uint32_t n = read_u32(is, what);
  if (n > (1u << 20)) throw std::runtime_error(std::string("implausible string size in ") + what);
  std::string s(n, '\0');
  if (n) read_bytes(is, s.data(), n, what);
  return s;
}

}  // namespace seqil::io
