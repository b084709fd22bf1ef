#ifndef REID_BINIO_HPP_
#define REID_BINIO_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "reid/error.hpp"

// Little-endian binary record helpers shared by the dataset and checkpoint
// formats. Raw doubles round-trip bit-exactly.
namespace reid::binio {

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  check(static_cast<bool>(is), "truncated file while reading " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void write_f64(std::ostream& os, const double* v, size_t n) {
  os.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_f64(std::istream& is, double* v, size_t n, const std::string& what) {
  is.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
  check(static_cast<bool>(is), "truncated file while reading " + what);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const std::string& what) {
  uint32_t n = read_u32(is, what);
  check(n < (1u << 20), "implausible string length in " + what);
  std::string s(n, '\0');
  is.read(s.data(), n);
  check(static_cast<bool>(is), "truncated file while reading " + what);
  return s;
}

}  // namespace reid::binio

#endif  // REID_BINIO_HPP_
