#ifndef DFA_SRC_BINARY_IO_HPP
#define DFA_SRC_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace dfa::detail {

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000FF00u) | ((v << 8) & 0x00FF0000u) | (v << 24);
}

inline void write_f32_le(std::ostream& out, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
  char raw[4];
  std::memcpy(raw, &bits, 4);
  out.write(raw, 4);
}

inline float f32_from_le(const unsigned char* raw) {
  std::uint32_t bits = std::uint32_t{raw[0]} | (std::uint32_t{raw[1]} << 8) |
                       (std::uint32_t{raw[2]} << 16) | (std::uint32_t{raw[3]} << 24);
  return std::bit_cast<float>(bits);
}

inline std::uint32_t u32_from_be(const unsigned char* raw) {
  return (std::uint32_t{raw[0]} << 24) | (std::uint32_t{raw[1]} << 16) |
         (std::uint32_t{raw[2]} << 8) | std::uint32_t{raw[3]};
}

}  // namespace dfa::detail

#endif  // DFA_SRC_BINARY_IO_HPP
