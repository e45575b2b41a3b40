#pragma once

// Little-endian helpers shared by the checkpoint and container formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace e4d::detail {

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    return std::bit_cast<T>(bytes);
  }
  return value;
}

inline void write_u32(std::ostream& out, std::uint32_t value) {
  value = byteswap_if_big(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

inline void write_f64(std::ostream& out, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const double v = byteswap_if_big(data[i]);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
}

/// Reads exactly `size` bytes; false on a short read.
inline bool read_bytes(std::istream& in, void* dst, std::size_t size) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(size));
  return static_cast<std::size_t>(in.gcount()) == size;
}

inline bool read_u32(std::istream& in, std::uint32_t& value) {
  if (!read_bytes(in, &value, sizeof value)) return false;
  value = byteswap_if_big(value);
  return true;
}

inline bool read_f64(std::istream& in, double* data, std::size_t count) {
  if (!read_bytes(in, data, count * sizeof(double))) return false;
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < count; ++i) data[i] = byteswap_if_big(data[i]);
  }
  return true;
}

}  // namespace e4d::detail
