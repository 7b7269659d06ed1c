#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "qrt/error.hpp"

namespace qrt::detail {

// Little-endian encoding of trivially copyable scalars.

template <typename T>
  requires std::is_arithmetic_v<T>
void write_le(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
  requires std::is_arithmetic_v<T>
T read_le(std::istream& in, const char* what) {
  std::array<char, sizeof(T)> bytes{};
  in.read(bytes.data(), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw Error(ErrorKind::kData, std::string("unexpected end of file reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  return std::bit_cast<T>(bytes);
}

inline void write_doubles(std::ostream& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (double v : values) write_le(out, v);
  }
}

inline void read_doubles(std::istream& in, std::span<double> values, const char* what) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
    if (in.gcount() != static_cast<std::streamsize>(values.size_bytes())) {
      throw Error(ErrorKind::kData, std::string("unexpected end of file reading ") + what);
    }
  } else {
    for (double& v : values) v = read_le<double>(in, what);
  }
}

inline void expect_magic(std::istream& in, std::string_view magic, const std::string& path) {
  std::array<char, 4> got{};
  in.read(got.data(), got.size());
  if (in.gcount() != 4 || std::memcmp(got.data(), magic.data(), 4) != 0) {
    throw Error(ErrorKind::kData, path + ": not a " + std::string(magic) + " file (bad magic)");
  }
}

}  // namespace qrt::detail
