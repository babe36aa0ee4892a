#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gspnet::io {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path, const char* module);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes, const char* module);
std::string read_text(const std::filesystem::path& path, const char* module);
void write_text(const std::filesystem::path& path, std::string_view text, const char* module);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Shortest-safe decimal form with 17 significant digits.
std::string format_double(double value);

/// Little-endian append/extract for arithmetic types.
template <typename T>
void put_le(Bytes& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
  }
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

}  // namespace gspnet::io
