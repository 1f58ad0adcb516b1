#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mipcls::detail {

/// Reads a whole file; gzip streams are decompressed transparently.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes via "<path>.tmp" then rename. gzip when `gzip` is set.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
                       bool gzip = false);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

template <typename T>
T load_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void store_le(std::vector<std::uint8_t>& bytes, std::size_t offset, T value) {
  std::memcpy(bytes.data() + offset, &value, sizeof(T));
}

bool ends_with(const std::string& s, const std::string& suffix);

}  // namespace mipcls::detail
