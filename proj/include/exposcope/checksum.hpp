#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace exposcope {

// 64-bit FNV-1a. Used for index and stage-manifest checksums, not for security.
class Fnv1a64 {
 public:
  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);

  template <typename T>
  void update_values(std::span<const T> values) {
    update(std::as_bytes(values));
  }

  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 14695981039346656037ULL;
};

std::string to_hex64(std::uint64_t v);

// Checksum of a whole file's bytes.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace exposcope
