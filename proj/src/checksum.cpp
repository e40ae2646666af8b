#include "exposcope/checksum.hpp"

#include <fstream>
#include <vector>

#include "exposcope/error.hpp"

namespace exposcope {

void Fnv1a64::update(std::span<const std::byte> bytes) {
  std::uint64_t h = state_;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 1099511628211ULL;
  }
  state_ = h;
}

void Fnv1a64::update(std::string_view text) {
  update(std::as_bytes(std::span<const char>(text.data(), text.size())));
}

std::string Fnv1a64::hex() const { return to_hex64(state_); }

std::string to_hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Fnv1a64 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    h.update(std::string_view(buf.data(), got));
  }
  return h.hex();
}

}  // namespace exposcope
