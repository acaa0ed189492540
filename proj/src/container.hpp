#pragma once

// Shared binary container used by bundles and checkpoints:
//
//   magic (4 bytes) | version (u32 LE) | header length (u64 LE)
//   | JSON header (UTF-8) | payload of little-endian f64 values

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cir::detail {

struct ContainerContents {
  std::uint32_t version = 0;
  std::string header;
  std::vector<std::uint8_t> payload;
};

/// Writes to a sibling temporary file and renames it into place.
void write_container(const std::filesystem::path& path, std::string_view magic,
                     std::uint32_t version, const std::string& header,
                     std::span<const double> payload);

/// Validates magic and version framing; the payload is returned raw.
ContainerContents read_container(const std::filesystem::path& path, std::string_view magic,
                                 std::uint32_t supported_version, const char* what);

/// Sequential little-endian f64 reader over a payload.
class PayloadReader {
 public:
  explicit PayloadReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining_values() const { return (bytes_.size() - offset_) / 8; }
  bool exhausted() const { return offset_ == bytes_.size(); }
  /// False when fewer than `count` values remain.
  bool read(std::span<double> out);

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

}  // namespace cir::detail
