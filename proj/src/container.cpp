#include "container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cir/error.hpp"

namespace cir::detail {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

template <typename T>
T decode_le(const std::uint8_t* p) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr std::size_t kPreambleSize = 4 + 4 + 8;

}  // namespace

void write_container(const std::filesystem::path& path, std::string_view magic,
                     std::uint32_t version, const std::string& header,
                     std::span<const double> payload) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(kPreambleSize + header.size() + payload.size() * 8);
  bytes.insert(bytes.end(), magic.begin(), magic.end());
  append_le<std::uint32_t>(bytes, version);
  append_le<std::uint64_t>(bytes, header.size());
  bytes.insert(bytes.end(), header.begin(), header.end());
  for (double v : payload) append_le<double>(bytes, v);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
}

ContainerContents read_container(const std::filesystem::path& path, std::string_view magic,
                                 std::uint32_t supported_version, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

  if (bytes.size() < magic.size() ||
      std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
    throw FormatError(std::string(what) + " '" + path.string() + "': bad magic header");
  }
  if (bytes.size() < kPreambleSize) {
    throw CorruptionError(std::string(what) + " '" + path.string() + "': truncated preamble");
  }
  ContainerContents out;
  out.version = decode_le<std::uint32_t>(bytes.data() + 4);
  if (out.version != supported_version) {
    throw VersionError(std::string(what) + " '" + path.string() + "': unsupported version " +
                       std::to_string(out.version) + " (expected " +
                       std::to_string(supported_version) + ")");
  }
  const auto header_len = decode_le<std::uint64_t>(bytes.data() + 8);
  if (header_len > bytes.size() - kPreambleSize) {
    throw CorruptionError(std::string(what) + " '" + path.string() +
                          "': header length exceeds file size");
  }
  const auto header_begin = bytes.begin() + kPreambleSize;
  const auto header_end = header_begin + static_cast<std::ptrdiff_t>(header_len);
  out.header.assign(header_begin, header_end);
  out.payload.assign(header_end, bytes.end());
  return out;
}

bool PayloadReader::read(std::span<double> out) {
  if (remaining_values() < out.size()) return false;
  for (auto& v : out) {
    v = decode_le<double>(bytes_.data() + offset_);
    offset_ += 8;
  }
  return true;
}

}  // namespace cir::detail
