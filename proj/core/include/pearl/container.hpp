#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace pearl::container {

// Every PEAR v1 file starts with an 8-byte header:
//   0-3 "PEAR" | 4 version (1) | 5 kind tag | 6-7 zero
// followed by a kind-specific little-endian payload.

enum class Kind : std::uint8_t {
  kEmbeddings = 1,  // doubles as the float32 dtype code
  kStandardizer = 2,
  kWhitener = 3,
  kLda = 4,
  kModel = 5,
};

inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 8;

class Writer {
 public:
  void header(Kind kind);
  void tag(std::string_view four_chars);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v);
  void f32(float v);
  void f64(double v);
  void f64s(std::span<const double> vs);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> release() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian cursor. Every failure is a LoadError that
/// names the byte offset.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  /// Validates magic, version and padding; returns the kind tag.
  Kind header();
  /// As header(), but requires a specific kind.
  void expect_header(Kind kind);
  void expect_tag(std::string_view four_chars);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32();
  float f32();
  double f64();

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  void expect_end() const;

 private:
  void need(std::size_t count) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace pearl::container
