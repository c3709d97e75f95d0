#include "pearl/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "pearl/error.hpp"

namespace pearl::container {
namespace {

static_assert(std::endian::native == std::endian::little,
              "PEAR v1 I/O assumes a little-endian host");

template <typename T>
void append(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

std::string at(std::size_t offset) { return " at byte offset " + std::to_string(offset); }

}  // namespace

void Writer::header(Kind kind) {
  tag("PEAR");
  u8(kVersion);
  u8(static_cast<std::uint8_t>(kind));
  u8(0);
  u8(0);
}

void Writer::tag(std::string_view four_chars) {
  bytes_.insert(bytes_.end(), four_chars.begin(), four_chars.end());
}

void Writer::u8(std::uint8_t v) { bytes_.push_back(v); }
void Writer::u32(std::uint32_t v) { append(bytes_, v); }
void Writer::u64(std::uint64_t v) { append(bytes_, v); }
void Writer::i32(std::int32_t v) { append(bytes_, v); }
void Writer::f32(float v) { append(bytes_, v); }
void Writer::f64(double v) { append(bytes_, v); }

void Writer::f64s(std::span<const double> vs) {
  for (double v : vs) f64(v);
}

void Reader::need(std::size_t count) const {
  if (remaining() < count) {
    throw LoadError("truncated file: need " + std::to_string(count) + " bytes" + at(pos_));
  }
}

Kind Reader::header() {
  need(kHeaderSize);
  if (std::memcmp(bytes_.data(), "PEAR", 4) != 0) {
    throw LoadError("unknown magic bytes" + at(0));
  }
  pos_ = 4;
  if (const auto version = u8(); version != kVersion) {
    throw LoadError("unsupported version " + std::to_string(version) + at(4));
  }
  const auto kind = u8();
  if (kind < 1 || kind > 5) {
    throw LoadError("unknown kind tag " + std::to_string(kind) + at(5));
  }
  if (u8() != 0 || u8() != 0) {
    throw LoadError("nonzero reserved bytes" + at(6));
  }
  return static_cast<Kind>(kind);
}

void Reader::expect_header(Kind kind) {
  if (const Kind got = header(); got != kind) {
    throw LoadError("expected kind tag " + std::to_string(static_cast<int>(kind)) + ", found " +
                    std::to_string(static_cast<int>(got)) + at(5));
  }
}

void Reader::expect_tag(std::string_view four_chars) {
  need(four_chars.size());
  if (std::memcmp(bytes_.data() + pos_, four_chars.data(), four_chars.size()) != 0) {
    throw LoadError("expected section tag '" + std::string(four_chars) + "'" + at(pos_));
  }
  pos_ += four_chars.size();
}

namespace {
template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace

std::uint8_t Reader::u8() {
  need(1);
  return bytes_[pos_++];
}
std::uint32_t Reader::u32() {
  need(4);
  return take<std::uint32_t>(bytes_, pos_);
}
std::uint64_t Reader::u64() {
  need(8);
  return take<std::uint64_t>(bytes_, pos_);
}
std::int32_t Reader::i32() {
  need(4);
  return take<std::int32_t>(bytes_, pos_);
}
float Reader::f32() {
  need(4);
  return take<float>(bytes_, pos_);
}
double Reader::f64() {
  need(8);
  return take<double>(bytes_, pos_);
}

void Reader::expect_end() const {
  if (!at_end()) {
    throw LoadError(std::to_string(remaining()) + " trailing bytes" + at(pos_));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace pearl::container
