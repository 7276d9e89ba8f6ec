#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "csr/common.hpp"

namespace csr {

// Little-endian byte stream builders/parsers shared by every binary file
// format in this project. The reader reports the byte offset on failure.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
      buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + len);
  }
  // Length-prefixed UTF-8 string.
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

  const std::vector<std::uint8_t>& data() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> data, std::string source)
      : buf_(std::move(data)), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  std::uint8_t u8() {
    need(1, "byte");
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  void bytes(void* out, std::size_t len, const char* what) {
    need(len, what);
    std::memcpy(out, buf_.data() + pos_, len);
    pos_ += len;
  }
  std::string str(const char* what, std::size_t max_len = 16u << 20) {
    const std::uint64_t len = u64();
    if (len > max_len) fail(what, "string length out of range");
    std::string s(static_cast<std::size_t>(len), '\0');
    if (len) bytes(s.data(), static_cast<std::size_t>(len), what);
    return s;
  }
  void expect_magic(const char (&magic)[9]) {
    char got[8];
    bytes(got, 8, "magic");
    if (std::memcmp(got, magic, 8) != 0)
      throw FormatError(source_ + ": bad magic at byte 0 (want " +
                        std::string(magic, 8) + ")");
  }
  void expect_consumed() {
    if (pos_ != buf_.size()) fail("file tail", "trailing bytes");
  }
  [[noreturn]] void fail(const char* what, const char* why) const {
    throw FormatError(source_ + ": " + why + " reading " + what + " at byte " +
                      std::to_string(pos_));
  }

 private:
  void need(std::size_t len, const char* what) const {
    if (buf_.size() - pos_ < len) fail(what, "truncated file");
  }

  std::vector<std::uint8_t> buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& data);

}  // namespace csr
