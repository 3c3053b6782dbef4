#pragma once

// Little-endian record encoding shared by the model and attribution file
// formats: 4-byte magic, fields, trailing CRC32 over every preceding byte.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "idgi/errors.hpp"

namespace idgi::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size())));
}

class ByteWriter {
 public:
  void magic(std::string_view m) { buf_.append(m); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f64s(const std::vector<double>& vs) {
    u64(vs.size());
    raw(vs.data(), vs.size() * sizeof(double));
  }

  // Appends the CRC and returns the finished record.
  std::string finish() {
    const std::uint32_t crc = crc32_of(buf_);
    raw(&crc, sizeof crc);
    return std::move(buf_);
  }

 private:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class ByteReader {
 public:
  // Verifies size and CRC up front so field decoding only has to worry
  // about structure.
  ByteReader(std::string bytes, std::string_view magic) : bytes_(std::move(bytes)) {
    if (bytes_.size() < magic.size() + sizeof(std::uint32_t)) {
      throw ParseError("file too short", bytes_.size());
    }
    if (std::string_view(bytes_).substr(0, magic.size()) != magic) {
      throw ParseError("bad magic, expected \"" + std::string(magic) + "\"", 0);
    }
    end_ = bytes_.size() - sizeof(std::uint32_t);
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes_.data() + end_, sizeof stored);
    pos_ = magic.size();
    crc_ok_ = stored == crc32_of(std::string_view(bytes_).substr(0, end_));
  }

  bool crc_ok() const { return crc_ok_; }
  std::size_t offset() const { return pos_; }
  std::size_t crc_offset() const { return end_; }

  std::uint32_t u32() { return scalar<std::uint32_t>("u32"); }
  std::uint64_t u64() { return scalar<std::uint64_t>("u64"); }
  double f64() { return scalar<double>("f64"); }

  std::vector<double> f64s(std::uint64_t expected) {
    const std::size_t at = pos_;
    const std::uint64_t n = u64();
    if (n != expected) {
      throw ParseError("value count " + std::to_string(n) + " does not match header (" +
                           std::to_string(expected) + ")",
                       at);
    }
    need(n * sizeof(double), "value blob");
    std::vector<double> out(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return out;
  }

  void expect_end() const {
    if (pos_ != end_) throw ParseError("trailing bytes before checksum", pos_);
  }

 private:
  template <typename T>
  T scalar(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }

  void need(std::uint64_t n, const char* what) const {
    if (n > end_ - pos_) throw ParseError(std::string("truncated ") + what, pos_);
  }

  std::string bytes_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  bool crc_ok_ = false;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace idgi::detail
