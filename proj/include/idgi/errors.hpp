#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace idgi {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed binary or text input. offset is the byte position where
// decoding stopped.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedVersion : public ParseError {
 public:
  UnsupportedVersion(unsigned found, unsigned expected, std::size_t offset)
      : ParseError("unsupported format version " + std::to_string(found) +
                       " (expected " + std::to_string(expected) + ")",
                   offset),
        found_(found) {}

  unsigned found() const { return found_; }

 private:
  unsigned found_;
};

// Raised when a computation needs a nonzero gradient and gets g = 0.
class DegenerateGradient : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace idgi
