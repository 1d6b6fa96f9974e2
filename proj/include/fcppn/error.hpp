#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fcppn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Raised when an op produces NaN/Inf. Carries the offending graph node.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t node, const std::string& what)
      : Error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

// Malformed file content. `offset` is the byte position where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fcppn
