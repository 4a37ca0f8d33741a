#pragma once

#include <stdexcept>
#include <string>

namespace glocom {

enum class ErrorKind {
  Io = 2,       // missing or unreadable file
  Format = 3,   // malformed input file
  Invalid = 4,  // contract violation (shapes, parameters)
  Numeric = 5,  // non-finite values, numerical collapse
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::Invalid, what);
}

}  // namespace glocom
