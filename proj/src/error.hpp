#pragma once

#include <stdexcept>
#include <string>

namespace dynrec {

enum class ErrorKind {
  kInvalidArgument,  // bad config or caller input; maps to CLI exit 1
  kParse,            // malformed input file; exit 1
  kData,             // inputs parsed but cannot support the request; exit 2
  kNumerical,        // solver or fit failure; exit 2
  kIo,               // filesystem; exit 2
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace dynrec
