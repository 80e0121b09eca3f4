#pragma once

#include <stdexcept>
#include <string>

namespace svt {

// Error categories used across the library. Tests match on kind(), not on
// message text.
enum class ErrorKind {
  Input,       // missing file, empty input
  Validation,  // manifest/content violates a documented invariant
  Protocol,    // split construction impossible for the given config
  Shape,       // dimension mismatch
  Numeric,     // non-finite value where a finite one is required
  Config,      // bad or unknown configuration key/value
  Capacity,    // fixed resource (word list, schedule) exhausted
  Conflict,    // duplicate class id on classifier extension
  Schedule,    // epoch outside the learning-rate schedule
  Label,       // label outside the classifier head
  Vocab,       // token id outside the embedding table
  Filter,      // unknown class in an export filter
  Layout,      // mismatched table rows
  Index,       // out-of-range session index
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace svt
