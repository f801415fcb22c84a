#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hdrnn {

enum class ErrorCategory {
  format,      // malformed header or magic
  truncation,  // input ended early
  corruption,  // structurally invalid payload (e.g. RLE overrun)
  unsupported, // well-formed but outside what we read
  validation,  // value violates a type invariant
  parameter,   // bad argument to an operation
  shape,       // tensor or image dimension mismatch
  numeric,     // non-finite values during training
  io,          // filesystem failure
  usage,       // command-line misuse
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::format: return "format";
    case ErrorCategory::truncation: return "truncation";
    case ErrorCategory::corruption: return "corruption";
    case ErrorCategory::unsupported: return "unsupported";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::parameter: return "parameter";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::io: return "io";
    case ErrorCategory::usage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) { throw Error(c, what); }

inline void require(bool ok, ErrorCategory c, const std::string& what) {
  if (!ok) fail(c, what);
}

}  // namespace hdrnn
