#pragma once

#include <stdexcept>
#include <string>

namespace vqwave {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Usage,          // bad arguments or configuration
  InvalidInput,   // malformed or unsupported data (files, shapes, lengths)
  Incompatible,   // data and model disagree (rates, codebook counts)
  Numerical,      // non-finite values during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_input(const std::string& what) { return {ErrorKind::InvalidInput, what}; }
inline Error incompatible(const std::string& what) { return {ErrorKind::Incompatible, what}; }
inline Error usage_error(const std::string& what) { return {ErrorKind::Usage, what}; }

}  // namespace vqwave
