#pragma once

#include <stdexcept>
#include <string>

namespace gspnet {

/// Broad failure class; the CLI maps it onto its exit code.
enum class ErrorKind {
  usage,      // bad argument or violated precondition
  io,         // missing file, unreadable payload, refused overwrite
  format,     // malformed or inconsistent file contents
  numerical,  // non-convergence, divergence, non-finite values
};

/// Every failure raised by the toolkit. Carries the module that raised it and
/// a stable machine-readable code such as "graph.negative_weight".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, std::string code, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string code_;
  std::string message_;
};

const char* to_string(ErrorKind kind);

}  // namespace gspnet
