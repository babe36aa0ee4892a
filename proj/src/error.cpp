#include "gspnet/error.hpp"

#include <utility>

namespace gspnet {

Error::Error(ErrorKind kind, std::string module, std::string code, const std::string& message)
    : std::runtime_error(module + ": " + message),
      kind_(kind),
      module_(std::move(module)),
      code_(std::move(code)),
      message_(message) {}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
      return "usage";
    case ErrorKind::io:
      return "io";
    case ErrorKind::format:
      return "format";
    case ErrorKind::numerical:
      return "numerical";
  }
  return "unknown";
}

}  // namespace gspnet
