#include "cir/error.hpp"

namespace cir {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::argument: return "argument error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::format: return "format error";
    case ErrorKind::corruption: return "corruption error";
    case ErrorKind::version: return "version error";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::empty_database: return "empty-database error";
    case ErrorKind::undefined_ap: return "undefined-AP error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension:
    case ErrorKind::configuration:
    case ErrorKind::argument:
      return kExitConfig;
    case ErrorKind::numeric:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

}  // namespace cir
