#pragma once

#include <stdexcept>
#include <string>

namespace cir {

enum class ErrorKind {
  dimension,
  configuration,
  argument,
  numeric,
  format,
  corruption,
  version,
  io,
  empty_database,
  undefined_ap,
};

const char* to_string(ErrorKind kind);

/// Base of every exception thrown by the library. The kind decides the
/// process exit code used by the command-line tool.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CIR_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  };

CIR_DEFINE_ERROR(DimensionError, ErrorKind::dimension)
CIR_DEFINE_ERROR(ConfigError, ErrorKind::configuration)
CIR_DEFINE_ERROR(ArgumentError, ErrorKind::argument)
CIR_DEFINE_ERROR(NumericError, ErrorKind::numeric)
CIR_DEFINE_ERROR(FormatError, ErrorKind::format)
CIR_DEFINE_ERROR(CorruptionError, ErrorKind::corruption)
CIR_DEFINE_ERROR(VersionError, ErrorKind::version)
CIR_DEFINE_ERROR(IoError, ErrorKind::io)
CIR_DEFINE_ERROR(EmptyDatabaseError, ErrorKind::empty_database)
CIR_DEFINE_ERROR(UndefinedApError, ErrorKind::undefined_ap)

#undef CIR_DEFINE_ERROR

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int exit_code_for(ErrorKind kind);

}  // namespace cir
