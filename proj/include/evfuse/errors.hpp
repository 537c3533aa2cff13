#pragma once

#include <stdexcept>
#include <string>

namespace evfuse {

enum class ErrorKind {
  Format,
  UnsupportedEncoding,
  Corruption,
  Io,
  Domain,
  Contract,
  Shape,
  TotalConflict,
  Training,
};

/// Base class for every error raised by the library. The kind drives the
/// CLI exit code mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define EVFUSE_DEFINE_ERROR(Name, Kind)                       \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& what)                    \
        : Error(ErrorKind::Kind, what) {}                     \
  };

EVFUSE_DEFINE_ERROR(FormatError, Format)
EVFUSE_DEFINE_ERROR(UnsupportedEncodingError, UnsupportedEncoding)
EVFUSE_DEFINE_ERROR(CorruptionError, Corruption)
EVFUSE_DEFINE_ERROR(IoError, Io)
EVFUSE_DEFINE_ERROR(DomainError, Domain)
EVFUSE_DEFINE_ERROR(ContractError, Contract)
EVFUSE_DEFINE_ERROR(ShapeError, Shape)
EVFUSE_DEFINE_ERROR(TotalConflictError, TotalConflict)
EVFUSE_DEFINE_ERROR(TrainingError, Training)

#undef EVFUSE_DEFINE_ERROR

}  // namespace evfuse
