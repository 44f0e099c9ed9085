#pragma once

#include <stdexcept>
#include <string>

namespace divseg {

enum class ErrorKind {
  InvalidShape,
  Domain,
  Contract,
  Config,
  Parse,
  Io,
  Numeric,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define DIVSEG_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

DIVSEG_DEFINE_ERROR(ShapeError, InvalidShape)
DIVSEG_DEFINE_ERROR(DomainError, Domain)
DIVSEG_DEFINE_ERROR(ContractError, Contract)
DIVSEG_DEFINE_ERROR(ConfigError, Config)
DIVSEG_DEFINE_ERROR(ParseError, Parse)
DIVSEG_DEFINE_ERROR(IoError, Io)
DIVSEG_DEFINE_ERROR(NumericError, Numeric)

#undef DIVSEG_DEFINE_ERROR

}  // namespace divseg
