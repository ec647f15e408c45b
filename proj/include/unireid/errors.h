#pragma once

#include <stdexcept>
#include <string>

namespace unireid {

enum class ErrorKind {
  kConfig,
  kInput,
  kLabel,
  kNumeric,
  kData,
  kIo,
  kEvaluation,
};

const char* error_kind_name(ErrorKind kind) noexcept;

// Base of every error the library raises. The kind is what the CLI prints as
// the machine-parsable prefix of its one-line failure message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define UNIREID_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& message) : Error(Kind, message) {}   \
  };

UNIREID_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
UNIREID_DEFINE_ERROR(InputError, ErrorKind::kInput)
UNIREID_DEFINE_ERROR(LabelError, ErrorKind::kLabel)
UNIREID_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
UNIREID_DEFINE_ERROR(DataError, ErrorKind::kData)
UNIREID_DEFINE_ERROR(IoError, ErrorKind::kIo)
UNIREID_DEFINE_ERROR(EvaluationError, ErrorKind::kEvaluation)

#undef UNIREID_DEFINE_ERROR

}  // namespace unireid
