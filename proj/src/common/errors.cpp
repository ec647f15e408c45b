#include "unireid/errors.h"

namespace unireid {

const char* error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kInput:
      return "input";
    case ErrorKind::kLabel:
      return "label";
    case ErrorKind::kNumeric:
      return "numeric";
    case ErrorKind::kData:
      return "data";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kEvaluation:
      return "evaluation";
  }
  return "unknown";
}

}  // namespace unireid
