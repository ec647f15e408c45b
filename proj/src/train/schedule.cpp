#include "unireid/train/schedule.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "unireid/errors.h"

namespace unireid {

LrSchedule LrSchedule::exponential(double base, double decay) {
  LrSchedule s;
  s.kind = Kind::kExponential;
  s.base = base;
  s.decay = decay;
  s.validate();
  return s;
}

LrSchedule LrSchedule::warmup_cosine(double warmup_start, double peak, double floor,
                                     int64_t warmup_epochs, int64_t total_epochs) {
  LrSchedule s;
  s.kind = Kind::kWarmupCosine;
  s.warmup_start = warmup_start;
  s.peak = peak;
  s.floor = floor;
  s.warmup_epochs = warmup_epochs;
  s.total_epochs = total_epochs;
  s.validate();
  return s;
}

void LrSchedule::validate() const {
  if (kind == Kind::kExponential) {
    if (!(base > 0) || !(decay > 0)) {
      throw ConfigError("schedule: base rate and decay must be positive");
    }
    return;
  }
  if (!(warmup_start > 0) || !(peak > 0) || !(floor > 0)) {
    throw ConfigError("schedule: all rates must be positive");
  }
  if (warmup_epochs < 0 || warmup_epochs >= total_epochs) {
    throw ConfigError("schedule: warmup_epochs must be in [0, total_epochs)");
  }
}

double lr_at(double epoch, const LrSchedule& s) {
  if (epoch < 0) throw ConfigError("schedule: epoch must be non-negative");
  if (s.kind == LrSchedule::Kind::kExponential) return s.base * std::pow(s.decay, epoch);

  const auto warmup = static_cast<double>(s.warmup_epochs);
  if (epoch < warmup) {
    return s.warmup_start + (s.peak - s.warmup_start) * epoch / warmup;
  }
  const double span = static_cast<double>(s.total_epochs - 1) - warmup;
  if (span <= 0) return s.peak;
  const double t = std::min(1.0, (epoch - warmup) / span);
  return s.floor + 0.5 * (s.peak - s.floor) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace unireid
