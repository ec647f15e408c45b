#pragma once

#include <cstdint>

namespace unireid {

// Per-epoch learning-rate schedule. Stage I decays exponentially from a base
// rate; Stage II warms up linearly and then follows a cosine down to a floor
// reached at the final epoch.
struct LrSchedule {
  enum class Kind { kExponential, kWarmupCosine };

  Kind kind = Kind::kExponential;
  double base = 0.0;   // exponential start
  double decay = 1.0;  // exponential factor per epoch
  double warmup_start = 0.0;
  double peak = 0.0;
  double floor = 0.0;
  int64_t warmup_epochs = 0;
  int64_t total_epochs = 1;

  static LrSchedule exponential(double base, double decay);
  static LrSchedule warmup_cosine(double warmup_start, double peak, double floor,
                                  int64_t warmup_epochs, int64_t total_epochs);

  // ConfigError unless every rate is positive and warmup_epochs < total_epochs.
  void validate() const;
};

// Learning rate at a (possibly fractional) epoch.
double lr_at(double epoch, const LrSchedule& schedule);

}  // namespace unireid
