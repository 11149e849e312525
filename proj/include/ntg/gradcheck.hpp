#pragma once

#include <functional>
#include <string>

#include "ntg/rng.hpp"
#include "ntg/tensor.hpp"

namespace ntg {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int checked_entries = 0;
};

// Central-difference verification of reverse-mode gradients.
// `loss_fn` must evaluate the scalar loss at the given parameters and, as a
// side effect, accumulate analytic gradients into them (via a Tape backward).
// It must be deterministic. Checks up to `samples_per_tensor` seeded entries
// per tensor and returns max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult gradient_check(const std::function<double(ModuleParams&)>& loss_fn,
                               ModuleParams& params, double eps = 1e-5,
                               int samples_per_tensor = 4, std::uint64_t seed = 0);

}  // namespace ntg
