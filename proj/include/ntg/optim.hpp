#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ntg/tensor.hpp"

namespace ntg {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // 0 disables global-norm clipping
};

// Plain gradient descent or adaptive-moment updates over a ModuleParams.
// Moment accumulators are keyed by parameter name; step() zeroes gradients
// after applying them and rejects non-finite gradients by parameter name.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  void step(ModuleParams& params);
  // Updates only tensors accepted by the filter; the rest keep their values
  // (their gradients are still zeroed).
  void step(ModuleParams& params, const std::function<bool(const std::string&)>& filter);
  std::int64_t step_count() const { return step_count_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  OptimizerConfig cfg_;
  std::map<std::string, Moments> moments_;
  std::int64_t step_count_ = 0;
};

}  // namespace ntg
