#include "ntg/optim.hpp"

#include <cmath>

#include "ntg/errors.hpp"

namespace ntg {

void Optimizer::step(ModuleParams& params) {
  step(params, [](const std::string&) { return true; });
}

void Optimizer::step(ModuleParams& params, const std::function<bool(const std::string&)>& filter) {
  for (const auto& [name, t] : params.tensors()) {
    if (!filter(name)) continue;
    for (double g : t.grad)
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter " + name);
  }

  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& [name, t] : params.tensors()) {
      if (!filter(name)) continue;
      for (double g : t.grad) sq += g * g;
    }
    double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) {
      double s = cfg_.grad_clip / norm;
      for (auto& [name, t] : params.tensors()) {
        if (!filter(name)) continue;
        for (double& g : t.grad) g *= s;
      }
    }
  }

  ++step_count_;
  for (auto& [name, t] : params.tensors()) {
    if (!filter(name)) {
      t.zero_grad();
      continue;
    }
    if (cfg_.kind == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < t.size(); ++i) t.values[i] -= cfg_.lr * t.grad[i];
    } else {
      Moments& mo = moments_[name];
      if (mo.m.size() != t.size()) {
        mo.m.assign(t.size(), 0.0);
        mo.v.assign(t.size(), 0.0);
      }
      double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
      double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
      for (std::size_t i = 0; i < t.size(); ++i) {
        double g = t.grad[i];
        mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g;
        mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g * g;
        double mhat = mo.m[i] / bc1;
        double vhat = mo.v[i] / bc2;
        t.values[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    t.zero_grad();
  }
}

}  // namespace ntg
