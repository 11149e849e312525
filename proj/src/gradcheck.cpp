#include "ntg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ntg {

GradCheckResult gradient_check(const std::function<double(ModuleParams&)>& loss_fn,
                               ModuleParams& params, double eps, int samples_per_tensor,
                               std::uint64_t seed) {
  params.zero_grad();
  loss_fn(params);

  // freeze the analytic gradients before we start perturbing
  std::map<std::string, std::vector<double>> analytic;
  for (const auto& [name, t] : params.tensors()) analytic[name] = t.grad;

  GradCheckResult result;
  Rng rng(derive_seed(seed, "gradcheck"));
  for (auto& [name, t] : params.tensors()) {
    int n = static_cast<int>(t.size());
    std::vector<int> entries;
    if (n <= samples_per_tensor) {
      for (int i = 0; i < n; ++i) entries.push_back(i);
    } else {
      for (int k = 0; k < samples_per_tensor; ++k)
        entries.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(n))));
    }
    for (int i : entries) {
      double saved = t.values[i];
      t.values[i] = saved + eps;
      params.zero_grad();
      double up = loss_fn(params);
      t.values[i] = saved - eps;
      params.zero_grad();
      double down = loss_fn(params);
      t.values[i] = saved;
      double numeric = (up - down) / (2.0 * eps);
      double a = analytic[name][i];
      double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      ++result.checked_entries;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace ntg
