#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ntg/errors.hpp"
#include "ntg/rng.hpp"

namespace ntg {

// A named learnable tensor: flat value storage plus a shape and an
// accumulated gradient of the same size.
struct ParamTensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;

  ParamTensor() = default;
  explicit ParamTensor(std::vector<int> shp);

  std::size_t size() const { return values.size(); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() > 1 ? shape[1] : 1; }
  void zero_grad();
  bool finite() const;  // values and grad all finite
};

// Named collection of parameters for one learned component. std::map keeps
// iteration order deterministic, which the optimizer and checkpoints rely on.
class ModuleParams {
 public:
  ModuleParams() = default;
  explicit ModuleParams(std::uint64_t seed) : seed_(seed) {}

  // Uniform init in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
  ParamTensor& add_matrix(const std::string& name, int rows, int cols, Rng& rng);
  // Zero-initialized (biases).
  ParamTensor& add_zeros(const std::string& name, std::vector<int> shape);

  ParamTensor& at(const std::string& name);
  const ParamTensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors_.count(name) > 0; }

  std::map<std::string, ParamTensor>& tensors() { return tensors_; }
  const std::map<std::string, ParamTensor>& tensors() const { return tensors_; }

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }

  // free-form strings stored alongside the tensors (component configs etc.)
  std::map<std::string, std::string>& meta() { return meta_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  std::map<std::string, ParamTensor> tensors_;
  std::map<std::string, std::string> meta_;
  std::uint64_t seed_ = 0;
};

// Versioned checkpoint file: JSON with named tensors, shapes and the init
// seed. nlohmann serializes doubles with round-trip precision, so the
// save/load cycle is lossless.
void save_checkpoint(const ModuleParams& params, const std::string& path);
ModuleParams load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const ModuleParams& params);
ModuleParams checkpoint_from_string(const std::string& text);

}  // namespace ntg
