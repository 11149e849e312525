#include "ntg/tensor.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ntg {

namespace {
constexpr int kCheckpointVersion = 1;
}

ParamTensor::ParamTensor(std::vector<int> shp) : shape(std::move(shp)) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ConfigError("tensor dimension must be positive");
    n *= static_cast<std::size_t>(d);
  }
  values.assign(n, 0.0);
  grad.assign(n, 0.0);
}

void ParamTensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

bool ParamTensor::finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  for (double g : grad)
    if (!std::isfinite(g)) return false;
  return true;
}

ParamTensor& ModuleParams::add_matrix(const std::string& name, int rows, int cols, Rng& rng) {
  if (tensors_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  ParamTensor t({rows, cols});
  double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.values) v = rng.uniform(-a, a);
  return tensors_.emplace(name, std::move(t)).first->second;
}

ParamTensor& ModuleParams::add_zeros(const std::string& name, std::vector<int> shape) {
  if (tensors_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  return tensors_.emplace(name, ParamTensor(std::move(shape))).first->second;
}

ParamTensor& ModuleParams::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const ParamTensor& ModuleParams::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ModuleParams::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

std::size_t ModuleParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

std::string checkpoint_to_string(const ModuleParams& params) {
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointVersion;
  j["rng_seed"] = params.seed();
  if (!params.meta().empty()) j["meta"] = params.meta();
  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  for (const auto& [name, t] : params.tensors()) {
    tensors[name] = {{"shape", t.shape}, {"values", t.values}};
  }
  j["tensors"] = std::move(tensors);
  return j.dump();
}

ModuleParams checkpoint_from_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("format_version") || j["format_version"].get<int>() != kCheckpointVersion)
    throw IoError("unsupported checkpoint format version");
  ModuleParams params(j.at("rng_seed").get<std::uint64_t>());
  if (j.contains("meta"))
    params.meta() = j["meta"].get<std::map<std::string, std::string>>();
  for (auto& [name, entry] : j.at("tensors").items()) {
    ParamTensor t(entry.at("shape").get<std::vector<int>>());
    auto vals = entry.at("values").get<std::vector<double>>();
    if (vals.size() != t.size()) throw IoError("checkpoint tensor size mismatch for " + name);
    t.values = std::move(vals);
    params.tensors().emplace(name, std::move(t));
  }
  return params;
}

void save_checkpoint(const ModuleParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << checkpoint_to_string(params);
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

ModuleParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_string(text);
}

}  // namespace ntg
