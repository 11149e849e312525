#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ntg/tape.hpp"
#include "ntg/tensor.hpp"

namespace ntg {

enum class Activation { None, Tanh, Relu, Sigmoid };

Var apply_activation(Tape& tape, Var x, Activation act);

// Caches tape leaves so a ParamTensor used many times in one forward pass is
// registered once instead of once per use.
class VarCache {
 public:
  Var get(Tape& tape, ParamTensor& t) {
    auto it = vars_.find(&t);
    if (it != vars_.end()) return it->second;
    Var v = tape.param(t);
    vars_.emplace(&t, v);
    return v;
  }

 private:
  std::unordered_map<ParamTensor*, Var> vars_;
};

// y = W x + b
struct Linear {
  std::string w_name, b_name;
  int in = 0, out = 0;

  static Linear create(ModuleParams& params, const std::string& prefix, int in, int out, Rng& rng);
  static Linear attach(const ModuleParams& params, const std::string& prefix);
  Var apply(Tape& tape, VarCache& cache, ModuleParams& params, Var x) const;
};

// Plain MLP: hidden layers with one activation, optional output activation.
struct Mlp {
  std::vector<Linear> layers;
  Activation hidden_act = Activation::Tanh;
  Activation output_act = Activation::None;

  static Mlp create(ModuleParams& params, const std::string& prefix,
                    const std::vector<int>& widths, Rng& rng,
                    Activation hidden = Activation::Tanh, Activation output = Activation::None);
  static Mlp attach(const ModuleParams& params, const std::string& prefix, int num_layers,
                    Activation hidden = Activation::Tanh, Activation output = Activation::None);
  Var apply(Tape& tape, VarCache& cache, ModuleParams& params, Var x) const;
  int input_width() const { return layers.front().in; }
  int output_width() const { return layers.back().out; }
};

// Gated recurrent cell: update gate z, reset gate r, tanh candidate.
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   c = tanh(Wh x + Uh (r*h) + bh)
//   h' = (1-z)*h + z*c
struct GruCell {
  std::string prefix;
  int input = 0, hidden = 0;

  static GruCell create(ModuleParams& params, const std::string& prefix, int input, int hidden,
                        Rng& rng);
  static GruCell attach(const ModuleParams& params, const std::string& prefix);
  Var apply(Tape& tape, VarCache& cache, ModuleParams& params, Var x, Var h) const;
};

// Row lookup into an embedding table stored as a (rows x dim) matrix.
Var embedding_row(Tape& tape, VarCache& cache, ModuleParams& params, const std::string& table,
                  int dim, int row);

}  // namespace ntg
