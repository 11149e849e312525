#include "ntg/nn.hpp"

namespace ntg {

Var apply_activation(Tape& tape, Var x, Activation act) {
  switch (act) {
    case Activation::None: return x;
    case Activation::Tanh: return tape.tanh_(x);
    case Activation::Relu: return tape.relu(x);
    case Activation::Sigmoid: return tape.sigmoid(x);
  }
  return x;
}

Linear Linear::create(ModuleParams& params, const std::string& prefix, int in, int out, Rng& rng) {
  Linear l{prefix + ".W", prefix + ".b", in, out};
  params.add_matrix(l.w_name, out, in, rng);
  params.add_zeros(l.b_name, {out});
  return l;
}

Linear Linear::attach(const ModuleParams& params, const std::string& prefix) {
  Linear l{prefix + ".W", prefix + ".b", 0, 0};
  const ParamTensor& w = params.at(l.w_name);
  l.out = w.rows();
  l.in = w.cols();
  return l;
}

Var Linear::apply(Tape& tape, VarCache& cache, ModuleParams& params, Var x) const {
  if (x.size != in) throw ConfigError("linear " + w_name + ": input width mismatch");
  Var w = cache.get(tape, params.at(w_name));
  Var b = cache.get(tape, params.at(b_name));
  return tape.add(tape.matvec(w, out, in, x), b);
}

Mlp Mlp::create(ModuleParams& params, const std::string& prefix, const std::vector<int>& widths,
                Rng& rng, Activation hidden, Activation output) {
  if (widths.size() < 2) throw ConfigError("mlp needs at least input and output widths");
  Mlp m;
  m.hidden_act = hidden;
  m.output_act = output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    m.layers.push_back(Linear::create(params, prefix + ".l" + std::to_string(i), widths[i],
                                      widths[i + 1], rng));
  return m;
}

Mlp Mlp::attach(const ModuleParams& params, const std::string& prefix, int num_layers,
                Activation hidden, Activation output) {
  Mlp m;
  m.hidden_act = hidden;
  m.output_act = output;
  for (int i = 0; i < num_layers; ++i)
    m.layers.push_back(Linear::attach(params, prefix + ".l" + std::to_string(i)));
  return m;
}

Var Mlp::apply(Tape& tape, VarCache& cache, ModuleParams& params, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].apply(tape, cache, params, x);
    x = apply_activation(tape, x, i + 1 < layers.size() ? hidden_act : output_act);
  }
  return x;
}

GruCell GruCell::create(ModuleParams& params, const std::string& prefix, int input, int hidden,
                        Rng& rng) {
  GruCell cell{prefix, input, hidden};
  for (const char* gate : {"z", "r", "h"}) {
    params.add_matrix(prefix + ".W" + gate, hidden, input, rng);
    params.add_matrix(prefix + ".U" + gate, hidden, hidden, rng);
    params.add_zeros(prefix + ".b" + gate, {hidden});
  }
  return cell;
}

GruCell GruCell::attach(const ModuleParams& params, const std::string& prefix) {
  const ParamTensor& wz = params.at(prefix + ".Wz");
  return GruCell{prefix, wz.cols(), wz.rows()};
}

Var GruCell::apply(Tape& tape, VarCache& cache, ModuleParams& params, Var x, Var h) const {
  if (x.size != input) throw ConfigError("gru " + prefix + ": input width mismatch");
  if (h.size != hidden) throw ConfigError("gru " + prefix + ": hidden width mismatch");
  auto gate = [&](const char* g, Var in_h) {
    Var w = cache.get(tape, params.at(prefix + ".W" + g));
    Var u = cache.get(tape, params.at(prefix + ".U" + g));
    Var b = cache.get(tape, params.at(prefix + ".b" + g));
    Var pre = tape.add(tape.add(tape.matvec(w, hidden, input, x), tape.matvec(u, hidden, hidden, in_h)), b);
    return pre;
  };
  Var z = tape.sigmoid(gate("z", h));
  Var r = tape.sigmoid(gate("r", h));
  Var c = tape.tanh_(gate("h", tape.mul(r, h)));
  Var one_minus_z = tape.add_const(tape.scale(z, -1.0), 1.0);
  return tape.add(tape.mul(one_minus_z, h), tape.mul(z, c));
}

Var embedding_row(Tape& tape, VarCache& cache, ModuleParams& params, const std::string& table,
                  int dim, int row) {
  ParamTensor& t = params.at(table);
  if (row < 0 || row >= t.rows()) throw InputError("embedding row out of range in " + table);
  Var v = cache.get(tape, t);
  return tape.slice(v, row * dim, dim);
}

}  // namespace ntg
