#include "ntg/tape.hpp"

#include <algorithm>
#include <cmath>

namespace ntg {

namespace {
void check_same_size(Var a, Var b, const char* op) {
  if (a.size != b.size) throw ConfigError(std::string(op) + ": size mismatch");
}
}  // namespace

int Tape::push(std::vector<double> val, std::function<void(Tape&)> back) {
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{std::move(val), {}});
  nodes_.back().grad.assign(nodes_.back().val.size(), 0.0);
  if (back) ops_.emplace_back(id, std::move(back));
  return id;
}

Var Tape::input(std::vector<double> v) {
  int sz = static_cast<int>(v.size());
  return Var{push(std::move(v)), sz};
}

Var Tape::param(ParamTensor& t) {
  int id = push(t.values);
  leaves_.emplace_back(id, &t);
  return Var{id, static_cast<int>(t.size())};
}

Var Tape::add(Var a, Var b) {
  check_same_size(a, b, "add");
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = nodes_[a.id].val[i] + nodes_[b.id].val[i];
  int id = push(std::move(out), [a, b, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < a.size; ++i) {
      double g = t.nodes_[id].grad[i];
      t.nodes_[a.id].grad[i] += g;
      t.nodes_[b.id].grad[i] += g;
    }
  });
  return Var{id, a.size};
}

Var Tape::sub(Var a, Var b) {
  check_same_size(a, b, "sub");
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = nodes_[a.id].val[i] - nodes_[b.id].val[i];
  int id = push(std::move(out), [a, b, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < a.size; ++i) {
      double g = t.nodes_[id].grad[i];
      t.nodes_[a.id].grad[i] += g;
      t.nodes_[b.id].grad[i] -= g;
    }
  });
  return Var{id, a.size};
}

Var Tape::mul(Var a, Var b) {
  check_same_size(a, b, "mul");
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = nodes_[a.id].val[i] * nodes_[b.id].val[i];
  int id = push(std::move(out), [a, b, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < a.size; ++i) {
      double g = t.nodes_[id].grad[i];
      t.nodes_[a.id].grad[i] += g * t.nodes_[b.id].val[i];
      t.nodes_[b.id].grad[i] += g * t.nodes_[a.id].val[i];
    }
  });
  return Var{id, a.size};
}

Var Tape::scale(Var a, double c) {
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = nodes_[a.id].val[i] * c;
  int id = push(std::move(out), [a, c, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < a.size; ++i) t.nodes_[a.id].grad[i] += c * t.nodes_[id].grad[i];
  });
  return Var{id, a.size};
}

Var Tape::add_const(Var a, double c) {
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = nodes_[a.id].val[i] + c;
  int id = push(std::move(out), [a, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < a.size; ++i) t.nodes_[a.id].grad[i] += t.nodes_[id].grad[i];
  });
  return Var{id, a.size};
}

Var Tape::mul_scalar(Var s, Var x) {
  if (s.size != 1) throw ConfigError("mul_scalar: scalar operand must have size 1");
  double sv = nodes_[s.id].val[0];
  std::vector<double> out(x.size);
  for (int i = 0; i < x.size; ++i) out[i] = sv * nodes_[x.id].val[i];
  int id = push(std::move(out), [s, x, id = static_cast<int>(nodes_.size())](Tape& t) {
    double sval = t.nodes_[s.id].val[0];
    double acc = 0.0;
    for (int i = 0; i < x.size; ++i) {
      double g = t.nodes_[id].grad[i];
      acc += g * t.nodes_[x.id].val[i];
      t.nodes_[x.id].grad[i] += g * sval;
    }
    t.nodes_[s.id].grad[0] += acc;
  });
  return Var{id, x.size};
}

Var Tape::matvec(Var w, int rows, int cols, Var x) {
  if (w.size != rows * cols) throw ConfigError("matvec: weight size mismatch");
  if (x.size != cols) throw ConfigError("matvec: input width mismatch");
  std::vector<double> out(rows, 0.0);
  const double* wp = nodes_[w.id].val.data();
  const double* xp = nodes_[x.id].val.data();
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = wp + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += row[c] * xp[c];
    out[r] = acc;
  }
  int id = push(std::move(out), [w, x, rows, cols, id = static_cast<int>(nodes_.size())](Tape& t) {
    const double* wp = t.nodes_[w.id].val.data();
    const double* xp = t.nodes_[x.id].val.data();
    double* gw = t.nodes_[w.id].grad.data();
    double* gx = t.nodes_[x.id].grad.data();
    const double* gy = t.nodes_[id].grad.data();
    for (int r = 0; r < rows; ++r) {
      double g = gy[r];
      if (g == 0.0) continue;
      const double* row = wp + static_cast<std::size_t>(r) * cols;
      double* grow = gw + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) {
        grow[c] += g * xp[c];
        gx[c] += g * row[c];
      }
    }
  });
  return Var{id, rows};
}

Var Tape::sigmoid(Var x) {
  std::vector<double> out(x.size);
  for (int i = 0; i < x.size; ++i) {
    double v = nodes_[x.id].val[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  int id = push(std::move(out), [x, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < x.size; ++i) {
      double y = t.nodes_[id].val[i];
      t.nodes_[x.id].grad[i] += t.nodes_[id].grad[i] * y * (1.0 - y);
    }
  });
  return Var{id, x.size};
}

Var Tape::tanh_(Var x) {
  std::vector<double> out(x.size);
  for (int i = 0; i < x.size; ++i) out[i] = std::tanh(nodes_[x.id].val[i]);
  int id = push(std::move(out), [x, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < x.size; ++i) {
      double y = t.nodes_[id].val[i];
      t.nodes_[x.id].grad[i] += t.nodes_[id].grad[i] * (1.0 - y * y);
    }
  });
  return Var{id, x.size};
}

Var Tape::relu(Var x) {
  std::vector<double> out(x.size);
  for (int i = 0; i < x.size; ++i) out[i] = std::max(0.0, nodes_[x.id].val[i]);
  int id = push(std::move(out), [x, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < x.size; ++i)
      if (t.nodes_[x.id].val[i] > 0.0) t.nodes_[x.id].grad[i] += t.nodes_[id].grad[i];
  });
  return Var{id, x.size};
}

Var Tape::concat(const std::vector<Var>& xs) {
  int total = 0;
  for (Var v : xs) total += v.size;
  std::vector<double> out;
  out.reserve(total);
  for (Var v : xs) {
    const auto& src = nodes_[v.id].val;
    out.insert(out.end(), src.begin(), src.end());
  }
  int id = push(std::move(out), [xs, id = static_cast<int>(nodes_.size())](Tape& t) {
    int off = 0;
    for (Var v : xs) {
      for (int i = 0; i < v.size; ++i) t.nodes_[v.id].grad[i] += t.nodes_[id].grad[off + i];
      off += v.size;
    }
  });
  return Var{id, total};
}

Var Tape::slice(Var x, int offset, int len) {
  if (offset < 0 || len <= 0 || offset + len > x.size) throw ConfigError("slice: out of range");
  std::vector<double> out(nodes_[x.id].val.begin() + offset, nodes_[x.id].val.begin() + offset + len);
  int id = push(std::move(out), [x, offset, len, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (int i = 0; i < len; ++i) t.nodes_[x.id].grad[offset + i] += t.nodes_[id].grad[i];
  });
  return Var{id, len};
}

Var Tape::dot(Var a, Var b) {
  check_same_size(a, b, "dot");
  double acc = 0.0;
  for (int i = 0; i < a.size; ++i) acc += nodes_[a.id].val[i] * nodes_[b.id].val[i];
  int id = push({acc}, [a, b, id = static_cast<int>(nodes_.size())](Tape& t) {
    double g = t.nodes_[id].grad[0];
    for (int i = 0; i < a.size; ++i) {
      t.nodes_[a.id].grad[i] += g * t.nodes_[b.id].val[i];
      t.nodes_[b.id].grad[i] += g * t.nodes_[a.id].val[i];
    }
  });
  return Var{id, 1};
}

Var Tape::pick(Var x, int i) {
  if (i < 0 || i >= x.size) throw InputError("pick: index out of range");
  int id = push({nodes_[x.id].val[i]}, [x, i, id = static_cast<int>(nodes_.size())](Tape& t) {
    t.nodes_[x.id].grad[i] += t.nodes_[id].grad[0];
  });
  return Var{id, 1};
}

Var Tape::stack(const std::vector<Var>& scalars) {
  std::vector<double> out(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i].size != 1) throw ConfigError("stack: operands must be scalars");
    out[i] = nodes_[scalars[i].id].val[0];
  }
  int id = push(std::move(out), [scalars, id = static_cast<int>(nodes_.size())](Tape& t) {
    for (std::size_t i = 0; i < scalars.size(); ++i)
      t.nodes_[scalars[i].id].grad[0] += t.nodes_[id].grad[i];
  });
  return Var{id, static_cast<int>(scalars.size())};
}

Var Tape::sum(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw ConfigError("sum: empty operand list");
  double acc = 0.0;
  for (Var v : scalars) {
    if (v.size != 1) throw ConfigError("sum: operands must be scalars");
    acc += nodes_[v.id].val[0];
  }
  int id = push({acc}, [scalars, id = static_cast<int>(nodes_.size())](Tape& t) {
    double g = t.nodes_[id].grad[0];
    for (Var v : scalars) t.nodes_[v.id].grad[0] += g;
  });
  return Var{id, 1};
}

Var Tape::mean(const std::vector<Var>& scalars) {
  return scale(sum(scalars), 1.0 / static_cast<double>(scalars.size()));
}

Var Tape::softmax(Var logits) {
  const auto& z = nodes_[logits.id].val;
  double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> out(logits.size);
  double denom = 0.0;
  for (int i = 0; i < logits.size; ++i) {
    out[i] = std::exp(z[i] - mx);
    denom += out[i];
  }
  for (double& p : out) p /= denom;
  int id = push(std::move(out), [logits, id = static_cast<int>(nodes_.size())](Tape& t) {
    const auto& p = t.nodes_[id].val;
    const auto& g = t.nodes_[id].grad;
    double dotpg = 0.0;
    for (int i = 0; i < logits.size; ++i) dotpg += p[i] * g[i];
    for (int i = 0; i < logits.size; ++i)
      t.nodes_[logits.id].grad[i] += p[i] * (g[i] - dotpg);
  });
  return Var{id, logits.size};
}

Var Tape::softmax_cross_entropy(Var logits, int target) {
  if (target < 0 || target >= logits.size)
    throw InputError("softmax_cross_entropy: target out of range");
  const auto& z = nodes_[logits.id].val;
  double mx = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (int i = 0; i < logits.size; ++i) denom += std::exp(z[i] - mx);
  double logsum = mx + std::log(denom);
  double loss = logsum - z[target];
  int id = push({loss}, [logits, target, mx, logsum, id = static_cast<int>(nodes_.size())](Tape& t) {
    double g = t.nodes_[id].grad[0];
    const auto& zz = t.nodes_[logits.id].val;
    for (int i = 0; i < logits.size; ++i) {
      double p = std::exp(zz[i] - logsum);
      t.nodes_[logits.id].grad[i] += g * (p - (i == target ? 1.0 : 0.0));
    }
    (void)mx;
  });
  return Var{id, 1};
}

Var Tape::binary_cross_entropy(Var p, int y, double eps) {
  if (p.size != 1) throw ConfigError("binary_cross_entropy: probability must be scalar");
  if (y != 0 && y != 1) throw InputError("binary_cross_entropy: label must be 0 or 1");
  double pv = nodes_[p.id].val[0];
  bool clamped_lo = pv < eps;
  bool clamped_hi = pv > 1.0 - eps;
  double pc = std::min(std::max(pv, eps), 1.0 - eps);
  double loss = y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
  int id = push({loss}, [p, y, pc, clamped_lo, clamped_hi, id = static_cast<int>(nodes_.size())](Tape& t) {
    if (clamped_lo || clamped_hi) return;  // gradient is zero in the clamped region
    double g = t.nodes_[id].grad[0];
    double d = y == 1 ? -1.0 / pc : 1.0 / (1.0 - pc);
    t.nodes_[p.id].grad[0] += g * d;
  });
  return Var{id, 1};
}

void Tape::backward(Var loss) {
  if (loss.size != 1) throw ConfigError("backward: loss must be scalar");
  nodes_[loss.id].grad[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->second(*this);
  for (auto& [id, tensor] : leaves_) {
    const auto& g = nodes_[id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) tensor->grad[i] += g[i];
  }
}

}  // namespace ntg
