#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ntg/gradcheck.hpp"
#include "ntg/nn.hpp"
#include "ntg/optim.hpp"
#include "ntg/tape.hpp"
#include "ntg/tensor.hpp"

using namespace ntg;

namespace {

// Independent reference for the gated recurrent update, written directly from
// the three gate formulas against raw weight arrays. Kept free of Tape code on
// purpose: it is the oracle the autodiff path is checked against.
std::vector<double> gru_reference(const ModuleParams& p, const std::string& prefix,
                                  const std::vector<double>& x, const std::vector<double>& h) {
  const auto& wz = p.at(prefix + ".Wz");
  int hid = wz.rows(), in = wz.cols();
  auto gate = [&](const char* g, const std::vector<double>& hh) {
    const auto& w = p.at(prefix + ".W" + g);
    const auto& u = p.at(prefix + ".U" + g);
    const auto& b = p.at(prefix + ".b" + g);
    std::vector<double> out(hid);
    for (int r = 0; r < hid; ++r) {
      double acc = b.values[r];
      for (int c = 0; c < in; ++c) acc += w.values[r * in + c] * x[c];
      for (int c = 0; c < hid; ++c) acc += u.values[r * hid + c] * hh[c];
      out[r] = acc;
    }
    return out;
  };
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> z = gate("z", h), r = gate("r", h);
  for (int i = 0; i < hid; ++i) {
    z[i] = sig(z[i]);
    r[i] = sig(r[i]);
  }
  std::vector<double> rh(hid);
  for (int i = 0; i < hid; ++i) rh[i] = r[i] * h[i];
  std::vector<double> c = gate("h", rh);
  std::vector<double> out(hid);
  for (int i = 0; i < hid; ++i) {
    c[i] = std::tanh(c[i]);
    out[i] = (1.0 - z[i]) * h[i] + z[i] * c[i];
  }
  return out;
}

}  // namespace

TEST_CASE("mlp forward: zero weights pass bias through activation") {
  Rng rng(7);
  ModuleParams params(7);
  Mlp mlp = Mlp::create(params, "f", {3, 2}, rng, Activation::Tanh, Activation::Tanh);
  for (double& v : params.at("f.l0.W").values) v = 0.0;
  params.at("f.l0.b").values = {0.3, -1.1};

  Tape tape;
  VarCache cache;
  Var y = mlp.apply(tape, cache, params, tape.input({0.5, -2.0, 3.0}));
  CHECK(tape.value(y)[0] == doctest::Approx(std::tanh(0.3)).epsilon(1e-12));
  CHECK(tape.value(y)[1] == doctest::Approx(std::tanh(-1.1)).epsilon(1e-12));
}

TEST_CASE("mlp forward: identity linear layer") {
  Rng rng(3);
  ModuleParams params(3);
  Mlp mlp = Mlp::create(params, "f", {2, 2}, rng, Activation::None, Activation::None);
  params.at("f.l0.W").values = {1.0, 0.0, 0.0, 1.0};
  params.at("f.l0.b").values = {0.0, 0.0};

  Tape tape;
  VarCache cache;
  Var y = mlp.apply(tape, cache, params, tape.input({-4.25, 9.5}));
  CHECK(tape.value(y)[0] == -4.25);
  CHECK(tape.value(y)[1] == 9.5);
}

TEST_CASE("mlp forward matches by-hand matrix multiply") {
  Rng rng(11);
  ModuleParams params(11);
  Mlp mlp = Mlp::create(params, "f", {2, 2}, rng, Activation::None, Activation::None);
  params.at("f.l0.W").values = {1.5, -0.25, 0.75, 2.0};
  params.at("f.l0.b").values = {0.125, -0.5};
  std::vector<double> x = {0.3, -1.2};

  // scalar arithmetic oracle
  double y0 = 1.5 * x[0] + -0.25 * x[1] + 0.125;
  double y1 = 0.75 * x[0] + 2.0 * x[1] + -0.5;

  Tape tape;
  VarCache cache;
  Var y = mlp.apply(tape, cache, params, tape.input(x));
  CHECK(std::fabs(tape.value(y)[0] - y0) < 1e-12);
  CHECK(std::fabs(tape.value(y)[1] - y1) < 1e-12);
}

TEST_CASE("mlp rejects width mismatch") {
  Rng rng(1);
  ModuleParams params(1);
  Mlp mlp = Mlp::create(params, "f", {3, 2}, rng);
  Tape tape;
  VarCache cache;
  CHECK_THROWS_AS(mlp.apply(tape, cache, params, tape.input({1.0, 2.0})), ConfigError);
}

TEST_CASE("gru step: all-zero parameters halve the hidden state") {
  Rng rng(5);
  ModuleParams params(5);
  GruCell cell = GruCell::create(params, "g", 2, 3, rng);
  for (auto& [name, t] : params.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);

  Tape tape;
  VarCache cache;
  std::vector<double> h = {0.4, -1.0, 2.2};
  Var out = cell.apply(tape, cache, params, tape.input({1.0, -1.0}), tape.input(h));
  for (int i = 0; i < 3; ++i) CHECK(tape.value(out)[i] == doctest::Approx(0.5 * h[i]).epsilon(1e-12));

  // zero input, zero hidden, zero params -> zero vector
  Tape tape2;
  VarCache cache2;
  Var out2 = cell.apply(tape2, cache2, params, tape2.input({0.0, 0.0}), tape2.input({0.0, 0.0, 0.0}));
  for (int i = 0; i < 3; ++i) CHECK(tape2.value(out2)[i] == 0.0);
}

TEST_CASE("gru step matches independent gate-formula reference") {
  Rng rng(99);
  ModuleParams params(99);
  GruCell cell = GruCell::create(params, "g", 3, 4, rng);
  std::vector<double> x = {0.1, -0.7, 1.3}, h = {0.05, 0.6, -0.4, 1.1};

  Tape tape;
  VarCache cache;
  Var out = cell.apply(tape, cache, params, tape.input(x), tape.input(h));
  std::vector<double> want = gru_reference(params, "g", x, h);
  for (int i = 0; i < 4; ++i) CHECK(tape.value(out)[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy values") {
  Tape tape;
  Var uniform = tape.input({0.7, 0.7, 0.7, 0.7});
  CHECK(tape.scalar(tape.softmax_cross_entropy(uniform, 2)) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Var peaked = tape.input({100.0, 0.0, 0.0});
  CHECK(tape.scalar(tape.softmax_cross_entropy(peaked, 0)) < 1e-9);

  CHECK_THROWS_AS(tape.softmax_cross_entropy(peaked, 3), InputError);
}

TEST_CASE("softmax cross entropy matches brute-force formula") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    int k = 2 + static_cast<int>(rng.index(6));
    std::vector<double> logits(k);
    for (double& v : logits) v = rng.uniform(-4.0, 4.0);
    int target = static_cast<int>(rng.index(k));

    double denom = 0.0;
    for (double v : logits) denom += std::exp(v);
    double want = -std::log(std::exp(logits[target]) / denom);

    Tape tape;
    double got = tape.scalar(tape.softmax_cross_entropy(tape.input(logits), target));
    CHECK(std::fabs(got - want) < 1e-10);
    CHECK(got >= 0.0);
  }
}

TEST_CASE("softmax output is a strictly positive distribution") {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    int k = 2 + static_cast<int>(rng.index(8));
    std::vector<double> logits(k);
    for (double& v : logits) v = rng.uniform(-30.0, 30.0);
    Tape tape;
    const auto& p = tape.value(tape.softmax(tape.input(logits)));
    double s = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("binary cross entropy values and formula oracle") {
  Tape tape;
  CHECK(tape.scalar(tape.binary_cross_entropy(tape.constant(0.5), 1)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(tape.scalar(tape.binary_cross_entropy(tape.constant(1.0 - 1e-7), 1)) < 1e-6);

  Rng rng(8);
  double mean_got = 0.0, mean_want = 0.0;
  int n = 64;
  for (int i = 0; i < n; ++i) {
    double p = rng.uniform(0.01, 0.99);
    int y = rng.index(2) == 0 ? 0 : 1;
    double got = tape.scalar(tape.binary_cross_entropy(tape.constant(p), y));
    double want = -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
    CHECK(got >= 0.0);
    mean_got += got / n;
    mean_want += want / n;
  }
  CHECK(mean_got == doctest::Approx(mean_want).epsilon(1e-10));
}

TEST_CASE("sgd step: quadratic loss moves w from 1.0 to 0.8") {
  ModuleParams params(0);
  params.add_zeros("w", {1}).values = {1.0};
  Optimizer opt({OptimizerKind::Sgd, 0.1});

  Tape tape;
  Var w = tape.param(params.at("w"));
  tape.backward(tape.mul(w, w));  // d(w^2)/dw = 2w
  opt.step(params);
  CHECK(params.at("w").values[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(params.at("w").grad[0] == 0.0);  // zeroed after the step
}

TEST_CASE("optimizer leaves parameters unchanged on zero gradient") {
  ModuleParams params(0);
  params.add_zeros("w", {3}).values = {1.0, -2.0, 0.25};
  Optimizer sgd({OptimizerKind::Sgd, 0.5});
  sgd.step(params);
  CHECK(params.at("w").values == std::vector<double>{1.0, -2.0, 0.25});

  Optimizer adam;
  adam.step(params);
  CHECK(params.at("w").values == std::vector<double>{1.0, -2.0, 0.25});
}

TEST_CASE("adam first step matches the closed-form update") {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::Adam;
  cfg.lr = 1e-3;
  ModuleParams params(0);
  params.add_zeros("w", {2}).values = {0.7, -0.3};
  params.at("w").grad = {0.02, -5.0};

  // single-step closed form: m_hat = g, v_hat = g^2
  auto expected = [&](double w, double g) {
    return w - cfg.lr * g / (std::sqrt(g * g) + cfg.eps);
  };
  double w0 = expected(0.7, 0.02), w1 = expected(-0.3, -5.0);

  Optimizer opt(cfg);
  opt.step(params);
  CHECK(params.at("w").values[0] == doctest::Approx(w0).epsilon(1e-12));
  CHECK(params.at("w").values[1] == doctest::Approx(w1).epsilon(1e-12));
  // magnitude ~ lr * sign(g)
  CHECK(std::fabs(std::fabs(params.at("w").values[1] + 0.3) - cfg.lr) < 1e-6);
}

TEST_CASE("optimizer reports non-finite gradients by name") {
  ModuleParams params(0);
  params.add_zeros("bad", {1}).grad = {std::nan("")};
  Optimizer opt;
  CHECK_THROWS_WITH_AS(opt.step(params), doctest::Contains("bad"), TrainingError);
}

TEST_CASE("gradient check: quadratic form is exact") {
  ModuleParams params(0);
  auto& w = params.add_zeros("w", {4});
  w.values = {0.3, -1.2, 2.0, 0.7};
  auto loss = [](ModuleParams& p) {
    Tape tape;
    Var v = tape.param(p.at("w"));
    Var l = tape.dot(v, v);
    tape.backward(l);
    return tape.scalar(l);
  };
  GradCheckResult r = gradient_check(loss, params, 1e-6);
  CHECK(r.max_rel_error < 1e-7);
}

TEST_CASE("gradient check: two-layer mlp with cross entropy") {
  Rng rng(17);
  ModuleParams params(17);
  Mlp mlp = Mlp::create(params, "f", {5, 8, 3}, rng);
  std::vector<double> x = {0.2, -0.1, 0.9, -1.4, 0.5};
  auto loss = [&](ModuleParams& p) {
    Tape tape;
    VarCache cache;
    Var logits = mlp.apply(tape, cache, p, tape.input(x));
    Var l = tape.softmax_cross_entropy(logits, 1);
    tape.backward(l);
    return tape.scalar(l);
  };
  GradCheckResult r = gradient_check(loss, params, 1e-5, 6, 1);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("gradient check: gru unrolled three steps with squared loss") {
  Rng rng(23);
  ModuleParams params(23);
  GruCell cell = GruCell::create(params, "g", 2, 3, rng);
  std::vector<std::vector<double>> xs = {{0.5, -0.5}, {1.0, 0.25}, {-0.75, 0.1}};
  auto loss = [&](ModuleParams& p) {
    Tape tape;
    VarCache cache;
    Var h = tape.input({0.0, 0.0, 0.0});
    for (const auto& x : xs) h = cell.apply(tape, cache, p, tape.input(x), h);
    Var l = tape.dot(h, h);
    tape.backward(l);
    return tape.scalar(l);
  };
  GradCheckResult r = gradient_check(loss, params, 1e-5, 6, 2);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("same seed reproduces identical initialization bit-for-bit") {
  auto build = [] {
    Rng rng(4242);
    ModuleParams params(4242);
    Mlp::create(params, "f", {6, 5, 4}, rng);
    GruCell::create(params, "g", 3, 4, rng);
    return params;
  };
  ModuleParams a = build(), b = build();
  REQUIRE(a.tensors().size() == b.tensors().size());
  for (const auto& [name, t] : a.tensors()) CHECK(t.values == b.at(name).values);
}

TEST_CASE("checkpoint round-trip is lossless") {
  Rng rng(77);
  ModuleParams params(77);
  Mlp::create(params, "f", {3, 4}, rng);
  GruCell::create(params, "g", 2, 2, rng);

  std::string text = checkpoint_to_string(params);
  ModuleParams back = checkpoint_from_string(text);
  CHECK(back.seed() == params.seed());
  REQUIRE(back.tensors().size() == params.tensors().size());
  for (const auto& [name, t] : params.tensors()) {
    CHECK(back.at(name).shape == t.shape);
    CHECK(back.at(name).values == t.values);
  }
  // and via the filesystem
  auto path = std::filesystem::temp_directory_path() / "ntg_ckpt_test.json";
  save_checkpoint(params, path.string());
  ModuleParams loaded = load_checkpoint(path.string());
  for (const auto& [name, t] : params.tensors()) CHECK(loaded.at(name).values == t.values);
  std::filesystem::remove(path);
}

TEST_CASE("tape slice/concat/pick/stack propagate gradients") {
  ModuleParams params(0);
  auto& w = params.add_zeros("w", {4});
  w.values = {1.0, 2.0, 3.0, 4.0};
  auto loss = [](ModuleParams& p) {
    Tape tape;
    Var v = tape.param(p.at("w"));
    Var a = tape.slice(v, 0, 2);
    Var b = tape.slice(v, 2, 2);
    Var c = tape.concat({tape.mul(a, b), a});
    Var s = tape.stack({tape.pick(c, 0), tape.pick(c, 3), tape.dot(a, b)});
    Var l = tape.dot(s, s);
    tape.backward(l);
    return tape.scalar(l);
  };
  GradCheckResult r = gradient_check(loss, params, 1e-6, 4);
  CHECK(r.max_rel_error < 1e-6);
}
