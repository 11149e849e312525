#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntg/env.hpp"
#include "ntg/tensor.hpp"

namespace ntg {

// One row of a per-epoch training log (written to the curves CSV).
struct TrainLogRow {
  int epoch = 0;
  double loss = 0.0;
  double metric = 0.0;  // component-specific (accuracy, F1, ...)
};

struct InterpreterConfig {
  int obs_width = 0;
  int action_count = 0;
  int hidden = 48;
  int embed = 24;
  int max_frames = 64;  // longer demos are uniformly subsampled
  int epochs = 30;
  double lr = 1e-3;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;

  std::string to_json() const;
  static InterpreterConfig from_json(const std::string& text);
};

// Sequence model mapping a demonstration's observations to the executed
// action sequence: recurrent encoder over frames, recurrent decoder with
// multiplicative attention over encoder states, per-step action softmax.
// Output head width is action_count + 1 (the extra id is the end symbol).
struct Interpreter {
  InterpreterConfig cfg;
  ModuleParams params;

  int end_symbol() const { return cfg.action_count; }
  void save(const std::string& path) const;
  static Interpreter load(const std::string& path);
};

struct InterpretResult {
  std::vector<int> actions;  // never contains the end symbol
  bool truncated = false;    // length cap reached before the end symbol
};

Interpreter make_interpreter(const InterpreterConfig& cfg);

// Teacher-forced cross-entropy training on labeled demos from seen tasks.
Interpreter train_interpreter(const std::vector<Demonstration>& demos, InterpreterConfig cfg,
                              std::vector<TrainLogRow>* log = nullptr);

// Greedy decode; deterministic, ties broken by lowest action id.
InterpretResult interpret(const Interpreter& model, const Demonstration& demo);

// Fraction of demos whose decoded sequence equals the recorded one exactly.
double sequence_accuracy(const Interpreter& model, const std::vector<Demonstration>& demos);

// Scalar loss of one demo with gradients accumulated (gradient-check hook).
double interpreter_loss(Interpreter& model, const Demonstration& demo);

}  // namespace ntg
