#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntg/env.hpp"
#include "ntg/executor.hpp"
#include "ntg/interpreter.hpp"
#include "ntg/tensor.hpp"

namespace ntg {

// Non-compositional baseline: at every step it attends over the conditioning
// demonstration's encoded frames with a query built from the current
// observation and decodes an action directly (same encoder/attention pieces
// as the demo interpreter, no graph anywhere). Output id action_count is the
// stop symbol.
struct FlatPolicyConfig {
  int obs_width = 0;
  int action_count = 0;
  int hidden = 48;
  int max_frames = 64;
  int epochs = 30;
  double lr = 1e-3;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;

  std::string to_json() const;
  static FlatPolicyConfig from_json(const std::string& text);
};

struct FlatPolicy {
  FlatPolicyConfig cfg;
  ModuleParams params;

  int stop_symbol() const { return cfg.action_count; }
  void save(const std::string& path) const;
  static FlatPolicy load(const std::string& path);
};

// Demo encoding reused across the steps of one episode.
struct FlatContext {
  std::vector<std::vector<double>> enc_states;
};

FlatPolicy make_flat_policy(const FlatPolicyConfig& cfg);

// Behavior cloning over (conditioning demo, target demo) pairs drawn from the
// same task: all ordered pairs, so the policy cannot rely on the conditioning
// episode's exact object placements.
FlatPolicy flat_policy_train(const std::vector<std::vector<Demonstration>>& demos_by_task,
                             FlatPolicyConfig cfg, std::vector<TrainLogRow>* log = nullptr);

FlatContext flat_encode(const FlatPolicy& model, const Demonstration& demo);

// Greedy action (or the stop symbol) for the current observation.
int flat_policy_act(const FlatPolicy& model, const FlatContext& ctx,
                    const std::vector<double>& obs);

// Full episode driven by flat_policy_act; the stop symbol ends the episode.
RolloutResult flat_rollout(const FlatPolicy& model, const Env& env, const TaskSpec& task,
                           const Demonstration& demo, std::uint64_t seed, int max_steps);

// Teacher-forced frame-by-frame exactness of one (cond, target) pair.
bool flat_sequence_exact(const FlatPolicy& model, const Demonstration& cond,
                         const Demonstration& target);

// Mean loss over one pair with gradients accumulated (gradient-check hook).
double flat_policy_loss(FlatPolicy& model, const Demonstration& cond,
                        const Demonstration& target);

}  // namespace ntg
