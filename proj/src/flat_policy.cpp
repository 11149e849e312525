#include "ntg/flat_policy.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ntg/nn.hpp"
#include "ntg/optim.hpp"

namespace ntg {

namespace {

std::vector<int> subsample_indices(std::size_t frames, int cap) {
  std::vector<int> idx;
  if (static_cast<int>(frames) <= cap) {
    for (std::size_t i = 0; i < frames; ++i) idx.push_back(static_cast<int>(i));
    return idx;
  }
  for (int i = 0; i < cap; ++i) {
    double pos = static_cast<double>(i) * static_cast<double>(frames - 1) / (cap - 1);
    idx.push_back(static_cast<int>(std::lround(pos)));
  }
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

struct Nets {
  GruCell enc;
  Mlp query;
  Linear att, comb, head;
  static Nets attach(const FlatPolicy& model) {
    return Nets{GruCell::attach(model.params, "enc"),
                Mlp::attach(model.params, "query", 1, Activation::Tanh, Activation::Tanh),
                Linear::attach(model.params, "att"), Linear::attach(model.params, "comb"),
                Linear::attach(model.params, "head")};
  }
};

std::vector<Var> encode_frames(Tape& tape, VarCache& cache, FlatPolicy& model, const Nets& nets,
                               const std::vector<std::vector<double>>& observations) {
  std::vector<Var> states;
  Var h = tape.input(std::vector<double>(model.cfg.hidden, 0.0));
  for (int i : subsample_indices(observations.size(), model.cfg.max_frames)) {
    if (static_cast<int>(observations[i].size()) != model.cfg.obs_width)
      throw InputError("flat policy: observation width mismatch");
    h = nets.enc.apply(tape, cache, model.params, tape.input(observations[i]), h);
    states.push_back(h);
  }
  return states;
}

Var act_logits(Tape& tape, VarCache& cache, FlatPolicy& model, const Nets& nets,
               const std::vector<Var>& enc_states, const std::vector<double>& obs) {
  Var q = nets.query.apply(tape, cache, model.params, tape.input(obs));
  std::vector<Var> scores;
  scores.reserve(enc_states.size());
  for (const Var& h : enc_states)
    scores.push_back(tape.dot(q, nets.att.apply(tape, cache, model.params, h)));
  Var alpha = tape.softmax(tape.stack(scores));
  Var ctx = tape.mul_scalar(tape.pick(alpha, 0), enc_states[0]);
  for (std::size_t t = 1; t < enc_states.size(); ++t)
    ctx = tape.add(ctx, tape.mul_scalar(tape.pick(alpha, t), enc_states[t]));
  Var comb = tape.tanh_(nets.comb.apply(tape, cache, model.params, tape.concat({ctx, q})));
  return nets.head.apply(tape, cache, model.params, comb);
}

int argmax_first(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

std::string FlatPolicyConfig::to_json() const {
  nlohmann::ordered_json j{{"obs_width", obs_width}, {"action_count", action_count},
                           {"hidden", hidden},       {"max_frames", max_frames},
                           {"epochs", epochs},       {"lr", lr},
                           {"grad_clip", grad_clip}, {"seed", seed}};
  return j.dump();
}

FlatPolicyConfig FlatPolicyConfig::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  FlatPolicyConfig c;
  c.obs_width = j.at("obs_width").get<int>();
  c.action_count = j.at("action_count").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.max_frames = j.at("max_frames").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

FlatPolicy make_flat_policy(const FlatPolicyConfig& cfg) {
  if (cfg.obs_width <= 0 || cfg.action_count <= 0)
    throw ConfigError("flat policy: obs_width and action_count must be set");
  FlatPolicy model{cfg, ModuleParams(cfg.seed)};
  Rng rng(derive_seed(cfg.seed, "flat-init"));
  GruCell::create(model.params, "enc", cfg.obs_width, cfg.hidden, rng);
  Mlp::create(model.params, "query", {cfg.obs_width, cfg.hidden}, rng, Activation::Tanh,
              Activation::Tanh);
  Linear::create(model.params, "att", cfg.hidden, cfg.hidden, rng);
  Linear::create(model.params, "comb", 2 * cfg.hidden, cfg.hidden, rng);
  Linear::create(model.params, "head", cfg.hidden, cfg.action_count + 1, rng);
  model.params.meta()["component"] = "flat_policy";
  model.params.meta()["config"] = cfg.to_json();
  return model;
}

double flat_policy_loss(FlatPolicy& model, const Demonstration& cond,
                        const Demonstration& target) {
  if (target.actions.empty()) throw InputError("flat policy: target demo has no action labels");
  Nets nets = Nets::attach(model);
  Tape tape;
  VarCache cache;
  std::vector<Var> enc_states = encode_frames(tape, cache, model, nets, cond.observations);
  std::vector<Var> losses;
  for (std::size_t t = 0; t <= target.actions.size(); ++t) {
    int label = t < target.actions.size() ? target.actions[t] : model.stop_symbol();
    Var logits = act_logits(tape, cache, model, nets, enc_states, target.observations[t]);
    losses.push_back(tape.softmax_cross_entropy(logits, label));
  }
  Var loss = tape.mean(losses);
  tape.backward(loss);
  return tape.scalar(loss);
}

FlatPolicy flat_policy_train(const std::vector<std::vector<Demonstration>>& demos_by_task,
                             FlatPolicyConfig cfg, std::vector<TrainLogRow>* log) {
  std::vector<std::pair<const Demonstration*, const Demonstration*>> pairs;
  for (const auto& demos : demos_by_task)
    for (std::size_t i = 0; i < demos.size(); ++i)
      for (std::size_t j = 0; j < demos.size(); ++j)
        if (i != j || demos.size() == 1) pairs.emplace_back(&demos[i], &demos[j]);
  if (pairs.empty()) throw InputError("flat policy: no training pairs");

  FlatPolicy model = make_flat_policy(cfg);
  Optimizer opt({OptimizerKind::Adam, cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  Rng shuffler(derive_seed(cfg.seed, "flat-shuffle"));
  std::vector<int> order(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) order[i] = static_cast<int>(i);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double total = 0.0;
    for (int i : order) {
      total += flat_policy_loss(model, *pairs[i].first, *pairs[i].second);
      opt.step(model.params);
    }
    if (log) log->push_back({epoch, total / static_cast<double>(pairs.size()), 0.0});
  }
  return model;
}

FlatContext flat_encode(const FlatPolicy& model_in, const Demonstration& demo) {
  FlatPolicy& model = const_cast<FlatPolicy&>(model_in);
  Nets nets = Nets::attach(model);
  Tape tape;
  VarCache cache;
  FlatContext ctx;
  for (Var h : encode_frames(tape, cache, model, nets, demo.observations))
    ctx.enc_states.push_back(tape.value(h));
  return ctx;
}

int flat_policy_act(const FlatPolicy& model_in, const FlatContext& ctx,
                    const std::vector<double>& obs) {
  FlatPolicy& model = const_cast<FlatPolicy&>(model_in);
  Nets nets = Nets::attach(model);
  Tape tape;
  VarCache cache;
  std::vector<Var> enc_states;
  enc_states.reserve(ctx.enc_states.size());
  for (const auto& h : ctx.enc_states) enc_states.push_back(tape.input(h));
  Var logits = act_logits(tape, cache, model, nets, enc_states, obs);
  return argmax_first(tape.value(logits));
}

RolloutResult flat_rollout(const FlatPolicy& model, const Env& env, const TaskSpec& task,
                           const Demonstration& demo, std::uint64_t seed, int max_steps) {
  if (max_steps < 1) throw InputError("flat_rollout: max_steps must be >= 1");
  RolloutResult result;
  FlatContext ctx = flat_encode(model, demo);
  auto [state, obs] = env.reset(task, seed);
  if (env.check_success(state, task)) {
    result.success = true;
    return result;
  }
  int consecutive_invalid = 0;
  for (int t = 0; t < max_steps; ++t) {
    int action = flat_policy_act(model, ctx, obs.features);
    if (action == model.stop_symbol()) {
      result.failure = "stopped";
      break;
    }
    auto [next, next_obs, status] = env.step(state, action, task);
    result.steps.push_back({0, -1, action, status});
    state = std::move(next);
    obs = std::move(next_obs);
    if (status == StepStatus::Goal) {
      result.success = true;
      return result;
    }
    if (status == StepStatus::Invalid) {
      if (++consecutive_invalid >= 3) {
        result.failure = "invalid_loop";
        return result;
      }
    } else {
      consecutive_invalid = 0;
    }
  }
  result.success = env.check_success(state, task);
  if (result.success) result.failure.clear();
  else if (result.failure.empty()) result.failure = "step_budget";
  return result;
}

bool flat_sequence_exact(const FlatPolicy& model, const Demonstration& cond,
                         const Demonstration& target) {
  FlatContext ctx = flat_encode(model, cond);
  for (std::size_t t = 0; t < target.actions.size(); ++t)
    if (flat_policy_act(model, ctx, target.observations[t]) != target.actions[t]) return false;
  return flat_policy_act(model, ctx, target.observations.back()) == model.stop_symbol();
}

void FlatPolicy::save(const std::string& path) const { save_checkpoint(params, path); }

FlatPolicy FlatPolicy::load(const std::string& path) {
  ModuleParams params = load_checkpoint(path);
  auto it = params.meta().find("config");
  if (it == params.meta().end()) throw IoError("flat policy checkpoint missing config meta");
  return FlatPolicy{FlatPolicyConfig::from_json(it->second), std::move(params)};
}

}  // namespace ntg
