#include "ntg/executor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <map>

#include <json.hpp>

#include "ntg/nn.hpp"
#include "ntg/optim.hpp"

namespace ntg {

namespace {

Var encode_obs(Tape& tape, VarCache& cache, const Localizer& model_in,
               const std::vector<double>& obs) {
  Localizer& model = const_cast<Localizer&>(model_in);
  if (static_cast<int>(obs.size()) != model.cfg.obs_width)
    throw InputError("localizer: observation width mismatch");
  Mlp enc = Mlp::attach(model.params, "enc", 2, Activation::Tanh, Activation::Tanh);
  return enc.apply(tape, cache, model.params, tape.input(obs));
}

Var node_embedding(Tape& tape, VarCache& cache, const Localizer& model_in, int action) {
  Localizer& model = const_cast<Localizer&>(model_in);
  int row = action == kStartAction ? 0 : action + 1;
  return embedding_row(tape, cache, model.params, "ne", model.cfg.embed, row);
}

Var localize_logits(Tape& tape, VarCache& cache, const Localizer& model,
                    const ConjugateTaskGraph& graph, const std::vector<double>& obs) {
  Var enc = encode_obs(tape, cache, model, obs);
  std::vector<Var> scores;
  scores.reserve(graph.node_count());
  for (int node = 0; node < graph.node_count(); ++node)
    scores.push_back(tape.dot(enc, node_embedding(tape, cache, model, graph.action_of(node))));
  return tape.stack(scores);
}

Var edge_logits(Tape& tape, VarCache& cache, const EdgeClassifier& model_in,
                const Localizer& localizer, const ConjugateTaskGraph& graph,
                const NodeEmbeddings& embeddings, int node, const std::vector<double>& obs,
                const std::vector<int>& cand_nodes) {
  EdgeClassifier& model = const_cast<EdgeClassifier&>(model_in);
  if (node < 0 || node >= graph.node_count()) throw InputError("classify_edge: unknown node");
  Var enc = encode_obs(tape, cache, localizer, obs);
  Var g = tape.input(embeddings.at(node));
  Var w = cache.get(tape, model.params.at("W"));
  int out_w = model.cfg.loc_embed, in_w = model.cfg.loc_embed + model.cfg.gcn_embed;
  Var proj = tape.matvec(w, out_w, in_w, tape.concat({enc, g}));
  std::vector<Var> scores;
  scores.reserve(cand_nodes.size());
  for (int cand : cand_nodes)
    scores.push_back(tape.dot(proj, node_embedding(tape, cache, localizer, graph.action_of(cand))));
  return tape.stack(scores);
}

int argmax_first(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::size_t hash_features(const std::vector<double>& v) {
  std::size_t h = 1469598103934665603ULL;
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    h = (h ^ bits) * 1099511628211ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// Localizer

std::string LocalizerConfig::to_json() const {
  nlohmann::ordered_json j{{"obs_width", obs_width}, {"action_count", action_count},
                           {"enc_hidden", enc_hidden}, {"embed", embed},
                           {"epochs", epochs},       {"batch", batch},
                           {"full_vocab_negatives", full_vocab_negatives},
                           {"lr", lr},
                           {"grad_clip", grad_clip}, {"seed", seed}};
  return j.dump();
}

LocalizerConfig LocalizerConfig::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  LocalizerConfig c;
  c.obs_width = j.at("obs_width").get<int>();
  c.action_count = j.at("action_count").get<int>();
  c.enc_hidden = j.at("enc_hidden").get<int>();
  c.embed = j.at("embed").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.batch = j.value("batch", 1);
  c.full_vocab_negatives = j.value("full_vocab_negatives", true);
  c.lr = j.at("lr").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Localizer make_localizer(const LocalizerConfig& cfg) {
  if (cfg.obs_width <= 0 || cfg.action_count <= 0)
    throw ConfigError("localizer: obs_width and action_count must be set");
  Localizer model{cfg, ModuleParams(cfg.seed)};
  Rng rng(derive_seed(cfg.seed, "localizer-init"));
  Mlp::create(model.params, "enc", {cfg.obs_width, cfg.enc_hidden, cfg.embed}, rng,
              Activation::Tanh, Activation::Tanh);
  model.params.add_matrix("ne", cfg.action_count + 1, cfg.embed, rng);
  model.params.meta()["component"] = "localizer";
  model.params.meta()["config"] = cfg.to_json();
  return model;
}

double localizer_loss(Localizer& model, const ConjugateTaskGraph& graph,
                      const FrameSample& sample) {
  Tape tape;
  VarCache cache;
  Var loss;
  if (model.cfg.full_vocab_negatives) {
    Var enc = encode_obs(tape, cache, model, sample.obs);
    std::vector<Var> scores;
    scores.reserve(model.cfg.action_count + 1);
    for (int row = 0; row <= model.cfg.action_count; ++row)
      scores.push_back(
          tape.dot(enc, embedding_row(tape, cache, model.params, "ne", model.cfg.embed, row)));
    int action = graph.action_of(sample.node);
    int target_row = action == kStartAction ? 0 : action + 1;
    loss = tape.softmax_cross_entropy(tape.stack(scores), target_row);
  } else {
    Var logits = localize_logits(tape, cache, model, graph, sample.obs);
    loss = tape.softmax_cross_entropy(logits, sample.node);
  }
  tape.backward(loss);
  return tape.scalar(loss);
}

Localizer train_localizer(const std::vector<ConjugateTaskGraph>& graphs,
                          const std::vector<FrameSample>& frames, LocalizerConfig cfg,
                          std::vector<TrainLogRow>* log) {
  if (frames.empty()) throw InputError("localizer: no training frames");
  Localizer model = make_localizer(cfg);
  Optimizer opt({OptimizerKind::Adam, cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  Rng shuffler(derive_seed(cfg.seed, "localizer-shuffle"));
  std::vector<int> order(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) order[i] = static_cast<int>(i);
  int batch = std::max(1, cfg.batch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double total = 0.0;
    int pending = 0;
    for (int i : order) {
      total += localizer_loss(model, graphs.at(frames[i].graph_id), frames[i]);
      if (++pending == batch) {
        opt.step(model.params);
        pending = 0;
      }
    }
    if (pending > 0) opt.step(model.params);
    if (log)
      log->push_back({epoch, total / static_cast<double>(frames.size()),
                      localizer_accuracy(model, graphs, frames)});
  }
  return model;
}

std::vector<double> localize(const Localizer& model, const std::vector<double>& obs,
                             const ConjugateTaskGraph& graph) {
  Tape tape;
  VarCache cache;
  Var logits = localize_logits(tape, cache, model, graph, obs);
  return tape.value(tape.softmax(logits));
}

double localizer_accuracy(const Localizer& model, const std::vector<ConjugateTaskGraph>& graphs,
                          const std::vector<FrameSample>& frames) {
  if (frames.empty()) return 0.0;
  int hits = 0;
  for (const auto& f : frames)
    if (argmax_first(localize(model, f.obs, graphs.at(f.graph_id))) == f.node) ++hits;
  return static_cast<double>(hits) / static_cast<double>(frames.size());
}

void Localizer::save(const std::string& path) const { save_checkpoint(params, path); }

Localizer Localizer::load(const std::string& path) {
  ModuleParams params = load_checkpoint(path);
  auto it = params.meta().find("config");
  if (it == params.meta().end()) throw IoError("localizer checkpoint missing config meta");
  return Localizer{LocalizerConfig::from_json(it->second), std::move(params)};
}

// ---------------------------------------------------------------------------
// Edge classifier

std::string EdgeClassifierConfig::to_json() const {
  nlohmann::ordered_json j{{"loc_embed", loc_embed}, {"gcn_embed", gcn_embed},
                           {"epochs", epochs},       {"batch", batch},
                           {"lr", lr},
                           {"grad_clip", grad_clip}, {"seed", seed}};
  return j.dump();
}

EdgeClassifierConfig EdgeClassifierConfig::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  EdgeClassifierConfig c;
  c.loc_embed = j.at("loc_embed").get<int>();
  c.gcn_embed = j.at("gcn_embed").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.batch = j.value("batch", 1);
  c.lr = j.at("lr").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

EdgeClassifier make_edge_classifier(const EdgeClassifierConfig& cfg) {
  if (cfg.loc_embed <= 0 || cfg.gcn_embed <= 0)
    throw ConfigError("edge classifier: embedding widths must be set");
  EdgeClassifier model{cfg, ModuleParams(cfg.seed)};
  Rng rng(derive_seed(cfg.seed, "edge-init"));
  model.params.add_matrix("W", cfg.loc_embed, cfg.loc_embed + cfg.gcn_embed, rng);
  model.params.meta()["component"] = "edge_classifier";
  model.params.meta()["config"] = cfg.to_json();
  return model;
}

EdgeDistribution classify_edge(const EdgeClassifier& model, const Localizer& localizer,
                               const ConjugateTaskGraph& graph, const NodeEmbeddings& embeddings,
                               int node, const std::vector<double>& obs) {
  EdgeDistribution out;
  std::vector<int> cand_nodes = outgoing_nodes(graph, node);
  for (int c : cand_nodes) out.candidates.push_back(graph.action_of(c));
  if (cand_nodes.empty()) return out;
  Tape tape;
  VarCache cache;
  Var logits = edge_logits(tape, cache, model, localizer, graph, embeddings, node, obs, cand_nodes);
  out.probs = tape.value(tape.softmax(logits));
  return out;
}

double edge_classifier_loss(EdgeClassifier& model, const Localizer& localizer,
                            const ConjugateTaskGraph& graph, const NodeEmbeddings& embeddings,
                            const TransitionSample& sample) {
  if (static_cast<int>(embeddings.size()) != graph.node_count())
    throw DataError("edge classifier: embedding set does not match the graph");
  std::vector<int> cand_nodes = outgoing_nodes(graph, sample.node);
  auto it = std::find(cand_nodes.begin(), cand_nodes.end(), sample.label_node);
  if (it == cand_nodes.end())
    throw DataError("edge classifier: label is not among the node's outgoing edges");
  Tape tape;
  VarCache cache;
  Var logits =
      edge_logits(tape, cache, model, localizer, graph, embeddings, sample.node, sample.obs, cand_nodes);
  Var loss = tape.softmax_cross_entropy(logits, static_cast<int>(it - cand_nodes.begin()));
  tape.backward(loss);
  return tape.scalar(loss);
}

EdgeClassifier train_edge_classifier(const std::vector<ConjugateTaskGraph>& graphs,
                                     const std::vector<NodeEmbeddings>& embeddings,
                                     const std::vector<TransitionSample>& transitions,
                                     const Localizer& localizer, EdgeClassifierConfig cfg,
                                     std::vector<TrainLogRow>* log,
                                     const std::vector<FrameSample>* maintenance_frames) {
  if (transitions.empty()) throw InputError("edge classifier: no training transitions");
  EdgeClassifier model = make_edge_classifier(cfg);
  Optimizer opt({OptimizerKind::Adam, cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  Optimizer loc_opt({OptimizerKind::Adam, cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  Rng shuffler(derive_seed(cfg.seed, "edge-shuffle"));
  // Multitask fine-tuning of the shared localizer parameters: gradients from
  // the edge objective and from interleaved localizer samples accumulate into
  // one update per tensor, so neither head drifts away from the other.
  // Without maintenance frames the shared parameters stay frozen instead.
  Localizer& shared = const_cast<Localizer&>(localizer);
  std::vector<int> order(transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) order[i] = static_cast<int>(i);
  std::vector<int> frame_order;
  if (maintenance_frames)
    for (std::size_t i = 0; i < maintenance_frames->size(); ++i)
      frame_order.push_back(static_cast<int>(i));
  std::size_t frame_cursor = 0;
  int batch = std::max(1, cfg.batch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double total = 0.0;
    int pending = 0;
    auto flush = [&] {
      if (!frame_order.empty()) {
        for (int b = 0; b < pending; ++b) {
          if (frame_cursor == 0) shuffler.shuffle(frame_order);
          const FrameSample& f = (*maintenance_frames)[frame_order[frame_cursor]];
          frame_cursor = (frame_cursor + 1) % frame_order.size();
          localizer_loss(shared, graphs.at(f.graph_id), f);
        }
        loc_opt.step(shared.params);
      } else {
        shared.params.zero_grad();
      }
      opt.step(model.params);
      pending = 0;
    };
    for (int i : order) {
      const auto& s = transitions[i];
      total += edge_classifier_loss(model, localizer, graphs.at(s.graph_id),
                                    embeddings.at(s.emb_id >= 0 ? s.emb_id : s.graph_id), s);
      if (++pending == batch) flush();
    }
    if (pending > 0) flush();
    if (log)
      log->push_back({epoch, total / static_cast<double>(transitions.size()),
                      edge_classifier_accuracy(model, localizer, graphs, embeddings, transitions)});
  }
  return model;
}

double edge_classifier_accuracy(const EdgeClassifier& model, const Localizer& localizer,
                                const std::vector<ConjugateTaskGraph>& graphs,
                                const std::vector<NodeEmbeddings>& embeddings,
                                const std::vector<TransitionSample>& transitions) {
  if (transitions.empty()) return 0.0;
  int hits = 0;
  for (const auto& s : transitions) {
    const auto& graph = graphs.at(s.graph_id);
    EdgeDistribution d = classify_edge(model, localizer, graph,
                                       embeddings.at(s.emb_id >= 0 ? s.emb_id : s.graph_id),
                                       s.node, s.obs);
    if (d.candidates.empty()) continue;
    if (d.candidates[argmax_first(d.probs)] == graph.action_of(s.label_node)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(transitions.size());
}

void EdgeClassifier::save(const std::string& path) const { save_checkpoint(params, path); }

EdgeClassifier EdgeClassifier::load(const std::string& path) {
  ModuleParams params = load_checkpoint(path);
  auto it = params.meta().find("config");
  if (it == params.meta().end()) throw IoError("edge classifier checkpoint missing config meta");
  return EdgeClassifier{EdgeClassifierConfig::from_json(it->second), std::move(params)};
}

// ---------------------------------------------------------------------------
// Policy

StepDecision policy_step(const PolicyBundle& bundle, const std::vector<double>& obs) {
  StepDecision out;
  int n = bundle.graph.node_count();
  if (bundle.uniform_localizer) {
    out.node_probs.assign(n, 1.0 / n);
  } else {
    out.node_probs = localize(*bundle.localizer, obs, bundle.graph);
  }
  out.node = argmax_first(out.node_probs);  // ties fall to the lowest node (START first)

  std::vector<int> cand_nodes = outgoing_nodes(bundle.graph, out.node);
  if (cand_nodes.empty()) {
    out.dead_end = true;
    return out;
  }
  if (bundle.uniform_edges) {
    for (int c : cand_nodes) out.edges.candidates.push_back(bundle.graph.action_of(c));
    out.edges.probs.assign(cand_nodes.size(), 1.0 / static_cast<double>(cand_nodes.size()));
  } else {
    out.edges = classify_edge(*bundle.edge, *bundle.localizer, bundle.graph,
                              bundle.gcn_embeddings, out.node, obs);
  }
  out.action = out.edges.candidates[argmax_first(out.edges.probs)];
  return out;
}

RolloutResult rollout(const PolicyBundle& bundle, const Env& env, const TaskSpec& task,
                      std::uint64_t seed, int max_steps, const std::optional<EnvState>& start) {
  if (max_steps < 1) throw InputError("rollout: max_steps must be >= 1");
  RolloutResult result;
  EnvState state;
  std::vector<double> obs;
  if (start) {
    state = *start;
    obs = env.featurize(state).features;
  } else {
    auto [s, o] = env.reset(task, seed);
    state = std::move(s);
    obs = std::move(o.features);
  }
  if (env.check_success(state, task)) {
    result.success = true;
    return result;
  }
  int consecutive_invalid = 0;
  for (int t = 0; t < max_steps; ++t) {
    StepDecision decision = policy_step(bundle, obs);
    if (decision.dead_end) {
      result.failure = "dead_end";
      return result;
    }
    auto [next, next_obs, status] = env.step(state, decision.action, task);
    result.steps.push_back({hash_features(obs), decision.node, decision.action, status});
    state = std::move(next);
    obs = std::move(next_obs.features);
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
  if (!result.success) result.failure = "step_budget";
  return result;
}

double nll_of_demo(const PolicyBundle& bundle, const Demonstration& demo, double floor) {
  if (demo.actions.empty()) throw InputError("nll_of_demo: demo has no action labels");
  if (demo.observations.size() != demo.actions.size() + 1)
    throw InputError("nll_of_demo: demo observations misaligned");
  double nll = 0.0;
  int prev_action = kStartAction;
  for (std::size_t t = 0; t < demo.actions.size(); ++t) {
    int action = demo.actions[t];
    double p = floor;
    int node = bundle.graph.node_of(prev_action);
    if (node >= 0) {
      std::vector<int> cand_nodes = outgoing_nodes(bundle.graph, node);
      if (!cand_nodes.empty()) {
        if (bundle.uniform_edges) {
          for (int c : cand_nodes)
            if (bundle.graph.action_of(c) == action)
              p = 1.0 / static_cast<double>(cand_nodes.size());
        } else {
          EdgeDistribution d = classify_edge(*bundle.edge, *bundle.localizer, bundle.graph,
                                             bundle.gcn_embeddings, node, demo.observations[t]);
          for (std::size_t k = 0; k < d.candidates.size(); ++k)
            if (d.candidates[k] == action) p = d.probs[k];
        }
      }
    }
    nll += -std::log(std::max(p, floor));
    prev_action = action;  // teacher forcing fixes the node
  }
  return nll;
}

double uniform_nll_closed_form(const ConjugateTaskGraph& graph, const std::vector<int>& actions,
                               double floor) {
  double nll = 0.0;
  int prev_action = kStartAction;
  for (int action : actions) {
    int node = graph.node_of(prev_action);
    bool scored = false;
    if (node >= 0) {
      auto cand = outgoing(graph, prev_action);
      if (std::find(cand.begin(), cand.end(), action) != cand.end()) {
        nll += std::log(static_cast<double>(cand.size()));
        scored = true;
      }
    }
    if (!scored) nll += -std::log(floor);
    prev_action = action;
  }
  return nll;
}

ConjugateTaskGraph fully_connected_graph(std::vector<int> actions, int task_id) {
  ConjugateTaskGraph g;
  g.task_id = task_id;
  g.soft = false;
  std::sort(actions.begin(), actions.end());
  actions.erase(std::unique(actions.begin(), actions.end()), actions.end());
  g.actions = std::move(actions);
  int n = g.node_count();
  g.adj.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 1; j < n; ++j) g.adj[i * n + j] = 1.0;
  return g;
}

// ---------------------------------------------------------------------------
// Ground-truth executor

namespace {

// BFS distance from `state` to any success state; -1 when unreachable within
// the budget. Small worlds only.
int distance_to_goal(const Env& env, const TaskSpec& task, const EnvState& state,
                     std::size_t budget = 100000) {
  if (env.check_success(state, task)) return 0;
  std::map<std::string, int> seen;
  std::deque<std::pair<EnvState, int>> queue;
  seen.emplace(env.state_key(state), 0);
  queue.emplace_back(state, 0);
  while (!queue.empty()) {
    auto [cur, d] = std::move(queue.front());
    queue.pop_front();
    for (int a = 0; a < env.action_count(); ++a) {
      auto [next, obs, status] = env.step(cur, a, task);
      if (status == StepStatus::Invalid) continue;
      if (status == StepStatus::Goal) return d + 1;
      std::string key = env.state_key(next);
      if (seen.count(key)) continue;
      if (seen.size() >= budget) throw OracleError("distance_to_goal: state budget exceeded");
      seen.emplace(std::move(key), d + 1);
      queue.emplace_back(std::move(next), d + 1);
    }
  }
  return -1;
}

}  // namespace

RolloutResult oracle_rollout(const Env& env, const TaskSpec& task, const ConjugateTaskGraph& graph,
                             std::uint64_t seed, int max_steps) {
  RolloutResult result;
  auto [state, obs0] = env.reset(task, seed);
  if (env.check_success(state, task)) {
    result.success = true;
    return result;
  }
  int prev_action = kStartAction;
  for (int t = 0; t < max_steps; ++t) {
    int node = graph.node_of(prev_action);
    if (node < 0) {
      result.failure = "dead_end";
      return result;
    }
    int dist = distance_to_goal(env, task, state);
    int choice = -1;
    for (int cand : outgoing(graph, prev_action)) {
      auto [next, obs, status] = env.step(state, cand, task);
      if (status == StepStatus::Invalid) continue;
      int d = status == StepStatus::Goal ? 0 : distance_to_goal(env, task, next);
      if (d >= 0 && d < dist) {
        choice = cand;
        break;  // candidates are ascending, take the lowest qualifying id
      }
    }
    if (choice < 0) {
      result.failure = "dead_end";
      return result;
    }
    auto [next, obs, status] = env.step(state, choice, task);
    result.steps.push_back({hash_features(obs.features), node, choice, status});
    state = std::move(next);
    prev_action = choice;
    if (status == StepStatus::Goal) {
      result.success = true;
      return result;
    }
  }
  result.failure = "step_budget";
  return result;
}

}  // namespace ntg
