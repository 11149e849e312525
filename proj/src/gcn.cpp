#include "ntg/gcn.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ntg/nn.hpp"
#include "ntg/optim.hpp"

namespace ntg {

namespace {

int table_row(int action) { return action == kStartAction ? 0 : action + 1; }

struct GcnNets {
  Mlp f_set, f_reset, f_fwd, f_bwd;
  GruCell prop;

  static GcnNets attach(const Gcn& model) {
    return GcnNets{
        Mlp::attach(model.params, "set", 2, Activation::Tanh, Activation::Sigmoid),
        Mlp::attach(model.params, "reset", 2, Activation::Tanh, Activation::Sigmoid),
        Mlp::attach(model.params, "fwd", 1, Activation::Tanh, Activation::Tanh),
        Mlp::attach(model.params, "bwd", 1, Activation::Tanh, Activation::Tanh),
        GruCell::attach(model.params, "prop")};
  }
};

struct Unrolled {
  std::vector<Var> adj;         // n*n edge-strength vars after T iterations
  std::vector<Var> embeddings;  // n node embeddings after T iterations
};

// The unrolled recurrence. Both the edge update and the propagation messages
// read the pre-update adjacency C^t. The START column is structurally zero.
Unrolled unroll(Tape& tape, VarCache& cache, Gcn& model, const std::vector<int>& node_actions,
                const std::vector<double>& adjacency,
                const std::optional<double>& force_set, const std::optional<double>& force_reset) {
  const GcnConfig& cfg = model.cfg;
  GcnNets nets = GcnNets::attach(model);
  int n = static_cast<int>(node_actions.size());
  if (static_cast<int>(adjacency.size()) != n * n)
    throw InputError("gcn: adjacency size mismatch");

  std::vector<int> start_col(n, 0);
  for (int i = 0; i < n; ++i) start_col[i] = node_actions[i] == kStartAction ? 1 : 0;

  Unrolled state;
  state.adj.reserve(static_cast<std::size_t>(n) * n);
  for (double v : adjacency) state.adj.push_back(tape.constant(v));
  for (int i = 0; i < n; ++i) {
    int row = table_row(node_actions[i]);
    if (row >= cfg.action_count + 1) throw InputError("gcn: action id outside embedding table");
    state.embeddings.push_back(embedding_row(tape, cache, model.params, "ne", cfg.embed, row));
  }

  for (int t = 0; t < cfg.iterations; ++t) {
    // edge update from (C^t, N^t)
    std::vector<Var> next_adj(state.adj);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (start_col[j]) continue;  // no edges into START
        Var pair = tape.concat({state.embeddings[i], state.embeddings[j]});
        Var s = force_set ? tape.constant(*force_set)
                          : nets.f_set.apply(tape, cache, model.params, pair);
        Var r = force_reset ? tape.constant(*force_reset)
                            : nets.f_reset.apply(tape, cache, model.params, pair);
        Var c = state.adj[i * n + j];
        Var one_minus_c = tape.add_const(tape.scale(c, -1.0), 1.0);
        next_adj[i * n + j] = tape.add(tape.mul(one_minus_c, s), tape.mul(c, r));
      }
    // propagation from (C^t, N^t)
    std::vector<Var> fwd_msg(n), bwd_msg(n);
    for (int j = 0; j < n; ++j) {
      fwd_msg[j] = nets.f_fwd.apply(tape, cache, model.params, state.embeddings[j]);
      bwd_msg[j] = nets.f_bwd.apply(tape, cache, model.params, state.embeddings[j]);
    }
    std::vector<Var> next_emb(n);
    for (int i = 0; i < n; ++i) {
      Var msg = tape.input(std::vector<double>(cfg.embed, 0.0));
      for (int j = 0; j < n; ++j) {
        msg = tape.add(msg, tape.mul_scalar(state.adj[i * n + j], fwd_msg[j]));
        msg = tape.add(msg, tape.mul_scalar(state.adj[j * n + i], bwd_msg[j]));
      }
      next_emb[i] = nets.prop.apply(tape, cache, model.params, msg, state.embeddings[i]);
    }
    state.adj = std::move(next_adj);
    state.embeddings = std::move(next_emb);
  }
  return state;
}

GcnForwardResult run_forward(const Gcn& model_in, const std::vector<int>& node_actions,
                             const std::vector<double>& adjacency,
                             const std::optional<double>& force_set,
                             const std::optional<double>& force_reset) {
  Gcn& model = const_cast<Gcn&>(model_in);
  Tape tape;
  VarCache cache;
  Unrolled u = unroll(tape, cache, model, node_actions, adjacency, force_set, force_reset);
  GcnForwardResult out;
  out.node_actions = node_actions;
  out.soft_adj.reserve(u.adj.size());
  for (Var v : u.adj) out.soft_adj.push_back(tape.scalar(v));
  for (Var e : u.embeddings) out.node_embeddings.push_back(tape.value(e));
  return out;
}

std::vector<int> graph_nodes(const ConjugateTaskGraph& g) {
  std::vector<int> nodes = {kStartAction};
  nodes.insert(nodes.end(), g.actions.begin(), g.actions.end());
  return nodes;
}

bool subgraph_of(const ConjugateTaskGraph& path, const ConjugateTaskGraph& target) {
  int n = path.node_count();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (path.adj[i * n + j] == 0.0) continue;
      int ti = target.node_of(path.action_of(i));
      int tj = target.node_of(path.action_of(j));
      if (ti < 0 || tj < 0 || target.at(ti, tj) == 0.0) return false;
    }
  return true;
}

}  // namespace

std::string GcnConfig::to_json() const {
  nlohmann::ordered_json j{{"action_count", action_count}, {"embed", embed},
                           {"gate_hidden", gate_hidden},   {"iterations", iterations},
                           {"threshold", threshold},       {"epochs", epochs},
                           {"lr", lr},                     {"grad_clip", grad_clip},
                           {"seed", seed}};
  return j.dump();
}

GcnConfig GcnConfig::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  GcnConfig c;
  c.action_count = j.at("action_count").get<int>();
  c.embed = j.at("embed").get<int>();
  c.gate_hidden = j.at("gate_hidden").get<int>();
  c.iterations = j.at("iterations").get<int>();
  c.threshold = j.at("threshold").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Gcn make_gcn(const GcnConfig& cfg) {
  if (cfg.action_count <= 0) throw ConfigError("gcn: action_count must be set");
  if (cfg.iterations < 0) throw ConfigError("gcn: iterations must be >= 0");
  Gcn model{cfg, ModuleParams(cfg.seed)};
  Rng rng(derive_seed(cfg.seed, "gcn-init"));
  model.params.add_matrix("ne", cfg.action_count + 1, cfg.embed, rng);
  Mlp::create(model.params, "set", {2 * cfg.embed, cfg.gate_hidden, 1}, rng, Activation::Tanh,
              Activation::Sigmoid);
  Mlp::create(model.params, "reset", {2 * cfg.embed, cfg.gate_hidden, 1}, rng, Activation::Tanh,
              Activation::Sigmoid);
  Mlp::create(model.params, "fwd", {cfg.embed, cfg.embed}, rng, Activation::Tanh, Activation::Tanh);
  Mlp::create(model.params, "bwd", {cfg.embed, cfg.embed}, rng, Activation::Tanh, Activation::Tanh);
  GruCell::create(model.params, "prop", cfg.embed, cfg.embed, rng);
  model.params.meta()["component"] = "gcn";
  model.params.meta()["config"] = cfg.to_json();
  return model;
}

GcnForwardResult gcn_forward(const Gcn& model, const ConjugateTaskGraph& path) {
  return run_forward(model, graph_nodes(path), path.adj, std::nullopt, std::nullopt);
}

GcnForwardResult gcn_forward_raw(const Gcn& model, const std::vector<int>& node_actions,
                                 const std::vector<double>& adjacency) {
  return run_forward(model, node_actions, adjacency, std::nullopt, std::nullopt);
}

GcnForwardResult gcn_forward_forced(const Gcn& model, const ConjugateTaskGraph& path,
                                    std::optional<double> set_value,
                                    std::optional<double> reset_value) {
  return run_forward(model, graph_nodes(path), path.adj, set_value, reset_value);
}

CompletionResult complete_graph(const Gcn& model, const ConjugateTaskGraph& path,
                                std::optional<double> threshold) {
  double thr = threshold.value_or(model.cfg.threshold);
  if (thr <= 0.0 || thr > 1.0) throw InputError("complete: threshold must be in (0, 1]");
  CompletionResult out;
  out.forward = gcn_forward(model, path);
  out.graph = path;
  int n = path.node_count();
  for (int i = 0; i < n; ++i)
    for (int j = 1; j < n; ++j) {  // START column stays zero
      double soft = out.forward.soft_adj[i * n + j];
      if (soft >= thr || path.adj[i * n + j] > 0.0) out.graph.adj[i * n + j] = 1.0;
    }
  return out;
}

double gcn_loss(Gcn& model, const GcnTrainingPair& pair) {
  if (pair.path.actions != pair.target.actions)
    throw DataError("gcn: path and target must share one node universe");
  if (!subgraph_of(pair.path, pair.target))
    throw DataError("gcn: input path is not a subgraph of its target");
  Tape tape;
  VarCache cache;
  Unrolled u =
      unroll(tape, cache, model, graph_nodes(pair.path), pair.path.adj, std::nullopt, std::nullopt);
  int n = pair.path.node_count();
  std::vector<Var> losses;
  for (int i = 0; i < n; ++i)
    for (int j = 1; j < n; ++j) {
      int y = pair.target.adj[i * n + j] > 0.0 ? 1 : 0;
      losses.push_back(tape.binary_cross_entropy(u.adj[i * n + j], y));
    }
  Var loss = tape.mean(losses);
  tape.backward(loss);
  return tape.scalar(loss);
}

Gcn train_gcn(const std::vector<GcnTrainingPair>& pairs, GcnConfig cfg,
              std::vector<TrainLogRow>* log) {
  if (pairs.empty()) throw InputError("gcn: no training pairs");
  Gcn model = make_gcn(cfg);
  Optimizer opt({OptimizerKind::Adam, cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  Rng shuffler(derive_seed(cfg.seed, "gcn-shuffle"));
  std::vector<int> order(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double total = 0.0;
    for (int i : order) {
      total += gcn_loss(model, pairs[i]);
      opt.step(model.params);
    }
    if (log) {
      double f1 = 0.0;
      for (const auto& p : pairs)
        f1 += edge_score(complete_graph(model, p.path).graph, p.target).f1;
      log->push_back({epoch, total / static_cast<double>(pairs.size()),
                      f1 / static_cast<double>(pairs.size())});
    }
  }
  return model;
}

EdgeScore edge_score(const ConjugateTaskGraph& predicted, const ConjugateTaskGraph& target) {
  int tp = 0, fp = 0, fn = 0;
  int n = predicted.node_count();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      bool pred = predicted.adj[i * n + j] > 0.0;
      int ti = target.node_of(predicted.action_of(i));
      int tj = target.node_of(predicted.action_of(j));
      bool truth = ti >= 0 && tj >= 0 && target.at(ti, tj) > 0.0;
      if (pred && truth) ++tp;
      if (pred && !truth) ++fp;
    }
  int m = target.node_count();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (target.adj[i * m + j] == 0.0) continue;
      int pi = predicted.node_of(target.action_of(i));
      int pj = predicted.node_of(target.action_of(j));
      if (pi < 0 || pj < 0 || predicted.at(pi, pj) == 0.0) ++fn;
    }
  EdgeScore s;
  s.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
  s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

void Gcn::save(const std::string& path) const { save_checkpoint(params, path); }

Gcn Gcn::load(const std::string& path) {
  ModuleParams params = load_checkpoint(path);
  auto it = params.meta().find("config");
  if (it == params.meta().end()) throw IoError("gcn checkpoint missing config meta");
  return Gcn{GcnConfig::from_json(it->second), std::move(params)};
}

}  // namespace ntg
