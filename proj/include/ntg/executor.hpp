#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntg/ctg.hpp"
#include "ntg/env.hpp"
#include "ntg/gcn.hpp"
#include "ntg/interpreter.hpp"
#include "ntg/tensor.hpp"

namespace ntg {

// ---------------------------------------------------------------------------
// Node localizer: p(node | observation) restricted to a graph's node set,
// softmax over inner products between the encoded observation and per-node
// embeddings (row 0 of the table is START).

struct LocalizerConfig {
  int obs_width = 0;
  int action_count = 0;
  int enc_hidden = 64;
  int embed = 32;  // Enc output width = node embedding width
  int epochs = 15;
  int batch = 1;  // gradient accumulation across samples per update
  // train against the whole action vocabulary instead of the sample's task
  // graph: globally calibrated scores transfer better to unseen node sets
  bool full_vocab_negatives = true;
  double lr = 1e-3;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;

  std::string to_json() const;
  static LocalizerConfig from_json(const std::string& text);
};

struct Localizer {
  LocalizerConfig cfg;
  ModuleParams params;

  void save(const std::string& path) const;
  static Localizer load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Edge classifier: p(next action | node, observation) over the node's
// outgoing edges. Scores are (W [Enc(o); g_node])^T NE_loc(candidate), where
// g_node is the node's final graph-completion embedding.

struct EdgeClassifierConfig {
  int loc_embed = 0;  // width of Enc output / NE_loc rows
  int gcn_embed = 0;  // width of the graph-completion node embeddings
  int epochs = 20;
  int batch = 1;  // gradient accumulation across samples per update
  double lr = 1e-3;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;

  std::string to_json() const;
  static EdgeClassifierConfig from_json(const std::string& text);
};

struct EdgeClassifier {
  EdgeClassifierConfig cfg;
  ModuleParams params;  // single projection matrix "W"

  void save(const std::string& path) const;
  static EdgeClassifier load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Training data: frames for the localizer, transition pairs for the edge
// classifier. Samples index into a shared list of per-task union graphs (and
// their graph-completion embeddings for transitions).

struct FrameSample {
  std::vector<double> obs;
  int graph_id = 0;
  int node = 0;  // target node index (0 = START)
};

struct TransitionSample {
  std::vector<double> obs;
  int graph_id = 0;
  int emb_id = -1;     // completion-embedding set; -1 means use graph_id
  int node = 0;        // current node index
  int label_node = 0;  // demonstrated successor node index
};

Localizer make_localizer(const LocalizerConfig& cfg);
Localizer train_localizer(const std::vector<ConjugateTaskGraph>& graphs,
                          const std::vector<FrameSample>& frames, LocalizerConfig cfg,
                          std::vector<TrainLogRow>* log = nullptr);
double localizer_accuracy(const Localizer& model, const std::vector<ConjugateTaskGraph>& graphs,
                          const std::vector<FrameSample>& frames);
double localizer_loss(Localizer& model, const ConjugateTaskGraph& graph, const FrameSample& sample);

// probabilities over graph nodes, index-aligned with node indices
std::vector<double> localize(const Localizer& model, const std::vector<double>& obs,
                             const ConjugateTaskGraph& graph);

using NodeEmbeddings = std::vector<std::vector<double>>;  // per node of a graph

EdgeClassifier make_edge_classifier(const EdgeClassifierConfig& cfg);
// Trains the projection and fine-tunes the shared observation encoder (the
// graph-completion embeddings stay frozen). When maintenance frames are given,
// localizer steps are interleaved so the shared encoder keeps serving both
// objectives; without them the encoder can drift away from localization.
EdgeClassifier train_edge_classifier(const std::vector<ConjugateTaskGraph>& graphs,
                                     const std::vector<NodeEmbeddings>& embeddings,
                                     const std::vector<TransitionSample>& transitions,
                                     const Localizer& localizer, EdgeClassifierConfig cfg,
                                     std::vector<TrainLogRow>* log = nullptr,
                                     const std::vector<FrameSample>* maintenance_frames = nullptr);
double edge_classifier_accuracy(const EdgeClassifier& model, const Localizer& localizer,
                                const std::vector<ConjugateTaskGraph>& graphs,
                                const std::vector<NodeEmbeddings>& embeddings,
                                const std::vector<TransitionSample>& transitions);
double edge_classifier_loss(EdgeClassifier& model, const Localizer& localizer,
                            const ConjugateTaskGraph& graph, const NodeEmbeddings& embeddings,
                            const TransitionSample& sample);

struct EdgeDistribution {
  std::vector<int> candidates;  // successor action ids, ascending
  std::vector<double> probs;
};

// Distribution over outgoing(graph, node). Throws DeadEnd via empty candidates
// (callers check). `node` is a node index.
EdgeDistribution classify_edge(const EdgeClassifier& model, const Localizer& localizer,
                               const ConjugateTaskGraph& graph, const NodeEmbeddings& embeddings,
                               int node, const std::vector<double>& obs);

// ---------------------------------------------------------------------------
// Policy bundle and execution

struct PolicyBundle {
  ConjugateTaskGraph graph;  // hard graph for the current task
  NodeEmbeddings gcn_embeddings;
  const Localizer* localizer = nullptr;
  const EdgeClassifier* edge = nullptr;
  bool uniform_localizer = false;  // ablation: localizer replaced by a constant
  bool uniform_edges = false;      // ablation: edge classifier replaced by a constant
};

struct StepDecision {
  bool dead_end = false;
  int node = 0;   // localized node index
  int action = -1;
  std::vector<double> node_probs;
  EdgeDistribution edges;
};

StepDecision policy_step(const PolicyBundle& bundle, const std::vector<double>& obs);

struct RolloutStep {
  std::size_t obs_hash = 0;
  int node = 0;
  int action = -1;
  StepStatus status = StepStatus::Ok;
};

struct RolloutResult {
  std::vector<RolloutStep> steps;
  bool success = false;
  std::string failure;  // empty on success; otherwise dead_end / invalid_loop / step_budget
};

// Runs the bundle against the environment until GOAL, a dead end, three
// consecutive INVALID steps, or the step budget. When `start` is given the
// rollout begins there instead of reset(task, seed).
RolloutResult rollout(const PolicyBundle& bundle, const Env& env, const TaskSpec& task,
                      std::uint64_t seed, int max_steps,
                      const std::optional<EnvState>& start = std::nullopt);

// Teacher-forced negative log-likelihood of a labeled demo under the bundle's
// factorized policy; per-step probabilities are floored before the log.
double nll_of_demo(const PolicyBundle& bundle, const Demonstration& demo, double floor = 1e-7);

// Closed form for the uniform policy: sum of ln(outdegree) along the demo.
double uniform_nll_closed_form(const ConjugateTaskGraph& graph, const std::vector<int>& actions,
                               double floor = 1e-7);

// Fully connected graph over the given action set (self-loops included, no
// edges into START): the "no graph" variant and the no-interpreter ablation.
ConjugateTaskGraph fully_connected_graph(std::vector<int> actions, int task_id);

// ---------------------------------------------------------------------------
// Ground-truth machinery (verification only): localizes by the last executed
// action and picks the lowest-id outgoing edge that is valid and strictly
// decreases the BFS distance to the goal.
RolloutResult oracle_rollout(const Env& env, const TaskSpec& task, const ConjugateTaskGraph& graph,
                             std::uint64_t seed, int max_steps);

}  // namespace ntg
