#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntg/ctg.hpp"
#include "ntg/interpreter.hpp"
#include "ntg/tensor.hpp"

namespace ntg {

struct GcnConfig {
  int action_count = 0;  // embedding table rows = action_count + 1 (row 0 = START)
  int embed = 24;
  int gate_hidden = 32;
  int iterations = 3;      // T
  double threshold = 0.5;  // hard binarization level for complete()
  int epochs = 40;
  double lr = 1e-3;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;

  std::string to_json() const;
  static GcnConfig from_json(const std::string& text);
};

// Graph completion network: iterated edge-strength update and node-embedding
// propagation over a demonstrated path. Per node pair the edge strength moves
// to (1-C)*f_set + C*f_reset; per node the embedding is refreshed by a
// recurrent cell fed the C-weighted forward/backward messages. Node
// embeddings are per-action vectors shared across tasks; START has its own
// learned row and participates like any node.
struct Gcn {
  GcnConfig cfg;
  ModuleParams params;

  void save(const std::string& path) const;
  static Gcn load(const std::string& path);
};

struct GcnTrainingPair {
  ConjugateTaskGraph path;    // demonstrated path (hard)
  ConjugateTaskGraph target;  // the task's union graph (hard, same node set)
};

struct GcnForwardResult {
  std::vector<int> node_actions;                     // kStartAction first
  std::vector<double> soft_adj;                      // n*n, entries in [0,1]
  std::vector<std::vector<double>> node_embeddings;  // n rows, final iteration
};

struct CompletionResult {
  ConjugateTaskGraph graph;  // hard: (soft >= threshold) OR path edges
  GcnForwardResult forward;
};

Gcn make_gcn(const GcnConfig& cfg);

GcnForwardResult gcn_forward(const Gcn& model, const ConjugateTaskGraph& path);

// Node order taken as given (used by the permutation-equivariance property
// test); `node_actions` may list kStartAction anywhere.
GcnForwardResult gcn_forward_raw(const Gcn& model, const std::vector<int>& node_actions,
                                 const std::vector<double>& adjacency);

// Gate override hook: forces f_set/f_reset to constants, bypassing the MLPs.
GcnForwardResult gcn_forward_forced(const Gcn& model, const ConjugateTaskGraph& path,
                                    std::optional<double> set_value,
                                    std::optional<double> reset_value);

// Demonstrated edges are always retained regardless of the threshold.
CompletionResult complete_graph(const Gcn& model, const ConjugateTaskGraph& path,
                                std::optional<double> threshold = std::nullopt);

Gcn train_gcn(const std::vector<GcnTrainingPair>& pairs, GcnConfig cfg,
              std::vector<TrainLogRow>* log = nullptr);

// Mean BCE of one pair with gradients accumulated (gradient-check hook).
double gcn_loss(Gcn& model, const GcnTrainingPair& pair);

// Edge precision/recall/F1 of a thresholded soft matrix against a target.
struct EdgeScore {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};
EdgeScore edge_score(const ConjugateTaskGraph& predicted, const ConjugateTaskGraph& target);

}  // namespace ntg
