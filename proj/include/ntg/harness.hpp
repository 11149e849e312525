#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntg/ctg.hpp"
#include "ntg/env.hpp"
#include "ntg/executor.hpp"
#include "ntg/flat_policy.hpp"
#include "ntg/gcn.hpp"
#include "ntg/interpreter.hpp"

namespace ntg {

// ---------------------------------------------------------------------------
// Experiment configuration: one JSON file, exactly reproducible from its
// serialized form; every piece of randomness expands from root_seed.

struct AblationFlags {
  bool no_interpreter = false;
  bool no_localizer = false;
  bool no_edge_classifier = false;
  bool no_gcn = false;
  bool fully_connected_init = false;

  std::string condition_name() const;
};

struct ExperimentConfig {
  std::uint64_t root_seed = 1;
  std::string out_dir = "runs/default";
  // criterion: metrics files must be byte-identical per seed, so the CSV
  // seconds column is written as 0.000 unless timing is explicitly enabled
  bool deterministic_timing = true;

  // block stacking generalization sweep
  int stacking_blocks = 6;
  std::vector<int> stacking_seen_sweep = {50, 100, 200, 400};
  int stacking_unseen = 60;

  // ablation grid (paper-scale world keeps the task-blind conditions at zero)
  int ablation_blocks = 8;
  int ablation_seen = 400;
  int ablation_unseen = 60;

  // object sorting / alternate order
  int sorting_categories = 3;
  int sorting_bins = 5;
  int sorting_objects_per_category = 2;
  int sorting_seen = 40;
  int sorting_unseen = 14;
  int sort_alt_episodes_per_task = 4;

  // object collection / step-count generalization
  int collection_objects = 8;
  int collection_receptacles = 5;
  std::vector<int> collection_train_counts = {2, 4};
  int collection_seen = 60;
  std::vector<int> collection_eval_counts = {1, 2, 3, 4, 5};
  int collection_eval_tasks_per_count = 25;
  int collection_eval_repeats = 2;

  // demos
  int demos_per_task = 4;        // stored, labeled demos per seen task
  int union_demos_per_task = 12; // demos pooled into the ground-truth union
  int frame_demos_per_task = 8;  // demos feeding localizer/edge supervision
  int unseen_demos_per_task = 4; // held-out demos for conditioning / NLL

  // component hyperparameters (the source papers leave these unspecified)
  int interp_hidden = 48, interp_embed = 24, interp_epochs = 30;
  int gcn_embed = 32, gcn_gate_hidden = 48, gcn_iterations = 3, gcn_epochs = 40;
  double gcn_threshold = 0.65;
  int loc_enc_hidden = 96, loc_embed = 40, loc_epochs = 14, loc_batch = 1;
  int edge_epochs = 20, edge_batch = 1;
  int flat_hidden = 48, flat_epochs = 30;
  double lr = 1e-3;
  double grad_clip = 5.0;

  int max_steps_factor = 4;  // rollout budget = factor * demo length + 8
  int min_episodes = 50;     // statistical floor for trend assertions

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  void apply_override(const std::string& dotted_key, const std::string& value);
};

// ---------------------------------------------------------------------------
// Metrics

struct MetricsRecord {
  std::string experiment_id;
  std::string condition;
  Domain domain = Domain::Stacking;
  int seen_tasks = 0;
  int episodes = 0;
  double success_rate = 0.0;
  std::optional<double> mean_nll;
  std::optional<double> edge_f1;
  double seconds = 0.0;
};

// header: experiment_id,condition,domain,seen_tasks,episodes,success_rate,mean_nll,edge_f1,seconds
void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& rows);

// ---------------------------------------------------------------------------
// Datasets

struct TaskData {
  TaskSpec task;
  std::vector<Demonstration> demos;      // stored, labeled
  std::vector<Demonstration> aux_demos;  // extra seeded demos feeding only the
                                         // frame/transition supervision tables
  ConjugateTaskGraph union_graph;        // pooled over union_demos_per_task paths
};

struct Dataset {
  WorldConfig world;
  std::vector<TaskData> seen;
  std::vector<TaskData> unseen;
};

// In-memory build: every demo gets its own reset (fresh scatter) and plan
// seed; seen/unseen task splits are disjoint by construction. Demos beyond
// demos_per_task (up to frame_demos) are kept as auxiliary supervision.
Dataset build_dataset(const WorldConfig& world, int seen_count, int unseen_count,
                      int demos_per_task, int union_demos, int unseen_demos, std::uint64_t seed,
                      int frame_demos = 0);

// Disk form: tasks.json, demos/task<id>_<k>.json, graphs/task<id>_union.json,
// supervision.json. Byte-deterministic for a fixed dataset.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// ---------------------------------------------------------------------------
// Training

struct TrainedComponents {
  Interpreter interpreter;
  Gcn gcn;
  Localizer localizer;
  EdgeClassifier edge;
};

// Trains interpreter, completion network, localizer and edge classifier in
// that order (completion embeddings frozen before edge training); writes
// checkpoints and a per-epoch curves CSV when out_dir is non-empty.
TrainedComponents train_all(const Dataset& ds, const ExperimentConfig& cfg,
                            const std::string& out_dir = "");

FlatPolicy train_flat_baseline(const Dataset& ds, const ExperimentConfig& cfg,
                               const std::string& out_dir = "");

// Bundle generation for one conditioning demo (interpret -> path -> complete),
// honoring ablation flags. Returns nullopt when no usable path exists.
std::optional<PolicyBundle> build_bundle(const TrainedComponents& tc, const Env& env,
                                         const Demonstration& demo, const AblationFlags& flags,
                                         int task_id);

// ---------------------------------------------------------------------------
// Evaluations (each returns one or more MetricsRecord rows and, when out_dir
// is non-empty, writes per-task DOT pairs for export)

MetricsRecord evaluate_unseen(const Env& env, const TrainedComponents& tc, const Dataset& ds,
                              const ExperimentConfig& cfg, const AblationFlags& flags,
                              const std::string& experiment_id, const std::string& out_dir = "");

std::vector<MetricsRecord> run_data_efficiency(const ExperimentConfig& cfg,
                                               const std::string& out_dir = "");

std::vector<MetricsRecord> run_ablations(const ExperimentConfig& cfg,
                                         const std::string& out_dir = "");

std::vector<MetricsRecord> run_alternate_order(const ExperimentConfig& cfg,
                                               const std::string& out_dir = "");

std::vector<MetricsRecord> run_step_generalization(const ExperimentConfig& cfg,
                                                   const std::string& out_dir = "");

struct NllReport {
  std::vector<MetricsRecord> rows;        // full / no_graph / uniform
  double uniform_closed_form_gap = 0.0;   // |uniform row - closed form|
};
NllReport run_nll_protocol(const ExperimentConfig& cfg, const std::string& out_dir = "");

// Collects a finished run directory into DOT pairs + metrics + summary.txt.
std::string export_artifacts(const std::string& run_dir);

}  // namespace ntg
