#include "ntg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ntg {

namespace fs = std::filesystem;
using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    ExperimentConfig, root_seed, out_dir, deterministic_timing, stacking_blocks,
    stacking_seen_sweep, stacking_unseen, ablation_blocks, ablation_seen, ablation_unseen,
    sorting_categories, sorting_bins, sorting_objects_per_category, sorting_seen, sorting_unseen,
    sort_alt_episodes_per_task, collection_objects, collection_receptacles,
    collection_train_counts, collection_seen, collection_eval_counts,
    collection_eval_tasks_per_count, collection_eval_repeats, demos_per_task, union_demos_per_task,
    frame_demos_per_task, unseen_demos_per_task, interp_hidden, interp_embed, interp_epochs, gcn_embed, gcn_gate_hidden,
    gcn_iterations, gcn_epochs, gcn_threshold, loc_enc_hidden, loc_embed, loc_epochs, loc_batch,
    edge_epochs, edge_batch, flat_hidden, flat_epochs, lr, grad_clip, max_steps_factor,
    min_episodes)

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
  fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

WorldConfig stacking_world(int blocks) {
  WorldConfig w;
  w.domain = Domain::Stacking;
  w.stacking.blocks = blocks;
  return w;
}

WorldConfig sorting_world(const ExperimentConfig& cfg) {
  WorldConfig w;
  w.domain = Domain::Sorting;
  w.sorting = {cfg.sorting_categories, cfg.sorting_bins, cfg.sorting_objects_per_category};
  return w;
}

WorldConfig collection_world(const ExperimentConfig& cfg, std::vector<int> target_counts) {
  WorldConfig w;
  w.domain = Domain::Collection;
  w.collection.objects = cfg.collection_objects;
  w.collection.receptacles = cfg.collection_receptacles;
  w.collection.target_counts = std::move(target_counts);
  int max_count = *std::max_element(cfg.collection_eval_counts.begin(),
                                    cfg.collection_eval_counts.end());
  for (int c : cfg.collection_train_counts) max_count = std::max(max_count, c);
  w.collection.max_targets = max_count;
  return w;
}

int rollout_budget(const ExperimentConfig& cfg, const Demonstration& demo) {
  return cfg.max_steps_factor * static_cast<int>(demo.actions.size()) + 8;
}

double measured_seconds(const ExperimentConfig& cfg, const Stopwatch& watch) {
  return cfg.deterministic_timing ? 0.0 : watch.seconds();
}

// training-data derivation shared by train_all and the tests via harness
struct Supervision {
  std::vector<ConjugateTaskGraph> graphs;  // per seen task union graph
  std::vector<NodeEmbeddings> embeddings;  // completion embeddings per graph
  std::vector<FrameSample> frames;
  std::vector<TransitionSample> transitions;
};

Supervision derive_supervision(const Dataset& ds, const Gcn& gcn) {
  Supervision out;
  for (std::size_t ti = 0; ti < ds.seen.size(); ++ti) {
    const TaskData& td = ds.seen[ti];
    out.graphs.push_back(td.union_graph);
    out.embeddings.push_back(gcn_forward(gcn, td.union_graph).node_embeddings);
    auto add_demo = [&](const Demonstration& demo) {
      int prev_node = 0;  // START
      for (std::size_t t = 0; t < demo.actions.size(); ++t) {
        int node = td.union_graph.node_of(demo.actions[t]);
        if (node < 0) throw DataError("demo action missing from its union graph");
        out.frames.push_back({demo.observations[t + 1], static_cast<int>(ti), node});
        out.transitions.push_back(
            {demo.observations[t], static_cast<int>(ti), -1, prev_node, node});
        prev_node = node;
      }
      out.frames.push_back({demo.observations[0], static_cast<int>(ti), 0});
    };
    for (const auto& demo : td.demos) add_demo(demo);
    for (const auto& demo : td.aux_demos) add_demo(demo);
  }
  return out;
}

void write_curves(const std::string& path, const std::string& component,
                  const std::vector<TrainLogRow>& rows, bool append) {
  std::ostringstream os;
  if (!append) os << "component,epoch,loss,metric\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.10g,%.10g\n", component.c_str(), r.epoch, r.loss,
                  r.metric);
    os << buf;
  }
  fs::create_directories(fs::path(path).parent_path().string());
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot write curves: " + path);
  out << os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::string AblationFlags::condition_name() const {
  if (no_interpreter) return "no_interpreter";
  if (no_localizer) return "no_localizer";
  if (no_edge_classifier) return "no_edge_classifier";
  if (no_gcn) return "no_gcn";
  if (fully_connected_init) return "fully_connected_init";
  return "full";
}

std::string ExperimentConfig::to_json() const {
  json j = *this;  // keys sorted by nlohmann's default map: deterministic
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  json known = json(ExperimentConfig{});
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key: " + key);
  ExperimentConfig cfg = j.get<ExperimentConfig>();
  if (cfg.demos_per_task < 1 || cfg.union_demos_per_task < cfg.demos_per_task)
    throw ConfigError("demo counts must satisfy union_demos_per_task >= demos_per_task >= 1");
  if (cfg.stacking_unseen < 1 || cfg.sorting_unseen < 1)
    throw ConfigError("unseen task counts must be positive");
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_json(read_file(path));
}

void ExperimentConfig::apply_override(const std::string& dotted_key, const std::string& value) {
  json j = json(*this);
  if (!j.contains(dotted_key)) throw ConfigError("unknown config key: " + dotted_key);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare strings
  }
  j[dotted_key] = parsed;
  *this = from_json(j.dump());
}

// ---------------------------------------------------------------------------
// Metrics CSV

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& rows) {
  std::ostringstream os;
  os << "experiment_id,condition,domain,seen_tasks,episodes,success_rate,mean_nll,edge_f1,seconds\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.experiment_id << ',' << r.condition << ',' << domain_name(r.domain) << ','
       << r.seen_tasks << ',' << r.episodes << ',';
    std::snprintf(buf, sizeof buf, "%.10g", r.success_rate);
    os << buf << ',';
    if (r.mean_nll) {
      std::snprintf(buf, sizeof buf, "%.10g", *r.mean_nll);
      os << buf;
    }
    os << ',';
    if (r.edge_f1) {
      std::snprintf(buf, sizeof buf, "%.10g", *r.edge_f1);
      os << buf;
    }
    os << ',';
    std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
    os << buf << '\n';
  }
  write_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Dataset

Dataset build_dataset(const WorldConfig& world, int seen_count, int unseen_count,
                      int demos_per_task, int union_demos, int unseen_demos, std::uint64_t seed,
                      int frame_demos) {
  Env env(world);
  Dataset ds;
  ds.world = world;
  auto tasks = env.generate_tasks(seen_count + unseen_count, derive_seed(seed, "tasks"));

  auto build_task = [&](const TaskSpec& task, int stored_demos, int aux_demos, int pool) {
    TaskData td;
    td.task = task;
    std::vector<ConjugateTaskGraph> paths;
    for (int k = 0; k < std::max({stored_demos, aux_demos, pool}); ++k) {
      auto [state, obs] = env.reset(task, derive_seed(seed, "reset", task.id * 1024 + k));
      Demonstration demo = env.plan_demo(task, state, derive_seed(seed, "plan", task.id * 1024 + k));
      paths.push_back(path_from_actions(demo.actions, task.id));
      if (k < stored_demos) td.demos.push_back(std::move(demo));
      else if (k < aux_demos) td.aux_demos.push_back(std::move(demo));
    }
    td.union_graph = union_graphs(paths);
    return td;
  };

  for (int i = 0; i < seen_count; ++i)
    ds.seen.push_back(build_task(tasks[i], demos_per_task, frame_demos, union_demos));
  for (int i = seen_count; i < seen_count + unseen_count; ++i)
    ds.unseen.push_back(build_task(tasks[i], unseen_demos, 0, union_demos));
  return ds;
}

namespace {

json world_to_json(const WorldConfig& w) {
  json j;
  j["domain"] = domain_name(w.domain);
  j["feature_noise_sigma"] = w.feature_noise_sigma;
  j["stacking"] = {{"blocks", w.stacking.blocks}, {"random_start", w.stacking.random_start}};
  j["sorting"] = {{"categories", w.sorting.categories},
                  {"bins", w.sorting.bins},
                  {"objects_per_category", w.sorting.objects_per_category}};
  j["collection"] = {{"objects", w.collection.objects},
                     {"receptacles", w.collection.receptacles},
                     {"extra_locations", w.collection.extra_locations},
                     {"max_targets", w.collection.max_targets},
                     {"target_counts", w.collection.target_counts},
                     {"distractors", w.collection.distractors}};
  return j;
}

WorldConfig world_from_json(const json& j) {
  WorldConfig w;
  w.domain = domain_from_name(j.at("domain").get<std::string>());
  w.feature_noise_sigma = j.at("feature_noise_sigma").get<double>();
  w.stacking.blocks = j.at("stacking").at("blocks").get<int>();
  w.stacking.random_start = j.at("stacking").at("random_start").get<bool>();
  w.sorting.categories = j.at("sorting").at("categories").get<int>();
  w.sorting.bins = j.at("sorting").at("bins").get<int>();
  w.sorting.objects_per_category = j.at("sorting").at("objects_per_category").get<int>();
  w.collection.objects = j.at("collection").at("objects").get<int>();
  w.collection.receptacles = j.at("collection").at("receptacles").get<int>();
  w.collection.extra_locations = j.at("collection").at("extra_locations").get<int>();
  w.collection.max_targets = j.at("collection").at("max_targets").get<int>();
  w.collection.target_counts = j.at("collection").at("target_counts").get<std::vector<int>>();
  w.collection.distractors = j.at("collection").at("distractors").get<bool>();
  return w;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir + "/demos");
  fs::create_directories(dir + "/graphs");
  json tasks;
  tasks["world"] = world_to_json(ds.world);
  // auxiliary supervision demos regenerate on load from (initial state, seed)
  json aux = json::array();
  for (const auto& td : ds.seen) {
    json entries = json::array();
    for (const auto& d : td.aux_demos)
      entries.push_back({{"initial_state", json::parse(state_to_json(d.initial_state))},
                         {"plan_seed", d.seed}});
    aux.push_back({{"task", td.task.id}, {"demos", entries}});
  }
  tasks["aux_demos"] = std::move(aux);
  json seen_ids = json::array(), unseen_ids = json::array(), all = json::array();
  json supervision;
  json interp = json::array(), frames = json::array(), transitions = json::array(),
       gcn_pairs = json::array();
  auto dump_task = [&](const TaskData& td, bool is_seen) {
    all.push_back(json::parse(task_to_json(td.task)));
    (is_seen ? seen_ids : unseen_ids).push_back(td.task.id);
    for (std::size_t k = 0; k < td.demos.size(); ++k) {
      std::string name = "demos/task" + std::to_string(td.task.id) + "_" + std::to_string(k) + ".json";
      write_file(dir + "/" + name, demo_to_json(td.demos[k]));
      if (is_seen) {
        interp.push_back({{"demo", name}});
        gcn_pairs.push_back({{"demo", name}, {"union", "graphs/task" + std::to_string(td.task.id) + "_union.json"}});
        for (std::size_t t = 0; t < td.demos[k].actions.size(); ++t) {
          frames.push_back({{"demo", name}, {"frame", t + 1}, {"node_action", td.demos[k].actions[t]}});
          transitions.push_back({{"demo", name},
                                 {"frame", t},
                                 {"node_action", t == 0 ? kStartAction : td.demos[k].actions[t - 1]},
                                 {"label_action", td.demos[k].actions[t]}});
        }
        frames.push_back({{"demo", name}, {"frame", 0}, {"node_action", kStartAction}});
      }
    }
    write_file(dir + "/graphs/task" + std::to_string(td.task.id) + "_union.json",
               graph_to_json(td.union_graph));
  };
  for (const auto& td : ds.seen) dump_task(td, true);
  for (const auto& td : ds.unseen) dump_task(td, false);
  tasks["seen"] = seen_ids;
  tasks["unseen"] = unseen_ids;
  tasks["tasks"] = all;
  write_file(dir + "/tasks.json", tasks.dump(2));
  supervision["interpreter_sequences"] = interp;
  supervision["localizer_frames"] = frames;
  supervision["edge_transitions"] = transitions;
  supervision["gcn_pairs"] = gcn_pairs;
  write_file(dir + "/supervision.json", supervision.dump(2));
}

Dataset load_dataset(const std::string& dir) {
  json tasks = json::parse(read_file(dir + "/tasks.json"));
  Dataset ds;
  ds.world = world_from_json(tasks.at("world"));
  Env env(ds.world);
  std::set<int> seen_ids(tasks.at("seen").begin(), tasks.at("seen").end());
  std::map<int, json> aux_by_task;
  if (tasks.contains("aux_demos"))
    for (const auto& a : tasks.at("aux_demos")) aux_by_task[a.at("task").get<int>()] = a.at("demos");
  for (const auto& tj : tasks.at("tasks")) {
    TaskData td;
    td.task = task_from_json(tj.dump());
    td.union_graph =
        graph_from_json(read_file(dir + "/graphs/task" + std::to_string(td.task.id) + "_union.json"));
    for (int k = 0;; ++k) {
      std::string path = dir + "/demos/task" + std::to_string(td.task.id) + "_" + std::to_string(k) + ".json";
      if (!fs::exists(path)) break;
      td.demos.push_back(demo_from_json(read_file(path)));
    }
    auto aux = aux_by_task.find(td.task.id);
    if (aux != aux_by_task.end())
      for (const auto& entry : aux->second) {
        EnvState initial = state_from_json(entry.at("initial_state").dump());
        td.aux_demos.push_back(
            env.plan_demo(td.task, initial, entry.at("plan_seed").get<std::uint64_t>()));
      }
    (seen_ids.count(td.task.id) ? ds.seen : ds.unseen).push_back(std::move(td));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Training

TrainedComponents train_all(const Dataset& ds, const ExperimentConfig& cfg,
                            const std::string& out_dir) {
  if (ds.seen.empty()) throw InputError("train_all: dataset has no seen tasks");
  Env env(ds.world);
  std::string label = domain_name(ds.world.domain) + std::to_string(ds.seen.size());

  std::vector<Demonstration> seen_demos;
  for (const auto& td : ds.seen)
    for (const auto& d : td.demos) seen_demos.push_back(d);

  InterpreterConfig icfg;
  icfg.obs_width = env.feature_width();
  icfg.action_count = env.action_count();
  icfg.hidden = cfg.interp_hidden;
  icfg.embed = cfg.interp_embed;
  icfg.epochs = cfg.interp_epochs;
  icfg.lr = cfg.lr;
  icfg.grad_clip = cfg.grad_clip;
  icfg.seed = derive_seed(cfg.root_seed, "interpreter-" + label);
  std::vector<TrainLogRow> ilog;
  Interpreter interpreter = train_interpreter(seen_demos, icfg, &ilog);

  GcnConfig gcfg;
  gcfg.action_count = env.action_count();
  gcfg.embed = cfg.gcn_embed;
  gcfg.gate_hidden = cfg.gcn_gate_hidden;
  gcfg.iterations = cfg.gcn_iterations;
  gcfg.threshold = cfg.gcn_threshold;
  gcfg.epochs = cfg.gcn_epochs;
  gcfg.lr = cfg.lr;
  gcfg.grad_clip = cfg.grad_clip;
  gcfg.seed = derive_seed(cfg.root_seed, "gcn-" + label);
  std::vector<GcnTrainingPair> pairs;
  for (const auto& td : ds.seen)
    for (const auto& d : td.demos)
      pairs.push_back({path_from_actions(d.actions, td.task.id), td.union_graph});
  std::vector<TrainLogRow> glog;
  Gcn gcn = train_gcn(pairs, gcfg, &glog);

  Supervision sup = derive_supervision(ds, gcn);

  LocalizerConfig lcfg;
  lcfg.obs_width = env.feature_width();
  lcfg.action_count = env.action_count();
  lcfg.enc_hidden = cfg.loc_enc_hidden;
  lcfg.embed = cfg.loc_embed;
  lcfg.epochs = cfg.loc_epochs;
  lcfg.batch = cfg.loc_batch;
  lcfg.lr = cfg.lr;
  lcfg.grad_clip = cfg.grad_clip;
  lcfg.seed = derive_seed(cfg.root_seed, "localizer-" + label);
  std::vector<TrainLogRow> llog;
  Localizer localizer = train_localizer(sup.graphs, sup.frames, lcfg, &llog);

  EdgeClassifierConfig ecfg;
  ecfg.loc_embed = cfg.loc_embed;
  ecfg.gcn_embed = cfg.gcn_embed;
  ecfg.epochs = cfg.edge_epochs;
  ecfg.batch = cfg.edge_batch;
  ecfg.lr = cfg.lr;
  ecfg.grad_clip = cfg.grad_clip;
  ecfg.seed = derive_seed(cfg.root_seed, "edge-" + label);
  std::vector<TrainLogRow> elog;
  EdgeClassifier edge = train_edge_classifier(sup.graphs, sup.embeddings, sup.transitions,
                                              localizer, ecfg, &elog, &sup.frames);

  for (const auto& log : {ilog, glog, llog, elog})
    for (const auto& row : log)
      if (!std::isfinite(row.loss))
        throw TrainingError("training diverged (non-finite loss) in " + label);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    interpreter.save(out_dir + "/interpreter.json");
    gcn.save(out_dir + "/gcn.json");
    localizer.save(out_dir + "/localizer.json");
    edge.save(out_dir + "/edge_classifier.json");
    std::string curves = out_dir + "/curves.csv";
    write_curves(curves, "interpreter", ilog, false);
    write_curves(curves, "gcn", glog, true);
    write_curves(curves, "localizer", llog, true);
    write_curves(curves, "edge_classifier", elog, true);
  }
  return TrainedComponents{std::move(interpreter), std::move(gcn), std::move(localizer),
                           std::move(edge)};
}

FlatPolicy train_flat_baseline(const Dataset& ds, const ExperimentConfig& cfg,
                               const std::string& out_dir) {
  Env env(ds.world);
  FlatPolicyConfig fcfg;
  fcfg.obs_width = env.feature_width();
  fcfg.action_count = env.action_count();
  fcfg.hidden = cfg.flat_hidden;
  fcfg.epochs = cfg.flat_epochs;
  fcfg.lr = cfg.lr;
  fcfg.grad_clip = cfg.grad_clip;
  fcfg.seed = derive_seed(cfg.root_seed, "flat-" + domain_name(ds.world.domain));
  std::vector<std::vector<Demonstration>> by_task;
  for (const auto& td : ds.seen) by_task.push_back(td.demos);
  std::vector<TrainLogRow> log;
  FlatPolicy flat = flat_policy_train(by_task, fcfg, &log);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    flat.save(out_dir + "/flat_policy.json");
    write_curves(out_dir + "/curves_flat.csv", "flat_policy", log, false);
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Bundles

std::optional<PolicyBundle> build_bundle(const TrainedComponents& tc, const Env& env,
                                         const Demonstration& demo, const AblationFlags& flags,
                                         int task_id) {
  PolicyBundle bundle;
  bundle.localizer = &tc.localizer;
  bundle.edge = &tc.edge;
  bundle.uniform_localizer = flags.no_localizer;
  bundle.uniform_edges = flags.no_edge_classifier;

  if (flags.no_interpreter) {
    std::vector<int> vocab(env.action_count());
    for (int a = 0; a < env.action_count(); ++a) vocab[a] = a;
    bundle.graph = fully_connected_graph(vocab, task_id);
    bundle.gcn_embeddings = gcn_forward(tc.gcn, bundle.graph).node_embeddings;
    return bundle;
  }

  InterpretResult decoded = interpret(tc.interpreter, demo);
  if (decoded.actions.empty()) return std::nullopt;
  ConjugateTaskGraph path = path_from_actions(decoded.actions, task_id);

  if (flags.fully_connected_init) {
    bundle.graph = fully_connected_graph(decoded.actions, task_id);
    bundle.gcn_embeddings = gcn_forward(tc.gcn, bundle.graph).node_embeddings;
  } else if (flags.no_gcn) {
    bundle.graph = path;
    Gcn frozen{tc.gcn.cfg, ModuleParams{}};
    frozen.cfg.iterations = 0;  // completion skipped: raw embedding-table rows
    frozen.params = tc.gcn.params;
    bundle.gcn_embeddings = gcn_forward(frozen, path).node_embeddings;
  } else {
    CompletionResult completed = complete_graph(tc.gcn, path);
    bundle.graph = std::move(completed.graph);
    // final node embeddings: run the completion network over the generated
    // graph so execution sees the same embedding distribution the classifier
    // was trained with (near-union inputs)
    bundle.gcn_embeddings = gcn_forward(tc.gcn, bundle.graph).node_embeddings;
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Evaluations

MetricsRecord evaluate_unseen(const Env& env, const TrainedComponents& tc, const Dataset& ds,
                              const ExperimentConfig& cfg, const AblationFlags& flags,
                              const std::string& experiment_id, const std::string& out_dir) {
  Stopwatch watch;
  if (ds.unseen.empty()) throw InputError("evaluate_unseen: no unseen tasks");
  int repeats = std::max(1, (cfg.min_episodes + static_cast<int>(ds.unseen.size()) - 1) /
                                static_cast<int>(ds.unseen.size()));
  int episodes = 0, successes = 0;
  double f1_sum = 0.0;
  int f1_count = 0;
  for (const auto& td : ds.unseen) {
    const Demonstration& demo = td.demos.at(0);
    auto bundle = build_bundle(tc, env, demo, flags, td.task.id);
    for (int r = 0; r < repeats; ++r) {
      ++episodes;
      if (!bundle) continue;
      RolloutResult result =
          rollout(*bundle, env, td.task, derive_seed(cfg.root_seed, "eval-" + experiment_id,
                                                     td.task.id * 97 + r),
                  rollout_budget(cfg, demo));
      if (result.success) ++successes;
    }
    if (bundle && !flags.no_interpreter) {
      f1_sum += edge_score(bundle->graph, td.union_graph).f1;
      ++f1_count;
      if (!out_dir.empty() && flags.condition_name() == "full") {
        InterpretResult decoded = interpret(tc.interpreter, demo);
        fs::create_directories(out_dir + "/dot");
        write_file(out_dir + "/dot/task" + std::to_string(td.task.id) + "_path.dot",
                   to_dot(path_from_actions(decoded.actions, td.task.id), env));
        write_file(out_dir + "/dot/task" + std::to_string(td.task.id) + "_completed.dot",
                   to_dot(bundle->graph, env));
      }
    }
  }
  MetricsRecord row;
  row.experiment_id = experiment_id;
  row.condition = flags.condition_name();
  row.domain = ds.world.domain;
  row.seen_tasks = static_cast<int>(ds.seen.size());
  row.episodes = episodes;
  row.success_rate = static_cast<double>(successes) / episodes;
  if (f1_count > 0) row.edge_f1 = f1_sum / f1_count;
  row.seconds = measured_seconds(cfg, watch);
  return row;
}

std::vector<MetricsRecord> run_data_efficiency(const ExperimentConfig& cfg,
                                               const std::string& out_dir) {
  std::vector<int> sweep = cfg.stacking_seen_sweep;
  std::sort(sweep.begin(), sweep.end());
  int max_seen = sweep.back();
  WorldConfig world = stacking_world(cfg.stacking_blocks);
  Env env(world);
  Dataset full = build_dataset(world, max_seen, cfg.stacking_unseen, cfg.demos_per_task,
                               cfg.union_demos_per_task, cfg.unseen_demos_per_task,
                               derive_seed(cfg.root_seed, "stacking-data"),
                               cfg.frame_demos_per_task);
  std::vector<MetricsRecord> rows;
  for (int count : sweep) {
    Dataset subset;
    subset.world = world;
    subset.seen.assign(full.seen.begin(), full.seen.begin() + count);
    subset.unseen = full.unseen;
    std::string id = "stacking_sweep_" + std::to_string(count);
    std::string dir = out_dir.empty() ? "" : out_dir + "/" + id;
    TrainedComponents tc = train_all(subset, cfg, dir.empty() ? "" : dir + "/checkpoints");
    rows.push_back(evaluate_unseen(env, tc, subset, cfg, AblationFlags{}, id, dir));
  }
  if (!out_dir.empty()) write_metrics_csv(out_dir + "/metrics_sweep.csv", rows);
  return rows;
}

std::vector<MetricsRecord> run_ablations(const ExperimentConfig& cfg, const std::string& out_dir) {
  WorldConfig world = stacking_world(cfg.ablation_blocks);
  Env env(world);
  Dataset ds = build_dataset(world, cfg.ablation_seen, cfg.ablation_unseen, cfg.demos_per_task,
                             cfg.union_demos_per_task, cfg.unseen_demos_per_task,
                             derive_seed(cfg.root_seed, "ablation-data"),
                             cfg.frame_demos_per_task);
  std::string dir = out_dir.empty() ? "" : out_dir + "/ablations";
  TrainedComponents tc = train_all(ds, cfg, dir.empty() ? "" : dir + "/checkpoints");
  std::vector<AblationFlags> grid(6);
  grid[1].no_interpreter = true;
  grid[2].no_localizer = true;
  grid[3].no_edge_classifier = true;
  grid[4].no_gcn = true;
  grid[5].fully_connected_init = true;
  std::vector<MetricsRecord> rows;
  for (const auto& flags : grid)
    rows.push_back(evaluate_unseen(env, tc, ds, cfg, flags, "ablation", dir));
  if (!out_dir.empty()) write_metrics_csv(dir + "/metrics_ablation.csv", rows);
  return rows;
}

std::vector<MetricsRecord> run_alternate_order(const ExperimentConfig& cfg,
                                               const std::string& out_dir) {
  WorldConfig world = sorting_world(cfg);
  Env env(world);
  Dataset ds = build_dataset(world, cfg.sorting_seen, cfg.sorting_unseen, cfg.demos_per_task,
                             cfg.union_demos_per_task, cfg.unseen_demos_per_task,
                             derive_seed(cfg.root_seed, "sorting-data"),
                             cfg.frame_demos_per_task);
  std::string dir = out_dir.empty() ? "" : out_dir + "/sort_alt";
  TrainedComponents tc = train_all(ds, cfg, dir.empty() ? "" : dir + "/checkpoints");

  std::vector<AblationFlags> grid(3);
  grid[1].no_gcn = true;
  grid[2].no_edge_classifier = true;

  std::vector<MetricsRecord> rows;
  for (const auto& flags : grid) {
    Stopwatch watch;
    int episodes = 0, successes = 0;
    for (const auto& td : ds.unseen) {
      const Demonstration& demo = td.demos.at(0);
      auto bundle = build_bundle(tc, env, demo, flags, td.task.id);
      for (int r = 0; r < cfg.sort_alt_episodes_per_task; ++r) {
        ++episodes;
        if (!bundle) continue;
        EnvState alt = env.alternate_order_reset(
            td.task, demo.actions, derive_seed(cfg.root_seed, "alt-scene", td.task.id * 31 + r));
        RolloutResult result = rollout(*bundle, env, td.task, 0, rollout_budget(cfg, demo), alt);
        if (result.success) ++successes;
      }
      if (!dir.empty() && flags.condition_name() == "full" && bundle) {
        fs::create_directories(dir + "/dot");
        write_file(dir + "/dot/task" + std::to_string(td.task.id) + "_path.dot",
                   to_dot(path_from_actions(interpret(tc.interpreter, demo).actions, td.task.id), env));
        write_file(dir + "/dot/task" + std::to_string(td.task.id) + "_completed.dot",
                   to_dot(bundle->graph, env));
      }
    }
    MetricsRecord row;
    row.experiment_id = "sort_alt";
    row.condition = flags.condition_name();
    row.domain = Domain::Sorting;
    row.seen_tasks = cfg.sorting_seen;
    row.episodes = episodes;
    row.success_rate = static_cast<double>(successes) / episodes;
    row.seconds = measured_seconds(cfg, watch);
    rows.push_back(row);
  }
  if (!out_dir.empty()) write_metrics_csv(dir + "/metrics_sort_alt.csv", rows);
  return rows;
}

std::vector<MetricsRecord> run_step_generalization(const ExperimentConfig& cfg,
                                                   const std::string& out_dir) {
  WorldConfig train_world = collection_world(cfg, cfg.collection_train_counts);
  Env train_env(train_world);
  Dataset ds = build_dataset(train_world, cfg.collection_seen, 1, cfg.demos_per_task,
                             cfg.union_demos_per_task, cfg.unseen_demos_per_task,
                             derive_seed(cfg.root_seed, "collection-data"),
                             cfg.frame_demos_per_task);
  std::string dir = out_dir.empty() ? "" : out_dir + "/collect_gen";
  TrainedComponents tc = train_all(ds, cfg, dir.empty() ? "" : dir + "/checkpoints");
  FlatPolicy flat = train_flat_baseline(ds, cfg, dir);

  std::set<std::string> seen_keys;
  for (const auto& td : ds.seen) seen_keys.insert(td.task.goal_key());

  std::vector<MetricsRecord> rows;
  for (int n : cfg.collection_eval_counts) {
    WorldConfig eval_world = collection_world(cfg, {n});
    Env eval_env(eval_world);
    auto candidates = eval_env.generate_tasks(cfg.collection_eval_tasks_per_count * 2 + 16,
                                              derive_seed(cfg.root_seed, "collect-eval", n));
    std::vector<TaskSpec> tasks;
    for (const auto& t : candidates) {
      if (seen_keys.count(t.goal_key())) continue;
      tasks.push_back(t);
      if (static_cast<int>(tasks.size()) == cfg.collection_eval_tasks_per_count) break;
    }

    Stopwatch watch;
    int ntg_success = 0, flat_success = 0, episodes = 0;
    for (const auto& task : tasks) {
      auto [demo_state, demo_obs] =
          eval_env.reset(task, derive_seed(cfg.root_seed, "collect-demo-reset", task.id * 7 + n));
      Demonstration demo = eval_env.plan_demo(
          task, demo_state, derive_seed(cfg.root_seed, "collect-demo-plan", task.id * 7 + n));
      auto bundle = build_bundle(tc, eval_env, demo, AblationFlags{}, task.id);
      for (int r = 0; r < cfg.collection_eval_repeats; ++r) {
        ++episodes;
        std::uint64_t ep_seed = derive_seed(cfg.root_seed, "collect-episode", task.id * 64 + r + n);
        int budget = rollout_budget(cfg, demo);
        if (bundle && rollout(*bundle, eval_env, task, ep_seed, budget).success) ++ntg_success;
        if (flat_rollout(flat, eval_env, task, demo, ep_seed, budget).success) ++flat_success;
      }
    }
    for (const char* model : {"ntg", "flat"}) {
      MetricsRecord row;
      row.experiment_id = "collect_gen_n" + std::to_string(n);
      row.condition = model;
      row.domain = Domain::Collection;
      row.seen_tasks = cfg.collection_seen;
      row.episodes = episodes;
      row.success_rate =
          static_cast<double>(std::string(model) == "ntg" ? ntg_success : flat_success) / episodes;
      row.seconds = measured_seconds(cfg, watch);
      rows.push_back(row);
    }
  }
  if (!out_dir.empty()) write_metrics_csv(dir + "/metrics_collect.csv", rows);
  return rows;
}

NllReport run_nll_protocol(const ExperimentConfig& cfg, const std::string& out_dir) {
  WorldConfig world = sorting_world(cfg);
  Env env(world);
  Dataset ds = build_dataset(world, cfg.sorting_seen, cfg.sorting_unseen, cfg.demos_per_task,
                             cfg.union_demos_per_task,
                             std::max(2, cfg.unseen_demos_per_task),
                             derive_seed(cfg.root_seed, "sorting-data"),
                             cfg.frame_demos_per_task);
  std::string dir = out_dir.empty() ? "" : out_dir + "/nll";
  TrainedComponents tc = train_all(ds, cfg, dir.empty() ? "" : dir + "/checkpoints");

  NllReport report;
  struct Cond {
    std::string name;
    AblationFlags flags;
    bool uniform = false;
  };
  std::vector<Cond> conds = {{"full", {}, false}, {"no_graph", {}, false}, {"uniform", {}, true}};
  conds[1].flags.fully_connected_init = true;
  conds[2].flags.fully_connected_init = true;

  std::vector<MetricsRecord> per_task_rows;
  for (const auto& cond : conds) {
    Stopwatch watch;
    double total = 0.0;
    int scored = 0;
    double closed_gap = 0.0;
    for (const auto& td : ds.unseen) {
      const Demonstration& conditioning = td.demos.at(0);
      auto bundle = build_bundle(tc, env, conditioning, cond.flags, td.task.id);
      if (!bundle) throw TrainingError("nll: conditioning demo produced no bundle");
      bundle->uniform_edges = bundle->uniform_edges || cond.uniform;
      double task_total = 0.0;
      int task_scored = 0;
      for (std::size_t k = 1; k < td.demos.size(); ++k) {
        double nll = nll_of_demo(*bundle, td.demos[k]);
        task_total += nll;
        ++task_scored;
        if (cond.uniform)
          closed_gap = std::max(
              closed_gap, std::fabs(nll - uniform_nll_closed_form(bundle->graph, td.demos[k].actions)));
      }
      total += task_total;
      scored += task_scored;
      MetricsRecord task_row;
      task_row.experiment_id = "nll_task" + std::to_string(td.task.id);
      task_row.condition = cond.name;
      task_row.domain = Domain::Sorting;
      task_row.seen_tasks = cfg.sorting_seen;
      task_row.episodes = task_scored;
      task_row.success_rate = 0.0;
      task_row.mean_nll = task_total / task_scored;
      task_row.seconds = 0.0;
      per_task_rows.push_back(task_row);
    }
    MetricsRecord row;
    row.experiment_id = "nll";
    row.condition = cond.name;
    row.domain = Domain::Sorting;
    row.seen_tasks = cfg.sorting_seen;
    row.episodes = scored;
    row.success_rate = 0.0;
    row.mean_nll = total / scored;
    row.seconds = measured_seconds(cfg, watch);
    report.rows.push_back(row);
    if (cond.uniform) report.uniform_closed_form_gap = closed_gap;
  }
  if (!out_dir.empty()) {
    std::vector<MetricsRecord> all = report.rows;
    all.insert(all.end(), per_task_rows.begin(), per_task_rows.end());
    write_metrics_csv(dir + "/metrics_nll.csv", all);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Export

std::string export_artifacts(const std::string& run_dir) {
  std::vector<std::string> missing;
  std::vector<std::string> csvs;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv" &&
        entry.path().filename().string().rfind("metrics", 0) == 0)
      csvs.push_back(entry.path().string());
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) missing.push_back(run_dir + "/metrics*.csv");

  // retention check over every exported path/completed DOT pair
  std::vector<std::string> dot_pairs;
  int pairs_checked = 0;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().string();
    auto pos = name.find("_path.dot");
    if (pos == std::string::npos) continue;
    std::string completed = name.substr(0, pos) + "_completed.dot";
    if (!fs::exists(completed)) {
      missing.push_back(completed);
      continue;
    }
    auto edges = [](const std::string& path) {
      std::set<std::string> out;
      std::istringstream in(read_file(path));
      std::string line;
      while (std::getline(in, line))
        if (line.find("->") != std::string::npos) out.insert(line);
      return out;
    };
    auto pe = edges(name), ce = edges(completed);
    for (const auto& e : pe)
      if (!ce.count(e))
        throw DataError("exported completed graph dropped a demonstrated edge: " + name);
    ++pairs_checked;
    dot_pairs.push_back(name);
  }
  if (!missing.empty()) {
    std::string msg = "export: missing run files:";
    for (const auto& m : missing) msg += " " + m;
    throw IoError(msg);
  }

  std::sort(dot_pairs.begin(), dot_pairs.end());
  std::ostringstream summary;
  summary << "run summary\n===========\n";
  summary << "metrics files: " << csvs.size() << "\n";
  for (const auto& c : csvs) {
    summary << "\n[" << fs::relative(c, run_dir).string() << "]\n" << read_file(c);
  }
  summary << "\ngraph exports: " << pairs_checked
          << " path/completed pairs, retention verified\n";
  std::string out_path = run_dir + "/summary.txt";
  write_file(out_path, summary.str());
  return out_path;
}

}  // namespace ntg
