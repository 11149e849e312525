#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ntg/harness.hpp"

using namespace ntg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.root_seed = 11;
  cfg.stacking_blocks = 4;
  cfg.stacking_seen_sweep = {8, 16};
  cfg.stacking_unseen = 8;
  cfg.sorting_seen = 10;
  cfg.sorting_unseen = 4;
  cfg.sort_alt_episodes_per_task = 2;
  cfg.collection_seen = 8;
  cfg.collection_eval_counts = {1, 2};
  cfg.collection_eval_tasks_per_count = 4;
  cfg.min_episodes = 8;
  cfg.interp_epochs = 10;
  cfg.gcn_epochs = 10;
  cfg.loc_epochs = 6;
  cfg.edge_epochs = 6;
  cfg.flat_epochs = 8;
  return cfg;
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("/tmp/ntg_test_" + name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

WorldConfig small_stacking() {
  WorldConfig w;
  w.domain = Domain::Stacking;
  w.stacking.blocks = 4;
  return w;
}

}  // namespace

TEST_CASE("experiment config json round-trip, unknown keys, overrides") {
  ExperimentConfig cfg = tiny_config();
  ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());

  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"no_such_key\": 1}"), ConfigError);

  cfg.apply_override("stacking_blocks", "6");
  CHECK(cfg.stacking_blocks == 6);
  cfg.apply_override("stacking_seen_sweep", "[10,20]");
  CHECK(cfg.stacking_seen_sweep == std::vector<int>{10, 20});
  CHECK_THROWS_AS(cfg.apply_override("bogus", "1"), ConfigError);
}

TEST_CASE("metrics csv has the exact header and exact rates") {
  TempDir tmp("metrics");
  MetricsRecord row;
  row.experiment_id = "x";
  row.condition = "full";
  row.domain = Domain::Sorting;
  row.seen_tasks = 3;
  row.episodes = 3;
  row.success_rate = 1.0 / 3.0;
  row.edge_f1 = 0.5;
  write_metrics_csv(tmp.path + "/m.csv", {row});
  std::string text = slurp(tmp.path + "/m.csv");
  CHECK(text.rfind("experiment_id,condition,domain,seen_tasks,episodes,success_rate,mean_nll,edge_f1,seconds\n",
                   0) == 0);
  CHECK(text.find("x,full,sorting,3,3,0.3333333333,,0.5,0.000") != std::string::npos);
}

TEST_CASE("build_dataset writes one file per demo and rebuilds byte-identically") {
  TempDir tmp("dataset");
  Dataset ds = build_dataset(small_stacking(), 2, 1, 3, 6, 2, 5);
  REQUIRE(ds.seen.size() == 2);
  REQUIRE(ds.unseen.size() == 1);
  for (const auto& td : ds.seen) {
    CHECK(td.demos.size() == 3);
    // union has at least as many edges as any single path
    for (const auto& demo : td.demos)
      CHECK(td.union_graph.edge_count() >=
            path_from_actions(demo.actions, td.task.id).edge_count());
  }
  write_dataset(ds, tmp.path + "/a");
  int demo_files = 0;
  for (const auto& e : fs::directory_iterator(tmp.path + "/a/demos")) {
    ++demo_files;
    (void)e;
  }
  CHECK(demo_files == 2 * 3 + 1 * 2);

  // byte-identical rebuild
  Dataset ds2 = build_dataset(small_stacking(), 2, 1, 3, 6, 2, 5);
  write_dataset(ds2, tmp.path + "/b");
  for (const auto& e : fs::recursive_directory_iterator(tmp.path + "/a")) {
    if (!e.is_regular_file()) continue;
    std::string rel = fs::relative(e.path(), tmp.path + "/a").string();
    CHECK(slurp(e.path().string()) == slurp(tmp.path + "/b/" + rel));
  }

  // disk round-trip preserves the dataset
  Dataset loaded = load_dataset(tmp.path + "/a");
  REQUIRE(loaded.seen.size() == ds.seen.size());
  CHECK(loaded.seen[0].demos[0].actions == ds.seen[0].demos[0].actions);
  CHECK(loaded.seen[0].union_graph.actions == ds.seen[0].union_graph.actions);

  // seen/unseen split is disjoint
  std::set<std::string> seen_keys;
  for (const auto& td : ds.seen) seen_keys.insert(td.task.goal_key());
  for (const auto& td : ds.unseen) CHECK(seen_keys.count(td.task.goal_key()) == 0);
}

TEST_CASE("train_all: tiny config under 60s, losses fall, checkpoints reproducible") {
  TempDir tmp("train");
  ExperimentConfig cfg = tiny_config();
  Dataset ds = build_dataset(small_stacking(), 5, 2, cfg.demos_per_task, cfg.union_demos_per_task,
                             cfg.unseen_demos_per_task, derive_seed(cfg.root_seed, "t"));
  auto start = std::chrono::steady_clock::now();
  TrainedComponents tc = train_all(ds, cfg, tmp.path + "/run1");
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);

  // every component's loss strictly decreases over the first three epochs
  std::istringstream curves(slurp(tmp.path + "/run1/curves.csv"));
  std::string line;
  std::getline(curves, line);  // header
  std::map<std::string, std::vector<double>> losses;
  while (std::getline(curves, line)) {
    auto c1 = line.find(','), c2 = line.find(',', line.find(',') + 1);
    std::string component = line.substr(0, c1);
    losses[component].push_back(std::stod(line.substr(c2 + 1)));
  }
  REQUIRE(losses.size() == 4);
  for (const auto& [component, vals] : losses) {
    REQUIRE(vals.size() >= 3);
    CHECK(vals[1] < vals[0]);
    CHECK(vals[2] < vals[1]);
  }

  TrainedComponents tc2 = train_all(ds, cfg, tmp.path + "/run2");
  CHECK(slurp(tmp.path + "/run1/interpreter.json") == slurp(tmp.path + "/run2/interpreter.json"));
  CHECK(slurp(tmp.path + "/run1/gcn.json") == slurp(tmp.path + "/run2/gcn.json"));
  CHECK(slurp(tmp.path + "/run1/localizer.json") == slurp(tmp.path + "/run2/localizer.json"));
  CHECK(slurp(tmp.path + "/run1/edge_classifier.json") ==
        slurp(tmp.path + "/run2/edge_classifier.json"));
}

TEST_CASE("tiny end-to-end evaluation runs and respects the episode floor") {
  TempDir tmp("eval");
  ExperimentConfig cfg = tiny_config();
  WorldConfig world = small_stacking();
  Env env(world);
  Dataset ds = build_dataset(world, 16, 8, cfg.demos_per_task, cfg.union_demos_per_task,
                             cfg.unseen_demos_per_task, derive_seed(cfg.root_seed, "e"));
  TrainedComponents tc = train_all(ds, cfg);
  MetricsRecord row = evaluate_unseen(env, tc, ds, cfg, AblationFlags{}, "mini", tmp.path);
  CHECK(row.episodes >= cfg.min_episodes);
  CHECK(row.success_rate >= 0.0);
  CHECK(row.success_rate <= 1.0);
  CHECK(row.edge_f1.has_value());
  CHECK(fs::exists(tmp.path + "/dot"));

  // the policy starts every fresh episode from START
  const TaskData& td = ds.unseen[0];
  auto bundle = build_bundle(tc, env, td.demos[0], AblationFlags{}, td.task.id);
  REQUIRE(bundle.has_value());
  auto [state, obs] = env.reset(td.task, 77);
  StepDecision d = policy_step(*bundle, obs.features);
  CHECK(d.node == 0);  // START
  if (!d.dead_end) {
    auto outs = outgoing(bundle->graph, kStartAction);
    CHECK(std::find(outs.begin(), outs.end(), d.action) != outs.end());
  }
}

TEST_CASE("flat policy overfits a single task to exact sequences") {
  WorldConfig world;
  world.domain = Domain::Collection;
  world.collection.target_counts = {2};
  Env env(world);
  auto tasks = env.generate_tasks(1, 3);
  std::vector<std::vector<Demonstration>> by_task(1);
  for (int k = 0; k < 3; ++k) {
    auto [state, obs] = env.reset(tasks[0], 100 + k);
    by_task[0].push_back(env.plan_demo(tasks[0], state, 200 + k));
  }
  FlatPolicyConfig fcfg;
  fcfg.obs_width = env.feature_width();
  fcfg.action_count = env.action_count();
  fcfg.hidden = 32;
  fcfg.epochs = 60;
  fcfg.seed = 3;
  FlatPolicy flat = flat_policy_train(by_task, fcfg);
  for (const auto& cond : by_task[0])
    for (const auto& target : by_task[0]) CHECK(flat_sequence_exact(flat, cond, target));
}

TEST_CASE("export: retention verified, deterministic bytes, missing files reported") {
  TempDir tmp("export");
  // minimal artificial run dir: metrics + one dot pair
  write_metrics_csv(tmp.path + "/metrics_x.csv", {});
  auto path = path_from_actions({1, 2}, 0);
  auto completed = path;
  completed.set(completed.node_of(2), completed.node_of(1), 1.0);
  auto name = [](int a) { return "a" + std::to_string(a); };
  std::ofstream(tmp.path + "/task0_path.dot") << to_dot(path, name);
  std::ofstream(tmp.path + "/task0_completed.dot") << to_dot(completed, name);
  std::string summary1 = slurp(export_artifacts(tmp.path));
  std::string summary2 = slurp(export_artifacts(tmp.path));
  CHECK(summary1 == summary2);
  CHECK(summary1.find("retention verified") != std::string::npos);

  // dropping a demonstrated edge must fail the export
  std::ofstream(tmp.path + "/task0_completed.dot") << to_dot(path_from_actions({1}, 0), name);
  CHECK_THROWS_AS(export_artifacts(tmp.path), DataError);

  // absent files are an io error listing the path
  TempDir tmp2("export2");
  std::ofstream(tmp2.path + "/task0_path.dot") << to_dot(path, name);
  CHECK_THROWS_WITH_AS(export_artifacts(tmp2.path), doctest::Contains("task0_completed.dot"),
                       IoError);
}
