#include "ntg/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ntg/gradcheck.hpp"

namespace ntg {

namespace fs = std::filesystem;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::set<std::pair<int, int>> edge_set(const ConjugateTaskGraph& g) {
  std::set<std::pair<int, int>> out;
  int n = g.node_count();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (g.adj[i * n + j] > 0.0) out.emplace(g.action_of(i), g.action_of(j));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

const MetricsRecord& row_named(const std::vector<MetricsRecord>& rows, const std::string& cond) {
  for (const auto& r : rows)
    if (r.condition == cond) return r;
  throw InputError("missing metrics row: " + cond);
}

// --- criterion bodies -------------------------------------------------------

CriterionResult oracle_machinery(const ExperimentConfig&) {
  CriterionResult r{1, "oracle machinery: 100% success on all 4-block tasks", false, "", 0.0};
  WorldConfig world;
  world.domain = Domain::Stacking;
  world.stacking.blocks = 4;
  Env env(world);
  auto tasks = env.generate_tasks(static_cast<int>(env.count_stacking_goals()), 1);
  int failures = 0;
  for (const auto& task : tasks) {
    auto graph = oracle_graph(env, task);
    if (!oracle_rollout(env, task, graph, 0, 16).success) ++failures;
  }
  r.pass = failures == 0;
  r.details = std::to_string(tasks.size()) + " tasks exhaustive, " + std::to_string(failures) +
              " failures";
  return r;
}

CriterionResult union_equals_oracle(const ExperimentConfig&) {
  CriterionResult r{2, "union of order-covering demo paths equals the oracle graph", false, "", 0.0};
  int covered = 0, mismatches = 0;
  for (int categories : {2, 3}) {
    WorldConfig world;
    world.domain = Domain::Sorting;
    world.sorting = {categories, 4, 1};
    Env env(world);
    int task_count = std::min(8, categories == 2 ? 12 : 24);
    auto tasks = env.generate_tasks(task_count, 7);
    long long factorial = 1;
    for (int k = 2; k <= categories; ++k) factorial *= k;
    for (const auto& task : tasks) {
      auto [state, obs] = env.reset(task, 0);
      std::vector<ConjugateTaskGraph> paths;
      std::set<std::string> orders;
      for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto demo = env.plan_demo(task, state, seed);
        paths.push_back(path_from_actions(demo.actions, task.id));
        std::string sig;
        for (int a : demo.actions) sig += std::to_string(a) + ",";
        orders.insert(sig);
      }
      if (static_cast<long long>(orders.size()) != factorial) continue;  // not fully covered
      ++covered;
      auto u = union_graphs(paths);
      auto o = oracle_graph(env, task);
      if (u.actions != o.actions || edge_set(u) != edge_set(o)) ++mismatches;
    }
  }
  r.pass = covered > 0 && mismatches == 0;
  r.details = std::to_string(covered) + " fully-covered tasks, " + std::to_string(mismatches) +
              " edge-set mismatches";
  return r;
}

CriterionResult gradient_correctness(const ExperimentConfig&) {
  CriterionResult r{3, "gradient checks < 1e-4 for every learned block over 10 seeds", false, "", 0.0};
  double worst = 0.0;
  std::string worst_block;
  auto track = [&](const std::string& block, double err) {
    if (err > worst) {
      worst = err;
      worst_block = block;
    }
  };

  WorldConfig small;
  small.domain = Domain::Stacking;
  small.stacking.blocks = 3;
  Env env(small);
  auto tasks = env.generate_tasks(4, 3);

  WorldConfig sorting;
  sorting.domain = Domain::Sorting;
  sorting.sorting = {2, 3, 1};
  Env sort_env(sorting);
  auto sort_tasks = sort_env.generate_tasks(3, 5);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto [st, ob] = env.reset(tasks[seed % tasks.size()], seed);
    Demonstration demo = env.plan_demo(tasks[seed % tasks.size()], st, seed + 40);

    {  // interpreter decode step (teacher-forced sequence loss)
      InterpreterConfig cfg;
      cfg.obs_width = env.feature_width();
      cfg.action_count = env.action_count();
      cfg.hidden = 6;
      cfg.embed = 4;
      cfg.seed = seed;
      Interpreter model = make_interpreter(cfg);
      auto loss = [&](ModuleParams& p) {
        Interpreter probe{model.cfg, ModuleParams(0)};
        probe.params = std::move(p);
        double v = interpreter_loss(probe, demo);
        p = std::move(probe.params);
        return v;
      };
      track("interpreter", gradient_check(loss, model.params, 1e-5, 3, seed).max_rel_error);
    }
    {  // completion network unrolled T=3
      GcnConfig cfg;
      cfg.action_count = sort_env.action_count();
      cfg.embed = 6;
      cfg.gate_hidden = 6;
      cfg.iterations = 3;
      cfg.seed = seed;
      Gcn model = make_gcn(cfg);
      auto [s0, o0] = sort_env.reset(sort_tasks[0], 0);
      auto d1 = sort_env.plan_demo(sort_tasks[0], s0, seed);
      auto d2 = sort_env.plan_demo(sort_tasks[0], s0, seed + 17);
      GcnTrainingPair pair{path_from_actions(d1.actions, 0),
                           union_graphs({path_from_actions(d1.actions, 0),
                                         path_from_actions(d2.actions, 0)})};
      auto loss = [&](ModuleParams& p) {
        Gcn probe{model.cfg, ModuleParams(0)};
        probe.params = std::move(p);
        double v = gcn_loss(probe, pair);
        p = std::move(probe.params);
        return v;
      };
      track("gcn", gradient_check(loss, model.params, 1e-5, 3, seed).max_rel_error);
    }
    {  // localizer + edge classifier on a branching sorting graph
      auto [s0, o0] = sort_env.reset(sort_tasks[1], 0);
      auto d1 = sort_env.plan_demo(sort_tasks[1], s0, seed);
      auto d2 = sort_env.plan_demo(sort_tasks[1], s0, seed + 23);
      auto graph = union_graphs({path_from_actions(d1.actions, 1), path_from_actions(d2.actions, 1)});
      LocalizerConfig lcfg;
      lcfg.obs_width = sort_env.feature_width();
      lcfg.action_count = sort_env.action_count();
      lcfg.enc_hidden = 8;
      lcfg.embed = 6;
      lcfg.seed = seed;
      Localizer loc = make_localizer(lcfg);
      FrameSample frame{d1.observations[1], 0, graph.node_of(d1.actions[0])};
      auto loc_loss = [&](ModuleParams& p) {
        Localizer probe{loc.cfg, ModuleParams(0)};
        probe.params = std::move(p);
        double v = localizer_loss(probe, graph, frame);
        p = std::move(probe.params);
        return v;
      };
      track("localizer", gradient_check(loc_loss, loc.params, 1e-5, 3, seed).max_rel_error);

      GcnConfig gcfg;
      gcfg.action_count = sort_env.action_count();
      gcfg.embed = 6;
      gcfg.gate_hidden = 6;
      gcfg.seed = seed;
      Gcn gcn = make_gcn(gcfg);
      NodeEmbeddings emb = gcn_forward(gcn, graph).node_embeddings;
      EdgeClassifierConfig ecfg;
      ecfg.loc_embed = lcfg.embed;
      ecfg.gcn_embed = gcfg.embed;
      ecfg.seed = seed;
      EdgeClassifier edge = make_edge_classifier(ecfg);
      TransitionSample sample{d1.observations[0], 0, -1, 0, graph.node_of(d1.actions[0])};
      auto edge_loss = [&](ModuleParams& p) {
        EdgeClassifier probe{edge.cfg, ModuleParams(0)};
        probe.params = std::move(p);
        double v = edge_classifier_loss(probe, loc, graph, emb, sample);
        p = std::move(probe.params);
        loc.params.zero_grad();
        return v;
      };
      track("edge_classifier", gradient_check(edge_loss, edge.params, 1e-5, 4, seed).max_rel_error);
    }
    {  // flat baseline
      FlatPolicyConfig cfg;
      cfg.obs_width = env.feature_width();
      cfg.action_count = env.action_count();
      cfg.hidden = 6;
      cfg.seed = seed;
      FlatPolicy model = make_flat_policy(cfg);
      auto loss = [&](ModuleParams& p) {
        FlatPolicy probe{model.cfg, ModuleParams(0)};
        probe.params = std::move(p);
        double v = flat_policy_loss(probe, demo, demo);
        p = std::move(probe.params);
        return v;
      };
      track("flat_policy", gradient_check(loss, model.params, 1e-5, 3, seed).max_rel_error);
    }
  }
  r.pass = worst < 1e-4;
  r.details = "max relative error " + std::to_string(worst) + " (" + worst_block + ")";
  return r;
}

CriterionResult gate_identities(const ExperimentConfig&) {
  CriterionResult r{4, "forced-gate fixpoint and complement identities hold to 1e-9", false, "", 0.0};
  double worst = 0.0;
  Rng rng(99);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GcnConfig cfg;
    cfg.action_count = 12;
    cfg.embed = 8;
    cfg.gate_hidden = 8;
    cfg.iterations = 3;
    cfg.seed = seed;
    Gcn model = make_gcn(cfg);
    int len = 2 + static_cast<int>(rng.index(6));
    std::vector<int> seq;
    for (int i = 0; i < len; ++i) seq.push_back(static_cast<int>(rng.index(12)));
    auto path = path_from_actions(seq, 0);
    int n = path.node_count();

    auto fix = gcn_forward_forced(model, path, 0.0, 1.0);
    for (int i = 0; i < n * n; ++i) worst = std::max(worst, std::fabs(fix.soft_adj[i] - path.adj[i]));

    Gcn one_step = model;
    one_step.cfg.iterations = 1;
    auto comp = gcn_forward_forced(one_step, path, 1.0, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double want = j == 0 ? 0.0 : 1.0 - path.adj[i * n + j];  // START column pinned
        worst = std::max(worst, std::fabs(comp.soft_adj[i * n + j] - want));
      }
  }
  r.pass = worst <= 1e-9;
  r.details = "max deviation " + std::to_string(worst);
  return r;
}

CriterionResult unseen_generalization(const ExperimentConfig& cfg, const std::string& out_dir) {
  CriterionResult r{5, "unseen stacking success >= 0.85 at max sweep, monotone within 5%", false, "", 0.0};
  auto rows = run_data_efficiency(cfg, out_dir);
  bool ok = true;
  std::ostringstream details;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].episodes < cfg.min_episodes) ok = false;
    if (i + 1 == rows.size() && rows[i].success_rate < 0.85) ok = false;
    if (i > 0 && rows[i].success_rate < rows[i - 1].success_rate - 0.05) ok = false;
    details << rows[i].seen_tasks << ":" << fmt(rows[i].success_rate) << " ";
  }
  r.pass = ok;
  r.details = details.str();
  return r;
}

CriterionResult ablation_zeros(const ExperimentConfig& cfg, const std::string& out_dir,
                               std::vector<MetricsRecord>* sort_alt_rows) {
  CriterionResult r{6, "ablation zeros and the alternate-order grid", false, "", 0.0};
  auto ab = run_ablations(cfg, out_dir);
  auto alt = run_alternate_order(cfg, out_dir);
  if (sort_alt_rows) *sort_alt_rows = alt;
  double no_interp = row_named(ab, "no_interpreter").success_rate;
  double no_loc = row_named(ab, "no_localizer").success_rate;
  double full_stack = row_named(ab, "full").success_rate;
  double fc_init = row_named(ab, "fully_connected_init").success_rate;
  double alt_full = row_named(alt, "full").success_rate;
  double alt_nogcn = row_named(alt, "no_gcn").success_rate;
  double alt_noedge = row_named(alt, "no_edge_classifier").success_rate;
  bool ok = no_interp == 0.0 && no_loc == 0.0 && alt_noedge == 0.0 && alt_nogcn <= 0.10 &&
            alt_full >= 0.80 && full_stack > fc_init;
  r.pass = ok;
  std::ostringstream details;
  details << "stacking full=" << fmt(full_stack) << " fc_init=" << fmt(fc_init)
          << " no_interp=" << fmt(no_interp) << " no_loc=" << fmt(no_loc)
          << " | sort-alt full=" << fmt(alt_full) << " no_gcn=" << fmt(alt_nogcn)
          << " no_edge=" << fmt(alt_noedge);
  r.details = details.str();
  return r;
}

CriterionResult step_generalization(const ExperimentConfig& cfg, const std::string& out_dir) {
  CriterionResult r{7, "collection: trained on {2,4} objects, NTG beats flat at every count", false,
                    "", 0.0};
  auto rows = run_step_generalization(cfg, out_dir);
  bool ok = true;
  std::ostringstream details;
  for (int n : cfg.collection_eval_counts) {
    std::string id = "collect_gen_n" + std::to_string(n);
    const MetricsRecord* ntg = nullptr;
    const MetricsRecord* flat = nullptr;
    for (const auto& row : rows) {
      if (row.experiment_id != id) continue;
      (row.condition == "ntg" ? ntg : flat) = &row;
    }
    if (!ntg || !flat) throw InputError("missing collection rows for n=" + std::to_string(n));
    if (ntg->episodes < cfg.min_episodes) ok = false;
    if (ntg->success_rate <= flat->success_rate) ok = false;
    details << "n" << n << ":" << fmt(ntg->success_rate) << ">" << fmt(flat->success_rate) << " ";
  }
  r.pass = ok;
  r.details = details.str();
  return r;
}

CriterionResult nll_ordering(const ExperimentConfig& cfg, const std::string& out_dir) {
  CriterionResult r{8, "NLL ordering full < no_graph < uniform; uniform matches closed form", false,
                    "", 0.0};
  NllReport report = run_nll_protocol(cfg, out_dir);
  double full = *row_named(report.rows, "full").mean_nll;
  double no_graph = *row_named(report.rows, "no_graph").mean_nll;
  double uniform = *row_named(report.rows, "uniform").mean_nll;
  r.pass = full < no_graph && no_graph < uniform && report.uniform_closed_form_gap <= 1e-9;
  std::ostringstream details;
  details << "full=" << fmt(full) << " no_graph=" << fmt(no_graph) << " uniform=" << fmt(uniform)
          << " closed-form gap=" << report.uniform_closed_form_gap;
  r.details = details.str();
  return r;
}

CriterionResult retention(const ExperimentConfig&, const std::string& out_dir) {
  CriterionResult r{9, "every completed graph retains its demonstrated path edges", false, "", 0.0};
  // export_artifacts throws if any exported completed graph drops a path edge
  std::string summary = export_artifacts(out_dir);
  std::string text = read_bytes(summary);
  auto pos = text.find("graph exports: ");
  int pairs = 0;
  if (pos != std::string::npos) pairs = std::atoi(text.c_str() + pos + 15);
  r.pass = pairs > 0;
  r.details = std::to_string(pairs) + " path/completed pairs verified";
  return r;
}

CriterionResult reproducibility(const ExperimentConfig& cfg, const std::string& out_dir) {
  CriterionResult r{10, "same root seed reproduces byte-identical metrics and DOT outputs", false,
                    "", 0.0};
  std::string rep1 = out_dir + "/repro1", rep2 = out_dir + "/repro2";
  ExperimentConfig small = cfg;
  run_alternate_order(small, rep1);
  run_alternate_order(small, rep2);
  std::vector<std::string> rel;
  for (const auto& entry : fs::recursive_directory_iterator(rep1))
    if (entry.is_regular_file()) {
      std::string p = fs::relative(entry.path(), rep1).string();
      if (entry.path().extension() == ".csv" || entry.path().extension() == ".dot")
        rel.push_back(p);
    }
  std::sort(rel.begin(), rel.end());
  int compared = 0, differing = 0;
  for (const auto& p : rel) {
    ++compared;
    if (!fs::exists(rep2 + "/" + p) || read_bytes(rep1 + "/" + p) != read_bytes(rep2 + "/" + p))
      ++differing;
  }
  r.pass = compared > 0 && differing == 0;
  r.details = std::to_string(compared) + " files compared, " + std::to_string(differing) +
              " differing";
  return r;
}

}  // namespace

AcceptanceReport run_acceptance(const ExperimentConfig& cfg, const std::string& out_dir,
                                const std::set<int>& only) {
  fs::create_directories(out_dir);
  AcceptanceReport report;
  std::vector<MetricsRecord> sort_alt_rows;

  std::vector<std::pair<int, std::function<CriterionResult()>>> criteria = {
      {1, [&] { return oracle_machinery(cfg); }},
      {2, [&] { return union_equals_oracle(cfg); }},
      {3, [&] { return gradient_correctness(cfg); }},
      {4, [&] { return gate_identities(cfg); }},
      {5, [&] { return unseen_generalization(cfg, out_dir); }},
      {6, [&] { return ablation_zeros(cfg, out_dir, &sort_alt_rows); }},
      {7, [&] { return step_generalization(cfg, out_dir); }},
      {8, [&] { return nll_ordering(cfg, out_dir); }},
      {9, [&] { return retention(cfg, out_dir); }},
      {10, [&] { return reproducibility(cfg, out_dir); }},
  };

  for (auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    auto start = std::chrono::steady_clock::now();
    CriterionResult result;
    try {
      result = fn();
    } catch (const std::exception& e) {
      result.id = id;
      result.name = "criterion " + std::to_string(id);
      result.pass = false;
      result.details = std::string("exception: ") + e.what();
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %2d: %s — %s [%.1fs]\n", result.pass ? "PASS" : "FAIL", result.id,
                result.name.c_str(), result.details.c_str(), result.seconds);
    std::fflush(stdout);
    report.all_pass = report.all_pass && result.pass;
    report.results.push_back(std::move(result));
  }
  return report;
}

}  // namespace ntg
