#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ntg/executor.hpp"
#include "ntg/gradcheck.hpp"

using namespace ntg;

namespace {

WorldConfig stacking_world(int blocks) {
  WorldConfig cfg;
  cfg.domain = Domain::Stacking;
  cfg.stacking.blocks = blocks;
  return cfg;
}

// Minimal seen-task dataset: union graphs, completion embeddings, localizer
// frames and edge-classifier transitions, all derived from planned demos.
struct MiniDataset {
  std::vector<ConjugateTaskGraph> graphs;  // per task union graph
  std::vector<NodeEmbeddings> embeddings;  // matching completion embeddings
  std::vector<FrameSample> frames;
  std::vector<TransitionSample> transitions;
  Gcn gcn{GcnConfig{}, ModuleParams{}};
};

MiniDataset build_dataset(const Env& env, const std::vector<TaskSpec>& tasks, int demos_per_task,
                          std::uint64_t seed, int gcn_epochs = 15) {
  MiniDataset out;
  std::vector<std::vector<Demonstration>> demos_per(tasks.size());
  std::vector<GcnTrainingPair> gcn_pairs;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    std::vector<ConjugateTaskGraph> paths;
    for (int k = 0; k < std::max(demos_per_task, 12); ++k) {
      // every demo gets its own initial state (fresh scatter / search order)
      auto [state, obs] = env.reset(tasks[ti], derive_seed(seed, "reset", ti * 100 + k));
      auto demo = env.plan_demo(tasks[ti], state, derive_seed(seed, "demo", ti * 100 + k));
      if (k < demos_per_task) demos_per[ti].push_back(demo);
      paths.push_back(path_from_actions(demo.actions, tasks[ti].id));
    }
    out.graphs.push_back(union_graphs(paths));
    for (int k = 0; k < demos_per_task; ++k) gcn_pairs.push_back({paths[k], out.graphs.back()});
  }
  GcnConfig gc;
  gc.action_count = env.action_count();
  gc.embed = 16;
  gc.gate_hidden = 24;
  gc.epochs = gcn_epochs;
  gc.seed = derive_seed(seed, "gcn");
  out.gcn = train_gcn(gcn_pairs, gc);

  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    out.embeddings.push_back(gcn_forward(out.gcn, out.graphs[ti]).node_embeddings);
    for (const auto& demo : demos_per[ti]) {
      int prev_node = 0;  // START
      for (std::size_t t = 0; t < demo.actions.size(); ++t) {
        int next_node = out.graphs[ti].node_of(demo.actions[t]);
        out.frames.push_back({demo.observations[t + 1], static_cast<int>(ti), next_node});
        out.transitions.push_back(
            {demo.observations[t], static_cast<int>(ti), -1, prev_node, next_node});
        prev_node = next_node;
      }
      out.frames.push_back({demo.observations[0], static_cast<int>(ti), 0});
    }
  }
  return out;
}

LocalizerConfig loc_config(const Env& env, std::uint64_t seed) {
  LocalizerConfig cfg;
  cfg.obs_width = env.feature_width();
  cfg.action_count = env.action_count();
  cfg.enc_hidden = 48;
  cfg.embed = 24;
  cfg.epochs = 12;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("localize: START-only graph puts probability one on START") {
  LocalizerConfig cfg;
  cfg.obs_width = 4;
  cfg.action_count = 6;
  Localizer model = make_localizer(cfg);
  ConjugateTaskGraph start_only;
  start_only.adj = {0.0};
  auto probs = localize(model, {0.1, 0.2, 0.3, 0.4}, start_only);
  REQUIRE(probs.size() == 1);
  CHECK(probs[0] == 1.0);
}

TEST_CASE("localize: encoder forced onto one node embedding selects that node") {
  LocalizerConfig cfg;
  cfg.obs_width = 3;
  cfg.action_count = 4;
  cfg.enc_hidden = 5;
  cfg.embed = 2;
  Localizer model = make_localizer(cfg);
  // zero the encoder weights and steer the output bias: Enc(o) = tanh(b) = (0.9, 0)
  for (const char* name : {"enc.l0.W", "enc.l0.b", "enc.l1.W"})
    std::fill(model.params.at(name).values.begin(), model.params.at(name).values.end(), 0.0);
  model.params.at("enc.l1.b").values = {std::atanh(0.9), 0.0};
  // distinct node embeddings; action 2 (row 3) aligns with the encoder output
  auto& ne = model.params.at("ne").values;
  std::fill(ne.begin(), ne.end(), 0.0);
  ne[0 * 2 + 0] = -1.0;  // START
  ne[1 * 2 + 0] = -0.5;  // action 0
  ne[3 * 2 + 0] = 1.0;   // action 2
  ne[4 * 2 + 1] = 1.0;   // action 3, orthogonal
  auto graph = path_from_actions({0, 2, 3}, 0);
  auto probs = localize(model, {0.0, 0.0, 0.0}, graph);
  CHECK(graph.action_of(static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin())) == 2);
}

TEST_CASE("trained localizer reaches 95% top-1 on held-out seen-task frames") {
  Env env(stacking_world(4));
  auto tasks = env.generate_tasks(20, 5);
  MiniDataset train = build_dataset(env, tasks, 3, 11);
  Localizer model = train_localizer(train.graphs, train.frames, loc_config(env, 3));
  MiniDataset heldout = build_dataset(env, tasks, 2, 999, 1);
  double acc = localizer_accuracy(model, heldout.graphs, heldout.frames);
  CHECK(acc >= 0.95);
}

TEST_CASE("classify_edge: single outgoing edge gets probability one") {
  Env env(stacking_world(3));
  LocalizerConfig lcfg = loc_config(env, 4);
  Localizer loc = make_localizer(lcfg);
  EdgeClassifierConfig ecfg;
  ecfg.loc_embed = lcfg.embed;
  ecfg.gcn_embed = 8;
  EdgeClassifier edge = make_edge_classifier(ecfg);
  auto graph = path_from_actions({4, 7}, 0);
  NodeEmbeddings emb(graph.node_count(), std::vector<double>(8, 0.1));
  std::vector<double> obs(env.feature_width(), 0.0);
  auto d = classify_edge(edge, loc, graph, emb, graph.node_of(4), obs);
  REQUIRE(d.candidates == std::vector<int>{7});
  CHECK(d.probs[0] == 1.0);
  // terminal node: empty distribution, caught by the policy as a dead end
  CHECK(classify_edge(edge, loc, graph, emb, graph.node_of(7), obs).candidates.empty());
}

TEST_CASE("trained edge classifier reaches 90% on held-out seen-task transitions") {
  Env env(stacking_world(4));
  auto tasks = env.generate_tasks(20, 5);
  MiniDataset train = build_dataset(env, tasks, 3, 11);
  Localizer loc = train_localizer(train.graphs, train.frames, loc_config(env, 3));
  EdgeClassifierConfig ecfg;
  ecfg.loc_embed = loc.cfg.embed;
  ecfg.gcn_embed = train.gcn.cfg.embed;
  ecfg.epochs = 12;
  ecfg.seed = 7;
  EdgeClassifier edge =
      train_edge_classifier(train.graphs, train.embeddings, train.transitions, loc, ecfg, nullptr, &train.frames);

  // fresh demos of the same tasks, same graphs/embeddings
  MiniDataset heldout = build_dataset(env, tasks, 2, 999, 1);
  double acc = edge_classifier_accuracy(edge, loc, train.graphs, train.embeddings,
                                        heldout.transitions);
  CHECK(acc >= 0.90);
  // encoder fine-tuning during edge training must not break localization
  CHECK(localizer_accuracy(loc, heldout.graphs, heldout.frames) >= 0.95);
}

TEST_CASE("twice-visited search node picks pickup when the target is visible") {
  WorldConfig cfg;
  cfg.domain = Domain::Collection;
  cfg.collection.target_counts = {2};
  Env env(cfg);
  auto tasks = env.generate_tasks(16, 9);
  std::vector<TaskSpec> seen(tasks.begin(), tasks.begin() + 14);
  MiniDataset train = build_dataset(env, seen, 4, 21);
  Localizer loc = train_localizer(train.graphs, train.frames, loc_config(env, 13));
  EdgeClassifierConfig ecfg;
  ecfg.loc_embed = loc.cfg.embed;
  ecfg.gcn_embed = train.gcn.cfg.embed;
  ecfg.epochs = 16;
  ecfg.seed = 9;
  EdgeClassifier edge =
      train_edge_classifier(train.graphs, train.embeddings, train.transitions, loc, ecfg, nullptr, &train.frames);

  // held-out episodes of seen tasks: at every revisit of the search node the
  // classifier must choose between searching again and picking up, driven by
  // what is visible. Only unambiguous steps are scored (at most one remaining
  // target in sight), since with two visible targets either pickup is right.
  int checked = 0, correct = 0;
  for (std::size_t ti = 0; ti < seen.size(); ++ti) {
    auto [state0, obs0] = env.reset(seen[ti], 555);
    auto demo = env.plan_demo(seen[ti], state0, 556);
    EnvState state = demo.initial_state;
    int prev_node = 0;
    for (std::size_t t = 0; t < demo.actions.size(); ++t) {
      int visible_targets = 0;
      for (const auto& [obj, rec] : seen[ti].manifest)
        if (state.collect().placement[obj] == state.collect().agent_pos &&
            state.collect().agent_pos != -1)
          ++visible_targets;
      bool search_node_decision = prev_node == train.graphs[ti].node_of(0);
      if (search_node_decision && visible_targets <= 1) {
        auto d = classify_edge(edge, loc, train.graphs[ti], train.embeddings[ti], prev_node,
                               demo.observations[t]);
        if (!d.candidates.empty()) {
          int argmax = 0;
          for (std::size_t k = 1; k < d.probs.size(); ++k)
            if (d.probs[k] > d.probs[argmax]) argmax = static_cast<int>(k);
          ++checked;
          if (d.candidates[argmax] == demo.actions[t]) ++correct;
        }
      }
      prev_node = train.graphs[ti].node_of(demo.actions[t]);
      auto [next, o, status] = env.step(state, demo.actions[t], seen[ti]);
      state = std::move(next);
    }
  }
  REQUIRE(checked > 20);
  CHECK(static_cast<double>(correct) / checked >= 0.9);
}

TEST_CASE("oracle machinery: 100% success on every 3-block task") {
  Env env(stacking_world(3));
  auto tasks = env.generate_tasks(13, 1);
  for (const auto& task : tasks) {
    auto g = oracle_graph(env, task);
    RolloutResult r = oracle_rollout(env, task, g, 0, 16);
    CHECK(r.success);
  }
}

TEST_CASE("rollout: already-satisfied start succeeds with an empty trajectory") {
  Env env(stacking_world(3));
  TaskSpec task;
  task.domain = Domain::Stacking;
  task.goal_support = {-1, 0, 1};
  EnvState done;
  done.domain = Domain::Stacking;
  done.data = StackState{{-1, 0, 1}, -1};
  PolicyBundle bundle;
  bundle.graph = path_from_actions({4}, task.id);
  bundle.uniform_localizer = true;
  bundle.uniform_edges = true;
  RolloutResult r = rollout(bundle, env, task, 0, 10, done);
  CHECK(r.success);
  CHECK(r.steps.empty());
}

TEST_CASE("rollout: budget exhaustion on a three-action task is a failure") {
  Env env(stacking_world(4));
  TaskSpec task;
  task.domain = Domain::Stacking;
  task.goal_support = {-1, 0, 1, 2};
  auto g = oracle_graph(env, task);
  PolicyBundle bundle;
  bundle.graph = g;
  bundle.uniform_localizer = true;
  bundle.uniform_edges = true;
  RolloutResult r = rollout(bundle, env, task, 0, 1);
  CHECK_FALSE(r.success);
  CHECK_FALSE(r.failure.empty());
}

TEST_CASE("uniform policy NLL equals the closed form, exactly on a known case") {
  auto fc = fully_connected_graph({3, 5}, 0);
  // self-loops included: outdegree is 2 at every node
  PolicyBundle bundle;
  bundle.graph = fc;
  bundle.uniform_edges = true;
  bundle.uniform_localizer = true;
  Demonstration demo;
  demo.actions = {3, 5};
  demo.observations = {{0.0}, {0.0}, {0.0}};
  double nll = nll_of_demo(bundle, demo);
  CHECK(nll == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(std::fabs(nll - uniform_nll_closed_form(fc, demo.actions)) < 1e-9);

  // off-graph actions fall back to the floor probability
  Demonstration off;
  off.actions = {9};
  off.observations = {{0.0}, {0.0}};
  CHECK(nll_of_demo(bundle, off) == doctest::Approx(-std::log(1e-7)));
}

TEST_CASE("policy gradient hooks pass the gradient check") {
  WorldConfig sorting;
  sorting.domain = Domain::Sorting;
  sorting.sorting = {2, 3, 1};  // branching graphs guaranteed
  Env env(sorting);
  auto tasks = env.generate_tasks(3, 2);
  MiniDataset data = build_dataset(env, tasks, 2, 31, 2);
  LocalizerConfig lcfg = loc_config(env, 17);
  lcfg.enc_hidden = 8;
  lcfg.embed = 6;
  Localizer loc = make_localizer(lcfg);

  auto loc_loss = [&](ModuleParams& p) {
    Localizer probe{loc.cfg, ModuleParams(0)};
    probe.params = std::move(p);
    double v = localizer_loss(probe, data.graphs[0], data.frames[0]);
    p = std::move(probe.params);
    return v;
  };
  CHECK(gradient_check(loc_loss, loc.params, 1e-5, 4, 3).max_rel_error < 1e-4);

  EdgeClassifierConfig ecfg;
  ecfg.loc_embed = lcfg.embed;
  ecfg.gcn_embed = data.gcn.cfg.embed;
  EdgeClassifier edge = make_edge_classifier(ecfg);
  TransitionSample sample;
  for (const auto& t : data.transitions)
    if (outgoing_nodes(data.graphs[t.graph_id], t.node).size() > 1) {
      sample = t;
      break;
    }
  auto edge_loss = [&](ModuleParams& p) {
    EdgeClassifier probe{edge.cfg, ModuleParams(0)};
    probe.params = std::move(p);
    double v = edge_classifier_loss(probe, loc, data.graphs[sample.graph_id],
                                    data.embeddings[sample.graph_id], sample);
    p = std::move(probe.params);
    loc.params.zero_grad();
    return v;
  };
  CHECK(gradient_check(edge_loss, edge.params, 1e-5, 6, 5).max_rel_error < 1e-4);
}

TEST_CASE("localizer and edge distributions are proper") {
  Env env(stacking_world(4));
  auto tasks = env.generate_tasks(4, 3);
  MiniDataset data = build_dataset(env, tasks, 2, 41, 2);
  Localizer loc = make_localizer(loc_config(env, 19));
  EdgeClassifierConfig ecfg;
  ecfg.loc_embed = loc.cfg.embed;
  ecfg.gcn_embed = data.gcn.cfg.embed;
  EdgeClassifier edge = make_edge_classifier(ecfg);
  for (const auto& f : data.frames) {
    auto p = localize(loc, f.obs, data.graphs[f.graph_id]);
    double s = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }
  for (const auto& t : data.transitions) {
    auto d = classify_edge(edge, loc, data.graphs[t.graph_id], data.embeddings[t.graph_id], t.node,
                           t.obs);
    if (d.candidates.empty()) continue;
    double s = 0.0;
    for (double v : d.probs) s += v;
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("fully connected graph has every node feeding every action") {
  auto fc = fully_connected_graph({2, 9, 4}, 3);
  CHECK(fc.actions == std::vector<int>{2, 4, 9});
  CHECK(fc.edge_count() == 4 * 3);  // 4 nodes (with START) x 3 action targets
  for (int a : {2, 4, 9}) CHECK(outgoing(fc, a) == std::vector<int>{2, 4, 9});
  CHECK(outgoing(fc, kStartAction) == std::vector<int>{2, 4, 9});
  fc.validate();
}
