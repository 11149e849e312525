#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "ntg/ctg.hpp"
#include "ntg/env.hpp"
#include "ntg/rng.hpp"

using namespace ntg;

namespace {

std::set<std::pair<int, int>> edge_set(const ConjugateTaskGraph& g) {
  std::set<std::pair<int, int>> out;
  int n = g.node_count();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (g.adj[i * n + j] > 0.0) out.emplace(g.action_of(i), g.action_of(j));
  return out;
}

bool same_graph(const ConjugateTaskGraph& a, const ConjugateTaskGraph& b) {
  return a.actions == b.actions && edge_set(a) == edge_set(b);
}

WorldConfig sorting_world(int categories, int bins, int per_cat = 1) {
  WorldConfig cfg;
  cfg.domain = Domain::Sorting;
  cfg.sorting = {categories, bins, per_cat};
  return cfg;
}

}  // namespace

TEST_CASE("path_from_actions: single action") {
  auto g = path_from_actions({7});
  CHECK(g.actions == std::vector<int>{7});
  CHECK(edge_set(g) == std::set<std::pair<int, int>>{{kStartAction, 7}});
  g.validate();
}

TEST_CASE("path_from_actions: revisited node keeps both outgoing edges") {
  // [a, b, a, c] with a=1 b=2 c=3
  auto g = path_from_actions({1, 2, 1, 3});
  CHECK(g.actions == std::vector<int>{1, 2, 3});
  std::set<std::pair<int, int>> want = {{kStartAction, 1}, {1, 2}, {2, 1}, {1, 3}};
  CHECK(edge_set(g) == want);
  CHECK(outgoing(g, 1) == std::vector<int>{2, 3});  // two successors on the twice-visited node
  g.validate();
}

TEST_CASE("path_from_actions: repeated transitions deduplicate, empty input rejected") {
  auto g = path_from_actions({4, 5, 4, 5});
  CHECK(g.edge_count() == 3);  // START->4, 4->5, 5->4
  CHECK_THROWS_AS(path_from_actions({}), InputError);
}

TEST_CASE("union_graphs: idempotence and the two-order example") {
  auto p = path_from_actions({1, 2}, 9);
  CHECK(same_graph(union_graphs({p, p}), p));

  auto q = path_from_actions({2, 1}, 9);
  auto u = union_graphs({p, q});
  std::set<std::pair<int, int>> want = {{kStartAction, 1}, {1, 2}, {kStartAction, 2}, {2, 1}};
  CHECK(edge_set(u) == want);
}

TEST_CASE("union_graphs: task mismatch and soft inputs are rejected") {
  auto a = path_from_actions({1}, 1);
  auto b = path_from_actions({1}, 2);
  CHECK_THROWS_AS(union_graphs({a, b}), InputError);
  CHECK_NOTHROW(union_graphs({a, b}, true));

  auto soft = a;
  soft.soft = true;
  CHECK_THROWS_AS(union_graphs({soft, soft}), InputError);
}

TEST_CASE("property: union is idempotent, commutative, associative") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ConjugateTaskGraph> paths;
    for (int k = 0; k < 3; ++k) {
      int len = 1 + static_cast<int>(rng.index(6));
      std::vector<int> seq;
      for (int i = 0; i < len; ++i) seq.push_back(static_cast<int>(rng.index(5)));
      paths.push_back(path_from_actions(seq, 0));
    }
    auto u = union_graphs(paths);
    CHECK(same_graph(union_graphs({u, u}), u));
    CHECK(same_graph(union_graphs({paths[0], paths[1]}), union_graphs({paths[1], paths[0]})));
    auto left = union_graphs({union_graphs({paths[0], paths[1]}), paths[2]});
    auto right = union_graphs({paths[0], union_graphs({paths[1], paths[2]})});
    CHECK(same_graph(left, right));
    // every path's edges are contained in the union
    for (const auto& p : paths) {
      auto ue = edge_set(u);
      for (auto e : edge_set(p)) CHECK(ue.count(e) == 1);
    }
  }
}

TEST_CASE("outgoing: terminal node is empty, START of [a,b] is [a]") {
  auto g = path_from_actions({10, 20});
  CHECK(outgoing(g, 20).empty());
  CHECK(outgoing(g, kStartAction) == std::vector<int>{10});
  CHECK_THROWS_AS(outgoing(g, 999), InputError);
}

TEST_CASE("oracle_graph: two-block goal is a single edge") {
  WorldConfig cfg;
  cfg.domain = Domain::Stacking;
  cfg.stacking.blocks = 2;
  Env env(cfg);
  TaskSpec task;
  task.domain = Domain::Stacking;
  task.id = 0;
  task.goal_support = {-1, 0};  // B1 on B0
  auto g = oracle_graph(env, task);
  REQUIRE(g.actions.size() == 1);
  CHECK(env.action_name(g.actions[0]) == "place(B1,B0)");
  CHECK(g.edge_count() == 1);
}

TEST_CASE("oracle_graph: two sortable objects yield both interleavings") {
  Env env(sorting_world(2, 3));
  auto tasks = env.generate_tasks(2, 8);
  auto g = oracle_graph(env, tasks[0]);
  REQUIRE(g.actions.size() == 2);
  int a = g.actions[0], b = g.actions[1];
  std::set<std::pair<int, int>> want = {{kStartAction, a}, {kStartAction, b}, {a, b}, {b, a}};
  CHECK(edge_set(g) == want);  // 4 non-START... all edges; 4 of them beyond START? count:
  CHECK(g.edge_count() == 4);
}

TEST_CASE("oracle_graph: single-stack goal equals the demo path graph") {
  WorldConfig cfg;
  cfg.domain = Domain::Stacking;
  cfg.stacking.blocks = 3;
  Env env(cfg);
  TaskSpec task;
  task.domain = Domain::Stacking;
  task.id = 0;
  task.goal_support = {-1, 0, 1};
  auto g = oracle_graph(env, task);
  auto [state, obs] = env.reset(task, 0);
  auto demo = env.plan_demo(task, state, 3);
  CHECK(same_graph(g, path_from_actions(demo.actions, 0)));
}

TEST_CASE("oracle_graph contains every successful planned sequence") {
  Env env(sorting_world(3, 4));
  auto tasks = env.generate_tasks(4, 44);
  for (const auto& task : tasks) {
    auto g = oracle_graph(env, task);
    auto ge = edge_set(g);
    auto [state, obs] = env.reset(task, 0);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      auto demo = env.plan_demo(task, state, seed);
      for (auto e : edge_set(path_from_actions(demo.actions, task.id))) CHECK(ge.count(e) == 1);
    }
  }
}

TEST_CASE("union over demos covering all orders equals the oracle graph") {
  Env env(sorting_world(2, 4));
  auto tasks = env.generate_tasks(3, 3);
  for (const auto& task : tasks) {
    auto [state, obs] = env.reset(task, 0);
    std::vector<ConjugateTaskGraph> paths;
    std::set<std::string> orders;
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
      auto demo = env.plan_demo(task, state, seed);
      paths.push_back(path_from_actions(demo.actions, task.id));
      std::string sig;
      for (int a : demo.actions) sig += std::to_string(a) + ",";
      orders.insert(sig);
    }
    REQUIRE(orders.size() == 2);  // both orders of the two objects covered
    CHECK(same_graph(union_graphs(paths), oracle_graph(env, task)));
  }
}

TEST_CASE("to_dot: deterministic output, labels, START-only graph") {
  ConjugateTaskGraph empty;
  empty.adj = {0.0};
  std::string dot = to_dot(empty, [](int) { return std::string("?"); });
  CHECK(dot.find("START") != std::string::npos);
  CHECK(dot.find("->") == std::string::npos);

  WorldConfig cfg;
  cfg.domain = Domain::Stacking;
  cfg.stacking.blocks = 3;
  Env env(cfg);
  auto g = path_from_actions({4, 8}, 1);
  std::string d1 = to_dot(g, env);
  std::string d2 = to_dot(g, env);
  CHECK(d1 == d2);
  CHECK(d1.find("place(B1,B0)") != std::string::npos);
  CHECK(d1.find("place(B2,B2)") == std::string::npos);

  auto soft = g;
  soft.soft = true;
  soft.set(soft.node_of(4), soft.node_of(8), 0.73);
  CHECK(to_dot(soft, env).find("0.73") != std::string::npos);
}

TEST_CASE("graph json round-trip") {
  auto g = path_from_actions({3, 1, 4, 1, 5}, 12);
  auto back = graph_from_json(graph_to_json(g));
  CHECK(back.task_id == 12);
  CHECK(same_graph(back, g));

  auto soft = g;
  soft.soft = true;
  soft.set(1, 2, 0.25);
  auto back2 = graph_from_json(graph_to_json(soft));
  CHECK(back2.soft);
  CHECK(back2.at(1, 2) == 0.25);
}
