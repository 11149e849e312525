#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>

#include "ntg/env.hpp"
#include "ntg/rng.hpp"

using namespace ntg;

namespace {

WorldConfig stacking_world(int blocks) {
  WorldConfig cfg;
  cfg.domain = Domain::Stacking;
  cfg.stacking.blocks = blocks;
  return cfg;
}

WorldConfig sorting_world(int categories, int bins, int per_cat = 1) {
  WorldConfig cfg;
  cfg.domain = Domain::Sorting;
  cfg.sorting = {categories, bins, per_cat};
  return cfg;
}

WorldConfig collection_world(std::vector<int> target_counts, bool distractors = true) {
  WorldConfig cfg;
  cfg.domain = Domain::Collection;
  cfg.collection.target_counts = std::move(target_counts);
  cfg.collection.distractors = distractors;
  return cfg;
}

// Brute-force oracle: enumerate raw support vectors over {table, blocks}^B and
// keep the valid ones (no self support, one block per top, acyclic). This is
// deliberately independent of the generator's backtracking construction.
long long brute_force_config_count(int blocks) {
  long long total = 0;
  std::vector<int> support(blocks, -1);
  auto valid = [&]() {
    std::vector<int> occupancy(blocks, 0);
    for (int b = 0; b < blocks; ++b) {
      if (support[b] == b) return false;
      if (support[b] >= 0 && ++occupancy[support[b]] > 1) return false;
    }
    for (int b = 0; b < blocks; ++b) {
      int cur = b, steps = 0;
      while (cur != -1) {
        cur = support[cur];
        if (++steps > blocks) return false;
      }
    }
    return true;
  };
  long long combos = 1;
  for (int b = 0; b < blocks; ++b) combos *= blocks + 1;
  for (long long code = 0; code < combos; ++code) {
    long long rest = code;
    for (int b = 0; b < blocks; ++b) {
      support[b] = static_cast<int>(rest % (blocks + 1)) - 1;
      rest /= blocks + 1;
    }
    if (valid()) ++total;
  }
  return total;
}

int replay(const Env& env, const TaskSpec& task, const Demonstration& demo,
           bool check_observations = true) {
  EnvState state = demo.initial_state;
  if (check_observations) REQUIRE(demo.observations.size() == demo.actions.size() + 1);
  if (check_observations) CHECK(env.featurize(state).features == demo.observations[0]);
  int goals = 0;
  for (std::size_t i = 0; i < demo.actions.size(); ++i) {
    auto [next, obs, status] = env.step(state, demo.actions[i], task);
    REQUIRE(status != StepStatus::Invalid);
    if (status == StepStatus::Goal) ++goals;
    if (check_observations) CHECK(obs.features == demo.observations[i + 1]);
    state = std::move(next);
  }
  CHECK(env.check_success(state, task));
  return goals;
}

}  // namespace

TEST_CASE("stacking: 3 blocks have exactly 13 distinct configurations") {
  Env env(stacking_world(3));
  long long want = brute_force_config_count(3);
  CHECK(want == 13);
  CHECK(env.count_stacking_goals() == want);

  auto tasks = env.generate_tasks(13, 5);
  REQUIRE(tasks.size() == 13);
  std::set<std::string> keys;
  for (const auto& t : tasks) keys.insert(t.goal_key());
  CHECK(keys.size() == 13);

  CHECK_THROWS_AS(env.generate_tasks(14, 5), GenerationError);
}

TEST_CASE("stacking: generator agrees with brute force for 4 blocks") {
  Env env(stacking_world(4));
  CHECK(env.count_stacking_goals() == brute_force_config_count(4));  // 73
  CHECK(env.count_stacking_goals() == 73);
}

TEST_CASE("task generation is deterministic and single-task requests work") {
  for (WorldConfig cfg : {stacking_world(4), sorting_world(3, 5), collection_world({2, 4})}) {
    Env env(cfg);
    auto a = env.generate_tasks(5, 99);
    auto b = env.generate_tasks(5, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].goal_key() == b[i].goal_key());

    auto single = env.generate_tasks(1, 7);
    REQUIRE(single.size() == 1);
  }
}

TEST_CASE("reset: default stacking start is all blocks on the table") {
  Env env(stacking_world(4));
  auto tasks = env.generate_tasks(10, 1);
  for (const auto& task : tasks) {
    auto [state, obs] = env.reset(task, 3);
    env.check_state_invariants(state);
    CHECK_FALSE(env.check_success(state, task));
    bool all_table = true;
    for (int s : state.stack().support) all_table &= (s == -1);
    bool goal_is_all_table = true;
    for (int s : task.goal_support) goal_is_all_table &= (s == -1);
    if (!goal_is_all_table) CHECK(all_table);
    // determinism
    auto [state2, obs2] = env.reset(task, 3);
    CHECK(env.state_key(state) == env.state_key(state2));
    CHECK(obs.features == obs2.features);
  }
}

TEST_CASE("step: stacking transitions and invalid moves") {
  Env env(stacking_world(3));
  TaskSpec task;
  task.domain = Domain::Stacking;
  task.id = 0;
  task.goal_support = {-1, 0, 1};  // B2 on B1 on B0

  auto [state, obs0] = env.reset(task, 0);
  // place(B1, B0): action id = 1*3 + slot(B0: dest<b -> dest+1 = 1) = 4
  auto [s1, o1, st1] = env.step(state, 4, task);
  CHECK(st1 == StepStatus::Ok);
  CHECK(s1.stack().support[1] == 0);

  // moving a block onto its current support is a no-op, hence invalid
  auto [s2, o2, st2] = env.step(s1, 4, task);
  CHECK(st2 == StepStatus::Invalid);
  CHECK(env.state_key(s2) == env.state_key(s1));

  // placing the covered block B0 anywhere is invalid
  auto [s3, o3, st3] = env.step(s1, 0 * 3 + 1, task);
  CHECK(st3 == StepStatus::Invalid);

  // malformed ids are input errors, not transitions
  CHECK_THROWS_AS(env.step(s1, 9, task), InputError);
  CHECK_THROWS_AS(env.step(s1, -1, task), InputError);

  // finishing the stack reports GOAL
  auto [s4, o4, st4] = env.step(s1, 2 * 3 + 2, task);  // place(B2,B1)
  CHECK(st4 == StepStatus::Goal);
  CHECK(env.check_success(s4, task));
}

TEST_CASE("step: collection pickup requires visibility") {
  Env env(collection_world({2}));
  auto tasks = env.generate_tasks(3, 11);
  for (const auto& task : tasks) {
    auto [state, obs] = env.reset(task, 5);
    int obj = task.manifest[0].first;
    // agent is at the dock before any search; nothing is visible
    auto [s1, o1, st1] = env.step(state, 1 + obj, task);
    CHECK(st1 == StepStatus::Invalid);
    CHECK(env.state_key(s1) == env.state_key(state));
  }
}

TEST_CASE("check_success: one misplaced block fails") {
  Env env(stacking_world(3));
  TaskSpec task;
  task.domain = Domain::Stacking;
  task.goal_support = {-1, 0, 1};
  EnvState state;
  state.domain = Domain::Stacking;
  state.data = StackState{{-1, 0, 1}, -1};
  CHECK(env.check_success(state, task));
  state.data = StackState{{-1, 0, 0}, -1};  // B2 misplaced (and doubly occupied)
  CHECK_FALSE(env.check_success(state, task));
}

TEST_CASE("plan_demo: single-stack goal produces the bottom-up order") {
  Env env(stacking_world(3));
  TaskSpec task;
  task.domain = Domain::Stacking;
  task.goal_support = {-1, 0, 1};  // C on B on A reading B0=A, B1=B, B2=C
  auto [state, obs] = env.reset(task, 0);
  Demonstration demo = env.plan_demo(task, state, 42);
  REQUIRE(demo.actions.size() == 2);
  CHECK(env.action_name(demo.actions[0]) == "place(B1,B0)");
  CHECK(env.action_name(demo.actions[1]) == "place(B2,B1)");
  replay(env, task, demo);
}

TEST_CASE("plan_demo: sorting seeds produce different orders, all reaching goal") {
  Env env(sorting_world(2, 3));
  auto tasks = env.generate_tasks(3, 2);
  const TaskSpec& task = tasks[0];
  auto [state, obs] = env.reset(task, 0);
  std::set<std::string> orders;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Demonstration demo = env.plan_demo(task, state, seed);
    replay(env, task, demo);
    std::string sig;
    for (int a : demo.actions) sig += std::to_string(a) + ",";
    orders.insert(sig);
  }
  CHECK(orders.size() == 2);  // both valid orders of the two objects appear
}

TEST_CASE("plan_demo: collection with one target is search..., pickup, dropoff") {
  Env env(collection_world({1}, false));
  auto tasks = env.generate_tasks(4, 3);
  for (const auto& task : tasks) {
    auto [state, obs] = env.reset(task, 9);
    Demonstration demo = env.plan_demo(task, state, 1);
    replay(env, task, demo);
    REQUIRE(demo.actions.size() >= 3);
    int n = static_cast<int>(demo.actions.size());
    for (int i = 0; i < n - 2; ++i) CHECK(demo.actions[i] == 0);  // search prefix
    CHECK(env.action_name(demo.actions[n - 2]).rfind("pickup", 0) == 0);
    CHECK(env.action_name(demo.actions[n - 1]).rfind("dropoff", 0) == 0);
  }
}

TEST_CASE("featurize: 3-block table state is three one-hot table rows") {
  Env env(stacking_world(3));
  CHECK(env.feature_width() == 3 * 4 + 3 + 1);
  EnvState state;
  state.domain = Domain::Stacking;
  state.data = StackState{{-1, -1, -1}, -1};
  auto f = env.featurize(state).features;
  REQUIRE(f.size() == 16);
  for (int b = 0; b < 3; ++b) {
    CHECK(f[b * 4] == 1.0);
    for (int k = 1; k < 4; ++k) CHECK(f[b * 4 + k] == 0.0);
  }
  for (int i = 12; i < 16; ++i) CHECK(f[i] == 0.0);
  CHECK(env.featurize(state).features == f);  // pure
}

TEST_CASE("featurize is injective on all stacking configurations up to 5 blocks") {
  for (int blocks : {3, 4, 5}) {
    Env env(stacking_world(blocks));
    auto tasks = env.generate_tasks(static_cast<int>(env.count_stacking_goals()), 1);
    std::set<std::vector<double>> seen;
    for (const auto& t : tasks) {
      EnvState state;
      state.domain = Domain::Stacking;
      state.data = StackState{t.goal_support, -1};
      auto [it, fresh] = seen.insert(env.featurize(state).features);
      CHECK(fresh);
    }
    CHECK(seen.size() == static_cast<std::size_t>(env.count_stacking_goals()));
  }
}

TEST_CASE("property: invariants hold along random rollouts, transitions deterministic") {
  std::vector<WorldConfig> worlds = {stacking_world(5), sorting_world(3, 5, 2),
                                     collection_world({2, 4})};
  for (const auto& cfg : worlds) {
    Env env(cfg);
    auto tasks = env.generate_tasks(10, 31);
    Rng rng(derive_seed(71, domain_name(cfg.domain)));
    int total_steps = 0;
    while (total_steps < 10000) {
      const TaskSpec& task = tasks[rng.index(tasks.size())];
      auto [state, obs] = env.reset(task, rng.next_u64());
      for (int t = 0; t < 40 && total_steps < 10000; ++t, ++total_steps) {
        int action = static_cast<int>(rng.index(env.action_count()));
        auto [next, o, status] = env.step(state, action, task);
        auto [next2, o2, status2] = env.step(state, action, task);
        CHECK(env.state_key(next) == env.state_key(next2));
        CHECK(status == status2);
        if (status == StepStatus::Invalid) {
          CHECK(env.state_key(next) == env.state_key(state));
        } else {
          env.check_state_invariants(next);
        }
        state = std::move(next);
        if (status == StepStatus::Goal) break;
      }
    }
  }
}

TEST_CASE("property: every planned demo replays to GOAL") {
  std::vector<WorldConfig> worlds = {stacking_world(4), sorting_world(3, 4, 2),
                                     collection_world({1, 2, 3})};
  for (const auto& cfg : worlds) {
    Env env(cfg);
    auto tasks = env.generate_tasks(12, 13);
    for (const auto& task : tasks)
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto [state, obs] = env.reset(task, seed);
        Demonstration demo = env.plan_demo(task, state, seed + 100);
        int goals = replay(env, task, demo);
        CHECK(goals == 1);  // GOAL fires exactly at the last action
      }
  }
}

TEST_CASE("sorting alternate-order scene blocks the demo order") {
  Env env(sorting_world(3, 5, 2));
  auto tasks = env.generate_tasks(6, 17);
  for (const auto& task : tasks) {
    auto [start, obs] = env.reset(task, 2);
    Demonstration demo = env.plan_demo(task, start, 5);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      EnvState alt = env.alternate_order_reset(task, demo.actions, seed);
      env.check_state_invariants(alt);
      CHECK_FALSE(env.check_success(alt, task));
      // replaying the demo verbatim must hit an invalid action before success
      EnvState state = alt;
      bool blocked = false;
      for (int a : demo.actions) {
        auto [next, o, status] = env.step(state, a, task);
        if (status == StepStatus::Invalid) {
          blocked = true;
          break;
        }
        state = std::move(next);
        if (status == StepStatus::Goal) break;
      }
      CHECK(blocked);
      // ...and pre-binned objects are in their goal bins (partially completed task)
      for (int o = 0; o < 6; ++o) {
        int p = alt.sort().place[o];
        if (p != -1) CHECK(p == task.category_bins[o / 2]);
      }
    }
  }
}

TEST_CASE("json: task, state and demo round-trips are lossless") {
  std::vector<WorldConfig> worlds = {stacking_world(4), sorting_world(2, 4), collection_world({2})};
  for (const auto& cfg : worlds) {
    Env env(cfg);
    auto tasks = env.generate_tasks(3, 23);
    for (const auto& task : tasks) {
      TaskSpec back = task_from_json(task_to_json(task));
      CHECK(back.goal_key() == task.goal_key());
      auto [state, obs] = env.reset(task, 4);
      CHECK(env.state_key(state_from_json(state_to_json(state))) == env.state_key(state));
      Demonstration demo = env.plan_demo(task, state, 8);
      Demonstration demo2 = demo_from_json(demo_to_json(demo));
      CHECK(demo2.actions == demo.actions);
      CHECK(demo2.observations == demo.observations);
      CHECK(env.state_key(demo2.initial_state) == env.state_key(demo.initial_state));
      CHECK(demo2.seed == demo.seed);
    }
  }
}

TEST_CASE("seeded observation noise is reproducible and replayable") {
  WorldConfig cfg = stacking_world(3);
  cfg.feature_noise_sigma = 0.05;
  Env env(cfg);
  auto tasks = env.generate_tasks(3, 2);
  auto [state, obs] = env.reset(tasks[0], 10);
  auto [state2, obs2] = env.reset(tasks[0], 10);
  CHECK(obs.features == obs2.features);
  Demonstration demo = env.plan_demo(tasks[0], state, 3);
  // replay reproduces the recorded noisy observations exactly
  EnvState cur = demo.initial_state;
  for (std::size_t i = 0; i < demo.actions.size(); ++i) {
    auto [next, o, status] = env.step(cur, demo.actions[i], tasks[0]);
    CHECK(o.features == demo.observations[i + 1]);
    cur = std::move(next);
  }
}
