#include <algorithm>
#include <functional>

#include "env_impl.hpp"

// Block stacking world. Blocks are labelled B0..B(n-1); a state is the support
// map block -> (table | block). The single action family is an atomic
// pick-and-place: place(b, dest) with dest in blocks+{table}, dest != b,
// giving exactly B*B action ids.

namespace ntg::detail {

namespace {

// destination slot k in [0, B): 0 = table, otherwise the k-th other block
int decode_dest(int block, int slot, int blocks) {
  if (slot == 0) return -1;
  int d = slot - 1;
  if (d >= block) ++d;
  (void)blocks;
  return d;
}

bool is_clear(const StackState& s, int b) {
  if (s.held == b) return false;
  for (int other = 0; other < static_cast<int>(s.support.size()); ++other)
    if (s.support[other] == b) return false;
  return true;
}

// b is well placed when its whole chain down to the table matches the goal
bool well_placed(const StackState& s, const TaskSpec& task, int b) {
  int cur = b;
  while (true) {
    if (s.support[cur] != task.goal_support[cur]) return false;
    cur = task.goal_support[cur];
    if (cur == -1) return true;
  }
}

// Enumerate every acyclic, injective-on-blocks support map via backtracking.
void enumerate_goals(int blocks, const std::function<void(const std::vector<int>&)>& emit) {
  std::vector<int> support(blocks, -2);
  std::vector<bool> occupied(blocks, false);  // block already used as a support
  std::function<void(int)> rec = [&](int b) {
    if (b == blocks) {
      emit(support);
      return;
    }
    support[b] = -1;
    rec(b + 1);
    for (int target = 0; target < blocks; ++target) {
      if (target == b || occupied[target]) continue;
      // cycle check: walk down from target through already-assigned supports
      bool cycle = false;
      int cur = target;
      while (cur != -1 && cur < b) {  // supports of blocks >= b are unassigned
        if (cur == b) break;
        cur = support[cur] >= -1 ? support[cur] : -1;
        if (cur == b) {
          cycle = true;
          break;
        }
      }
      // for targets >= b the chain below is unassigned, no cycle possible yet;
      // but assigning support[b]=target and later support[target]=..=b would
      // cycle, so re-check acyclicity when the map is complete
      if (cycle) continue;
      support[b] = target;
      occupied[target] = true;
      rec(b + 1);
      occupied[target] = false;
    }
    support[b] = -2;
  };
  rec(0);
}

bool acyclic(const std::vector<int>& support) {
  int n = static_cast<int>(support.size());
  for (int b = 0; b < n; ++b) {
    int cur = b, steps = 0;
    while (cur != -1) {
      cur = support[cur];
      if (++steps > n) return false;
    }
  }
  return true;
}

}  // namespace

int stacking_action_count(const StackingConfig& c) { return c.blocks * c.blocks; }

int stacking_feature_width(const StackingConfig& c) {
  // per block: one-hot support over (table + blocks); then held one-hot + flag
  return c.blocks * (c.blocks + 1) + c.blocks + 1;
}

std::string stacking_action_name(const StackingConfig& c, int action) {
  if (action < 0 || action >= stacking_action_count(c))
    throw InputError("stacking: malformed action id " + std::to_string(action));
  int b = action / c.blocks;
  int dest = decode_dest(b, action % c.blocks, c.blocks);
  if (dest == -1) return "place(B" + std::to_string(b) + ",table)";
  return "place(B" + std::to_string(b) + ",B" + std::to_string(dest) + ")";
}

long long stacking_count_goals(const StackingConfig& c) {
  long long count = 0;
  enumerate_goals(c.blocks, [&](const std::vector<int>& s) {
    if (acyclic(s)) ++count;
  });
  return count;
}

std::vector<TaskSpec> stacking_generate_tasks(const StackingConfig& c, int count,
                                              std::uint64_t seed) {
  std::vector<std::vector<int>> goals;
  enumerate_goals(c.blocks, [&](const std::vector<int>& s) {
    if (acyclic(s)) goals.push_back(s);
  });
  if (count > static_cast<int>(goals.size()))
    throw GenerationError("stacking: requested " + std::to_string(count) + " tasks but only " +
                          std::to_string(goals.size()) + " distinct configurations exist");
  Rng rng(derive_seed(seed, "stacking-tasks"));
  rng.shuffle(goals);
  std::vector<TaskSpec> tasks;
  tasks.reserve(count);
  for (int i = 0; i < count; ++i) {
    TaskSpec t;
    t.domain = Domain::Stacking;
    t.id = i;
    t.goal_support = goals[i];
    tasks.push_back(std::move(t));
  }
  return tasks;
}

StackState stacking_initial(const StackingConfig& c, const TaskSpec& task, Rng& rng) {
  StackState s;
  s.support.assign(c.blocks, -1);
  s.held = -1;
  if (c.random_start) {
    // seeded random valid configuration, rejected if it equals the goal
    for (int attempt = 0; attempt < 64; ++attempt) {
      StackState cand;
      cand.support.assign(c.blocks, -1);
      std::vector<int> order(c.blocks);
      for (int i = 0; i < c.blocks; ++i) order[i] = i;
      rng.shuffle(order);
      std::vector<int> tops;  // blocks currently free on top
      for (int b : order) {
        int pick = static_cast<int>(rng.index(tops.size() + 1));
        if (pick == static_cast<int>(tops.size())) {
          cand.support[b] = -1;  // new stack
        } else {
          cand.support[b] = tops[pick];
          tops.erase(tops.begin() + pick);
        }
        tops.push_back(b);
      }
      if (cand.support != task.goal_support) return cand;
    }
    throw GenerationError("stacking: could not sample a non-goal random start");
  }
  if (s.support == task.goal_support) {
    // all-on-table goal: start with one block restacked so initial != goal
    s.support[0] = 1;
  }
  return s;
}

bool stacking_step(const StackingConfig& c, StackState& s, int action) {
  int b = action / c.blocks;
  int dest = decode_dest(b, action % c.blocks, c.blocks);
  if (s.held != -1) return false;
  if (!is_clear(s, b)) return false;
  if (dest == b) return false;
  if (dest == -1) {
    if (s.support[b] == -1) return false;  // already on the table, no-op move
    s.support[b] = -1;
    return true;
  }
  if (!is_clear(s, dest)) return false;
  if (s.support[b] == dest) return false;
  s.support[b] = dest;
  return true;
}

bool stacking_success(const StackState& s, const TaskSpec& task) {
  return s.held == -1 && s.support == task.goal_support;
}

std::vector<int> stacking_plan(const StackingConfig& c, const TaskSpec& task, StackState state,
                               Rng& rng) {
  auto encode = [&](int b, int dest) {
    int slot;
    if (dest == -1) {
      slot = 0;
    } else {
      slot = dest < b ? dest + 1 : dest;  // inverse of decode_dest
    }
    return b * c.blocks + slot;
  };

  std::vector<int> plan;
  // phase 1: flatten everything that is not already well placed
  while (true) {
    std::vector<int> movable;
    for (int b = 0; b < c.blocks; ++b)
      if (is_clear(state, b) && !well_placed(state, task, b) && state.support[b] != -1)
        movable.push_back(b);
    if (movable.empty()) break;
    int b = movable[rng.index(movable.size())];
    plan.push_back(encode(b, -1));
    state.support[b] = -1;
  }
  // phase 2: build goal stacks bottom-up, seeded among the ready placements
  while (true) {
    std::vector<int> ready;
    for (int b = 0; b < c.blocks; ++b) {
      if (well_placed(state, task, b)) continue;
      int g = task.goal_support[b];
      if (g == -1) continue;  // already handled by phase 1
      if (is_clear(state, b) && is_clear(state, g) && well_placed(state, task, g))
        ready.push_back(b);
    }
    if (ready.empty()) break;
    int b = ready[rng.index(ready.size())];
    plan.push_back(encode(b, task.goal_support[b]));
    state.support[b] = task.goal_support[b];
  }
  if (!stacking_success(state, task))
    throw GenerationError("stacking: planner failed to reach the goal (bug)");
  return plan;
}

void stacking_featurize(const StackingConfig& c, const StackState& s, std::vector<double>& out) {
  out.assign(stacking_feature_width(c), 0.0);
  for (int b = 0; b < c.blocks; ++b) {
    int base = b * (c.blocks + 1);
    int sup = s.support[b];
    out[base + (sup == -1 ? 0 : sup + 1)] = 1.0;
  }
  int held_base = c.blocks * (c.blocks + 1);
  if (s.held != -1) {
    out[held_base + s.held] = 1.0;
    out[held_base + c.blocks] = 1.0;
  }
}

void stacking_check_invariants(const StackingConfig& c, const StackState& s) {
  if (static_cast<int>(s.support.size()) != c.blocks)
    throw InputError("stacking state: wrong block count");
  std::vector<int> on_top_of(c.blocks, 0);
  for (int b = 0; b < c.blocks; ++b) {
    int sup = s.support[b];
    if (sup < -1 || sup >= c.blocks || sup == b) throw InputError("stacking state: bad support");
    if (sup >= 0 && ++on_top_of[sup] > 1)
      throw InputError("stacking state: two blocks on one support");
  }
  if (!acyclic(s.support)) throw InputError("stacking state: support cycle");
  if (s.held < -1 || s.held >= c.blocks) throw InputError("stacking state: bad held id");
}

}  // namespace ntg::detail
