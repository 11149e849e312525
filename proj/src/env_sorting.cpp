#include <algorithm>
#include <functional>

#include "env_impl.hpp"

// Object sorting world. N objects (objects_per_category per category) start on
// a source pile; action sort(o, k) moves object o from the source to bin k.
// A task assigns one bin per category; the goal is every object in its
// category's bin. Objects already binned cannot be moved again.

namespace ntg::detail {

int sorting_object_count(const SortingConfig& c) { return c.categories * c.objects_per_category; }

int sorting_object_category(const SortingConfig& c, int object) {
  return object / c.objects_per_category;
}

int sorting_action_count(const SortingConfig& c) { return sorting_object_count(c) * c.bins; }

int sorting_feature_width(const SortingConfig& c) {
  return sorting_object_count(c) * (c.bins + 1);
}

std::string sorting_action_name(const SortingConfig& c, int action) {
  if (action < 0 || action >= sorting_action_count(c))
    throw InputError("sorting: malformed action id " + std::to_string(action));
  int o = action / c.bins, k = action % c.bins;
  return "sort(O" + std::to_string(o) + ",bin" + std::to_string(k) + ")";
}

std::vector<TaskSpec> sorting_generate_tasks(const SortingConfig& c, int count,
                                             std::uint64_t seed) {
  // enumerate injective category -> bin assignments
  std::vector<std::vector<int>> assignments;
  std::vector<int> cur(c.categories, -1);
  std::vector<bool> used(c.bins, false);
  std::function<void(int)> rec = [&](int cat) {
    if (cat == c.categories) {
      assignments.push_back(cur);
      return;
    }
    for (int k = 0; k < c.bins; ++k) {
      if (used[k]) continue;
      used[k] = true;
      cur[cat] = k;
      rec(cat + 1);
      used[k] = false;
    }
  };
  rec(0);
  if (count > static_cast<int>(assignments.size()))
    throw GenerationError("sorting: requested " + std::to_string(count) + " tasks but only " +
                          std::to_string(assignments.size()) + " distinct assignments exist");
  Rng rng(derive_seed(seed, "sorting-tasks"));
  rng.shuffle(assignments);
  std::vector<TaskSpec> tasks;
  for (int i = 0; i < count; ++i) {
    TaskSpec t;
    t.domain = Domain::Sorting;
    t.id = i;
    t.category_bins = assignments[i];
    tasks.push_back(std::move(t));
  }
  return tasks;
}

SortState sorting_initial(const SortingConfig& c) {
  SortState s;
  s.place.assign(sorting_object_count(c), -1);
  return s;
}

bool sorting_step(const SortingConfig& c, SortState& s, int action) {
  int o = action / c.bins, k = action % c.bins;
  if (s.place[o] != -1) return false;  // only movable from the source pile
  s.place[o] = k;
  return true;
}

bool sorting_success(const SortingConfig& c, const SortState& s, const TaskSpec& task) {
  for (int o = 0; o < sorting_object_count(c); ++o)
    if (s.place[o] != task.category_bins[sorting_object_category(c, o)]) return false;
  return true;
}

std::vector<int> sorting_plan(const SortingConfig& c, const TaskSpec& task, const SortState& state,
                              Rng& rng) {
  std::vector<int> pending;
  for (int o = 0; o < sorting_object_count(c); ++o)
    if (state.place[o] == -1) pending.push_back(o);
  rng.shuffle(pending);
  std::vector<int> plan;
  for (int o : pending)
    plan.push_back(o * c.bins + task.category_bins[sorting_object_category(c, o)]);
  return plan;
}

void sorting_featurize(const SortingConfig& c, const SortState& s, std::vector<double>& out) {
  out.assign(sorting_feature_width(c), 0.0);
  for (int o = 0; o < sorting_object_count(c); ++o) {
    int base = o * (c.bins + 1);
    out[base + (s.place[o] == -1 ? 0 : s.place[o] + 1)] = 1.0;
  }
}

void sorting_check_invariants(const SortingConfig& c, const SortState& s) {
  if (static_cast<int>(s.place.size()) != sorting_object_count(c))
    throw InputError("sorting state: wrong object count");
  for (int p : s.place)
    if (p < -1 || p >= c.bins) throw InputError("sorting state: bad placement");
}

SortState sorting_alternate_start(const SortingConfig& c, const TaskSpec& task,
                                  const std::vector<int>& demo_actions, Rng& rng) {
  int n = sorting_object_count(c);
  if (n < 5)
    throw GenerationError("sorting: alternate-order scenes need at least 5 objects");
  std::vector<int> order;  // object order of the demo
  for (int a : demo_actions) {
    int o = a / c.bins;
    if (std::find(order.begin(), order.end(), o) == order.end()) order.push_back(o);
  }
  if (static_cast<int>(order.size()) != n)
    throw InputError("sorting: demo does not cover every object");

  // pre-bin a subset that is proper, |S| in [2, n-3], and neither a prefix nor
  // a suffix of the demo order, so replaying the demo (or any suffix of it)
  // cannot succeed
  for (int attempt = 0; attempt < 256; ++attempt) {
    int size = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(n - 4)));
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    std::vector<bool> in_set(n, false);
    for (int i = 0; i < size; ++i) in_set[idx[i]] = true;  // idx over demo-order positions
    bool prefix = true, suffix = true;
    for (int i = 0; i < size; ++i) {
      if (!in_set[i]) prefix = false;
      if (!in_set[n - 1 - i]) suffix = false;
    }
    if (prefix || suffix) continue;
    SortState s = sorting_initial(c);
    for (int i = 0; i < n; ++i)
      if (in_set[i]) {
        int o = order[i];
        s.place[o] = task.category_bins[sorting_object_category(c, o)];
      }
    return s;
  }
  throw GenerationError("sorting: failed to sample an admissible alternate-order scene");
}

}  // namespace ntg::detail
