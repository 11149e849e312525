#include <algorithm>
#include <functional>

#include "env_impl.hpp"

// Object collection world. The agent cycles through M task locations with
// `search`, picks up a visible object with `pickup(o)`, and teleports to a
// receptacle with `dropoff(r)`, dropping what it holds. Search locations are
// visited in a seeded randomized order; observation is partial (only objects
// at the agent's position are visible).
//
// Action ids: 0 = search, 1..C = pickup(object), C+1..C+K = dropoff(receptacle).
// Placement codes: -2 absent, -1 held, [0,M) location, M+r receptacle.

namespace ntg::detail {

namespace {
int max_locations(const CollectionConfig& c) { return c.max_targets + c.extra_locations; }
}

int collection_action_count(const CollectionConfig& c) { return 1 + c.objects + c.receptacles; }

int collection_feature_width(const CollectionConfig& c) {
  // agent position one-hot (dock + locations + receptacles), held one-hot
  // (none + objects), per-object visibility bits
  return (1 + max_locations(c) + c.receptacles) + (c.objects + 1) + c.objects;
}

std::string collection_action_name(const CollectionConfig& c, int action) {
  if (action < 0 || action >= collection_action_count(c))
    throw InputError("collection: malformed action id " + std::to_string(action));
  if (action == 0) return "search";
  if (action <= c.objects) return "pickup(O" + std::to_string(action - 1) + ")";
  return "dropoff(R" + std::to_string(action - 1 - c.objects) + ")";
}

std::vector<TaskSpec> collection_generate_tasks(const CollectionConfig& c, int count,
                                                std::uint64_t seed) {
  if (c.max_targets > c.objects)
    throw ConfigError("collection: max_targets exceeds the object universe");
  Rng rng(derive_seed(seed, "collection-tasks"));
  std::vector<TaskSpec> tasks;
  std::vector<std::string> seen_keys;
  int attempts = 0;
  while (static_cast<int>(tasks.size()) < count) {
    if (++attempts > count * 200 + 1000)
      throw GenerationError("collection: could not find enough distinct manifests");
    int n = c.target_counts[rng.index(c.target_counts.size())];
    if (n < 1 || n > c.max_targets) throw ConfigError("collection: bad target count in config");
    std::vector<int> objs(c.objects);
    for (int i = 0; i < c.objects; ++i) objs[i] = i;
    rng.shuffle(objs);
    TaskSpec t;
    t.domain = Domain::Collection;
    t.id = static_cast<int>(tasks.size());
    for (int i = 0; i < n; ++i) t.manifest.emplace_back(objs[i], static_cast<int>(rng.index(c.receptacles)));
    std::sort(t.manifest.begin(), t.manifest.end());
    t.num_locations = n + c.extra_locations;
    std::string key = t.goal_key();
    if (std::find(seen_keys.begin(), seen_keys.end(), key) != seen_keys.end()) continue;
    seen_keys.push_back(key);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

CollectState collection_initial(const CollectionConfig& c, const TaskSpec& task, Rng& rng) {
  CollectState s;
  int m = task.num_locations;
  s.agent_pos = -1;
  s.cursor = 0;
  s.search_order.resize(m);
  for (int i = 0; i < m; ++i) s.search_order[i] = i;
  rng.shuffle(s.search_order);
  s.placement.assign(c.objects, -2);
  for (const auto& [obj, rec] : task.manifest) s.placement[obj] = static_cast<int>(rng.index(m));
  if (c.distractors) {
    for (int o = 0; o < c.objects; ++o)
      if (s.placement[o] == -2) s.placement[o] = static_cast<int>(rng.index(m));
  }
  return s;
}

bool collection_step(const CollectionConfig& c, CollectState& s, int action, const TaskSpec& task) {
  int m = task.num_locations;
  if (action == 0) {  // search: advance the randomized location cursor
    s.agent_pos = s.search_order[s.cursor % m];
    s.cursor = (s.cursor + 1) % m;
    return true;
  }
  if (action <= c.objects) {
    int o = action - 1;
    for (int held = 0; held < c.objects; ++held)
      if (s.placement[held] == -1) return false;  // hands full
    if (s.placement[o] != s.agent_pos || s.agent_pos == -1) return false;  // not visible here
    s.placement[o] = -1;
    return true;
  }
  int r = action - 1 - c.objects;
  int held = -1;
  for (int o = 0; o < c.objects; ++o)
    if (s.placement[o] == -1) held = o;
  if (held == -1) return false;  // nothing to drop
  s.agent_pos = m + r;
  s.placement[held] = m + r;
  return true;
}

bool collection_success(const CollectState& s, const TaskSpec& task) {
  int m = task.num_locations;
  for (const auto& [obj, rec] : task.manifest)
    if (s.placement[obj] != m + rec) return false;
  return true;
}

std::vector<int> collection_plan(const CollectionConfig& c, const TaskSpec& task,
                                 CollectState state, Rng& rng) {
  std::vector<int> plan;
  auto remaining = [&]() {
    std::vector<int> out;
    for (const auto& [obj, rec] : task.manifest)
      if (state.placement[obj] != task.num_locations + rec) out.push_back(obj);
    return out;
  };
  int guard = 0;
  while (!remaining().empty()) {
    if (++guard > 64 * (task.num_locations + 1) * (static_cast<int>(task.manifest.size()) + 1))
      throw GenerationError("collection: planner stuck (bug)");
    std::vector<int> visible;
    for (int obj : remaining())
      if (state.placement[obj] == state.agent_pos && state.agent_pos != -1) visible.push_back(obj);
    int act;
    if (!visible.empty()) {
      int obj = visible[rng.index(visible.size())];
      act = 1 + obj;
      plan.push_back(act);
      collection_step(c, state, act, task);
      int rec = -1;
      for (const auto& [o, r] : task.manifest)
        if (o == obj) rec = r;
      act = 1 + c.objects + rec;
      plan.push_back(act);
      collection_step(c, state, act, task);
    } else {
      act = 0;
      plan.push_back(act);
      collection_step(c, state, act, task);
    }
  }
  return plan;
}

void collection_featurize(const CollectionConfig& c, const CollectState& s,
                          std::vector<double>& out) {
  out.assign(collection_feature_width(c), 0.0);
  int m_max = max_locations(c);
  int m = static_cast<int>(s.search_order.size());
  // agent position: slot 0 = dock, 1..m_max = locations, then receptacles
  if (s.agent_pos == -1) {
    out[0] = 1.0;
  } else if (s.agent_pos < m) {
    out[1 + s.agent_pos] = 1.0;
  } else {
    out[1 + m_max + (s.agent_pos - m)] = 1.0;
  }
  int held_base = 1 + m_max + c.receptacles;
  int held = -1;
  for (int o = 0; o < c.objects; ++o)
    if (s.placement[o] == -1) held = o;
  out[held_base + (held == -1 ? 0 : held + 1)] = 1.0;
  int vis_base = held_base + c.objects + 1;
  for (int o = 0; o < c.objects; ++o)
    if (s.placement[o] == s.agent_pos && s.agent_pos != -1) out[vis_base + o] = 1.0;
}

void collection_check_invariants(const CollectionConfig& c, const CollectState& s,
                                 const TaskSpec* task) {
  int m = static_cast<int>(s.search_order.size());
  if (s.agent_pos < -1 || s.agent_pos >= m + c.receptacles)
    throw InputError("collection state: bad agent position");
  int held_count = 0;
  for (int o = 0; o < c.objects; ++o) {
    int p = s.placement[o];
    if (p < -2 || p >= m + c.receptacles) throw InputError("collection state: bad placement");
    if (p == -1) ++held_count;
  }
  if (held_count > 1) throw InputError("collection state: more than one object held");
  std::vector<bool> seen(m, false);
  for (int loc : s.search_order) {
    if (loc < 0 || loc >= m || seen[loc]) throw InputError("collection state: bad search order");
    seen[loc] = true;
  }
  if (task && m != task->num_locations)
    throw InputError("collection state: location count mismatch with task");
}

}  // namespace ntg::detail
