#include "ntg/env.hpp"

#include <sstream>

#include <json.hpp>

#include "env_impl.hpp"

namespace ntg {

using nlohmann::json;
using nlohmann::ordered_json;

std::string domain_name(Domain d) {
  switch (d) {
    case Domain::Stacking: return "stacking";
    case Domain::Sorting: return "sorting";
    case Domain::Collection: return "collection";
  }
  return "?";
}

Domain domain_from_name(const std::string& name) {
  if (name == "stacking") return Domain::Stacking;
  if (name == "sorting") return Domain::Sorting;
  if (name == "collection") return Domain::Collection;
  throw InputError("unknown domain: " + name);
}

std::string TaskSpec::goal_key() const {
  std::ostringstream os;
  os << domain_name(domain) << ":";
  switch (domain) {
    case Domain::Stacking:
      for (int s : goal_support) os << s << ",";
      break;
    case Domain::Sorting:
      for (int b : category_bins) os << b << ",";
      break;
    case Domain::Collection:
      for (const auto& [o, r] : manifest) os << o << ">" << r << ",";
      os << "@" << num_locations;
      break;
  }
  return os.str();
}

Env::Env(WorldConfig cfg) : cfg_(std::move(cfg)) {
  switch (cfg_.domain) {
    case Domain::Stacking:
      if (cfg_.stacking.blocks < 2) throw ConfigError("stacking needs at least 2 blocks");
      action_count_ = detail::stacking_action_count(cfg_.stacking);
      feature_width_ = detail::stacking_feature_width(cfg_.stacking);
      break;
    case Domain::Sorting:
      if (cfg_.sorting.categories < 1 || cfg_.sorting.bins < cfg_.sorting.categories)
        throw ConfigError("sorting needs bins >= categories >= 1");
      action_count_ = detail::sorting_action_count(cfg_.sorting);
      feature_width_ = detail::sorting_feature_width(cfg_.sorting);
      break;
    case Domain::Collection:
      if (cfg_.collection.objects < 1 || cfg_.collection.receptacles < 1)
        throw ConfigError("collection needs objects and receptacles");
      action_count_ = detail::collection_action_count(cfg_.collection);
      feature_width_ = detail::collection_feature_width(cfg_.collection);
      break;
  }
}

std::string Env::action_name(int action) const {
  switch (cfg_.domain) {
    case Domain::Stacking: return detail::stacking_action_name(cfg_.stacking, action);
    case Domain::Sorting: return detail::sorting_action_name(cfg_.sorting, action);
    case Domain::Collection: return detail::collection_action_name(cfg_.collection, action);
  }
  return "?";
}

std::vector<TaskSpec> Env::generate_tasks(int count, std::uint64_t seed) const {
  if (count < 1) throw InputError("generate_tasks: count must be >= 1");
  switch (cfg_.domain) {
    case Domain::Stacking: return detail::stacking_generate_tasks(cfg_.stacking, count, seed);
    case Domain::Sorting: return detail::sorting_generate_tasks(cfg_.sorting, count, seed);
    case Domain::Collection: return detail::collection_generate_tasks(cfg_.collection, count, seed);
  }
  return {};
}

long long Env::count_stacking_goals() const {
  if (cfg_.domain != Domain::Stacking) throw InputError("not a stacking environment");
  return detail::stacking_count_goals(cfg_.stacking);
}

// featurize + optional seeded noise; the noise stream is keyed by the step
// counter carried in the state, so observing a state is itself deterministic
// and demo replay reproduces recorded observations exactly.
Observation Env::observe(const EnvState& state) const {
  Observation obs = featurize(state);
  if (cfg_.feature_noise_sigma > 0.0) {
    Rng noise(derive_seed(state.noise_seed, "obs-noise", state.noise_ctr));
    for (double& v : obs.features) v += cfg_.feature_noise_sigma * noise.normal();
  }
  return obs;
}

std::pair<EnvState, Observation> Env::reset(const TaskSpec& task, std::uint64_t seed) const {
  if (task.domain != cfg_.domain) throw InputError("reset: task domain mismatch");
  Rng rng(derive_seed(seed, "reset"));
  EnvState state;
  state.domain = cfg_.domain;
  state.noise_seed = seed;
  switch (cfg_.domain) {
    case Domain::Stacking: state.data = detail::stacking_initial(cfg_.stacking, task, rng); break;
    case Domain::Sorting: state.data = detail::sorting_initial(cfg_.sorting); break;
    case Domain::Collection:
      state.data = detail::collection_initial(cfg_.collection, task, rng);
      break;
  }
  if (check_success(state, task))
    throw GenerationError("reset produced a state that already satisfies the goal");
  Observation obs = observe(state);
  return {std::move(state), std::move(obs)};
}

EnvState Env::alternate_order_reset(const TaskSpec& task, const std::vector<int>& demo_actions,
                                    std::uint64_t seed) const {
  if (cfg_.domain != Domain::Sorting)
    throw InputError("alternate-order reset is defined for the sorting domain");
  Rng rng(derive_seed(seed, "alt-reset"));
  EnvState state;
  state.domain = cfg_.domain;
  state.noise_seed = seed;
  state.data = detail::sorting_alternate_start(cfg_.sorting, task, demo_actions, rng);
  return state;
}

std::tuple<EnvState, Observation, StepStatus> Env::step(const EnvState& state, int action,
                                                        const TaskSpec& task) const {
  if (action < 0 || action >= action_count_)
    throw InputError("step: malformed action id " + std::to_string(action));
  EnvState next = state;
  bool ok = false;
  switch (cfg_.domain) {
    case Domain::Stacking: ok = detail::stacking_step(cfg_.stacking, next.stack(), action); break;
    case Domain::Sorting: ok = detail::sorting_step(cfg_.sorting, next.sort(), action); break;
    case Domain::Collection:
      ok = detail::collection_step(cfg_.collection, next.collect(), action, task);
      break;
  }
  if (!ok) {
    Observation obs = observe(state);
    return {state, std::move(obs), StepStatus::Invalid};
  }
  next.noise_ctr = state.noise_ctr + 1;
  StepStatus status = check_success(next, task) ? StepStatus::Goal : StepStatus::Ok;
  Observation obs = observe(next);
  return {std::move(next), std::move(obs), status};
}

bool Env::check_success(const EnvState& state, const TaskSpec& task) const {
  switch (cfg_.domain) {
    case Domain::Stacking: return detail::stacking_success(state.stack(), task);
    case Domain::Sorting: return detail::sorting_success(cfg_.sorting, state.sort(), task);
    case Domain::Collection: return detail::collection_success(state.collect(), task);
  }
  return false;
}

Demonstration Env::plan_demo(const TaskSpec& task, const EnvState& initial,
                             std::uint64_t seed) const {
  Rng rng(derive_seed(seed, "demo-plan"));
  std::vector<int> actions;
  switch (cfg_.domain) {
    case Domain::Stacking:
      actions = detail::stacking_plan(cfg_.stacking, task, initial.stack(), rng);
      break;
    case Domain::Sorting:
      actions = detail::sorting_plan(cfg_.sorting, task, initial.sort(), rng);
      break;
    case Domain::Collection:
      actions = detail::collection_plan(cfg_.collection, task, initial.collect(), rng);
      break;
  }
  Demonstration demo;
  demo.task_id = task.id;
  demo.seed = seed;
  demo.initial_state = initial;
  demo.actions = actions;
  EnvState cur = initial;
  demo.observations.push_back(observe(cur).features);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    auto [next, obs, status] = step(cur, actions[i], task);
    if (status == StepStatus::Invalid)
      throw GenerationError("planned demo contains an invalid action (bug)");
    demo.observations.push_back(obs.features);
    cur = std::move(next);
    if (status == StepStatus::Goal && i + 1 != actions.size())
      throw GenerationError("planned demo overshoots the goal (bug)");
  }
  if (!check_success(cur, task)) throw GenerationError("planned demo does not reach the goal");
  return demo;
}

Observation Env::featurize(const EnvState& state) const {
  Observation obs;
  switch (cfg_.domain) {
    case Domain::Stacking: detail::stacking_featurize(cfg_.stacking, state.stack(), obs.features); break;
    case Domain::Sorting: detail::sorting_featurize(cfg_.sorting, state.sort(), obs.features); break;
    case Domain::Collection:
      detail::collection_featurize(cfg_.collection, state.collect(), obs.features);
      break;
  }
  return obs;
}

std::string Env::state_key(const EnvState& state) const {
  std::ostringstream os;
  switch (cfg_.domain) {
    case Domain::Stacking: {
      const auto& s = state.stack();
      for (int v : s.support) os << v << ",";
      os << "|" << s.held;
      break;
    }
    case Domain::Sorting: {
      for (int v : state.sort().place) os << v << ",";
      break;
    }
    case Domain::Collection: {
      const auto& s = state.collect();
      os << s.agent_pos << "|" << s.cursor << "|";
      for (int v : s.search_order) os << v << ",";
      os << "|";
      for (int v : s.placement) os << v << ",";
      break;
    }
  }
  return os.str();
}

void Env::check_state_invariants(const EnvState& state) const {
  switch (cfg_.domain) {
    case Domain::Stacking: detail::stacking_check_invariants(cfg_.stacking, state.stack()); break;
    case Domain::Sorting: detail::sorting_check_invariants(cfg_.sorting, state.sort()); break;
    case Domain::Collection:
      detail::collection_check_invariants(cfg_.collection, state.collect(), nullptr);
      break;
  }
}

// ---------------------------------------------------------------------------
// JSON round-trips

std::string task_to_json(const TaskSpec& task) {
  ordered_json j;
  j["domain"] = domain_name(task.domain);
  j["id"] = task.id;
  switch (task.domain) {
    case Domain::Stacking: j["goal_support"] = task.goal_support; break;
    case Domain::Sorting: j["category_bins"] = task.category_bins; break;
    case Domain::Collection: {
      json m = json::array();
      for (const auto& [o, r] : task.manifest) m.push_back({o, r});
      j["manifest"] = std::move(m);
      j["num_locations"] = task.num_locations;
      break;
    }
  }
  return j.dump();
}

TaskSpec task_from_json(const std::string& text) {
  json j = json::parse(text);
  TaskSpec t;
  t.domain = domain_from_name(j.at("domain").get<std::string>());
  t.id = j.at("id").get<int>();
  switch (t.domain) {
    case Domain::Stacking: t.goal_support = j.at("goal_support").get<std::vector<int>>(); break;
    case Domain::Sorting: t.category_bins = j.at("category_bins").get<std::vector<int>>(); break;
    case Domain::Collection:
      for (const auto& e : j.at("manifest")) t.manifest.emplace_back(e[0].get<int>(), e[1].get<int>());
      t.num_locations = j.at("num_locations").get<int>();
      break;
  }
  return t;
}

static ordered_json state_to_json_obj(const EnvState& state) {
  ordered_json j;
  j["domain"] = domain_name(state.domain);
  j["noise_seed"] = state.noise_seed;
  j["noise_ctr"] = state.noise_ctr;
  switch (state.domain) {
    case Domain::Stacking:
      j["support"] = state.stack().support;
      j["held"] = state.stack().held;
      break;
    case Domain::Sorting: j["place"] = state.sort().place; break;
    case Domain::Collection: {
      const auto& s = state.collect();
      j["agent_pos"] = s.agent_pos;
      j["cursor"] = s.cursor;
      j["search_order"] = s.search_order;
      j["placement"] = s.placement;
      break;
    }
  }
  return j;
}

static EnvState state_from_json_obj(const json& j) {
  EnvState state;
  state.domain = domain_from_name(j.at("domain").get<std::string>());
  state.noise_seed = j.value("noise_seed", 0ULL);
  state.noise_ctr = j.value("noise_ctr", 0ULL);
  switch (state.domain) {
    case Domain::Stacking: {
      StackState s;
      s.support = j.at("support").get<std::vector<int>>();
      s.held = j.at("held").get<int>();
      state.data = std::move(s);
      break;
    }
    case Domain::Sorting: {
      SortState s;
      s.place = j.at("place").get<std::vector<int>>();
      state.data = std::move(s);
      break;
    }
    case Domain::Collection: {
      CollectState s;
      s.agent_pos = j.at("agent_pos").get<int>();
      s.cursor = j.at("cursor").get<int>();
      s.search_order = j.at("search_order").get<std::vector<int>>();
      s.placement = j.at("placement").get<std::vector<int>>();
      state.data = std::move(s);
      break;
    }
  }
  return state;
}

std::string state_to_json(const EnvState& state) { return state_to_json_obj(state).dump(); }

EnvState state_from_json(const std::string& text) {
  return state_from_json_obj(json::parse(text));
}

std::string demo_to_json(const Demonstration& demo) {
  ordered_json j;
  j["task_id"] = demo.task_id;
  j["seed"] = demo.seed;
  j["initial_state"] = state_to_json_obj(demo.initial_state);
  j["actions"] = demo.actions;
  j["features"] = demo.observations;
  return j.dump();
}

Demonstration demo_from_json(const std::string& text) {
  json j = json::parse(text);
  Demonstration d;
  d.task_id = j.at("task_id").get<int>();
  d.seed = j.at("seed").get<std::uint64_t>();
  d.initial_state = state_from_json_obj(j.at("initial_state"));
  d.actions = j.at("actions").get<std::vector<int>>();
  d.observations = j.at("features").get<std::vector<std::vector<double>>>();
  return d;
}

}  // namespace ntg
