#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "ntg/errors.hpp"
#include "ntg/rng.hpp"

namespace ntg {

enum class Domain { Stacking, Sorting, Collection };

std::string domain_name(Domain d);
Domain domain_from_name(const std::string& name);

enum class StepStatus { Ok, Invalid, Goal };

// ---------------------------------------------------------------------------
// World configuration

struct StackingConfig {
  int blocks = 6;
  bool random_start = false;  // default start is all-on-table
};

struct SortingConfig {
  int categories = 3;
  int bins = 5;
  int objects_per_category = 2;
};

struct CollectionConfig {
  int objects = 8;      // global object universe; one object per category
  int receptacles = 5;
  int extra_locations = 3;          // task locations M = targets + extra
  int max_targets = 5;              // bounds the location one-hot width
  std::vector<int> target_counts = {2, 4};  // N values the generator draws from
  bool distractors = true;          // non-target objects are scattered too
};

struct WorldConfig {
  Domain domain = Domain::Stacking;
  StackingConfig stacking;
  SortingConfig sorting;
  CollectionConfig collection;
  double feature_noise_sigma = 0.0;
};

// ---------------------------------------------------------------------------
// Tasks, states, observations, demonstrations

struct TaskSpec {
  Domain domain = Domain::Stacking;
  int id = -1;
  // stacking: goal support map, -1 = table
  std::vector<int> goal_support;
  // sorting: bin id per category
  std::vector<int> category_bins;
  // collection: (object, receptacle) manifest + number of search locations
  std::vector<std::pair<int, int>> manifest;
  int num_locations = 0;

  std::string goal_key() const;  // canonical text form, used for distinctness
};

struct StackState {
  std::vector<int> support;  // -1 = table
  int held = -1;
};

struct SortState {
  std::vector<int> place;  // -1 = source pile, else bin id
};

struct CollectState {
  int agent_pos = -1;              // -1 dock, [0,M) location, M+r receptacle
  int cursor = 0;                  // next index into search_order
  std::vector<int> search_order;   // seeded permutation of the M locations
  std::vector<int> placement;      // per object: -2 absent, -1 held, [0,M) location, M+r receptacle
};

struct EnvState {
  Domain domain = Domain::Stacking;
  std::variant<StackState, SortState, CollectState> data;
  std::uint64_t noise_seed = 0;  // only used when feature noise is enabled
  std::uint64_t noise_ctr = 0;

  StackState& stack() { return std::get<StackState>(data); }
  const StackState& stack() const { return std::get<StackState>(data); }
  SortState& sort() { return std::get<SortState>(data); }
  const SortState& sort() const { return std::get<SortState>(data); }
  CollectState& collect() { return std::get<CollectState>(data); }
  const CollectState& collect() const { return std::get<CollectState>(data); }
};

struct Observation {
  std::vector<double> features;
};

struct Demonstration {
  int task_id = -1;
  std::uint64_t seed = 0;
  EnvState initial_state;
  std::vector<int> actions;                        // empty for unlabeled demos
  std::vector<std::vector<double>> observations;   // |actions| + 1 rows when labeled
};

// ---------------------------------------------------------------------------
// Environment
//
// Deterministic symbolic simulator for one domain. All methods are pure given
// their arguments (the instance only holds configuration), so instances can be
// shared across concurrent rollouts.
class Env {
 public:
  explicit Env(WorldConfig cfg);

  Domain domain() const { return cfg_.domain; }
  const WorldConfig& config() const { return cfg_; }
  int action_count() const { return action_count_; }
  int feature_width() const { return feature_width_; }

  // decoded (verb, arguments) form, e.g. "place(B2,table)" or "pickup(O3)"
  std::string action_name(int action) const;

  // Pairwise-distinct tasks, deterministic under seed.
  std::vector<TaskSpec> generate_tasks(int count, std::uint64_t seed) const;

  std::pair<EnvState, Observation> reset(const TaskSpec& task, std::uint64_t seed) const;

  // Sorting only: initial scene that forbids replaying the given demo order.
  // Pre-bins a seeded subset of objects that is proper, of size in [2, N-3],
  // and neither a prefix nor a suffix of the demo's object order.
  EnvState alternate_order_reset(const TaskSpec& task, const std::vector<int>& demo_actions,
                                 std::uint64_t seed) const;

  std::tuple<EnvState, Observation, StepStatus> step(const EnvState& state, int action,
                                                     const TaskSpec& task) const;

  bool check_success(const EnvState& state, const TaskSpec& task) const;

  // Scripted demonstration whose replay reaches GOAL; seed varies the order
  // among interchangeable sub-goals.
  Demonstration plan_demo(const TaskSpec& task, const EnvState& initial,
                          std::uint64_t seed) const;

  // Deterministic featurization of a state (no noise).
  Observation featurize(const EnvState& state) const;

  // Canonical serialization used by the state-space oracle and invariants.
  std::string state_key(const EnvState& state) const;

  void check_state_invariants(const EnvState& state) const;  // throws on violation

  // stacking helper: total number of distinct configurations (enumeration)
  long long count_stacking_goals() const;

 private:
  Observation observe(const EnvState& state) const;  // featurize + optional seeded noise

  WorldConfig cfg_;
  int action_count_ = 0;
  int feature_width_ = 0;
};

// JSON round-trip for tasks and demonstrations (schema documented in README).
std::string task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const std::string& text);
std::string demo_to_json(const Demonstration& demo);
Demonstration demo_from_json(const std::string& text);
std::string state_to_json(const EnvState& state);
EnvState state_from_json(const std::string& text);

}  // namespace ntg
