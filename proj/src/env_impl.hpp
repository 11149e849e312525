#pragma once

// Internal per-domain entry points used by the Env dispatcher.

#include "ntg/env.hpp"

namespace ntg::detail {

// ---- stacking ----
int stacking_action_count(const StackingConfig& c);
int stacking_feature_width(const StackingConfig& c);
std::string stacking_action_name(const StackingConfig& c, int action);
std::vector<TaskSpec> stacking_generate_tasks(const StackingConfig& c, int count, std::uint64_t seed);
long long stacking_count_goals(const StackingConfig& c);
StackState stacking_initial(const StackingConfig& c, const TaskSpec& task, Rng& rng);
bool stacking_step(const StackingConfig& c, StackState& s, int action);  // false = invalid
bool stacking_success(const StackState& s, const TaskSpec& task);
std::vector<int> stacking_plan(const StackingConfig& c, const TaskSpec& task, StackState state, Rng& rng);
void stacking_featurize(const StackingConfig& c, const StackState& s, std::vector<double>& out);
void stacking_check_invariants(const StackingConfig& c, const StackState& s);

// ---- sorting ----
int sorting_action_count(const SortingConfig& c);
int sorting_feature_width(const SortingConfig& c);
int sorting_object_count(const SortingConfig& c);
int sorting_object_category(const SortingConfig& c, int object);
std::string sorting_action_name(const SortingConfig& c, int action);
std::vector<TaskSpec> sorting_generate_tasks(const SortingConfig& c, int count, std::uint64_t seed);
SortState sorting_initial(const SortingConfig& c);
bool sorting_step(const SortingConfig& c, SortState& s, int action);
bool sorting_success(const SortingConfig& c, const SortState& s, const TaskSpec& task);
std::vector<int> sorting_plan(const SortingConfig& c, const TaskSpec& task, const SortState& state, Rng& rng);
void sorting_featurize(const SortingConfig& c, const SortState& s, std::vector<double>& out);
void sorting_check_invariants(const SortingConfig& c, const SortState& s);
SortState sorting_alternate_start(const SortingConfig& c, const TaskSpec& task,
                                  const std::vector<int>& demo_actions, Rng& rng);

// ---- collection ----
int collection_action_count(const CollectionConfig& c);
int collection_feature_width(const CollectionConfig& c);
std::string collection_action_name(const CollectionConfig& c, int action);
std::vector<TaskSpec> collection_generate_tasks(const CollectionConfig& c, int count, std::uint64_t seed);
CollectState collection_initial(const CollectionConfig& c, const TaskSpec& task, Rng& rng);
bool collection_step(const CollectionConfig& c, CollectState& s, int action, const TaskSpec& task);
bool collection_success(const CollectState& s, const TaskSpec& task);
std::vector<int> collection_plan(const CollectionConfig& c, const TaskSpec& task, CollectState state, Rng& rng);
void collection_featurize(const CollectionConfig& c, const CollectState& s, std::vector<double>& out);
void collection_check_invariants(const CollectionConfig& c, const CollectState& s, const TaskSpec* task);

}  // namespace ntg::detail
