#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ntg/env.hpp"
#include "ntg/errors.hpp"

namespace ntg {

// Node handle: START is the distinguished entry node at index 0; node i+1 is
// the i-th action in the sorted action list. kStartAction addresses START in
// APIs that take action ids.
constexpr int kStartAction = -1;

// Action-indexed task graph. Nodes are the actions of one task plus START;
// adjacency is a dense (n+1)^2 matrix, hard ({0,1}) or soft ([0,1]).
// Edges into START are structurally excluded. Values are immutable in spirit:
// all operations below build new graphs.
struct ConjugateTaskGraph {
  int task_id = -1;
  bool soft = false;
  std::vector<int> actions;   // sorted, unique
  std::vector<double> adj;    // (actions.size()+1)^2 row-major, index 0 = START

  int node_count() const { return static_cast<int>(actions.size()) + 1; }
  // node index of an action id (or kStartAction); -1 when absent
  int node_of(int action) const;
  int action_of(int node) const { return node == 0 ? kStartAction : actions[node - 1]; }
  double at(int from_node, int to_node) const { return adj[from_node * node_count() + to_node]; }
  void set(int from_node, int to_node, double v);
  bool has_node(int action) const { return node_of(action) >= 0; }
  int edge_count() const;

  void validate() const;  // invariant check, throws InputError
};

// Path graph of one action sequence: nodes = unique actions + START, edges =
// START->a_1 plus every consecutive transition, deduplicated.
ConjugateTaskGraph path_from_actions(const std::vector<int>& actions, int task_id = -1);

// Node-set union and elementwise OR of hard graphs sharing a task id (or with
// the override flag when combining across ids).
ConjugateTaskGraph union_graphs(const std::vector<ConjugateTaskGraph>& graphs,
                                bool allow_mixed_tasks = false);

// Successor action ids of a node, ascending. `action` may be kStartAction.
std::vector<int> outgoing(const ConjugateTaskGraph& graph, int action);
std::vector<int> outgoing_nodes(const ConjugateTaskGraph& graph, int node);

// Exhaustive ground-truth graph: edges of every shortest successful action
// sequence from the canonical reset of the task. Throws OracleError when the
// reachable state space exceeds `state_budget`.
ConjugateTaskGraph oracle_graph(const Env& env, const TaskSpec& task,
                                std::size_t state_budget = 200000);

// Deterministic DOT rendering; soft graphs annotate weights to 2 decimals.
std::string to_dot(const ConjugateTaskGraph& graph,
                   const std::function<std::string(int)>& action_name);
std::string to_dot(const ConjugateTaskGraph& graph, const Env& env);

std::string graph_to_json(const ConjugateTaskGraph& graph);
ConjugateTaskGraph graph_from_json(const std::string& text);

}  // namespace ntg
