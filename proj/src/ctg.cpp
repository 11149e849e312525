#include "ntg/ctg.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ntg {

int ConjugateTaskGraph::node_of(int action) const {
  if (action == kStartAction) return 0;
  auto it = std::lower_bound(actions.begin(), actions.end(), action);
  if (it == actions.end() || *it != action) return -1;
  return static_cast<int>(it - actions.begin()) + 1;
}

void ConjugateTaskGraph::set(int from_node, int to_node, double v) {
  if (to_node == 0 && v != 0.0) throw InputError("ctg: edges into START are not allowed");
  adj[from_node * node_count() + to_node] = v;
}

int ConjugateTaskGraph::edge_count() const {
  int n = node_count(), count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (adj[i * n + j] > 0.0) ++count;
  return count;
}

void ConjugateTaskGraph::validate() const {
  int n = node_count();
  if (static_cast<int>(adj.size()) != n * n) throw InputError("ctg: adjacency size mismatch");
  if (!std::is_sorted(actions.begin(), actions.end()) ||
      std::adjacent_find(actions.begin(), actions.end()) != actions.end())
    throw InputError("ctg: node list must be sorted and duplicate-free");
  for (int i = 0; i < n; ++i) {
    if (adj[i * n] != 0.0) throw InputError("ctg: edge into START");
    for (int j = 0; j < n; ++j) {
      double v = adj[i * n + j];
      if (soft) {
        if (v < 0.0 || v > 1.0) throw InputError("ctg: soft edge weight outside [0,1]");
      } else if (v != 0.0 && v != 1.0) {
        throw InputError("ctg: hard edge weight must be 0 or 1");
      }
    }
  }
}

ConjugateTaskGraph path_from_actions(const std::vector<int>& actions, int task_id) {
  if (actions.empty()) throw InputError("path_from_actions: empty action sequence");
  ConjugateTaskGraph g;
  g.task_id = task_id;
  g.soft = false;
  g.actions = actions;
  std::sort(g.actions.begin(), g.actions.end());
  g.actions.erase(std::unique(g.actions.begin(), g.actions.end()), g.actions.end());
  int n = g.node_count();
  g.adj.assign(static_cast<std::size_t>(n) * n, 0.0);
  int prev = 0;  // START
  for (int a : actions) {
    int node = g.node_of(a);
    g.adj[prev * n + node] = 1.0;
    prev = node;
  }
  return g;
}

ConjugateTaskGraph union_graphs(const std::vector<ConjugateTaskGraph>& graphs,
                                bool allow_mixed_tasks) {
  if (graphs.empty()) throw InputError("union_graphs: empty graph list");
  for (const auto& g : graphs) {
    if (g.soft) throw InputError("union_graphs: cannot union soft graphs");
    if (!allow_mixed_tasks && g.task_id != graphs.front().task_id)
      throw InputError("union_graphs: task id mismatch (pass allow_mixed_tasks to override)");
  }
  ConjugateTaskGraph out;
  out.task_id = graphs.front().task_id;
  out.soft = false;
  std::set<int> nodes;
  for (const auto& g : graphs) nodes.insert(g.actions.begin(), g.actions.end());
  out.actions.assign(nodes.begin(), nodes.end());
  int n = out.node_count();
  out.adj.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (const auto& g : graphs) {
    int gn = g.node_count();
    for (int i = 0; i < gn; ++i)
      for (int j = 0; j < gn; ++j) {
        if (g.adj[i * gn + j] == 0.0) continue;
        int oi = out.node_of(g.action_of(i));
        int oj = out.node_of(g.action_of(j));
        out.adj[oi * n + oj] = 1.0;
      }
  }
  return out;
}

std::vector<int> outgoing_nodes(const ConjugateTaskGraph& graph, int node) {
  int n = graph.node_count();
  if (node < 0 || node >= n) throw InputError("outgoing: unknown node");
  std::vector<int> out;
  for (int j = 0; j < n; ++j)
    if (graph.adj[node * n + j] > 0.0) out.push_back(j);
  return out;
}

std::vector<int> outgoing(const ConjugateTaskGraph& graph, int action) {
  int node = graph.node_of(action);
  if (node < 0) throw InputError("outgoing: action is not a node of this graph");
  std::vector<int> out;
  for (int j : outgoing_nodes(graph, node)) out.push_back(graph.action_of(j));
  return out;  // ascending because node order follows the sorted action list
}

ConjugateTaskGraph oracle_graph(const Env& env, const TaskSpec& task, std::size_t state_budget) {
  auto [initial, obs0] = env.reset(task, 0);

  std::map<std::string, int> ids;
  std::vector<EnvState> states;
  auto intern = [&](const EnvState& s) {
    std::string key = env.state_key(s);
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    if (states.size() >= state_budget)
      throw OracleError("state budget exceeded while enumerating task " + std::to_string(task.id));
    int id = static_cast<int>(states.size());
    ids.emplace(std::move(key), id);
    states.push_back(s);
    return id;
  };

  // breadth-first search for the shortest success depth
  int start_id = intern(initial);
  int success_depth = -1;
  std::set<int> visited = {start_id};
  int depth = 0;
  std::vector<std::vector<int>> layers = {{start_id}};
  while (success_depth < 0) {
    std::vector<int> next_layer;
    for (int sid : layers.back()) {
      for (int a = 0; a < env.action_count(); ++a) {
        auto [next, obs, status] = env.step(states[sid], a, task);
        if (status == StepStatus::Invalid) continue;
        int nid = intern(next);
        if (status == StepStatus::Goal) success_depth = depth + 1;
        if (!visited.count(nid)) {
          visited.insert(nid);
          next_layer.push_back(nid);
        }
      }
    }
    ++depth;
    if (success_depth >= 0) break;
    if (next_layer.empty())
      throw OracleError("goal unreachable while enumerating task " + std::to_string(task.id));
    layers.push_back(std::move(next_layer));
  }

  // can_finish[(sid, r)] = state sid can reach success in exactly r more steps
  std::map<std::pair<int, int>, bool> can_finish;
  std::function<bool(int, int)> finishes = [&](int sid, int r) -> bool {
    if (r == 0) return env.check_success(states[sid], task);
    auto key = std::make_pair(sid, r);
    auto it = can_finish.find(key);
    if (it != can_finish.end()) return it->second;
    bool ok = false;
    for (int a = 0; a < env.action_count() && !ok; ++a) {
      auto [next, obs, status] = env.step(states[sid], a, task);
      if (status == StepStatus::Invalid) continue;
      ok = finishes(intern(next), r - 1);
    }
    can_finish[key] = ok;
    return ok;
  };

  // Walk every shortest successful sequence, collecting consecutive action
  // pairs. in_actions[(sid, r)] accumulates the actions that can immediately
  // precede state sid at distance-to-go r along some shortest path.
  std::set<std::pair<int, int>> edges;  // (from action or kStartAction, to action)
  std::set<int> node_actions;
  std::map<std::pair<int, int>, std::set<int>> in_actions;
  in_actions[{start_id, success_depth}].insert(kStartAction);
  std::vector<std::pair<int, int>> order = {{start_id, success_depth}};
  std::set<std::pair<int, int>> queued = {{start_id, success_depth}};
  for (std::size_t qi = 0; qi < order.size(); ++qi) {
    auto [sid, r] = order[qi];
    if (r == 0) continue;
    for (int a = 0; a < env.action_count(); ++a) {
      auto [next, obs, status] = env.step(states[sid], a, task);
      if (status == StepStatus::Invalid) continue;
      int nid = intern(next);
      if (!finishes(nid, r - 1)) continue;
      node_actions.insert(a);
      for (int prev : in_actions[{sid, r}]) edges.emplace(prev, a);
      auto nkey = std::make_pair(nid, r - 1);
      auto& ins = in_actions[nkey];
      std::size_t before = ins.size();
      ins.insert(a);
      if (!queued.count(nkey) || ins.size() != before) {
        if (!queued.count(nkey)) {
          queued.insert(nkey);
          order.push_back(nkey);
        } else if (ins.size() != before) {
          // new incoming action discovered after the node was processed:
          // re-emit its outgoing pairs
          order.push_back(nkey);
        }
      }
    }
  }

  ConjugateTaskGraph g;
  g.task_id = task.id;
  g.soft = false;
  g.actions.assign(node_actions.begin(), node_actions.end());
  int n = g.node_count();
  g.adj.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (auto [from, to] : edges) g.adj[g.node_of(from) * n + g.node_of(to)] = 1.0;
  return g;
}

std::string to_dot(const ConjugateTaskGraph& graph,
                   const std::function<std::string(int)>& action_name) {
  int n = graph.node_count();
  auto label = [&](int node) {
    return node == 0 ? std::string("START") : action_name(graph.action_of(node));
  };
  std::ostringstream os;
  os << "digraph ctg {\n";
  os << "  rankdir=LR;\n";
  for (int i = 0; i < n; ++i) {
    os << "  n" << i << " [label=\"" << label(i) << "\""
       << (i == 0 ? ", shape=circle" : ", shape=box") << "];\n";
  }
  char buf[32];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = graph.adj[i * n + j];
      if (v <= 0.0) continue;
      os << "  n" << i << " -> n" << j;
      if (graph.soft) {
        std::snprintf(buf, sizeof buf, "%.2f", v);
        os << " [label=\"" << buf << "\"]";
      }
      os << ";\n";
    }
  os << "}\n";
  return os.str();
}

std::string to_dot(const ConjugateTaskGraph& graph, const Env& env) {
  return to_dot(graph, [&env](int a) { return env.action_name(a); });
}

std::string graph_to_json(const ConjugateTaskGraph& graph) {
  nlohmann::ordered_json j;
  j["task_id"] = graph.task_id;
  j["soft"] = graph.soft;
  j["nodes"] = graph.actions;
  nlohmann::json edges = nlohmann::json::array();
  int n = graph.node_count();
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double v = graph.adj[i * n + k];
      if (v > 0.0) edges.push_back({graph.action_of(i), graph.action_of(k), v});
    }
  j["edges"] = std::move(edges);
  return j.dump();
}

ConjugateTaskGraph graph_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ConjugateTaskGraph g;
  g.task_id = j.at("task_id").get<int>();
  g.soft = j.at("soft").get<bool>();
  g.actions = j.at("nodes").get<std::vector<int>>();
  int n = g.node_count();
  g.adj.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (const auto& e : j.at("edges")) {
    int from = e[0].get<int>(), to = e[1].get<int>();
    g.adj[g.node_of(from) * n + g.node_of(to)] = e[2].get<double>();
  }
  g.validate();
  return g;
}

}  // namespace ntg
