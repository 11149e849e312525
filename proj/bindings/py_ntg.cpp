// Python bindings for the main operations: environments, task graphs,
// component training and policy execution at desk scale.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ntg/acceptance.hpp"
#include "ntg/harness.hpp"

namespace py = pybind11;
using namespace ntg;

namespace {

WorldConfig make_world(const std::string& domain, int blocks, int categories, int bins,
                       int objects_per_category, int objects, int receptacles,
                       std::vector<int> target_counts) {
  WorldConfig w;
  w.domain = domain_from_name(domain);
  w.stacking.blocks = blocks;
  w.sorting = {categories, bins, objects_per_category};
  w.collection.objects = objects;
  w.collection.receptacles = receptacles;
  if (!target_counts.empty()) w.collection.target_counts = std::move(target_counts);
  return w;
}

}  // namespace

PYBIND11_MODULE(_ntg, m) {
  m.doc() = "conjugate task graphs from single demonstrations: symbolic environments, "
            "graph generation and reactive execution";

  py::enum_<StepStatus>(m, "StepStatus")
      .value("OK", StepStatus::Ok)
      .value("INVALID", StepStatus::Invalid)
      .value("GOAL", StepStatus::Goal);

  py::class_<TaskSpec>(m, "TaskSpec")
      .def_readonly("id", &TaskSpec::id)
      .def_property_readonly("domain", [](const TaskSpec& t) { return domain_name(t.domain); })
      .def("goal_key", &TaskSpec::goal_key)
      .def("to_json", [](const TaskSpec& t) { return task_to_json(t); })
      .def_static("from_json", [](const std::string& s) { return task_from_json(s); });

  py::class_<EnvState>(m, "EnvState")
      .def("to_json", [](const EnvState& s) { return state_to_json(s); })
      .def_static("from_json", [](const std::string& s) { return state_from_json(s); });

  py::class_<Demonstration>(m, "Demonstration")
      .def_readonly("task_id", &Demonstration::task_id)
      .def_readonly("actions", &Demonstration::actions)
      .def_readonly("observations", &Demonstration::observations)
      .def_readonly("initial_state", &Demonstration::initial_state)
      .def("to_json", [](const Demonstration& d) { return demo_to_json(d); })
      .def_static("from_json", [](const std::string& s) { return demo_from_json(s); });

  py::class_<ConjugateTaskGraph>(m, "ConjugateTaskGraph")
      .def_readonly("task_id", &ConjugateTaskGraph::task_id)
      .def_readonly("soft", &ConjugateTaskGraph::soft)
      .def_property_readonly("nodes", [](const ConjugateTaskGraph& g) { return g.actions; })
      .def("edge_count", &ConjugateTaskGraph::edge_count)
      .def("outgoing", [](const ConjugateTaskGraph& g, int action) { return outgoing(g, action); })
      .def("to_json", [](const ConjugateTaskGraph& g) { return graph_to_json(g); })
      .def_static("from_json", [](const std::string& s) { return graph_from_json(s); });

  py::class_<Env>(m, "Env")
      .def(py::init([](const std::string& domain, int blocks, int categories, int bins,
                       int objects_per_category, int objects, int receptacles,
                       std::vector<int> target_counts) {
             return Env(make_world(domain, blocks, categories, bins, objects_per_category, objects,
                                   receptacles, std::move(target_counts)));
           }),
           py::arg("domain"), py::arg("blocks") = 4, py::arg("categories") = 3,
           py::arg("bins") = 5, py::arg("objects_per_category") = 1, py::arg("objects") = 8,
           py::arg("receptacles") = 5, py::arg("target_counts") = std::vector<int>{})
      .def_property_readonly("action_count", &Env::action_count)
      .def_property_readonly("feature_width", &Env::feature_width)
      .def("action_name", &Env::action_name)
      .def("generate_tasks", &Env::generate_tasks, py::arg("count"), py::arg("seed"))
      .def(
          "reset",
          [](const Env& env, const TaskSpec& task, std::uint64_t seed) {
            auto [state, obs] = env.reset(task, seed);
            return py::make_tuple(state, obs.features);
          },
          py::arg("task"), py::arg("seed"))
      .def("step",
           [](const Env& env, const EnvState& state, int action, const TaskSpec& task) {
             auto [next, obs, status] = env.step(state, action, task);
             return py::make_tuple(next, obs.features, status);
           })
      .def("check_success", &Env::check_success)
      .def("plan_demo", &Env::plan_demo, py::arg("task"), py::arg("initial"), py::arg("seed"))
      .def("featurize", [](const Env& env, const EnvState& s) { return env.featurize(s).features; })
      .def("alternate_order_reset", &Env::alternate_order_reset);

  m.def("path_from_actions", &path_from_actions, py::arg("actions"), py::arg("task_id") = -1);
  m.def("union_graphs", &union_graphs, py::arg("graphs"), py::arg("allow_mixed_tasks") = false);
  m.def("oracle_graph", &oracle_graph, py::arg("env"), py::arg("task"),
        py::arg("state_budget") = 200000);
  m.def("to_dot", [](const ConjugateTaskGraph& g, const Env& env) { return to_dot(g, env); });
  m.def("fully_connected_graph", &fully_connected_graph, py::arg("actions"), py::arg("task_id"));
  m.def("uniform_nll_closed_form", &uniform_nll_closed_form, py::arg("graph"), py::arg("actions"),
        py::arg("floor") = 1e-7);

  py::class_<TrainedComponents>(m, "TrainedComponents");

  py::class_<PolicyBundle>(m, "PolicyBundle")
      .def_property_readonly("graph", [](const PolicyBundle& b) { return b.graph; });

  py::class_<RolloutResult>(m, "RolloutResult")
      .def_readonly("success", &RolloutResult::success)
      .def_readonly("failure", &RolloutResult::failure)
      .def_property_readonly("num_steps",
                             [](const RolloutResult& r) { return r.steps.size(); });

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("num_seen", [](const Dataset& d) { return d.seen.size(); })
      .def_property_readonly("num_unseen", [](const Dataset& d) { return d.unseen.size(); });

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def("to_json", &ExperimentConfig::to_json)
      .def_static("from_json", &ExperimentConfig::from_json)
      .def("override", &ExperimentConfig::apply_override);

  m.def(
      "build_dataset",
      [](const Env& env, int seen, int unseen, int demos_per_task, int union_demos,
         int unseen_demos, std::uint64_t seed) {
        return build_dataset(env.config(), seen, unseen, demos_per_task, union_demos, unseen_demos,
                             seed);
      },
      py::arg("env"), py::arg("seen"), py::arg("unseen"), py::arg("demos_per_task") = 4,
      py::arg("union_demos") = 12, py::arg("unseen_demos") = 4, py::arg("seed") = 1);
  m.def("write_dataset", &write_dataset);
  m.def("load_dataset", &load_dataset);

  m.def(
      "train_all",
      [](const Dataset& ds, const ExperimentConfig& cfg, const std::string& out_dir) {
        return train_all(ds, cfg, out_dir);
      },
      py::arg("dataset"), py::arg("config"), py::arg("out_dir") = "");

  m.def(
      "generate_policy",
      [](const TrainedComponents& tc, const Env& env, const Demonstration& demo, int task_id) {
        auto bundle = build_bundle(tc, env, demo, AblationFlags{}, task_id);
        if (!bundle) throw InputError("demo decoded to an empty action sequence");
        return *bundle;
      },
      py::arg("components"), py::arg("env"), py::arg("demo"), py::arg("task_id"),
      "interpret the demo, complete the graph and assemble the execution bundle")
      ;

  m.def(
      "rollout",
      [](const PolicyBundle& bundle, const Env& env, const TaskSpec& task, std::uint64_t seed,
         int max_steps) { return rollout(bundle, env, task, seed, max_steps); },
      py::arg("bundle"), py::arg("env"), py::arg("task"), py::arg("seed"), py::arg("max_steps"));

  m.def(
      "nll_of_demo",
      [](const PolicyBundle& bundle, const Demonstration& demo, double floor) {
        return nll_of_demo(bundle, demo, floor);
      },
      py::arg("bundle"), py::arg("demo"), py::arg("floor") = 1e-7);
}
