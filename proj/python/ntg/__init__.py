"""One-shot imitation with conjugate task graphs.

Thin wrapper over the compiled core: symbolic environments, task-graph
construction and completion, and reactive policy execution.
"""

try:
    from ntg._ntg import *  # noqa: F401,F403  (installed layout)
    from ntg._ntg import __doc__ as _core_doc
except ImportError:  # build-tree layout: the module sits next to the package
    from _ntg import *  # noqa: F401,F403
    from _ntg import __doc__ as _core_doc

__all__ = [
    "Env",
    "TaskSpec",
    "EnvState",
    "Demonstration",
    "ConjugateTaskGraph",
    "StepStatus",
    "Dataset",
    "ExperimentConfig",
    "TrainedComponents",
    "PolicyBundle",
    "RolloutResult",
    "path_from_actions",
    "union_graphs",
    "oracle_graph",
    "to_dot",
    "fully_connected_graph",
    "uniform_nll_closed_form",
    "build_dataset",
    "write_dataset",
    "load_dataset",
    "train_all",
    "generate_policy",
    "rollout",
    "nll_of_demo",
]
