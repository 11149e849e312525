"""Smoke tests for the python module against the compiled core."""

import ntg


def test_stacking_env_and_demo_replay():
    env = ntg.Env("stacking", blocks=3)
    assert env.action_count == 9
    assert env.feature_width == 16
    tasks = env.generate_tasks(13, seed=5)
    assert len(tasks) == 13
    assert len({t.goal_key() for t in tasks}) == 13

    task = tasks[0]
    state, obs = env.reset(task, 1)
    demo = env.plan_demo(task, state, 2)
    assert len(demo.observations) == len(demo.actions) + 1

    # replaying the demo reaches the goal exactly at the last action
    cur = demo.initial_state
    for i, action in enumerate(demo.actions):
        cur, features, status = env.step(cur, action, task)
        assert status != ntg.StepStatus.INVALID
        is_last = i == len(demo.actions) - 1
        assert (status == ntg.StepStatus.GOAL) == is_last
    assert env.check_success(cur, task)


def test_graph_algebra():
    p = ntg.path_from_actions([1, 2, 1, 3], 0)
    assert sorted(p.nodes) == [1, 2, 3]
    assert p.outgoing(1) == [2, 3]
    q = ntg.path_from_actions([3, 2, 1], 0)
    u = ntg.union_graphs([p, q])
    assert u.edge_count() >= p.edge_count()
    round_trip = ntg.ConjugateTaskGraph.from_json(u.to_json())
    assert round_trip.edge_count() == u.edge_count()


def test_oracle_graph_and_dot():
    env = ntg.Env("sorting", categories=2, bins=3)
    tasks = env.generate_tasks(2, seed=3)
    g = ntg.oracle_graph(env, tasks[0])
    assert len(g.nodes) == 2
    assert g.edge_count() == 4
    dot = ntg.to_dot(g, env)
    assert dot.startswith("digraph")
    assert "START" in dot
    assert "sort(" in dot


def test_mini_training_pipeline_and_rollout():
    env = ntg.Env("stacking", blocks=4)
    ds = ntg.build_dataset(env, seen=12, unseen=4, seed=7)
    assert ds.num_seen == 12 and ds.num_unseen == 4

    cfg = ntg.ExperimentConfig()
    for key, value in [
        ("interp_epochs", "12"),
        ("gcn_epochs", "8"),
        ("loc_epochs", "6"),
        ("edge_epochs", "6"),
    ]:
        cfg.override(key, value)
    tc = ntg.train_all(ds, cfg)

    eval_env = ntg.Env("stacking", blocks=4)
    tasks = eval_env.generate_tasks(16, seed=7)
    task = tasks[12]  # an unseen split member under the same generation seed
    state, obs = eval_env.reset(task, 3)
    demo = eval_env.plan_demo(task, state, 4)
    bundle = ntg.generate_policy(tc, eval_env, demo, task.id)
    assert bundle.graph.edge_count() >= 1
    result = ntg.rollout(bundle, eval_env, task, seed=5, max_steps=24)
    assert isinstance(result.success, bool)
    nll = ntg.nll_of_demo(bundle, demo)
    assert nll >= 0.0
