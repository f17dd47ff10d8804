import json

import numpy as np

from sparsechoice.config import ExperimentConfig
from sparsechoice.pipeline_app import build_graph, run_pipeline
from sparsechoice.synthgen import draw_and_aggregate, generate


def _config(**overrides):
    data = {
        "rows": 25,
        "replicates": 300,
        "seed": 5,
        "library": {"name_offset": 1, "entries": [{"expr": "x", "targets": [0, 1, 2, 3, 4]}]},
        "solver": {"pi": 0.05, "on_infeasible": "relax"},
    }
    data.update(overrides)
    return ExperimentConfig(**data)


def _events(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


def test_pipeline_runs_every_node(event_log):
    state = run_pipeline(_config(), seed=11, run=2)
    assert state["error"] is None
    assert state["library"].columns == 5
    assert state["solution"].alternatives == (0, 1)
    assert state["observed"].replicates == 300

    spans = [e["payload"]["name"] for e in _events(event_log) if e["event"] == "span.start"]
    assert spans == ["GenerateData", "AggregateChoices", "BuildLibrary", "SolveLibrary"]


def test_pipeline_matches_direct_calls():
    config = _config()
    state = run_pipeline(config, seed=11, covariate_seed=4)
    data = generate(config.generator(4))
    observed = draw_and_aggregate(data.true_probs, config.replicates, 11)
    np.testing.assert_array_equal(state["data"].covariates.values, data.covariates.values)
    np.testing.assert_array_equal(state["observed"].shares, observed.shares)


def test_supplied_data_skips_generation(event_log):
    config = _config()
    data = generate(config.generator(1))
    observed = draw_and_aggregate(data.true_probs, config.replicates, 1)
    state = run_pipeline(config, seed=999, data=data, observed=observed)
    np.testing.assert_array_equal(state["data"].covariates.values, data.covariates.values)
    np.testing.assert_array_equal(state["observed"].shares, observed.shares)
    assert "GenerateData" not in event_log.read_text(encoding="utf-8")
    assert state["error"] is None


def test_failure_is_routed_to_record_failure(event_log, caplog):
    config = _config(library={"entries": [{"expr": "log(x)", "targets": [0]}]})
    graph = build_graph()
    with caplog.at_level("WARNING"):
        state = run_pipeline(config, seed=3, graph=graph)
    assert state["error_module"] == "featlib"
    assert "log(x0)" in state["error"]
    assert "solution" not in state or state["solution"] is None
    events = [e["event"] for e in _events(event_log)]
    assert "run.failed" in events
    assert "SolveLibrary" not in event_log.read_text(encoding="utf-8")


def test_infeasible_solve_names_sparsesolve():
    config = _config(solver={"pi": 1e-9, "on_infeasible": "error"})
    state = run_pipeline(config, seed=3)
    assert state["error_module"] == "sparsesolve"
    assert "minimal feasible pi" in state["error"]
