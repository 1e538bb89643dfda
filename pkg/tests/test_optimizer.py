import numpy as np
import pytest

from molto.errors import SolverFailure
from molto.mesh import build_rect_mesh
from molto.optimizer import RunConfig, run_candidate, stationarity
from molto.problems import SurrogateProblem


def desk_config(**overrides):
    """Reference configuration for coarse fixed-mesh runs."""
    base = dict(max_iterations=800, penalty=0.05, wave_speed=0.2,
                wave_damping=0.1, interface_width=0.3, multiplier_init=0.0,
                weight_inertia=0.5, weight_damping=6.0, weight_stiffness=10.0)
    base.update(overrides)
    return RunConfig(**base)


def test_stationarity_rules():
    flat = [np.array([1.0, 2.0])] * 6
    assert stationarity(flat, [0.0], 5, 1e-4, 1e-3)
    assert not stationarity(flat[:3], [0.0], 5, 1e-4, 1e-3)
    wobble = [np.array([1.0 + 0.1 * (-1) ** k, 2.0]) for k in range(6)]
    assert not stationarity(wobble, [0.0], 5, 1e-4, 1e-3)
    assert not stationarity(flat, [0.2], 5, 1e-4, 1e-3)  # feasibility gate


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(max_iterations=3, window=5)
    with pytest.raises(ValueError):
        RunConfig(tol_objective=0.0)


def test_surrogate_candidate_immediate():
    problem = SurrogateProblem(2)
    cand = run_candidate(problem, (0.6, 0.4), RunConfig())
    assert cand.converged and cand.iterations == 0
    assert np.allclose(cand.objectives, [(1 - 0.6) ** 2 + 0.01, (1 - 0.4) ** 2 + 0.01])


def _single_case_girder(nx=24, ny=12):
    from molto.problems import make_girder
    return make_girder(nx=nx, ny=ny, num_cases=1)


def test_single_objective_degenerate_run():
    problem = _single_case_girder()
    cand = run_candidate(problem, (1.0,), desk_config(max_iterations=500))
    assert not cand.failed
    g_final = cand.history[-1][2][0]
    assert abs(g_final) <= 0.01
    assert len(cand.history) <= 501
    assert cand.phi is not None and np.abs(cand.phi).max() <= 1.0


def test_run_candidate_deterministic():
    problem = _single_case_girder(16, 8)
    cfg = desk_config(max_iterations=40)
    a = run_candidate(problem, (1.0,), cfg)
    b = run_candidate(problem, (1.0,), cfg)
    assert a.objectives == b.objectives
    assert np.array_equal(a.phi, b.phi)
    assert a.history == b.history


def test_history_and_reference_capture():
    problem = _single_case_girder(16, 8)
    cand = run_candidate(problem, (1.0,), desk_config(max_iterations=30))
    assert len(cand.history) <= 31
    j0 = cand.history[0][1][0]
    assert cand.normalized[0] == pytest.approx(cand.objectives[0] / j0)


class _ExplodingProblem:
    kind = "compliance"
    num_objectives = 1

    def __init__(self):
        self.mesh = build_rect_mesh(1.0, 1.0, 2, 2)

    def __getattr__(self, name):
        raise SolverFailure("synthetic failure")


def test_failed_candidate_is_reported_not_raised():
    cand = run_candidate(_ExplodingProblem(), (1.0,), RunConfig())
    assert cand.failed
    assert "SolverFailure" in cand.error
    assert not cand.converged


def test_ws_limit_weights_pinned():
    from molto.problems import make_girder
    problem = make_girder(nx=16, ny=8)
    cfg = desk_config(max_iterations=60, weight_stiffness=1e6)
    cand = run_candidate(problem, (0.9, 0.1), cfg)
    assert not cand.failed
    for row in cand.history:
        assert abs(row[3][0] - 0.9) <= 1e-3


def test_prioritized_objective_improves_more():
    from molto.problems import make_girder
    problem = make_girder(nx=40, ny=20)
    cand = run_candidate(problem, (0.9, 0.1), desk_config())
    assert not cand.failed
    assert cand.normalized[0] <= cand.normalized[1]
