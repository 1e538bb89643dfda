"""Inner loop: evolve one solution candidate for a fixed reference weight.

Per iteration the weights advance one oscillator step, the state and adjoint
problems are solved on the current design, the multipliers are updated, and
the aggregated perturbation forces one level set step. The loop exits on a
windowed stationarity test or at the iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import levelset, sensitivity, weights
from .errors import MoltoError


@dataclass
class RunConfig:
    """Every numerical knob of one candidate run."""

    max_iterations: int = 200
    window: int = 5
    tol_objective: float = 1e-4
    tol_constraint: float = 1e-3

    wave_speed: float = 0.014
    wave_damping: float = 0.001
    interface_width: float = 1.0
    step_size: float = 1.0

    weight_inertia: float = 1.0
    weight_damping: float = 1.0
    weight_stiffness: float = 1.0
    weight_clamp: float = 1e-3
    weight_ratio: float = 1.0

    multiplier_init: float = 0.0
    penalty: float = 10.0

    use_filter: bool = False
    filter_eta: float = 1e-4
    filter_gamma: float = 2.0

    def __post_init__(self):
        if self.window < 2 or self.max_iterations < self.window:
            raise ValueError("need max_iterations >= window >= 2")
        if min(self.tol_objective, self.tol_constraint) <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolutionCandidate:
    """Outcome of one candidate run (reference weight -> objective vector)."""

    w_star: tuple
    w_final: tuple
    objectives: tuple
    normalized: tuple
    feasible: tuple
    converged: bool
    iterations: int
    phi: np.ndarray | None = None
    history: list = field(default_factory=list)
    weight_clamps: int = 0
    levelset_clamps: int = 0
    failed: bool = False
    error: str = ""

    @property
    def all_feasible(self) -> bool:
        return all(self.feasible)


def stationarity(j_history, g_latest, window: int, tol_objective: float,
                 tol_constraint: float) -> bool:
    """Windowed objective stability gated by constraint feasibility."""
    if len(j_history) < window:
        return False
    block = np.asarray(j_history[-window:], dtype=float)
    scale = np.max(np.abs(block), axis=0)
    scale[scale == 0.0] = 1.0
    rel = (block.max(axis=0) - block.min(axis=0)) / scale
    feasible = bool(np.all(np.asarray(g_latest) <= tol_constraint))
    return bool(rel.max() <= tol_objective) and feasible


def _surrogate_candidate(problem, w_star) -> SolutionCandidate:
    j = problem.evaluate(w_star)
    m = problem.num_objectives
    return SolutionCandidate(
        w_star=tuple(np.asarray(w_star, dtype=float)),
        w_final=tuple(np.asarray(w_star, dtype=float)),
        objectives=tuple(j), normalized=tuple(j),
        feasible=(True,) * m, converged=True, iterations=0)


def _wave_matrices(problem, cfg: RunConfig):
    mesh = problem.mesh
    cache = getattr(mesh, "_wave_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(mesh, "_wave_cache", cache)
    key = float(cfg.wave_speed)
    if key not in cache:
        cache[key] = levelset.assemble_wave(mesh, cfg.wave_speed)
    return cache[key]


def run_candidate(problem, w_star, cfg: RunConfig) -> SolutionCandidate:
    """Run the coupled evolution for one reference weight; numerical failures
    are captured in the candidate instead of aborting a sweep."""
    try:
        if problem.kind == "surrogate":
            return _surrogate_candidate(problem, w_star)
        return _run_fem_candidate(problem, w_star, cfg)
    except (MoltoError, RuntimeError) as exc:  # singular factors included
        m = problem.num_objectives
        return SolutionCandidate(
            w_star=tuple(np.asarray(w_star, dtype=float)), w_final=(float("nan"),) * m,
            objectives=(float("nan"),) * m, normalized=(float("nan"),) * m,
            feasible=(False,) * m, converged=False, iterations=0,
            failed=True, error=f"{type(exc).__name__}: {exc}")


def _run_fem_candidate(problem, w_star, cfg: RunConfig) -> SolutionCandidate:
    mesh = problem.mesh
    wstate = weights.make_state(
        w_star, inertia=cfg.weight_inertia, damping=cfg.weight_damping,
        stiffness=cfg.weight_stiffness, clamp_margin=cfg.weight_clamp,
        start_ratio=cfg.weight_ratio, ds=cfg.step_size)
    phi0 = problem.initial_phi()
    lstate = levelset.initialize(
        mesh, phi0, phi0.copy(), _wave_matrices(problem, cfg),
        damping=cfg.wave_damping, width=cfg.interface_width, ds=cfg.step_size,
        dirichlet=problem.phi_dirichlet())
    constraints = problem.constraint_specs(cfg.multiplier_init, cfg.penalty)
    specs = problem.objective_specs()

    j_history: list[np.ndarray] = []
    g_latest = None
    j_star = None
    w_now = wstate.weights
    history_rows = []
    converged = False
    iterations = 0

    for s in range(cfg.max_iterations + 1):
        if s > 0:
            j_prev = j_history[-2] if len(j_history) >= 2 else None
            fq = weights.forcing(wstate.q, wstate.q_prev, j_history[-1], j_prev,
                                 j_star, ds=cfg.step_size)
            weights.step(wstate, fq)
            w_now = wstate.weights

        theta_e = problem.theta_elements(lstate.phi, cfg.interface_width)
        tau_eff = problem.tau_effective(theta_e)
        bundle = problem.solve_states(tau_eff)
        j_now = problem.objectives(bundle, theta_e, tau_eff)
        if j_star is None:
            for spec, value in zip(specs, j_now):
                spec.capture_reference(value)
            j_star = np.array([spec.j_star for spec in specs])
        g_now = problem.constraint_values(bundle, theta_e, tau_eff, constraints)
        constraints = [sensitivity.update_multiplier(c, g)
                       for c, g in zip(constraints, g_now)]

        adjoints = problem.solve_adjoints(bundle, w_now, j_star, constraints,
                                          theta_e, tau_eff)
        pert = problem.perturbation(bundle, adjoints, theta_e, tau_eff, w_now,
                                    j_star, constraints)
        forcing_nodal = pert.total
        if cfg.use_filter:
            forcing_nodal = sensitivity.helmholtz_filter(
                forcing_nodal, cfg.filter_eta, cfg.filter_gamma, mesh)
        levelset.step(lstate, forcing_nodal)

        j_history.append(j_now)
        g_latest = g_now
        history_rows.append((s, tuple(j_now), tuple(g_now), tuple(w_now)))
        iterations = s
        if s > 0 and stationarity(j_history, g_latest, cfg.window,
                                  cfg.tol_objective, cfg.tol_constraint):
            converged = True
            break

    j_final = j_history[-1]
    return SolutionCandidate(
        w_star=tuple(np.asarray(w_star, dtype=float)),
        w_final=tuple(w_now),
        objectives=tuple(j_final),
        normalized=tuple(j_final / j_star),
        feasible=tuple(bool(g <= cfg.tol_constraint) for g in g_latest),
        converged=converged, iterations=iterations, phi=lstate.phi.copy(),
        history=history_rows, weight_clamps=wstate.clamp_events,
        levelset_clamps=lstate.clamp_events)
