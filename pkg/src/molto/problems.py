"""Benchmark problem definitions.

Each FEM problem owns its mesh, boundary tagging, load data, and the wiring
between elasticity solves, adjoint solves, and the perturbation builders.
All of them expose the same small interface consumed by the optimizer:

    solve_states / objectives / constraint_values / solve_adjoints /
    perturbation / tau_effective

The surrogate problem replaces the whole inner loop by an analytic mapping
from reference weights to objective values; it exists so the outer
refinement loop can be exercised and tested without any FEM work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import elasticity as el
from . import sensitivity as sens
from .errors import InvalidArgument
from .fem import element_means
from .mesh import Mesh, build_lshape_mesh, build_rect_mesh, tag_boundary


@dataclass
class StateBundle:
    states: list
    facts: list  # factorization per load case (shared objects allowed)


@dataclass
class LoadCase:
    traction_tag: str
    traction: tuple
    supports: tuple


class FEMProblem:
    """Shared plumbing for the concrete benchmark problems."""

    kind = "fem"
    uses_filter = False

    def __init__(self, mesh: Mesh, mat: el.MaterialParams):
        self.mesh = mesh
        self.mat = mat
        self.design_mask = None  # bool per element; None = everything designable
        self.phi_fixed_nodes = np.empty(0, dtype=np.int64)
        self.phi_fixed_values = np.empty(0)

    # -- design field handling ------------------------------------------
    def theta_elements(self, phi: np.ndarray, width: float) -> np.ndarray:
        return element_means(self.mesh, el.heaviside(phi, width))

    def tau_effective(self, theta_e: np.ndarray) -> np.ndarray:
        tau = el.ersatz_tau(theta_e, self.mat)
        if self.design_mask is not None:
            tau = np.where(self.design_mask, tau, 1.0)
        return tau

    def initial_phi(self) -> np.ndarray:
        return np.ones(self.mesh.num_nodes)

    def phi_dirichlet(self):
        return self.phi_fixed_nodes, self.phi_fixed_values

    def _set_phi_dirichlet(self, pairs):
        """pairs: iterable of (node array, value); on nodes listed more than
        once the first value wins (traction anchors beat void walls)."""
        nodes, values = [], []
        for idx, val in pairs:
            nodes.append(np.asarray(idx, dtype=np.int64))
            values.append(np.full(len(idx), float(val)))
        if nodes:
            allnodes = np.concatenate(nodes)
            allvals = np.concatenate(values)
            allnodes, keep = np.unique(allnodes, return_index=True)
            self.phi_fixed_nodes = allnodes
            self.phi_fixed_values = allvals[keep]


# ---------------------------------------------------------------------------
# mean-compliance family (simply supported girder, clamped girder, ...)

class ComplianceProblem(FEMProblem):
    """Any number of mean-compliance load cases with a shared volume budget."""

    kind = "compliance"

    def __init__(self, mesh, mat, cases, volume_fraction):
        super().__init__(mesh, mat)
        if not cases:
            raise InvalidArgument("at least one load case required")
        self.cases = list(cases)
        self.volume_fraction = float(volume_fraction)
        self.volume_ref = mesh.total_area
        self.traction_vectors = [el.boundary_vector(mesh, c.traction_tag, c.traction)
                                 for c in self.cases]
        self._set_phi_dirichlet(
            [(mesh.nodes_with_tag(c.traction_tag), 1.0) for c in self.cases])

    @property
    def num_objectives(self) -> int:
        return len(self.cases)

    def objective_specs(self):
        return [sens.ObjectiveSpec("mean_compliance", tag=c.traction_tag)
                for c in self.cases]

    def constraint_specs(self, multiplier=0.0, penalty=10.0):
        return [sens.ConstraintSpec("volume_fraction", self.volume_fraction,
                                    multiplier=multiplier, penalty=penalty)]

    def solve_states(self, tau_eff) -> StateBundle:
        facts_by_sig, facts, states = {}, [], []
        for case, tvec in zip(self.cases, self.traction_vectors):
            sig = case.supports
            if sig not in facts_by_sig:
                sysm = el.assemble_state(self.mesh, tau_eff, self.mat,
                                         el.LoadSpec(), case.supports)
                facts_by_sig[sig] = el.FactorizedSystem(sysm)
            fact = facts_by_sig[sig]
            states.append(fact.solve(tvec))
            facts.append(fact)
        return StateBundle(states=states, facts=facts)

    def objectives(self, bundle, theta_e, tau_eff) -> np.ndarray:
        return np.array([
            sens.eval_objective(spec, u=u, load_vector=tvec)
            for spec, u, tvec in zip(self.objective_specs(), bundle.states,
                                     self.traction_vectors)])

    def constraint_values(self, bundle, theta_e, tau_eff, constraints) -> np.ndarray:
        vol = sens.volume_integral(self.mesh, theta_e, self.design_mask)
        return np.array([sens.eval_constraint(c, volume=vol, volume_ref=self.volume_ref)
                         for c in constraints])

    def solve_adjoints(self, bundle, w, j_star, constraints, theta_e, tau_eff):
        return [el.adjoint_compliance(u, w[a], j_star[a])
                for a, u in enumerate(bundle.states)]

    def perturbation(self, bundle, adjoints, theta_e, tau_eff, w, j_star,
                     constraints, c_override=None):
        return sens.perturbation_compliance(
            self.mesh, self.mat, theta_e, bundle.states, adjoints,
            constraints[0].multiplier, self.volume_ref, w,
            mask=self.design_mask, c_override=c_override)


def make_girder(nx=60, ny=30, traction=1.0, length=1.0, num_cases=2,
                mat: el.MaterialParams | None = None) -> ComplianceProblem:
    """Simply supported girder: rollers on bottom corner patches, downward
    load patches on the top edge (two mirrored cases by default)."""
    mat = mat or el.MaterialParams()
    w, h = length, 0.5 * length
    mesh = build_rect_mesh(w, h, nx, ny, crossed=True)
    mesh = tag_boundary(mesh, (0.0, 0.0), (0.05 * w, 0.0), "roller_left")
    mesh = tag_boundary(mesh, (0.95 * w, 0.0), (w, 0.0), "roller_right")
    if num_cases == 1:
        patches = [(0.45 * w, 0.55 * w)]
    elif num_cases == 2:
        patches = [(0.2 * w, 0.3 * w), (0.7 * w, 0.8 * w)]
    else:
        raise InvalidArgument("girder supports one or two load cases")
    supports = (el.FixedBoundary("roller_left", "y"),
                el.FixedBoundary("roller_right", "y"),
                el.PointConstraint(mesh.nearest_node(0.0, 0.0), 0))
    cases = []
    for i, (x0, x1) in enumerate(patches, start=1):
        tag = f"traction_{i}"
        mesh = tag_boundary(mesh, (x0, h), (x1, h), tag)
        cases.append(LoadCase(tag, (0.0, -traction), supports))
    return ComplianceProblem(mesh, mat, cases, volume_fraction=0.45)


def make_clamped_tri(nx=60, ny=30, traction=1.0, length=1.0,
                     mat: el.MaterialParams | None = None) -> ComplianceProblem:
    """Clamped girder with three load cases under different loading and
    supporting conditions (tip bending, propped mid-span bending, axial pull)."""
    mat = mat or el.MaterialParams()
    w, h = length, 0.5 * length
    mesh = build_rect_mesh(w, h, nx, ny, crossed=True)
    mesh = tag_boundary(mesh, (0.0, 0.0), (0.0, h), "clamp")
    mesh = tag_boundary(mesh, (w, 0.2 * h), (w, 0.6 * h), "traction_1")
    mesh = tag_boundary(mesh, (0.45 * w, h), (0.55 * w, h), "traction_2")
    mesh = tag_boundary(mesh, (0.9 * w, 0.0), (w, 0.0), "prop")
    mesh = tag_boundary(mesh, (w, 0.8 * h), (w, h), "traction_3")
    clamp = el.FixedBoundary("clamp", "both")
    cases = [
        LoadCase("traction_1", (0.0, -traction), (clamp,)),
        LoadCase("traction_2", (0.0, -traction),
                 (clamp, el.FixedBoundary("prop", "y"))),
        LoadCase("traction_3", (traction, 0.0), (clamp,)),
    ]
    return ComplianceProblem(mesh, mat, cases, volume_fraction=0.45)


# ---------------------------------------------------------------------------
# compliant mechanism (gripper) family

class MechanismProblem(FEMProblem):
    """Output displacement vs. strain energy with boundary springs and a
    fixed solid block carrying the output face."""

    kind = "mechanism"
    num_objectives = 2

    def __init__(self, mesh, mat, *, traction, spring_in, spring_out,
                 dir_in, dir_out, volume_fraction, solid_box):
        super().__init__(mesh, mat)
        self.volume_fraction = float(volume_fraction)
        self.loads = el.LoadSpec(
            tractions=(el.Traction("input", traction),),
            springs=(el.Spring("input", spring_in, dir_in),
                     el.Spring("output", spring_out, dir_out)))
        self.supports = (el.FixedBoundary("clamp", "both"),
                         el.FixedBoundary("symmetry", "y"))
        self.traction_vector = el.boundary_vector(mesh, "input", traction)
        self.output_vector = el.boundary_vector(mesh, "output", dir_out)
        self._spring_matrix = el.spring_matrix(mesh, self.loads.springs)

        (x0, y0), (x1, y1) = solid_box
        cent = mesh.nodes[mesh.triangles].mean(axis=1)
        solid = ((cent[:, 0] >= x0) & (cent[:, 0] <= x1)
                 & (cent[:, 1] >= y0) & (cent[:, 1] <= y1))
        self.design_mask = ~solid
        self.volume_ref = float(mesh.element_areas[self.design_mask].sum())
        solid_nodes = np.unique(mesh.triangles[solid])
        self._set_phi_dirichlet([
            (mesh.nodes_with_tag("input"), 1.0),
            (solid_nodes, 1.0),
        ])

    def objective_specs(self):
        return [sens.ObjectiveSpec("output_displacement", tag="output"),
                sens.ObjectiveSpec("strain_energy")]

    def constraint_specs(self, multiplier=0.0, penalty=10.0):
        return [sens.ConstraintSpec("volume_fraction", self.volume_fraction,
                                    multiplier=multiplier, penalty=penalty)]

    def solve_states(self, tau_eff) -> StateBundle:
        sysm = el.assemble_state(self.mesh, tau_eff, self.mat, self.loads,
                                 self.supports)
        fact = el.FactorizedSystem(sysm)
        u = fact.solve()
        # both objectives read the same physical state
        return StateBundle(states=[u, u], facts=[fact, fact])

    def objectives(self, bundle, theta_e, tau_eff) -> np.ndarray:
        u = bundle.states[0]
        j1 = sens.eval_objective(self.objective_specs()[0], u=u,
                                 load_vector=self.output_vector)
        j2 = sens.strain_energy(self.mesh, self.mat, u, tau_eff)
        return np.array([j1, j2])

    def constraint_values(self, bundle, theta_e, tau_eff, constraints) -> np.ndarray:
        vol = sens.volume_integral(self.mesh, theta_e, self.design_mask)
        return np.array([sens.eval_constraint(c, volume=vol, volume_ref=self.volume_ref)
                         for c in constraints])

    def solve_adjoints(self, bundle, w, j_star, constraints, theta_e, tau_eff):
        u, fact = bundle.states[0], bundle.facts[0]
        v_out = fact.solve(-(w[0] / j_star[0]) * self.output_vector)
        # strain-energy load is the elastic (spring-free) part of K times u
        bulk = fact.system.matrix @ u - self._spring_matrix @ u
        v_energy = fact.solve((w[1] / j_star[1]) * bulk)
        return [v_out, v_energy]

    def perturbation(self, bundle, adjoints, theta_e, tau_eff, w, j_star,
                     constraints, c_override=None):
        return sens.perturbation_mechanism(
            self.mesh, self.mat, theta_e, bundle.states[0], adjoints[0],
            adjoints[1], constraints[0].multiplier, self.volume_ref, w,
            j_star[1], mask=self.design_mask, c_override=c_override)


def make_gripper(nx=40, ny=20, traction_mag=1.0, spring_in=1e5, spring_out=1e3,
                 dir_in=(1.0, 0.0), dir_out=(0.0, -1.0), volume_fraction=0.30,
                 mat: el.MaterialParams | None = None) -> MechanismProblem:
    """Half-model gripper: input push on the lower left edge, clamped upper
    left corner, symmetry rollers along the closed part of the bottom edge,
    and a fixed solid jaw tip above the output face."""
    mat = mat or el.MaterialParams()
    w, h = 1.0, 0.5
    mesh = build_rect_mesh(w, h, nx, ny, crossed=True)
    mesh = tag_boundary(mesh, (0.0, 0.0), (0.0, 0.1 * h), "input")
    mesh = tag_boundary(mesh, (0.0, 0.9 * h), (0.0, h), "clamp")
    mesh = tag_boundary(mesh, (0.0, 0.0), (0.7 * w, 0.0), "symmetry")
    mesh = tag_boundary(mesh, (0.95 * w, 0.0), (w, 0.0), "output")
    traction = (traction_mag * dir_in[0], traction_mag * dir_in[1])
    return MechanismProblem(
        mesh, mat, traction=traction, spring_in=spring_in, spring_out=spring_out,
        dir_in=dir_in, dir_out=dir_out, volume_fraction=volume_fraction,
        solid_box=((0.95 * w, 0.0), (w, 0.1 * h)))


# ---------------------------------------------------------------------------
# stress-constrained volume / strain-energy family (L-bracket)

class StressVolumeProblem(FEMProblem):
    """Material volume vs. strain energy under aggregated stress limits."""

    kind = "stress_volume"
    num_objectives = 2
    uses_filter = True

    def __init__(self, mesh, mat, *, traction, stress_exponent, yield_stress,
                 stress_limit):
        super().__init__(mesh, mat)
        self.stress_exponent = float(stress_exponent)
        self.yield_stress = float(yield_stress)
        self.stress_limit = float(stress_limit)
        self.volume_ref = mesh.total_area
        self.loads = el.LoadSpec(tractions=(el.Traction("traction", traction),))
        self.supports = (el.FixedBoundary("clamp", "both"),)
        self.traction_vector = el.boundary_vector(mesh, "traction", traction)
        self._set_phi_dirichlet([
            (mesh.nodes_with_tag("traction"), 1.0),
            (mesh.nodes_with_tag("void_a"), -1.0),
            (mesh.nodes_with_tag("void_b"), -1.0),
        ])

    def objective_specs(self):
        return [sens.ObjectiveSpec("volume"), sens.ObjectiveSpec("strain_energy")]

    def constraint_specs(self, multiplier=0.0, penalty=10.0):
        spec = sens.ConstraintSpec("stress_pnorm", self.stress_limit,
                                   multiplier=multiplier, penalty=penalty,
                                   p=self.stress_exponent,
                                   yield_stress=self.yield_stress)
        return [spec, spec]

    def solve_states(self, tau_eff) -> StateBundle:
        sysm = el.assemble_state(self.mesh, tau_eff, self.mat, self.loads,
                                 self.supports)
        fact = el.FactorizedSystem(sysm)
        u = fact.solve()
        return StateBundle(states=[u, u], facts=[fact, fact])

    def objectives(self, bundle, theta_e, tau_eff) -> np.ndarray:
        j1 = sens.volume_integral(self.mesh, theta_e)
        j2 = sens.strain_energy(self.mesh, self.mat, bundle.states[1], tau_eff)
        return np.array([j1, j2])

    def constraint_values(self, bundle, theta_e, tau_eff, constraints) -> np.ndarray:
        values = []
        for c, u in zip(constraints, bundle.states):
            agg = el.stress_pnorm(self.mesh, self.mat, u, tau_eff, c.p,
                                  c.yield_stress)
            values.append(sens.eval_constraint(c, stress_agg=agg,
                                               volume_ref=self.volume_ref))
        return np.array(values)

    def solve_adjoints(self, bundle, w, j_star, constraints, theta_e, tau_eff):
        fact = bundle.facts[0]
        adjoints = []
        for alpha, (u, c) in enumerate(zip(bundle.states, constraints)):
            load = c.multiplier * el.deviator_adjoint_load(
                self.mesh, self.mat, u, tau_eff, c.p, c.yield_stress) / self.volume_ref
            v = fact.solve(load)
            if alpha == 1:  # strain-energy objective is self-adjoint
                v = v + (w[1] / j_star[1]) * u
            adjoints.append(v)
        return adjoints

    def perturbation(self, bundle, adjoints, theta_e, tau_eff, w, j_star,
                     constraints, c_override=None):
        return sens.perturbation_stress_volume(
            self.mesh, self.mat, theta_e, tau_eff, bundle.states, adjoints,
            [c.multiplier for c in constraints], self.volume_ref, w, j_star,
            self.stress_exponent, self.yield_stress, mask=self.design_mask,
            c_override=c_override)


def make_lbracket(nx=40, outer=1.0, cut=0.6, traction_mag=1.0,
                  stress_exponent=5.0, yield_stress=42.0, stress_limit=0.05,
                  mat: el.MaterialParams | None = None) -> StressVolumeProblem:
    """L-bracket: clamped along the top edge, downward load near the top of
    the right edge, level set held at -1 along the re-entrant void walls."""
    mat = mat or el.MaterialParams()
    h = outer / nx
    mesh = build_lshape_mesh(outer, cut, h)
    leg = outer - cut
    mesh = tag_boundary(mesh, (0.0, outer), (leg, outer), "clamp")
    mesh = tag_boundary(mesh, (outer, max(0.0, leg - 0.125 * outer)), (outer, leg),
                        "traction")
    return StressVolumeProblem(mesh, mat, traction=(0.0, -traction_mag),
                               stress_exponent=stress_exponent,
                               yield_stress=yield_stress,
                               stress_limit=stress_limit)


# ---------------------------------------------------------------------------
# analytic surrogate (no FEM)

class SurrogateProblem:
    """Analytic mapping from reference weights to objective values."""

    kind = "surrogate"

    def __init__(self, num_objectives: int, mapping=None):
        self.num_objectives = int(num_objectives)
        self.mapping = mapping or convex_quadratic_map

    def evaluate(self, w_star) -> np.ndarray:
        j = np.asarray(self.mapping(np.asarray(w_star, dtype=float)), dtype=float)
        if j.shape != (self.num_objectives,):
            raise InvalidArgument("surrogate mapping returned wrong dimension")
        return j


def convex_quadratic_map(w: np.ndarray) -> np.ndarray:
    """Smooth convex frontier: J_a = (1 - w_a)^2 + 0.01."""
    return (1.0 - w) ** 2 + 0.01
