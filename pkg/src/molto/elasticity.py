"""Plane-strain linear elasticity on the fictitious-material design domain.

State and adjoint problems share one assembled operator per load case; void
regions keep a small relative stiffness so the solve stays well posed over
the whole domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgument, SingularSystemError, SolverFailure
from .fem import p1_data
from .mesh import Mesh


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic material with smoothed solid/void interpolation.

    young    : Young's modulus E (N/mm^2)
    poisson  : Poisson ratio
    exponent : interpolation exponent (> 1)
    floor    : relative void stiffness (0 < floor << 1)
    """

    young: float = 1.0
    poisson: float = 0.3
    exponent: float = 3.0
    floor: float = 1e-3

    def __post_init__(self):
        if self.young <= 0.0:
            raise InvalidArgument("Young's modulus must be positive")
        if not 0.0 <= self.poisson < 0.5:
            raise InvalidArgument("Poisson ratio must lie in [0, 0.5)")
        if self.exponent <= 1.0:
            raise InvalidArgument("interpolation exponent must exceed 1")
        if not 0.0 < self.floor < 1.0:
            raise InvalidArgument("stiffness floor must lie in (0, 1)")


def heaviside(phi: np.ndarray, width: float) -> np.ndarray:
    """Smoothed indicator 0.5 * (tanh(2 * width * phi) + 1)."""
    if width <= 0.0:
        raise InvalidArgument("interface width must be positive")
    return 0.5 * (np.tanh(2.0 * width * phi) + 1.0)


def dirac_const(width: float) -> float:
    """Zeroth-order interface measure used on the evolution right-hand side."""
    if width <= 0.0:
        raise InvalidArgument("interface width must be positive")
    return float(width)


def ersatz_tau(theta: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """Relative stiffness (1 - d) * theta^a + d, in [d, 1]."""
    return (1.0 - mat.floor) * np.asarray(theta, dtype=float) ** mat.exponent + mat.floor


def ersatz_dtau(theta: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """Interpolation derivative a * (1 - d) * theta (binary-design reduction)."""
    return mat.exponent * (1.0 - mat.floor) * np.asarray(theta, dtype=float)


def plane_strain_matrix(mat: MaterialParams) -> np.ndarray:
    e, nu = mat.young, mat.poisson
    c = e / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return c * np.array([
        [1.0 - nu, nu, 0.0],
        [nu, 1.0 - nu, 0.0],
        [0.0, 0.0, (1.0 - 2.0 * nu) / 2.0],
    ])


# ---------------------------------------------------------------------------
# boundary condition / load descriptors

@dataclass(frozen=True)
class Traction:
    tag: str
    vector: tuple  # (tx, ty), N/mm


@dataclass(frozen=True)
class Spring:
    """Distributed boundary spring k * (r outer r) acting along direction r."""
    tag: str
    stiffness: float
    direction: tuple

    def __post_init__(self):
        r = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(r) - 1.0) > 1e-9:
            raise InvalidArgument("spring direction must be a unit vector")
        if self.stiffness < 0.0:
            raise InvalidArgument("spring stiffness must be non-negative")


@dataclass(frozen=True)
class FixedBoundary:
    """Dirichlet constraint on a tagged boundary.

    components: 'both', 'x', 'y', or 'normal' (axis-aligned edges only).
    """
    tag: str
    components: str = "both"


@dataclass(frozen=True)
class PointConstraint:
    node: int
    component: int  # 0 = x, 1 = y


@dataclass(frozen=True)
class LoadSpec:
    tractions: tuple = ()
    springs: tuple = ()


@dataclass
class SparseSystem:
    """Assembled symmetric system with homogeneous Dirichlet data."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    fixed_dofs: np.ndarray
    traction_rhs: np.ndarray = field(default=None)

    @property
    def num_dofs(self) -> int:
        return self.rhs.shape[0]


def boundary_vector(mesh: Mesh, tag: str, vector) -> np.ndarray:
    """Consistent nodal vector of a constant traction on a tagged boundary."""
    edges = mesh.edges_with_tag(tag)
    if edges.shape[0] == 0:
        raise InvalidArgument(f"no boundary edges tagged '{tag}'")
    delta = mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]
    lengths = np.hypot(delta[:, 0], delta[:, 1])
    f = np.zeros(2 * mesh.num_nodes)
    vx, vy = float(vector[0]), float(vector[1])
    for comp, val in ((0, vx), (1, vy)):
        if val != 0.0:
            np.add.at(f, 2 * edges[:, 0] + comp, 0.5 * lengths * val)
            np.add.at(f, 2 * edges[:, 1] + comp, 0.5 * lengths * val)
    return f


def spring_matrix(mesh: Mesh, springs) -> sp.csr_matrix:
    n = 2 * mesh.num_nodes
    if not springs:
        return sp.csr_matrix((n, n))
    rows, cols, vals = [], [], []
    for spec in springs:
        edges = mesh.edges_with_tag(spec.tag)
        if edges.shape[0] == 0:
            raise InvalidArgument(f"no boundary edges tagged '{spec.tag}'")
        r = np.asarray(spec.direction, dtype=float)
        rr = np.outer(r, r)
        delta = mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]
        lengths = np.hypot(delta[:, 0], delta[:, 1])
        # 2-node line element consistent mass: l/6 * [[2,1],[1,2]]
        for a in range(2):
            for b in range(2):
                w = spec.stiffness * lengths / 6.0 * (2.0 if a == b else 1.0)
                for i in range(2):
                    for j in range(2):
                        rows.append(2 * edges[:, a] + i)
                        cols.append(2 * edges[:, b] + j)
                        vals.append(w * rr[i, j])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _edge_normal_component(mesh: Mesh, edge) -> int:
    p0, p1 = mesh.nodes[edge[0]], mesh.nodes[edge[1]]
    return 1 if abs(p1[0] - p0[0]) >= abs(p1[1] - p0[1]) else 0


def _fixed_dofs(mesh: Mesh, bcs) -> np.ndarray:
    fixed = set()
    for bc in bcs:
        if isinstance(bc, PointConstraint):
            fixed.add(2 * bc.node + bc.component)
            continue
        edges = mesh.edges_with_tag(bc.tag)
        if edges.shape[0] == 0:
            raise InvalidArgument(f"no boundary edges tagged '{bc.tag}'")
        if bc.components == "both":
            for n in np.unique(edges):
                fixed.add(2 * n)
                fixed.add(2 * n + 1)
        elif bc.components in ("x", "y"):
            comp = 0 if bc.components == "x" else 1
            for n in np.unique(edges):
                fixed.add(2 * n + comp)
        elif bc.components == "normal":
            for edge in edges:
                comp = _edge_normal_component(mesh, edge)
                fixed.add(2 * edge[0] + comp)
                fixed.add(2 * edge[1] + comp)
        else:
            raise InvalidArgument(f"unknown constraint components '{bc.components}'")
    return np.array(sorted(fixed), dtype=np.int64)


def element_stiffness_blocks(mesh: Mesh, mat: MaterialParams) -> np.ndarray:
    """Solid (tau = 1) 6x6 element stiffness matrices, (T, 6, 6)."""
    d = p1_data(mesh)
    t = mesh.num_triangles
    b = np.zeros((t, 3, 6))
    b[:, 0, 0::2] = d.grads[:, :, 0]
    b[:, 1, 1::2] = d.grads[:, :, 1]
    b[:, 2, 0::2] = d.grads[:, :, 1]
    b[:, 2, 1::2] = d.grads[:, :, 0]
    dm = plane_strain_matrix(mat)
    return np.einsum("tki,kl,tlj->tij", b, dm, b) * d.areas[:, None, None]


def _element_dofs(mesh: Mesh) -> np.ndarray:
    tri = mesh.triangles
    dofs = np.empty((mesh.num_triangles, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * tri
    dofs[:, 1::2] = 2 * tri + 1
    return dofs


def assemble_state(mesh: Mesh, tau_e: np.ndarray, mat: MaterialParams,
                   loads: LoadSpec, bcs) -> SparseSystem:
    """Assemble tau-scaled stiffness, boundary springs, and traction loads."""
    ke = element_stiffness_blocks(mesh, mat) * np.asarray(tau_e)[:, None, None]
    dofs = _element_dofs(mesh)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * mesh.num_nodes
    k = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    k = k + spring_matrix(mesh, loads.springs)

    f = np.zeros(n)
    for tr in loads.tractions:
        f += boundary_vector(mesh, tr.tag, tr.vector)

    fixed = _fixed_dofs(mesh, bcs)
    if fixed.size == 0 and not loads.springs:
        raise SingularSystemError("no Dirichlet, roller, or spring constraint present")
    return SparseSystem(matrix=k, rhs=f, fixed_dofs=fixed, traction_rhs=f.copy())


class FactorizedSystem:
    """LU factorization of the constrained operator, reusable across
    right-hand sides (state plus adjoint solves)."""

    def __init__(self, system: SparseSystem):
        self.system = system
        n = system.num_dofs
        self.free = np.setdiff1d(np.arange(n), system.fixed_dofs)
        reduced = system.matrix[self.free][:, self.free].tocsc()
        self._lu = spla.splu(reduced)

    def solve(self, rhs: np.ndarray | None = None) -> np.ndarray:
        sysm = self.system
        if rhs is None:
            rhs = sysm.rhs
        u = np.zeros(sysm.num_dofs)
        u[self.free] = self._lu.solve(rhs[self.free])
        if not np.all(np.isfinite(u)):
            raise SolverFailure("factorized solve produced non-finite values")
        residual = sysm.matrix @ u - rhs
        residual[sysm.fixed_dofs] = 0.0
        scale = max(np.linalg.norm(rhs[self.free]), 1e-30)
        rel = np.linalg.norm(residual) / scale
        if rel > 1e-9:
            u, rel = self._cg_fallback(rhs, u, scale)
            if rel > 1e-9:
                raise SolverFailure(f"relative residual {rel:.3e} exceeds 1e-9")
        return u

    def _cg_fallback(self, rhs, u0, scale):
        sysm = self.system
        reduced = sysm.matrix[self.free][:, self.free]
        x, info = spla.cg(reduced, rhs[self.free], x0=u0[self.free],
                          rtol=1e-12, maxiter=5000)
        u = np.zeros(sysm.num_dofs)
        u[self.free] = x
        residual = sysm.matrix @ u - rhs
        residual[sysm.fixed_dofs] = 0.0
        return u, np.linalg.norm(residual) / scale


def solve(system: SparseSystem) -> np.ndarray:
    """Direct solve with residual check (relative residual <= 1e-9)."""
    return FactorizedSystem(system).solve()


# ---------------------------------------------------------------------------
# derived element fields

def element_strains(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Engineering strains (eps_xx, eps_yy, gamma_xy) per element."""
    d = p1_data(mesh)
    ux = u[0::2][mesh.triangles]
    uy = u[1::2][mesh.triangles]
    exx = np.einsum("ta,ta->t", d.grads[:, :, 0], ux)
    eyy = np.einsum("ta,ta->t", d.grads[:, :, 1], uy)
    gxy = np.einsum("ta,ta->t", d.grads[:, :, 1], ux) + np.einsum("ta,ta->t", d.grads[:, :, 0], uy)
    return np.column_stack([exx, eyy, gxy])


def element_stresses(mesh: Mesh, u: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """Solid-material stresses (s_xx, s_yy, s_xy, s_zz) per element."""
    eps = element_strains(mesh, u)
    dm = plane_strain_matrix(mat)
    s = eps @ dm.T
    szz = mat.poisson * (s[:, 0] + s[:, 1])
    return np.column_stack([s[:, 0], s[:, 1], s[:, 2], szz])


def mutual_energy_density(mesh: Mesh, mat: MaterialParams,
                          u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solid-material energy density eps(u) : C : eps(v) per element."""
    dm = plane_strain_matrix(mat)
    eu = element_strains(mesh, u)
    ev = element_strains(mesh, v)
    return np.einsum("ti,ij,tj->t", eu, dm, ev)


def von_mises(mesh: Mesh, u: np.ndarray, mat: MaterialParams) -> np.ndarray:
    s = element_stresses(mesh, u, mat)
    mean = (s[:, 0] + s[:, 1] + s[:, 3]) / 3.0
    dxx, dyy, dzz = s[:, 0] - mean, s[:, 1] - mean, s[:, 3] - mean
    return np.sqrt(1.5 * (dxx ** 2 + dyy ** 2 + dzz ** 2 + 2.0 * s[:, 2] ** 2))


def stress_pnorm(mesh: Mesh, mat: MaterialParams, u: np.ndarray,
                 tau_e: np.ndarray, p: float, yield_stress: float) -> float:
    """Aggregated stress measure (integral of (vm/f_y)^p * tau)^(1/p)."""
    if p < 1.0:
        raise InvalidArgument("aggregation exponent must be at least 1")
    if yield_stress <= 0.0:
        raise InvalidArgument("yield stress must be positive")
    ratio = von_mises(mesh, u, mat) / yield_stress
    peak = ratio.max(initial=0.0)
    if peak == 0.0:
        return 0.0
    # factor out the peak so ratio**p stays in range for large p
    agg = np.sum((ratio / peak) ** p * tau_e * mesh.element_areas)
    return float(peak * agg ** (1.0 / p))


def adjoint_compliance(u: np.ndarray, weight: float, j_star: float) -> np.ndarray:
    """Self-adjoint shortcut: adjoint equals (w / J*) times the state."""
    return (weight / j_star) * u


def deviator_adjoint_load(mesh: Mesh, mat: MaterialParams, u: np.ndarray,
                          tau_e: np.ndarray, p: float, yield_stress: float) -> np.ndarray:
    """Nodal load of the aggregated-stress derivative with respect to u.

    Acting on a test field du it evaluates
    S^(1/p - 1) * integral (vm/f_y)^(p-1) * 3 tau / (2 f_y vm) * s(u):s(du);
    elements with vanishing stress contribute their zero limit.
    """
    s = element_stresses(mesh, u, mat)
    mean = (s[:, 0] + s[:, 1] + s[:, 3]) / 3.0
    dev = np.column_stack([s[:, 0] - mean, s[:, 1] - mean, s[:, 2], s[:, 3] - mean])
    vm = np.sqrt(1.5 * (dev[:, 0] ** 2 + dev[:, 1] ** 2 + dev[:, 3] ** 2 + 2.0 * dev[:, 2] ** 2))

    ratio = vm / yield_stress
    agg_int = np.sum(ratio ** p * tau_e * mesh.element_areas)
    if agg_int <= 0.0:
        return np.zeros(2 * mesh.num_nodes)
    coef = np.zeros(mesh.num_triangles)
    pos = vm > 0.0
    coef[pos] = (agg_int ** (1.0 / p - 1.0) * ratio[pos] ** (p - 1.0)
                 * 1.5 * tau_e[pos] / (yield_stress * vm[pos]))

    # s(u):sigma(du) = c . (sxx(du), syy(du), sxy(du)) with the plane-strain
    # szz folded into the in-plane coefficients
    nu = mat.poisson
    c = np.column_stack([dev[:, 0] + nu * dev[:, 3],
                         dev[:, 1] + nu * dev[:, 3],
                         2.0 * dev[:, 2]])
    dm = plane_strain_matrix(mat)
    d = p1_data(mesh)
    b = np.zeros((mesh.num_triangles, 3, 6))
    b[:, 0, 0::2] = d.grads[:, :, 0]
    b[:, 1, 1::2] = d.grads[:, :, 1]
    b[:, 2, 0::2] = d.grads[:, :, 1]
    b[:, 2, 1::2] = d.grads[:, :, 0]
    ge = np.einsum("t,ti,ij,tjk->tk", coef * d.areas, c, dm, b)
    load = np.zeros(2 * mesh.num_nodes)
    np.add.at(load, _element_dofs(mesh).ravel(), ge.ravel())
    return load
