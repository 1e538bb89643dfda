"""Fixed structured triangle meshes for rectangular and L-shaped design domains.

Meshes are immutable after construction and safe to share between concurrent
candidate runs. Boundary edges carry a single tag each; tagging is done by
axis-aligned regions with a snapping tolerance of a quarter edge length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, TagMatchError

FREE_TAG = "free"


@dataclass(frozen=True)
class Mesh:
    """Triangulated 2D domain with tagged boundary edges.

    nodes          : (N, 2) coordinates in mm
    triangles      : (T, 3) node indices, counterclockwise
    boundary_edges : (E, 2) node index pairs, each edge owned by one triangle
    edge_tags      : (E,) tag per boundary edge ("free" until tagged)
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    spacing: float
    element_areas: np.ndarray = field(init=False)

    def __post_init__(self):
        areas = signed_areas(self.nodes, self.triangles)
        if np.any(areas <= 0.0):
            raise InvalidArgument("mesh contains non-positive triangle areas")
        object.__setattr__(self, "element_areas", areas)
        for arr in (self.nodes, self.triangles, self.boundary_edges,
                    self.edge_tags, self.element_areas):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def total_area(self) -> float:
        return float(self.element_areas.sum())

    def edges_with_tag(self, tag: str) -> np.ndarray:
        return self.boundary_edges[self.edge_tags == tag]

    def nodes_with_tag(self, tag: str) -> np.ndarray:
        """Unique node indices touched by edges carrying ``tag``."""
        return np.unique(self.edges_with_tag(tag))

    def nearest_node(self, x: float, y: float) -> int:
        d2 = (self.nodes[:, 0] - x) ** 2 + (self.nodes[:, 1] - y) ** 2
        return int(np.argmin(d2))


def signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = nodes[triangles]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def _boundary_edges(triangles: np.ndarray) -> np.ndarray:
    """Edges that belong to exactly one triangle, in ascending node order."""
    edges = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq[counts == 1]


def _finish(nodes, triangles, spacing) -> Mesh:
    boundary = _boundary_edges(triangles)
    tags = np.full(boundary.shape[0], FREE_TAG, dtype=object)
    return Mesh(np.asarray(nodes, dtype=float), np.asarray(triangles, dtype=np.int32),
                boundary.astype(np.int32), tags, float(spacing))


def build_rect_mesh(width: float, height: float, nx: int, ny: int,
                    crossed: bool = False) -> Mesh:
    """Structured triangulation of [0, width] x [0, height].

    Default split is two triangles per cell; ``crossed`` adds a centre node
    per cell (four triangles), which keeps the mesh mirror-symmetric.
    """
    if width <= 0.0 or height <= 0.0:
        raise InvalidArgument("width and height must be positive")
    if nx < 1 or ny < 1:
        raise InvalidArgument("nx and ny must be at least 1")

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    n00, n10 = nid(ii, jj), nid(ii + 1, jj)
    n11, n01 = nid(ii + 1, jj + 1), nid(ii, jj + 1)

    if crossed:
        centers = np.column_stack([(xs[ii] + xs[ii + 1]) / 2.0,
                                   (ys[jj] + ys[jj + 1]) / 2.0])
        c = np.arange(centers.shape[0]) + nodes.shape[0]
        nodes = np.vstack([nodes, centers])
        triangles = np.vstack([
            np.column_stack([n00, n10, c]),
            np.column_stack([n10, n11, c]),
            np.column_stack([n11, n01, c]),
            np.column_stack([n01, n00, c]),
        ])
    else:
        triangles = np.vstack([
            np.column_stack([n00, n10, n11]),
            np.column_stack([n00, n11, n01]),
        ])

    return _finish(nodes, triangles, min(width / nx, height / ny))


def _cell_count(length: float, h: float, name: str) -> int:
    n = int(round(length / h))
    if n < 1 or abs(n * h - length) > 1e-9 * max(1.0, length):
        raise InvalidArgument(f"spacing {h} does not divide {name}={length}")
    return n


def build_lshape_mesh(outer: float, cut: float, h: float,
                      crossed: bool = True) -> Mesh:
    """L-shaped domain: [0, outer]^2 minus the top-right cut x cut square.

    The two re-entrant edges facing the removed square are pre-tagged
    ``void_a`` (vertical) and ``void_b`` (horizontal).
    """
    if not 0.0 < cut < outer:
        raise InvalidArgument("cut must satisfy 0 < cut < outer")
    n = _cell_count(outer, h, "outer")
    ncut = _cell_count(cut, h, "cut")

    xs = np.linspace(0.0, outer, n + 1)
    keep_i, keep_j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    keep_i, keep_j = keep_i.ravel(), keep_j.ravel()
    kept = ~((keep_i >= n - ncut) & (keep_j >= n - ncut))
    ci, cj = keep_i[kept], keep_j[kept]

    def nid(i, j):
        return j * (n + 1) + i

    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    grid_nodes = np.column_stack([gx.ravel(), gy.ravel()])
    n00, n10 = nid(ci, cj), nid(ci + 1, cj)
    n11, n01 = nid(ci + 1, cj + 1), nid(ci, cj + 1)

    if crossed:
        centers = np.column_stack([(xs[ci] + xs[ci + 1]) / 2.0,
                                   (xs[cj] + xs[cj + 1]) / 2.0])
        c = np.arange(centers.shape[0]) + grid_nodes.shape[0]
        nodes = np.vstack([grid_nodes, centers])
        triangles = np.vstack([
            np.column_stack([n00, n10, c]),
            np.column_stack([n10, n11, c]),
            np.column_stack([n11, n01, c]),
            np.column_stack([n01, n00, c]),
        ])
    else:
        nodes = grid_nodes
        triangles = np.vstack([
            np.column_stack([n00, n10, n11]),
            np.column_stack([n00, n11, n01]),
        ])

    # drop unused grid nodes and remap indices
    used = np.unique(triangles)
    remap = -np.ones(nodes.shape[0], dtype=np.int64)
    remap[used] = np.arange(used.size)
    mesh = _finish(nodes[used], remap[triangles], h)

    corner = outer - cut
    mesh = tag_boundary(mesh, (corner, corner), (corner, outer), "void_a")
    mesh = tag_boundary(mesh, (corner, corner), (outer, corner), "void_b")
    return mesh


def tag_boundary(mesh: Mesh, start, end, tag: str) -> Mesh:
    """Tag every boundary edge whose midpoint lies on the axis-aligned
    segment from ``start`` to ``end`` (snapping tolerance 0.25 * spacing).

    Returns a new Mesh sharing geometry arrays; last write wins on re-tagged
    edges. Raises TagMatchError when no edge matches.
    """
    (x0, y0), (x1, y1) = start, end
    tol = 0.25 * mesh.spacing
    mids = 0.5 * (mesh.nodes[mesh.boundary_edges[:, 0]]
                  + mesh.nodes[mesh.boundary_edges[:, 1]])
    if abs(x1 - x0) <= tol and abs(y1 - y0) <= tol:
        raise InvalidArgument("tag region has zero extent")
    if abs(x1 - x0) <= tol:  # vertical segment
        lo, hi = min(y0, y1), max(y0, y1)
        match = (np.abs(mids[:, 0] - x0) <= tol) & (mids[:, 1] >= lo - tol) & (mids[:, 1] <= hi + tol)
    elif abs(y1 - y0) <= tol:  # horizontal segment
        lo, hi = min(x0, x1), max(x0, x1)
        match = (np.abs(mids[:, 1] - y0) <= tol) & (mids[:, 0] >= lo - tol) & (mids[:, 0] <= hi + tol)
    else:
        raise InvalidArgument("tag region must be axis-aligned")
    if not match.any():
        raise TagMatchError(f"region {start}-{end} matched no boundary edges for tag '{tag}'")
    tags = mesh.edge_tags.copy()
    tags[match] = tag
    return Mesh(mesh.nodes, mesh.triangles, mesh.boundary_edges, tags, mesh.spacing)


def dump_mesh(mesh: Mesh, path) -> None:
    """Plain-text listing: header, one node per line, one triangle per line."""
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.num_nodes} triangles {mesh.num_triangles}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.9f} {y:.9f}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
