"""Checkerboard partitions, conforming structured meshes and wavenumber fields.

Subdomains are the cells of an N_r x N_c lattice of equal rectangles
tiling a bounding rectangle.  Each active cell is meshed independently
with a structured right-triangle grid whose node spacing along a side
depends only on the side length and the target mesh size, so meshes of
neighboring cells agree bitwise along the shared side.  Cells may be
deactivated through a mask (null subdomains); rectangular holes with
Dirichlet boundaries model scatterers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SIDES = ("left", "bottom", "right", "top")

# side of the neighbor cell facing back at us
OPPOSITE_SIDE = {"left": "right", "right": "left", "bottom": "top", "top": "bottom"}

# the two sides meeting at each endpoint of a side: along a side ordered by
# increasing coordinate, endpoint 0 is the lower/left corner, endpoint 1 the
# upper/right corner
PERPENDICULAR_AT_ENDPOINT = {
    "left": ("bottom", "top"),
    "right": ("bottom", "top"),
    "bottom": ("left", "right"),
    "top": ("left", "right"),
}


class UnsupportedGeometryError(ValueError):
    """Geometry outside the supported class (obstacle placement, masking)."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    def strictly_contains(self, other):
        return (
            other.x0 > self.x0
            and other.y0 > self.y0
            and other.x1 < self.x1
            and other.y1 < self.y1
        )

    def contains_point(self, x, y):
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


class CheckerboardPartition:
    """Lattice of equal rectangular cells with an activity mask.

    Rows are numbered bottom to top, columns left to right; the linear
    cell id is ``r * n_cols + c``.
    """

    def __init__(self, bounds, n_rows, n_cols, active_mask):
        self.bounds = bounds
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.x_edges = np.linspace(bounds.x0, bounds.x1, n_cols + 1)
        self.y_edges = np.linspace(bounds.y0, bounds.y1, n_rows + 1)
        self.active_mask = active_mask

    @property
    def n_dom(self):
        return self.n_rows * self.n_cols

    @property
    def n_active(self):
        return int(self.active_mask.sum())

    def cell_id(self, r, c):
        return r * self.n_cols + c

    def cell_rc(self, cell_id):
        return divmod(cell_id, self.n_cols)

    def cell_extent(self, r, c):
        return Rect(
            self.x_edges[c], self.y_edges[r], self.x_edges[c + 1], self.y_edges[r + 1]
        )

    def is_active(self, r, c):
        return bool(self.active_mask[r, c])

    def neighbor(self, r, c, side):
        """(r, c) of the lattice neighbor on ``side``, or None outside the lattice."""
        dr, dc = {"left": (0, -1), "right": (0, 1), "bottom": (-1, 0), "top": (1, 0)}[side]
        rr, cc = r + dr, c + dc
        if 0 <= rr < self.n_rows and 0 <= cc < self.n_cols:
            return rr, cc
        return None

    def active_cells(self):
        """Yield (cell_id, r, c) over active cells in id order."""
        for r in range(self.n_rows):
            for c in range(self.n_cols):
                if self.active_mask[r, c]:
                    yield self.cell_id(r, c), r, c


def build_partition(bounds, n_rows, n_cols, mask=None):
    """Partition ``bounds`` into an n_rows x n_cols lattice of equal cells."""
    if not isinstance(bounds, Rect):
        bounds = Rect(*bounds)
    if n_rows < 1 or n_cols < 1:
        raise ValueError(f"need at least a 1x1 lattice, got {n_rows}x{n_cols}")
    if mask is None:
        active = np.ones((n_rows, n_cols), dtype=bool)
    else:
        active = np.asarray(mask, dtype=bool)
        if active.shape != (n_rows, n_cols):
            raise ValueError(
                f"mask shape {active.shape} does not match lattice {n_rows}x{n_cols}"
            )
        active = active.copy()
    if not active.any():
        raise ValueError("at least one cell must be active")
    return CheckerboardPartition(bounds, n_rows, n_cols, active)


class SubdomainMesh:
    """Structured right-triangle mesh of one rectangular cell.

    ``edge_traces[side]`` lists node indices along each cell side,
    ordered by increasing x (bottom/top) or increasing y (left/right) so
    facing traces of neighbor cells align entry by entry.
    """

    def __init__(self, cell, nodes, triangles, edge_traces, obstacle_boundary_nodes,
                 nx, ny, hole_area=0.0):
        self.cell = cell
        self.nodes = nodes
        self.triangles = triangles
        self.edge_traces = edge_traces
        self.obstacle_boundary_nodes = obstacle_boundary_nodes
        self.nx = nx
        self.ny = ny
        self.hole_area = hole_area

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def triangle_areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def total_area(self):
        return float(self.triangle_areas().sum())


def side_interval_count(length, target_h):
    """Number of uniform intervals along a side: ceil(length / target_h)."""
    if target_h <= 0:
        raise ValueError(f"target_h must be positive, got {target_h}")
    return max(1, math.ceil(length / target_h - 1e-12))


def build_subdomain_mesh(cell, target_h, obstacle=None):
    """Mesh one cell with a structured grid of right triangles.

    An optional axis-aligned rectangular ``obstacle`` strictly inside the
    cell is cut out: the hole is snapped outward to grid lines, the
    covered squares are removed, nodes strictly inside the hole are
    dropped and the rim nodes are flagged as obstacle boundary.
    """
    nx = side_interval_count(cell.width, target_h)
    ny = side_interval_count(cell.height, target_h)
    xs = np.linspace(cell.x0, cell.x1, nx + 1)
    ys = np.linspace(cell.y0, cell.y1, ny + 1)

    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    removed = np.zeros((ny, nx), dtype=bool)
    hole_area = 0.0
    obstacle_nodes = np.array([], dtype=int)
    keep_node = np.ones(nodes.shape[0], dtype=bool)

    if obstacle is not None:
        if not cell.strictly_contains(obstacle):
            raise UnsupportedGeometryError(
                f"obstacle {obstacle} must lie strictly inside the cell {cell}"
            )
        tol = 1e-12 * max(cell.width, cell.height)
        i0 = int(np.searchsorted(xs, obstacle.x0 - tol, side="left"))
        i1 = int(np.searchsorted(xs, obstacle.x1 + tol, side="right")) - 1
        j0 = int(np.searchsorted(ys, obstacle.y0 - tol, side="left"))
        j1 = int(np.searchsorted(ys, obstacle.y1 + tol, side="right")) - 1
        if i1 <= i0 or j1 <= j0:
            raise UnsupportedGeometryError(
                "obstacle does not cover a full grid square at this mesh size"
            )
        removed[j0:j1, i0:i1] = True
        hole_area = (xs[i1] - xs[i0]) * (ys[j1] - ys[j0])
        rim = []
        for j in range(j0, j1 + 1):
            for i in range(i0, i1 + 1):
                on_rim = i in (i0, i1) or j in (j0, j1)
                if on_rim:
                    rim.append(nid(i, j))
                else:
                    keep_node[nid(i, j)] = False
        obstacle_nodes = np.array(sorted(rim), dtype=int)

    tri = []
    for j in range(ny):
        for i in range(nx):
            if removed[j, i]:
                continue
            n00, n10 = nid(i, j), nid(i + 1, j)
            n01, n11 = nid(i, j + 1), nid(i + 1, j + 1)
            tri.append((n00, n10, n11))
            tri.append((n00, n11, n01))
    triangles = np.array(tri, dtype=int)

    traces = {
        "bottom": np.array([nid(i, 0) for i in range(nx + 1)], dtype=int),
        "top": np.array([nid(i, ny) for i in range(nx + 1)], dtype=int),
        "left": np.array([nid(0, j) for j in range(ny + 1)], dtype=int),
        "right": np.array([nid(nx, j) for j in range(ny + 1)], dtype=int),
    }

    if not keep_node.all():
        new_id = np.cumsum(keep_node) - 1
        nodes = nodes[keep_node]
        triangles = new_id[triangles]
        traces = {s: new_id[t] for s, t in traces.items()}
        obstacle_nodes = new_id[obstacle_nodes]

    return SubdomainMesh(cell, nodes, triangles, traces, obstacle_nodes,
                         nx, ny, hole_area=hole_area)


class WavenumberField:
    """Maps points to a positive real wavenumber k(x, y)."""

    def evaluate(self, points):
        raise NotImplementedError

    def __call__(self, points):
        return self.evaluate(points)


class ConstantWavenumber(WavenumberField):
    def __init__(self, k):
        if k <= 0:
            raise ValueError(f"wavenumber must be positive, got {k}")
        self.k = float(k)

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        return np.full(points.shape[:-1], self.k)

    @property
    def k_max(self):
        return self.k


class LayeredWavenumber(WavenumberField):
    """Piecewise-constant layers stacked along one axis.

    ``breaks`` are the n-1 interior layer boundaries (ascending) and
    ``values`` the n layer wavenumbers, bottom/left layer first.
    """

    def __init__(self, breaks, values, axis="y"):
        self.breaks = np.asarray(breaks, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.size != self.breaks.size + 1:
            raise ValueError("need one more layer value than interior breaks")
        if np.any(self.values <= 0):
            raise ValueError("all layer wavenumbers must be positive")
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("layer breaks must be strictly ascending")
        if axis not in ("x", "y"):
            raise ValueError(f"axis must be 'x' or 'y', got {axis}")
        self.axis = axis

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        coord = points[..., 0 if self.axis == "x" else 1]
        return self.values[np.searchsorted(self.breaks, coord, side="right")]

    @property
    def k_max(self):
        return float(self.values.max())


class AnalyticWavenumber(WavenumberField):
    def __init__(self, fn, k_max):
        self.fn = fn
        self._k_max = float(k_max)

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        k = np.asarray(self.fn(points[..., 0], points[..., 1]), dtype=float)
        if np.any(k <= 0):
            raise ValueError("wavenumber field evaluated nonpositive")
        return k

    @property
    def k_max(self):
        return self._k_max


@dataclass(frozen=True)
class DirectedEdge:
    """One directed interface edge: data entering ``owner`` across ``side`` from ``neighbor``."""

    owner: int
    neighbor: int
    side: str
    dummy: bool


@dataclass(frozen=True)
class CrossPoint:
    """Lattice vertex where subdomain corners meet.

    ``vertex`` is the (row, col) lattice-vertex index; interior points
    touch four cells, boundary points two.
    """

    x: float
    y: float
    vertex: tuple
    kind: str  # "interior" | "boundary"
    cells: tuple  # ids of lattice cells around the point
    edges: tuple = field(default=())  # (owner, side) of incident directed edges


class InterfaceTopology:
    def __init__(self, directed_edges, cross_points):
        self.directed_edges = directed_edges
        self.cross_points = cross_points

    @property
    def n_undirected(self):
        return len(self.directed_edges) // 2

    def edges_of(self, owner):
        return [e for e in self.directed_edges if e.owner == owner]


def interface_topology(partition):
    """Enumerate directed interface edges and cross-points of a partition."""
    p = partition
    edges = []
    for r in range(p.n_rows):
        for c in range(p.n_cols):
            me = p.cell_id(r, c)
            for side in ("right", "top"):
                nb = p.neighbor(r, c, side)
                if nb is None:
                    continue
                other = p.cell_id(*nb)
                dummy = not (p.is_active(r, c) and p.is_active(*nb))
                edges.append(DirectedEdge(me, other, side, dummy))
                edges.append(DirectedEdge(other, me, OPPOSITE_SIDE[side], dummy))

    cross_points = []
    for vr in range(p.n_rows + 1):
        for vc in range(p.n_cols + 1):
            around = []
            for r, c in ((vr - 1, vc - 1), (vr - 1, vc), (vr, vc - 1), (vr, vc)):
                if 0 <= r < p.n_rows and 0 <= c < p.n_cols:
                    around.append(p.cell_id(r, c))
            if len(around) < 2:
                continue  # bounding-rectangle corner, single cell
            kind = "interior" if len(around) == 4 else "boundary"
            x, y = float(p.x_edges[vc]), float(p.y_edges[vr])
            incident = []
            for e in edges:
                r, c = p.cell_rc(e.owner)
                cell = p.cell_extent(r, c)
                on = {
                    "left": cell.x0 == x and cell.y0 <= y <= cell.y1,
                    "right": cell.x1 == x and cell.y0 <= y <= cell.y1,
                    "bottom": cell.y0 == y and cell.x0 <= x <= cell.x1,
                    "top": cell.y1 == y and cell.x0 <= x <= cell.x1,
                }[e.side]
                if on:
                    incident.append((e.owner, e.side))
            cross_points.append(
                CrossPoint(x, y, (vr, vc), kind, tuple(around), tuple(incident))
            )
    return InterfaceTopology(edges, cross_points)


def build_union_mesh(partition, target_h, obstacles=None):
    """Stitch all per-cell meshes into one mesh over the bounding rectangle.

    Returns (mesh, node_maps, triangle_offsets) where ``node_maps[cell_id]``
    maps each cell-local node index to a union node index and
    ``triangle_offsets[cell_id]`` is the first union triangle of that
    cell (cell triangles are appended in order).  Requires an all-active
    partition; used by the unpartitioned reference solve.
    """
    if not partition.active_mask.all():
        raise UnsupportedGeometryError(
            "union mesh requires an all-active partition (masked scenarios have "
            "no unpartitioned reference)"
        )
    obstacles = obstacles or {}
    seen = {}
    nodes = []
    triangles = []
    node_maps = {}
    tri_offsets = {}
    traces_accum = {s: [] for s in SIDES}
    obstacle_nodes = []
    hole_area = 0.0

    for cell_id, r, c in partition.active_cells():
        mesh = build_subdomain_mesh(
            partition.cell_extent(r, c), target_h, obstacles.get(cell_id)
        )
        local_map = np.empty(mesh.n_nodes, dtype=int)
        for li, (x, y) in enumerate(mesh.nodes):
            key = (float(x), float(y))
            gid = seen.get(key)
            if gid is None:
                gid = len(nodes)
                seen[key] = gid
                nodes.append((x, y))
            local_map[li] = gid
        tri_offsets[cell_id] = len(triangles)
        triangles.extend(local_map[mesh.triangles].tolist())
        node_maps[cell_id] = local_map
        obstacle_nodes.extend(local_map[mesh.obstacle_boundary_nodes].tolist())
        hole_area += mesh.hole_area

        if c == 0:
            traces_accum["left"].append(local_map[mesh.edge_traces["left"]])
        if c == partition.n_cols - 1:
            traces_accum["right"].append(local_map[mesh.edge_traces["right"]])
        if r == 0:
            traces_accum["bottom"].append(local_map[mesh.edge_traces["bottom"]])
        if r == partition.n_rows - 1:
            traces_accum["top"].append(local_map[mesh.edge_traces["top"]])

    def join(parts):
        out = list(parts[0])
        for part in parts[1:]:
            out.extend(part[1:])  # consecutive cells share the corner node
        return np.array(out, dtype=int)

    traces = {s: join(traces_accum[s]) for s in SIDES}
    union = SubdomainMesh(
        partition.bounds,
        np.array(nodes, dtype=float),
        np.array(triangles, dtype=int),
        traces,
        np.array(sorted(set(obstacle_nodes)), dtype=int),
        nx=None,
        ny=None,
        hole_area=hole_area,
    )
    return union, node_maps, tri_offsets
