"""Multidirectional sweeping preconditioners over grouped subdomains.

Arranging the subdomains of a checkerboard partition in ordered groups
(columns, rows, or diagonals) makes the interface operator F block
tridiagonal, with one vector block per group collecting all data
incoming to that group's subdomains.  Two matrix-free preconditioners
are built on this view, both applied through local subdomain solves:

* symmetric (block) Gauss-Seidel: a forward sweep (lower triangular
  solve) followed by a backward sweep (upper triangular solve), with
  updates r_JI <- r_JI - r_IJ + 2B(u_I) pushed to the next group;
* double sweep (DS): forward and backward sweeps whose solves zero the
  data incoming from the sweep's target group and whose updates
  r_JI <- r_JI + 2B(u_I) drop the swap term; the two sweeps touch
  disjoint data and commute, so they may run in either order (or
  concurrently).

Within-group interface edges (possible only for row/column directions)
are read by the local solves but never updated: the block-diagonal part
of the preconditioner is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import assembly
from .geometry import OPPOSITE_SIDE, interface_topology

DIRECTIONS = ("h-forward", "h-backward", "v-forward", "v-backward", "d1", "d2")


@dataclass(frozen=True)
class CrossingEdge:
    """One live interface edge crossing between consecutive groups."""

    producer: int  # subdomain solved during the step
    producer_side: str  # its side toward the receiver
    receiver: int  # subdomain whose incoming block is updated
    receiver_side: str


class GroupArrangement:
    """Ordered groups of lattice cells plus the edge lists between them."""

    def __init__(self, direction, groups, between, within):
        self.direction = direction
        self.groups = groups  # list of lists of cell ids (inactive included)
        self.between = between  # (from_group, to_group) -> [CrossingEdge]
        self.within = within  # group -> [(owner, side)] of within-group edges

    @property
    def n_groups(self):
        return len(self.groups)

    def crossing(self, s_from, s_to):
        return self.between.get((s_from, s_to), ())


def build_groups(partition, direction):
    """Group the lattice cells along a sweep direction.

    Row/column directions give one group per column/row (within-group
    edges along the transverse axis); diagonal directions give
    n_rows + n_cols - 1 groups of mutually non-adjacent cells.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown sweep direction {direction!r}")
    p = partition

    def group_of(r, c):
        if direction == "h-forward":
            return c
        if direction == "h-backward":
            return p.n_cols - 1 - c
        if direction == "v-forward":
            return r
        if direction == "v-backward":
            return p.n_rows - 1 - r
        if direction == "d1":  # left-down toward right-up
            return r + c
        return (p.n_rows - 1 - r) + c  # d2: left-up toward right-down

    if direction in ("h-forward", "h-backward"):
        n_groups = p.n_cols
    elif direction in ("v-forward", "v-backward"):
        n_groups = p.n_rows
    else:
        n_groups = p.n_rows + p.n_cols - 1

    groups = [[] for _ in range(n_groups)]
    gidx = {}
    for r in range(p.n_rows):
        for c in range(p.n_cols):
            cid = p.cell_id(r, c)
            g = group_of(r, c)
            gidx[cid] = g
            groups[g].append(cid)

    between = {}
    within = {g: [] for g in range(n_groups)}
    for e in interface_topology(p).directed_edges:
        g_recv = gidx[e.owner]
        g_prod = gidx[e.neighbor]
        if g_recv == g_prod:
            within[g_recv].append((e.owner, e.side))
            continue
        if abs(g_recv - g_prod) != 1:
            raise AssertionError("neighbor cells must lie in adjacent groups")
        if e.dummy:
            continue
        between.setdefault((g_prod, g_recv), []).append(
            CrossingEdge(e.neighbor, OPPOSITE_SIDE[e.side], e.owner, e.side)
        )
    return GroupArrangement(direction, groups, between, within)


@dataclass(frozen=True)
class PrecondConfig:
    """Preconditioner kind and the cyclic schedule of sweep directions."""

    kind: str  # "sgs" | "ds"
    schedule: tuple

    def __post_init__(self):
        if self.kind not in ("sgs", "ds"):
            raise ValueError(f"preconditioner kind must be 'sgs' or 'ds', not {self.kind!r}")
        if not self.schedule:
            raise ValueError("direction schedule must be nonempty")
        for d in self.schedule:
            if d not in DIRECTIONS:
                raise ValueError(f"unknown sweep direction {d!r}")


def next_direction(config, outer_iteration):
    """Direction used at a given outer iteration (cyclic schedule)."""
    return config.schedule[outer_iteration % len(config.schedule)]


# ---------------------------------------------------------------------------
# sweep machinery


def _sweep_step(dd, arr, w, s_from, s_to, kind):
    """Solve group ``s_from`` and push updates onto the edges into ``s_to``."""
    crossing = arr.crossing(s_from, s_to)
    zero_sides = {}
    if kind == "ds":
        for e in crossing:
            zero_sides.setdefault(e.producer, set()).add(e.producer_side)

    updates = []
    for cell_id in arr.groups[s_from]:
        if cell_id not in dd.systems:
            continue  # null subdomain: dummy no-op solve
        incoming = dd.incoming_blocks(cell_id, w)
        for side in zero_sides.get(cell_id, ()):
            incoming[side] = np.zeros_like(incoming[side])
        u = assembly.solve_subdomain(
            dd.systems[cell_id], incoming, use_physical_source=False
        )
        for e in crossing:
            if e.producer != cell_id:
                continue
            data = dd.extract_edge(cell_id, e.producer_side, u)
            if kind == "sgs":
                data = data - w.block(e.producer, e.producer_side)
            updates.append((e.receiver, e.receiver_side, data))

    # all solves of a group are independent; writes land after the group
    for receiver, side, data in updates:
        w.block(receiver, side)[:] += data


def sgs_apply(dd, arr, r):
    """Symmetric Gauss-Seidel preconditioner action U^-1 L^-1 r (D := I)."""
    w = dd._as_vector(r).copy()
    for s in range(arr.n_groups - 1):
        _sweep_step(dd, arr, w, s, s + 1, "sgs")
    for s in range(arr.n_groups - 1, 0, -1):
        _sweep_step(dd, arr, w, s, s - 1, "sgs")
    return w


def ds_apply(dd, arr, r, order="forward-first"):
    """Double-sweep preconditioner action; sweeps commute (disjoint data)."""
    if order not in ("forward-first", "backward-first"):
        raise ValueError(f"unknown sweep order {order!r}")
    w = dd._as_vector(r).copy()

    def forward():
        for s in range(arr.n_groups - 1):
            _sweep_step(dd, arr, w, s, s + 1, "ds")

    def backward():
        for s in range(arr.n_groups - 1, 0, -1):
            _sweep_step(dd, arr, w, s, s - 1, "ds")

    if order == "forward-first":
        forward()
        backward()
    else:
        backward()
        forward()
    return w


def apply_preconditioner(dd, config, arr, r):
    """Dispatch one preconditioner application for a fixed arrangement."""
    if config.kind == "sgs":
        return sgs_apply(dd, arr, r)
    return ds_apply(dd, arr, r)


class SweepPreconditioner:
    """Callable preconditioner with a per-iteration direction schedule.

    Caches one GroupArrangement per scheduled direction and exposes the
    ndarray-in/ndarray-out signature used by the Krylov drivers, where
    the outer iteration index selects the direction (flexible
    preconditioning when the schedule has more than one entry).
    """

    def __init__(self, dd, config):
        self.dd = dd
        self.config = config
        self._arrangements = {
            d: build_groups(dd.partition, d) for d in config.schedule
        }

    @property
    def flexible(self):
        return len(self.config.schedule) > 1

    def arrangement(self, direction):
        return self._arrangements[direction]

    def __call__(self, values, outer_iteration=0):
        direction = next_direction(self.config, outer_iteration)
        arr = self._arrangements[direction]
        r = self.dd.new_vector(np.asarray(values, dtype=complex))
        return apply_preconditioner(self.dd, self.config, arr, r).values


# ---------------------------------------------------------------------------
# structural diagnostics (used by tests and the operator probe)


def group_indices(dd, arr, g):
    """Layout indices of all blocks incoming to the subdomains of group ``g``."""
    cells = set(arr.groups[g])
    idx = []
    for owner, side in dd.layout.keys():
        if owner in cells:
            sl = dd.layout.block_slice(owner, side)
            idx.extend(range(sl.start, sl.stop))
    return np.array(sorted(idx), dtype=int)


def write_set(dd, arr, sweep):
    """Vector indices written by one DS sweep ('forward' or 'backward')."""
    idx = set()
    rng = (
        [(s, s + 1) for s in range(arr.n_groups - 1)]
        if sweep == "forward"
        else [(s, s - 1) for s in range(arr.n_groups - 1, 0, -1)]
    )
    for s_from, s_to in rng:
        for e in arr.crossing(s_from, s_to):
            sl = dd.layout.block_slice(e.receiver, e.receiver_side)
            idx.update(range(sl.start, sl.stop))
    return idx
