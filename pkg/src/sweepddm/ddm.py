"""Checkerboard domain decomposition and the matrix-free interface operator.

The unknown of the outer iteration is the set of transmission data
blocks, one per directed interface edge: the block of edge (I, side)
holds the data entering subdomain I across that side, laid out as
[edge trace; corner scalars at endpoint 0; corner scalars at endpoint 1].

The iteration operator A maps a transmission vector g to the swapped,
re-extracted data: on edge (I, side) it writes

    -g_(J, facing side) + extract_outgoing(u_J)

where u_J solves subdomain J with all its incoming blocks from g and no
physical source.  The interface problem solved by the Krylov methods is
F g = b with F = I - A and b the extraction of the physical-source-only
local solutions.

Masked (inactive) cells keep their edges in the layout as dummy blocks
pinned to zero; the sides of live cells facing them stay of
transmission kind and simply never receive data, which acts as an
absorbing condition toward the void and keeps group indexing uniform.
"""

from __future__ import annotations

import numpy as np

from . import assembly
from .assembly import SIDE_DUMMY, SIDE_EXTERIOR, SIDE_TRANSMISSION
from .geometry import (
    OPPOSITE_SIDE,
    SIDES,
    build_subdomain_mesh,
    interface_topology,
    side_interval_count,
)


class DecompositionError(ValueError):
    """Invalid decomposition setup (sources/obstacles on interfaces, ...)."""


class TransmissionLayout:
    """Block layout of all transmission data over the directed interface edges."""

    def __init__(self, edges, lengths):
        self.edges = list(edges)
        self._slots = {}
        offset = 0
        for e in self.edges:
            key = (e.owner, e.side)
            length = lengths[key]
            self._slots[key] = (offset, length, e.dummy)
            offset += length
        self.dim = offset

    def keys(self):
        return self._slots.keys()

    def slot(self, owner, side):
        return self._slots[(owner, side)]

    def block_slice(self, owner, side):
        offset, length, _ = self._slots[(owner, side)]
        return slice(offset, offset + length)

    def is_dummy(self, owner, side):
        return self._slots[(owner, side)][2]

    def reverse_key(self, owner, side):
        """Key of the facing block (J, opposite side) across the same interface."""
        for e in self.edges:
            if e.owner == owner and e.side == side:
                return (e.neighbor, OPPOSITE_SIDE[side])
        raise KeyError((owner, side))

    def undirected_pairs(self):
        """Each interface once, as a pair of facing directed-edge keys."""
        seen = set()
        for e in self.edges:
            rev = (e.neighbor, OPPOSITE_SIDE[e.side])
            if rev in seen:
                continue
            seen.add((e.owner, e.side))
            yield (e.owner, e.side), rev


class TransmissionVector:
    """Complex data over a TransmissionLayout; dummy blocks stay zero."""

    def __init__(self, layout, values=None):
        self.layout = layout
        if values is None:
            self.values = np.zeros(layout.dim, dtype=complex)
        else:
            values = np.asarray(values, dtype=complex)
            if values.shape != (layout.dim,):
                raise ValueError(
                    f"values have shape {values.shape}, expected ({layout.dim},)"
                )
            self.values = values

    def copy(self):
        return TransmissionVector(self.layout, self.values.copy())

    def block(self, owner, side):
        return self.values[self.layout.block_slice(owner, side)]

    def set_block(self, owner, side, data):
        self.values[self.layout.block_slice(owner, side)] = data

    def project_dummy(self):
        """Zero out all dummy blocks in place."""
        for owner, side in self.layout.keys():
            if self.layout.is_dummy(owner, side):
                self.block(owner, side)[:] = 0.0
        return self

    def conforms(self):
        """True when every dummy block is identically zero."""
        return all(
            not np.any(self.block(owner, side))
            for owner, side in self.layout.keys()
            if self.layout.is_dummy(owner, side)
        )


def dense_operator(apply_fn, dim):
    """Dense matrix of a linear operator, probed column by column."""
    mat = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[col] = 1.0
        mat[:, col] = apply_fn(e)
    return mat


class DomainDecomposition:
    """All subdomain systems of a partitioned problem plus the interface maps.

    Builds one mesh and factorized system per active cell (exterior HABC
    on partition-boundary sides, transmission toward every in-grid
    neighbor), assigns point sources and rectangular Dirichlet obstacles
    to their enclosing cells, and owns the TransmissionLayout.
    """

    def __init__(self, partition, k_field, params, target_h, element_order=1,
                 obstacles=(), dirichlet_data=None, point_sources=()):
        self.partition = partition
        self.k_field = k_field
        self.params = params
        self.target_h = float(target_h)
        self.element_order = element_order
        self.topology = interface_topology(partition)

        cell_obstacles = {}
        for rect in obstacles:
            owner = None
            for cell_id, r, c in partition.active_cells():
                if partition.cell_extent(r, c).strictly_contains(rect):
                    owner = cell_id
                    break
            if owner is None:
                raise DecompositionError(
                    f"obstacle {rect} is not strictly inside a single active cell"
                )
            if owner in cell_obstacles:
                raise DecompositionError(
                    f"cell {owner} holds more than one obstacle"
                )
            cell_obstacles[owner] = rect

        cell_sources = {}
        for (sx, sy, amp) in point_sources:
            owner = None
            for cell_id, r, c in partition.active_cells():
                ext = partition.cell_extent(r, c)
                if ext.contains_point(sx, sy) and _strictly_inside(ext, sx, sy):
                    owner = cell_id
                    break
            if owner is None:
                raise DecompositionError(
                    f"point source at ({sx}, {sy}) is not strictly inside an "
                    "active cell (interface/exterior sources are unsupported)"
                )
            cell_sources.setdefault(owner, []).append((sx, sy, amp))

        self.side_kinds = {}
        self.systems = {}
        for cell_id, r, c in partition.active_cells():
            kinds = {}
            for side in SIDES:
                nbr = partition.neighbor(r, c, side)
                kinds[side] = SIDE_EXTERIOR if nbr is None else SIDE_TRANSMISSION
            self.side_kinds[cell_id] = kinds
            mesh = build_subdomain_mesh(
                partition.cell_extent(r, c), self.target_h,
                obstacle=cell_obstacles.get(cell_id),
            )
            self.systems[cell_id] = assembly.assemble_subdomain(
                mesh, k_field, params, kinds,
                dirichlet_data=dirichlet_data,
                element_order=element_order,
                point_sources=cell_sources.get(cell_id, ()),
            )

        lengths = {}
        for e in self.topology.directed_edges:
            lengths[(e.owner, e.side)] = self._edge_block_length(e)
        self.layout = TransmissionLayout(self.topology.directed_edges, lengths)

        for e in self.topology.directed_edges:
            sys_owner = self.systems.get(e.owner)
            if sys_owner is not None:
                expected = sys_owner.block_length(e.side)
                got = self.layout.slot(e.owner, e.side)[1]
                if expected != got:
                    raise AssertionError(
                        f"layout length mismatch on edge {(e.owner, e.side)}"
                    )
        self._rhs_cache = None

    def _edge_block_length(self, edge):
        """Block length of one directed edge, mesh-independent (dummy edges too)."""
        r, c = self.partition.cell_rc(edge.owner)
        ext = self.partition.cell_extent(r, c)
        length = ext.height if edge.side in ("left", "right") else ext.width
        n_seg = side_interval_count(length, self.target_h)
        n_t = n_seg + 1 if self.element_order == 1 else 2 * n_seg + 1
        return n_t + 2 * self.params.n_aux

    # -- vectors ------------------------------------------------------------

    def new_vector(self, values=None):
        return TransmissionVector(self.layout, values)

    @property
    def dim(self):
        return self.layout.dim

    # -- local pieces (used by the sweeping preconditioners) ----------------

    def incoming_blocks(self, cell_id, g):
        """Transmission-side data blocks of one cell, read from g."""
        blocks = {}
        for side, kind in self.side_kinds[cell_id].items():
            if kind == SIDE_TRANSMISSION:
                blocks[side] = g.block(cell_id, side)
        return blocks

    def solve_cell(self, cell_id, g=None, with_source=False):
        """Local solve of one active cell with incoming data taken from g."""
        incoming = self.incoming_blocks(cell_id, g) if g is not None else None
        return assembly.solve_subdomain(
            self.systems[cell_id], incoming, use_physical_source=with_source
        )

    def extract_edge(self, cell_id, side, local_solution):
        """Outgoing data produced by one cell across one of its sides."""
        return assembly.extract_outgoing(self.systems[cell_id], local_solution, side)

    # -- global operators ----------------------------------------------------

    def _as_vector(self, g):
        if isinstance(g, TransmissionVector):
            if g.layout is not self.layout:
                raise ValueError("transmission vector belongs to another layout")
            return g
        return self.new_vector(g)

    def apply_A(self, g):
        """One application of the iteration operator (one solve per subdomain)."""
        g = self._as_vector(g)
        out = self.new_vector()
        solutions = {
            cell_id: self.solve_cell(cell_id, g, with_source=False)
            for cell_id in self.systems
        }
        for e in self.topology.directed_edges:
            if e.dummy:
                continue
            facing = OPPOSITE_SIDE[e.side]
            update = -g.block(e.neighbor, facing) + assembly.extract_outgoing(
                self.systems[e.neighbor], solutions[e.neighbor], facing
            )
            out.set_block(e.owner, e.side, update)
        return out

    def apply_F(self, g):
        """Interface operator F = I - A."""
        g = self._as_vector(g)
        out = self.apply_A(g)
        out.values = g.values - out.values
        return out

    def apply_F_array(self, values):
        """ndarray-in/ndarray-out version of apply_F for Krylov drivers."""
        return self.apply_F(self.new_vector(np.asarray(values, dtype=complex))).values

    def compute_rhs(self):
        """Right-hand side b: extraction of the physical-source-only solves (cached)."""
        if self._rhs_cache is not None:
            return self._rhs_cache.copy()
        b = self.new_vector()
        solutions = {
            cell_id: self.solve_cell(cell_id, None, with_source=True)
            for cell_id in self.systems
        }
        for e in self.topology.directed_edges:
            if e.dummy:
                continue
            facing = OPPOSITE_SIDE[e.side]
            b.set_block(
                e.owner, e.side,
                assembly.extract_outgoing(
                    self.systems[e.neighbor], solutions[e.neighbor], facing
                ),
            )
        self._rhs_cache = b
        return b.copy()

    def reconstruct_solution(self, g):
        """Final local fields: one solve per subdomain with sources and g."""
        g = self._as_vector(g)
        return {
            cell_id: self.solve_cell(cell_id, g, with_source=True)
            for cell_id in self.systems
        }

    # -- diagnostics ----------------------------------------------------------

    def interface_jumps(self, fields):
        """Per-interface trace mismatch of reconstructed fields.

        Returns {((I, side), (J, side')): (jump_l2, scale_l2)} over live
        interfaces; the traces live on bitwise-identical node positions.
        """
        jumps = {}
        for key_a, key_b in self.layout.undirected_pairs():
            if self.layout.is_dummy(*key_a):
                continue
            (ia, sa), (ib, sb) = key_a, key_b
            tr_a = self.systems[ia].layout.side_blocks[sa].trace_dofs
            tr_b = self.systems[ib].layout.side_blocks[sb].trace_dofs
            ua = fields[ia][tr_a]
            ub = fields[ib][tr_b]
            jumps[(key_a, key_b)] = (
                float(np.linalg.norm(ua - ub)),
                float(max(np.linalg.norm(ua), np.linalg.norm(ub))),
            )
        return jumps

    def max_relative_jump(self, fields):
        jumps = self.interface_jumps(fields)
        if not jumps:
            return 0.0
        scale = max(s for _, s in jumps.values())
        if scale == 0.0:
            return 0.0
        return max(j for j, _ in jumps.values()) / scale


def _strictly_inside(ext, x, y):
    return ext.x0 < x < ext.x1 and ext.y0 < y < ext.y1
