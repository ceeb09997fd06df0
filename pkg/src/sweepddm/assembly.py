"""Per-subdomain finite-element systems with absorbing/transmission sides.

Each subdomain carries the volume Helmholtz unknowns plus, per
HABC/transmission side, N one-dimensional auxiliary fields along the
side.  The assembled weak form is

    volume:   int grad(u).grad(v) - k^2 u v
    side s:   int B(u, {phi_i}) v      (impedance term on u rows)
    field i:  s_i * int [ phi_i' eta' - reaction_i phi_i eta
                          - coupling_i u eta ]          (aux equation)
    corners:  endpoint terms of the aux equations written through the
              corner transmission condition with the psi scalars
              eliminated analytically

where the constants come from the habc module; each aux equation is
scaled by s_i = aux_row_scale so the full matrix is complex symmetric.
Transmission data enters through per-side injection maps (edge mass
action on the trace part, pointwise scaled corner scalars); the
outgoing data 2*B(...) is sampled pointwise by extract_outgoing.

Obstacle nodes carry Dirichlet data, eliminated by lifting: the solved
system keeps only free dofs and the right-hand side is corrected by
-A[free, dirichlet] * u_dirichlet.
"""

from __future__ import annotations

import numpy as np

from . import habc, sparse
from .geometry import SIDES

SIDE_EXTERIOR = "exterior-habc"
SIDE_TRANSMISSION = "transmission"
SIDE_DUMMY = "dummy"
SIDE_KINDS = (SIDE_EXTERIOR, SIDE_TRANSMISSION, SIDE_DUMMY)

# the four cell corners and the (side, endpoint-index) pairs meeting there;
# endpoint 0 is the low-coordinate end of a side's trace, endpoint 1 the high end
CORNER_INCIDENCE = {
    "bl": (("left", 0), ("bottom", 0)),
    "br": (("right", 0), ("bottom", 1)),
    "tl": (("left", 1), ("top", 0)),
    "tr": (("right", 1), ("top", 1)),
}

_SIDE_ENDPOINT_TO_CORNER = {
    pair: corner for corner, pairs in CORNER_INCIDENCE.items() for pair in pairs
}


def perpendicular_at(side, endpoint):
    """(side, endpoint) of the perpendicular side meeting ``side`` at ``endpoint``."""
    corner = _SIDE_ENDPOINT_TO_CORNER[(side, endpoint)]
    a, b = CORNER_INCIDENCE[corner]
    return b if a == (side, endpoint) else a


class AssemblyError(RuntimeError):
    """Subdomain system could not be assembled/factorized."""


# ---------------------------------------------------------------------------
# reference elements and quadrature


def _tri_quadrature(order):
    if order == 1:
        # edge-midpoint rule, exact to degree 2
        pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        wts = np.full(3, 1.0 / 3.0)
    else:
        # 7-point rule, exact to degree 5
        a, b = 0.0597158717897698, 0.4701420641051151
        c, d = 0.7974269853530873, 0.1012865073234563
        wa = 0.1323941527885062
        wc = 0.1259391805448271
        pts = np.array(
            [
                [1.0 / 3.0, 1.0 / 3.0],
                [b, b], [a, b], [b, a],
                [d, d], [c, d], [d, c],
            ]
        )
        wts = np.array([0.225, wa, wa, wa, wc, wc, wc])
    return pts, wts * 0.5  # reference triangle area 1/2


def _tri_shapes(order, pts):
    xi, eta = pts[:, 0], pts[:, 1]
    lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)  # (nq, 3)
    if order == 1:
        n = lam
        dn = np.broadcast_to(
            np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (pts.shape[0], 3, 2)
        ).copy()
        return n, dn
    l1, l2, l3 = lam[:, 0], lam[:, 1], lam[:, 2]
    n = np.stack(
        [
            l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
            4 * l1 * l2, 4 * l2 * l3, 4 * l3 * l1,
        ],
        axis=1,
    )
    zeros = np.zeros_like(l1)
    dxi = np.stack(
        [-(4 * l1 - 1), 4 * l2 - 1, zeros, 4 * (l1 - l2), 4 * l3, -4 * l3], axis=1
    )
    deta = np.stack(
        [-(4 * l1 - 1), zeros, 4 * l3 - 1, -4 * l2, 4 * l2, 4 * (l1 - l3)], axis=1
    )
    return n, np.stack([dxi, deta], axis=2)


def _line_quadrature(order):
    if order == 1:
        h = 0.5 / np.sqrt(3.0)
        pts = np.array([0.5 - h, 0.5 + h])
        wts = np.array([0.5, 0.5])
    else:
        g = 0.5 * np.sqrt(0.6)
        pts = np.array([0.5 - g, 0.5, 0.5 + g])
        wts = np.array([5.0, 8.0, 5.0]) / 18.0
    return pts, wts


def _line_shapes(order, pts):
    if order == 1:
        n = np.stack([1.0 - pts, pts], axis=1)
        dn = np.broadcast_to(np.array([-1.0, 1.0]), (pts.size, 2)).copy()
        return n, dn
    x = pts
    n = np.stack([(1 - x) * (1 - 2 * x), 4 * x * (1 - x), x * (2 * x - 1)], axis=1)
    dn = np.stack([4 * x - 3, 4 - 8 * x, 4 * x - 1], axis=1)
    return n, dn


# ---------------------------------------------------------------------------
# dof layout


class ElementSpace:
    """Volume dof structure of a Lagrange P1/P2 space on a triangle mesh."""

    def __init__(self, mesh, order):
        if order not in (1, 2):
            raise ValueError(f"element order must be 1 or 2, got {order}")
        self.mesh = mesh
        self.order = order
        if order == 1:
            self.n_vol = mesh.n_nodes
            self.tri_dofs = mesh.triangles
            self.dof_coords = mesh.nodes
            self.edge_mid = {}
        else:
            mid = {}
            tri_dofs = np.empty((mesh.n_triangles, 6), dtype=int)
            tri_dofs[:, :3] = mesh.triangles
            coords = [mesh.nodes]
            next_dof = mesh.n_nodes
            mid_coords = []
            for t, (a, b, c) in enumerate(mesh.triangles):
                for loc, (p, q) in enumerate(((a, b), (b, c), (c, a))):
                    key = (p, q) if p < q else (q, p)
                    dof = mid.get(key)
                    if dof is None:
                        dof = next_dof
                        next_dof += 1
                        mid[key] = dof
                        mid_coords.append(0.5 * (mesh.nodes[p] + mesh.nodes[q]))
                    tri_dofs[t, 3 + loc] = dof
            self.n_vol = next_dof
            self.tri_dofs = tri_dofs
            self.dof_coords = np.vstack([mesh.nodes, np.array(mid_coords)])
            self.edge_mid = mid

    def trace_dofs(self, side):
        """Volume dofs along one side, ordered by position (vertices P1, interleaved P2)."""
        verts = self.mesh.edge_traces[side]
        if self.order == 1:
            return verts.copy()
        out = [verts[0]]
        for a, b in zip(verts[:-1], verts[1:]):
            key = (a, b) if a < b else (b, a)
            out.append(self.edge_mid[key])
            out.append(b)
        return np.array(out, dtype=int)


class SideBlock:
    """Aux-field layout, operator tables and edge matrices of one live side."""

    def __init__(self, side, kind, trace_dofs, phi_dofs, k_edge, params):
        self.side = side
        self.kind = kind
        self.trace_dofs = trace_dofs
        self.phi_dofs = phi_dofs  # (N, n_trace) global dof ids
        self.k_edge = float(k_edge)
        self.n_trace = trace_dofs.size
        self.n_aux = phi_dofs.shape[0]
        self.block_len = self.n_trace + 2 * self.n_aux
        self.coef_u, self.coef_phi = habc.b_trace_coefficients(params, self.k_edge)
        self.row_scales = np.array(
            [habc.aux_row_scale(params, i, self.k_edge) for i in range(1, self.n_aux + 1)]
        )
        self.reactions = np.array(
            [
                habc.aux_equation_coefficients(params, i, self.k_edge)[0]
                for i in range(1, self.n_aux + 1)
            ]
        )
        self.e_diag, self.e_cross = habc.corner_b_coefficients(params, self.k_edge)
        self.mass = None  # (n_trace, n_trace) edge mass, filled during assembly
        self.stiff = None

    def endpoint_phi_dofs(self, endpoint):
        """Global dofs of all aux fields at one endpoint of the side (may be empty)."""
        col = 0 if endpoint == 0 else -1
        return self.phi_dofs[:, col] if self.n_aux else np.array([], dtype=int)


class DofLayout:
    """Global dof numbering of one subdomain: volume dofs then aux ranges.

    Aux dofs are laid out contiguously per (side, field) in fixed side
    order; the endpoint entries of each 1D range double as the corner
    values used by the corner coupling.
    """

    def __init__(self, space, side_blocks, dirichlet_dofs, n_total):
        self.space = space
        self.n_volume = space.n_vol
        self.n_total = n_total
        self.side_blocks = side_blocks  # side name -> SideBlock (live sides only)
        self.dirichlet_dofs = dirichlet_dofs
        mask = np.ones(n_total, dtype=bool)
        mask[dirichlet_dofs] = False
        self.free_dofs = np.nonzero(mask)[0]
        self.full_to_free = np.full(n_total, -1, dtype=int)
        self.full_to_free[self.free_dofs] = np.arange(self.free_dofs.size)


class SubdomainSystem:
    """Assembled, factorized subdomain problem plus its data maps."""

    def __init__(self, mesh, params, element_order, layout, matrix,
                 reduced_matrix, factorization, reduced_source, dirichlet_values):
        self.mesh = mesh
        self.params = params
        self.element_order = element_order
        self.layout = layout
        self.matrix = matrix  # full assembled matrix (pre-lifting), complex symmetric
        self.reduced_matrix = reduced_matrix
        self.factorization = factorization
        self.reduced_source = reduced_source  # free-dof source incl. lifting correction
        self.dirichlet_values = dirichlet_values  # full-length, zero off obstacle

    @property
    def n_dofs(self):
        return self.layout.n_total

    def block_length(self, side):
        return self.layout.side_blocks[side].block_len


# ---------------------------------------------------------------------------
# assembly


def _volume_coo(space, k_field, order):
    mesh = space.mesh
    v = mesh.nodes[mesh.triangles]  # (nt, 3, 2)
    jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)  # (nt, 2, 2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv /= det[:, None, None]

    pts, wts = _tri_quadrature(order)
    n_tab, dn_tab = _tri_shapes(order, pts)  # (nq, nd), (nq, nd, 2)

    grad = np.einsum("qni,tij->tqnj", dn_tab, inv)
    stiff = np.einsum("q,t,tqnj,tqmj->tnm", wts, det, grad, grad)

    xq = v[:, None, 0, :] + np.einsum("tij,qj->tqi", jac, pts)
    k2 = np.asarray(k_field(xq)) ** 2  # (nt, nq)
    mass = np.einsum("q,t,tq,qn,qm->tnm", wts, det, k2, n_tab, n_tab)

    el = (stiff - mass).astype(complex)
    dofs = space.tri_dofs
    nd = dofs.shape[1]
    rows = np.repeat(dofs, nd, axis=1).ravel()
    cols = np.tile(dofs, (1, nd)).ravel()
    return rows, cols, el.ravel()


def _edge_matrices(coords, order):
    """1D mass and stiffness over a side's trace (dense, trace-local numbering)."""
    n_t = coords.shape[0]
    pts, wts = _line_quadrature(order)
    n_tab, dn_tab = _line_shapes(order, pts)
    mass = np.zeros((n_t, n_t))
    stiff = np.zeros((n_t, n_t))
    step = 1 if order == 1 else 2
    nd = order + 1
    for start in range(0, n_t - 1, step):
        idx = np.arange(start, start + nd)
        length = np.linalg.norm(coords[idx[-1]] - coords[idx[0]])
        m_el = length * np.einsum("q,qn,qm->nm", wts, n_tab, n_tab)
        k_el = np.einsum("q,qn,qm->nm", wts, dn_tab, dn_tab) / length
        mass[np.ix_(idx, idx)] += m_el
        stiff[np.ix_(idx, idx)] += k_el
    return mass, stiff


def _dense_block_coo(rows, cols, block, out):
    r, c, v = out
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    r.append(rr.ravel())
    c.append(cc.ravel())
    v.append(np.asarray(block, dtype=complex).ravel())


def assemble_subdomain(mesh, k_field, params, side_kinds, dirichlet_data=None,
                       element_order=1, point_sources=()):
    """Assemble and factorize the coupled u/phi system of one subdomain.

    ``side_kinds`` maps each of the four sides to one of
    {exterior-habc, transmission, dummy}; dummy sides carry no boundary
    term (homogeneous Neumann).  ``dirichlet_data`` is an optional
    callable (x, y) -> complex prescribing values on obstacle-boundary
    nodes (zero if None).  ``point_sources`` is a sequence of
    (x, y, amplitude) nodal loads snapped to the nearest mesh vertex.
    """
    for side in SIDES:
        if side not in side_kinds:
            raise ValueError(f"side_kinds is missing side {side!r}")
        if side_kinds[side] not in SIDE_KINDS:
            raise ValueError(
                f"unknown side kind {side_kinds[side]!r} for side {side!r}"
            )

    space = ElementSpace(mesh, element_order)
    n_aux = params.n_aux

    side_blocks = {}
    cursor = space.n_vol
    for side in SIDES:
        kind = side_kinds[side]
        if kind == SIDE_DUMMY:
            continue
        trace = space.trace_dofs(side)
        k_edge = float(np.mean(k_field(space.dof_coords[trace])))
        phi = np.arange(cursor, cursor + n_aux * trace.size).reshape(n_aux, trace.size)
        cursor += n_aux * trace.size
        side_blocks[side] = SideBlock(side, kind, trace, phi, k_edge, params)
    n_total = cursor

    rows_list, cols_list, vals_list = [], [], []
    out = (rows_list, cols_list, vals_list)

    r, c, v = _volume_coo(space, k_field, element_order)
    rows_list.append(r)
    cols_list.append(c)
    vals_list.append(v)

    for side, blk in side_blocks.items():
        coords = space.dof_coords[blk.trace_dofs]
        mass, stiff = _edge_matrices(coords, element_order)
        blk.mass = mass
        blk.stiff = stiff

        _dense_block_coo(blk.trace_dofs, blk.trace_dofs, blk.coef_u * mass, out)
        for i in range(blk.n_aux):
            coupling = blk.coef_phi[i] * mass
            _dense_block_coo(blk.trace_dofs, blk.phi_dofs[i], coupling, out)
            _dense_block_coo(blk.phi_dofs[i], blk.trace_dofs, coupling, out)
            own = blk.row_scales[i] * (stiff - blk.reactions[i] * mass)
            _dense_block_coo(blk.phi_dofs[i], blk.phi_dofs[i], own, out)

        if blk.n_aux == 0:
            continue
        for endpoint in (0, 1):
            perp_side, perp_end = perpendicular_at(side, endpoint)
            perp = side_blocks.get(perp_side)
            if perp is None:
                continue  # dummy side: natural endpoint, no corner term
            own_dofs = blk.endpoint_phi_dofs(endpoint)
            cross_dofs = perp.endpoint_phi_dofs(perp_end)
            diag = blk.row_scales * blk.e_diag
            rows_list.append(own_dofs)
            cols_list.append(own_dofs)
            vals_list.append(diag)
            _dense_block_coo(
                own_dofs, cross_dofs, blk.row_scales[:, None] * blk.e_cross, out
            )

    rows = np.concatenate(rows_list)
    cols = np.concatenate(cols_list)
    vals = np.concatenate(vals_list)
    matrix = sparse.SparseMatrix.from_coo(n_total, rows, cols, vals)

    # Dirichlet dofs: obstacle rim vertices, plus rim-edge midpoints for P2
    dir_dofs = list(mesh.obstacle_boundary_nodes)
    rim = set(mesh.obstacle_boundary_nodes.tolist())
    if element_order == 2 and rim:
        for (a, b), dof in space.edge_mid.items():
            if a in rim and b in rim:
                pa, pb = mesh.nodes[a], mesh.nodes[b]
                if pa[0] == pb[0] or pa[1] == pb[1]:  # axis-aligned rim edge
                    dir_dofs.append(dof)
    dir_dofs = np.array(sorted(dir_dofs), dtype=int)

    layout = DofLayout(space, side_blocks, dir_dofs, n_total)

    dirichlet_values = np.zeros(n_total, dtype=complex)
    if dir_dofs.size and dirichlet_data is not None:
        pts = space.dof_coords[dir_dofs]
        dirichlet_values[dir_dofs] = dirichlet_data(pts[:, 0], pts[:, 1])

    source_full = np.zeros(n_total, dtype=complex)
    for (sx, sy, amp) in point_sources:
        d2 = (mesh.nodes[:, 0] - sx) ** 2 + (mesh.nodes[:, 1] - sy) ** 2
        source_full[int(np.argmin(d2))] += amp

    csr = matrix.to_scipy()
    free = layout.free_dofs
    reduced = sparse.SparseMatrix(csr[free][:, free])
    reduced_source = source_full[free]
    if dir_dofs.size:
        reduced_source = reduced_source - csr[free][:, dir_dofs] @ dirichlet_values[dir_dofs]

    try:
        fact = sparse.factorize(reduced)
    except sparse.SingularMatrixError as exc:
        raise AssemblyError(f"subdomain system is singular: {exc}") from exc

    return SubdomainSystem(
        mesh, params, element_order, layout, matrix, reduced, fact,
        reduced_source, dirichlet_values,
    )


# ---------------------------------------------------------------------------
# solve / data maps


def solve_subdomain(system, incoming=None, use_physical_source=True):
    """Solve the subdomain problem for given incoming transmission data.

    ``incoming`` maps transmission side names to data blocks laid out as
    [edge trace values; N corner scalars at endpoint 0; N at endpoint 1].
    Returns the full local solution (u and all phi, Dirichlet values
    included when the physical source is active).
    """
    layout = system.layout
    rhs_full = np.zeros(layout.n_total, dtype=complex)

    for side, g in (incoming or {}).items():
        blk = layout.side_blocks.get(side)
        if blk is None or blk.kind != SIDE_TRANSMISSION:
            raise ValueError(f"side {side!r} is not a transmission side")
        g = np.asarray(g, dtype=complex)
        if g.shape[0] != blk.block_len:
            raise ValueError(
                f"data block for side {side!r} has length {g.shape[0]}, "
                f"expected {blk.block_len}"
            )
        n_t, n = blk.n_trace, blk.n_aux
        rhs_full[blk.trace_dofs] += blk.mass @ g[:n_t]
        for endpoint in (0, 1):
            scalars = g[n_t + endpoint * n : n_t + (endpoint + 1) * n]
            perp_side, perp_end = perpendicular_at(side, endpoint)
            perp = layout.side_blocks.get(perp_side)
            if perp is None or n == 0:
                continue  # no fields receive these scalars (dummy crossing side)
            rhs_full[perp.endpoint_phi_dofs(perp_end)] += perp.row_scales * scalars

    rhs = rhs_full[layout.free_dofs]
    if use_physical_source:
        rhs = rhs + system.reduced_source

    x = np.zeros(layout.n_total, dtype=complex)
    x[layout.free_dofs] = system.factorization.solve(rhs)
    if use_physical_source:
        x[layout.dirichlet_dofs] = system.dirichlet_values[layout.dirichlet_dofs]
    return x


def extract_outgoing(system, solution, side):
    """Outgoing data block 2*B(...) of one transmission side.

    Trace part: 2*B(u, {phi_i}) sampled at the trace dofs.  Corner part,
    per endpoint: 2*B(phi_j^perp, {psi_ij}) for the aux fields of the
    perpendicular side meeting there (zeros if that side is dummy).
    """
    layout = system.layout
    blk = layout.side_blocks.get(side)
    if blk is None or blk.kind != SIDE_TRANSMISSION:
        raise ValueError(f"side {side!r} is not a transmission side")
    u_tr = solution[blk.trace_dofs]
    if blk.n_aux:
        phi_tr = solution[blk.phi_dofs]
        trace = 2.0 * (blk.coef_u * u_tr + blk.coef_phi @ phi_tr)
    else:
        trace = 2.0 * blk.coef_u * u_tr

    corners = []
    for endpoint in (0, 1):
        perp_side, perp_end = perpendicular_at(side, endpoint)
        perp = layout.side_blocks.get(perp_side)
        if perp is None or blk.n_aux == 0:
            corners.append(np.zeros(blk.n_aux, dtype=complex))
            continue
        phi_own = solution[perp.endpoint_phi_dofs(perp_end)]  # fields whose condition it is
        phi_cross = solution[blk.endpoint_phi_dofs(endpoint)]  # fields on this side
        corners.append(2.0 * (perp.e_diag * phi_own + perp.e_cross @ phi_cross))
    return np.concatenate([trace, *corners])
