"""Named benchmark scenarios and the orchestration to run them.

A Scenario fully specifies one experiment: the partitioned rectangle,
the wavenumber field, the absorbing-operator parameters shared by
exterior boundaries and transmission conditions, the excitation (point
sources and/or a rectangular Dirichlet obstacle scattering an incident
plane wave), the mesh density, and the solver settings.  The catalog
holds desk-scale versions of the classic layouts: a corner source and a
center source on a 5x5 lattice, two bottom-corner sources on growing
lattices, a layered medium, and an L-shaped masked domain.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import assembly, habc, krylov, sweeping
from .ddm import DomainDecomposition
from .geometry import (
    ConstantWavenumber,
    LayeredWavenumber,
    Rect,
    build_partition,
    build_union_mesh,
)

#: CLI names for preconditioner configurations.
PRECONDITIONERS = {
    "none": None,
    "sgs-h": ("sgs", ("h-forward",)),
    "sgs-v": ("sgs", ("v-forward",)),
    "sgs-d1": ("sgs", ("d1",)),
    "sgs-2d": ("sgs", ("d1", "d2")),
    "ds-h": ("ds", ("h-forward",)),
    "ds-v": ("ds", ("v-forward",)),
    "ds-d1": ("ds", ("d1",)),
    "ds-2d": ("ds", ("d1", "d2")),
}


@dataclass(frozen=True)
class Scenario:
    """Complete description of one benchmark run."""

    name: str
    description: str
    n_rows: int
    n_cols: int
    cell_size: float
    k_spec: dict
    n_aux: int = 4
    angle: float = np.pi / 3
    element_order: int = 1
    density: float = 15.0  # mesh vertices per shortest wavelength
    mask: Optional[tuple] = None  # rows of booleans, row 0 at the bottom
    sources: tuple = ()
    obstacle: Optional[dict] = None
    precond: str = "sgs-2d"
    tolerance: float = 1e-6
    max_iterations: int = 200
    restart: Optional[int] = None

    def bounds(self):
        return Rect(0.0, 0.0, self.n_cols * self.cell_size,
                    self.n_rows * self.cell_size)

    def wavenumber(self):
        return build_wavenumber(self.k_spec)

    def target_h(self):
        if self.density < 5 and self.element_order == 1:
            raise ValueError(
                f"density {self.density} is below 5 vertices per wavelength"
            )
        wavelength = 2.0 * np.pi / self.wavenumber().k_max
        return wavelength / self.density

    def mask_array(self):
        if self.mask is None:
            return None
        return np.asarray(self.mask, dtype=bool)


def build_wavenumber(spec):
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return ConstantWavenumber(spec["k"])
    if kind == "layered":
        return LayeredWavenumber(spec["breaks"], spec["values"],
                                 axis=spec.get("axis", "y"))
    raise ValueError(f"unknown wavenumber kind {kind!r}")


def _incident_trace(obstacle):
    """Dirichlet trace -u_inc of the incident plane wave on the obstacle rim."""
    inc = obstacle["incident"]
    k, theta = float(inc["k"]), float(inc.get("angle", 0.0))
    dx, dy = np.cos(theta), np.sin(theta)

    def data(x, y):
        return -np.exp(1j * k * (x * dx + y * dy))

    return data


def build_decomposition(scenario):
    """Instantiate all subdomain systems of a scenario."""
    part = build_partition(
        scenario.bounds(), scenario.n_rows, scenario.n_cols,
        mask=scenario.mask_array(),
    )
    obstacles = ()
    dirichlet_data = None
    if scenario.obstacle is not None:
        rect = Rect(*scenario.obstacle["rect"])
        obstacles = (rect,)
        dirichlet_data = _incident_trace(scenario.obstacle)
    return DomainDecomposition(
        part,
        scenario.wavenumber(),
        habc.PadeParams(scenario.n_aux, scenario.angle),
        scenario.target_h(),
        element_order=scenario.element_order,
        obstacles=obstacles,
        dirichlet_data=dirichlet_data,
        point_sources=scenario.sources,
    )


@dataclass
class Report:
    """Everything a scenario run produced."""

    scenario: Scenario
    precond: str
    dd: DomainDecomposition
    run: krylov.KrylovRun
    interface_solution: np.ndarray
    fields: dict
    max_jump: float

    @property
    def converged(self):
        return self.run.outcome == krylov.OUTCOME_CONVERGED

    @property
    def iterations(self):
        return self.run.iterations


def run_scenario(scenario, precond=None, tolerance=None, restart=None,
                 max_iterations=None, dd=None):
    """Solve one scenario; keyword arguments override its solver settings."""
    name = precond if precond is not None else scenario.precond
    if name not in PRECONDITIONERS:
        raise ValueError(
            f"unknown preconditioner {name!r}; valid: {', '.join(PRECONDITIONERS)}"
        )
    if dd is None:
        dd = build_decomposition(scenario)
    settings = krylov.KrylovRun(
        tolerance=tolerance if tolerance is not None else scenario.tolerance,
        max_iterations=(max_iterations if max_iterations is not None
                        else scenario.max_iterations),
        restart=restart if restart is not None else scenario.restart,
    )

    b = dd.compute_rhs().values
    choice = PRECONDITIONERS[name]
    if choice is None:
        g, run = krylov.gmres(dd.apply_F_array, None, b, settings)
    else:
        pre = sweeping.SweepPreconditioner(
            dd, sweeping.PrecondConfig(*choice)
        )
        g, run = krylov.fgmres(
            dd.apply_F_array, lambda j: (lambda v: pre(v, j)), b, settings
        )

    fields = dd.reconstruct_solution(dd.new_vector(g))
    return Report(
        scenario=scenario,
        precond=name,
        dd=dd,
        run=run,
        interface_solution=g,
        fields=fields,
        max_jump=dd.max_relative_jump(fields),
    )


def mono_domain_reference(scenario, dd=None):
    """Unpartitioned solve on the union mesh (all-active scenarios only).

    Returns (union mesh, per-cell node maps, reference solution).
    """
    part = (dd.partition if dd is not None else build_partition(
        scenario.bounds(), scenario.n_rows, scenario.n_cols,
        mask=scenario.mask_array(),
    ))
    obstacles = {}
    dirichlet_data = None
    if scenario.obstacle is not None:
        rect = Rect(*scenario.obstacle["rect"])
        dirichlet_data = _incident_trace(scenario.obstacle)
        for cell_id, r, c in part.active_cells():
            if part.cell_extent(r, c).strictly_contains(rect):
                obstacles[cell_id] = rect
                break
    mesh, node_maps, _ = build_union_mesh(
        part, scenario.target_h(), obstacles=obstacles
    )
    exterior = {s: assembly.SIDE_EXTERIOR
                for s in ("left", "bottom", "right", "top")}
    system = assembly.assemble_subdomain(
        mesh,
        scenario.wavenumber(),
        habc.PadeParams(scenario.n_aux, scenario.angle),
        exterior,
        dirichlet_data=dirichlet_data,
        element_order=scenario.element_order,
        point_sources=scenario.sources,
    )
    u_ref = assembly.solve_subdomain(system)
    return mesh, node_maps, u_ref


def mono_domain_error(dd, fields, node_maps, u_ref, n_union_nodes):
    """Relative nodal-l2 distance between stitched DDM fields and a reference."""
    u_ddm = np.zeros(n_union_nodes, dtype=complex)
    for cell_id in dd.systems:
        n_nodes = dd.systems[cell_id].mesh.n_nodes
        u_ddm[node_maps[cell_id]] = fields[cell_id][:n_nodes]
    ref = u_ref[:n_union_nodes]
    return float(np.linalg.norm(u_ddm - ref) / np.linalg.norm(ref))


def residual_drop_index(history):
    """Iteration index with the steepest one-step residual decrease.

    The characteristic 'sudden drop' iteration of a convergence curve:
    the 1-based index i maximizing history[i-1] / history[i].
    """
    res = [r for _, r in history]
    if len(res) < 2:
        return 0
    ratios = [
        (res[i - 1] / res[i]) if res[i] > 0 else np.inf
        for i in range(1, len(res))
    ]
    return int(np.argmax(ratios)) + 1


# ---------------------------------------------------------------------------
# catalog

_TWO_PI = 2.0 * np.pi


def scenario_catalog():
    """All named scenarios at desk scale."""
    entries = [
        Scenario(
            name="smoke2x2",
            description="fast 2x2 lattice with one interior source",
            n_rows=2, n_cols=2, cell_size=1.0,
            k_spec={"kind": "constant", "k": _TWO_PI},
            n_aux=2, density=8.0,
            sources=((0.4, 0.3, 1.0),),
            max_iterations=60,
        ),
        Scenario(
            name="corner5x5",
            description="5x5 lattice, point source in the bottom-left cell",
            n_rows=5, n_cols=5, cell_size=2.5,
            k_spec={"kind": "constant", "k": _TWO_PI},
            n_aux=4, density=15.0,
            sources=((1.25, 1.25, 1.0),),
            max_iterations=80,
        ),
        Scenario(
            name="center5x5",
            description="5x5 lattice, point source in the central cell",
            n_rows=5, n_cols=5, cell_size=2.5,
            k_spec={"kind": "constant", "k": _TWO_PI},
            n_aux=4, density=15.0,
            sources=((6.25, 6.25, 1.0),),
            max_iterations=80,
        ),
        Scenario(
            name="twosrc4x4",
            description="4x4 lattice, sources in both bottom corner cells",
            n_rows=4, n_cols=4, cell_size=2.5,
            k_spec={"kind": "constant", "k": _TWO_PI},
            n_aux=4, density=10.0,
            sources=((1.25, 1.25, 1.0), (8.75, 1.25, 1.0)),
            max_iterations=120,
        ),
        Scenario(
            name="twosrc8x8",
            description="8x8 lattice, sources in both bottom corner cells",
            n_rows=8, n_cols=8, cell_size=2.5,
            k_spec={"kind": "constant", "k": _TWO_PI},
            n_aux=4, density=10.0,
            sources=((1.25, 1.25, 1.0), (18.75, 1.25, 1.0)),
            max_iterations=200,
        ),
        Scenario(
            name="layered3x3",
            description="3x3 lattice over a three-layer medium",
            n_rows=3, n_cols=3, cell_size=2.0,
            k_spec={"kind": "layered", "breaks": (2.0, 4.0),
                    "values": (_TWO_PI, 1.5 * _TWO_PI, 1.1 * _TWO_PI)},
            n_aux=4, density=12.0,
            sources=((1.0, 1.0, 1.0),),
            max_iterations=120,
        ),
        Scenario(
            name="masked-L",
            description="3x3 lattice with the top-right cell removed",
            n_rows=3, n_cols=3, cell_size=2.0,
            k_spec={"kind": "constant", "k": _TWO_PI},
            n_aux=2, density=10.0,
            mask=((True, True, True), (True, True, True), (True, True, False)),
            sources=((1.0, 1.0, 1.0),),
            max_iterations=100,
        ),
        Scenario(
            name="obstacle2x2",
            description="2x2 lattice scattering a plane wave off a square",
            n_rows=2, n_cols=2, cell_size=2.0,
            k_spec={"kind": "constant", "k": _TWO_PI},
            n_aux=4, density=12.0,
            obstacle={"rect": (0.8, 0.8, 1.4, 1.4),
                      "incident": {"k": _TWO_PI, "angle": 0.0}},
            max_iterations=80,
        ),
    ]
    return {s.name: s for s in entries}


def get_scenario(name):
    catalog = scenario_catalog()
    if name not in catalog:
        raise KeyError(
            f"unknown scenario {name!r}; valid names: {', '.join(sorted(catalog))}"
        )
    return catalog[name]


def customize(scenario, **overrides):
    """Scenario with some fields replaced (validated by construction)."""
    return replace(scenario, **overrides)
