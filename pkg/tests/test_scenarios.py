"""Tests for the scenario catalog, runner, and mono-domain reference."""

import numpy as np
import pytest

from sweepddm import scenarios
from sweepddm.geometry import UnsupportedGeometryError
from sweepddm.krylov import OUTCOME_CONVERGED
from sweepddm.scenarios import (
    PRECONDITIONERS,
    build_wavenumber,
    customize,
    get_scenario,
    mono_domain_error,
    mono_domain_reference,
    residual_drop_index,
    run_scenario,
    scenario_catalog,
)


class TestCatalog:
    def test_catalog_entries_well_formed(self):
        catalog = scenario_catalog()
        assert {"corner5x5", "center5x5", "twosrc4x4", "twosrc8x8",
                "layered3x3", "masked-L", "smoke2x2",
                "obstacle2x2"} <= set(catalog)
        for name, s in catalog.items():
            assert s.name == name
            assert s.n_rows >= 1 and s.n_cols >= 1
            assert s.cell_size > 0
            assert s.density >= 5
            assert s.precond in PRECONDITIONERS
            assert s.target_h() > 0
            assert s.sources or s.obstacle is not None

    def test_corner5x5_setup(self):
        s = get_scenario("corner5x5")
        assert (s.n_rows, s.n_cols) == (5, 5)
        assert s.k_spec["k"] == pytest.approx(2 * np.pi)
        # wavelength 1 resolved with 15 vertices
        assert s.target_h() == pytest.approx(1.0 / 15.0)
        (x, y, _), = s.sources
        assert 0 < x < s.cell_size and 0 < y < s.cell_size

    def test_twosrc_sources_sit_in_bottom_corner_cells(self):
        for name in ("twosrc4x4", "twosrc8x8"):
            s = get_scenario(name)
            (x1, y1, _), (x2, y2, _) = s.sources
            assert x1 < s.cell_size and y1 < s.cell_size
            assert x2 > (s.n_cols - 1) * s.cell_size and y2 < s.cell_size

    def test_unknown_name_lists_valid_ones(self):
        with pytest.raises(KeyError, match="corner5x5"):
            get_scenario("no-such-scenario")

    def test_low_density_rejected(self):
        s = customize(get_scenario("smoke2x2"), density=3.0)
        with pytest.raises(ValueError, match="density"):
            s.target_h()

    def test_wavenumber_builders(self):
        assert build_wavenumber({"kind": "constant", "k": 3.0}).k_max == 3.0
        layered = build_wavenumber(
            {"kind": "layered", "breaks": (1.0,), "values": (2.0, 5.0)}
        )
        assert layered.k_max == 5.0
        with pytest.raises(ValueError, match="wavenumber"):
            build_wavenumber({"kind": "quadratic"})

    def test_masked_scenario_mask_array(self):
        s = get_scenario("masked-L")
        mask = s.mask_array()
        assert mask.shape == (3, 3)
        assert not mask[2, 2]
        assert mask.sum() == 8


class TestDropIndex:
    def test_picks_steepest_ratio(self):
        history = [(0, 1.0), (1, 0.5), (2, 1e-4), (3, 5e-5)]
        assert residual_drop_index(history) == 2

    def test_immediate_drop(self):
        assert residual_drop_index([(0, 1.0), (1, 1e-6), (2, 5e-7)]) == 1

    def test_zero_residual_counts_as_infinite_drop(self):
        assert residual_drop_index([(0, 1.0), (1, 0.5), (2, 0.0)]) == 2

    def test_short_history(self):
        assert residual_drop_index([(0, 1.0)]) == 0
        assert residual_drop_index([]) == 0


class TestRunScenario:
    def test_smoke_run_converges(self):
        report = run_scenario(get_scenario("smoke2x2"))
        assert report.converged
        assert report.run.outcome == OUTCOME_CONVERGED
        assert report.run.history[0] == (0, 1.0)
        assert report.run.history[-1][1] <= 1e-6
        assert report.max_jump <= 1e-5
        assert set(report.fields) == set(report.dd.systems)
        assert np.all(np.isfinite(report.interface_solution))

    def test_unpreconditioned_run(self):
        report = run_scenario(get_scenario("smoke2x2"), precond="none")
        assert report.converged
        assert report.precond == "none"

    def test_precond_override_recorded(self):
        report = run_scenario(get_scenario("smoke2x2"), precond="ds-h")
        assert report.precond == "ds-h"
        assert report.converged

    def test_unknown_precond_rejected(self):
        with pytest.raises(ValueError, match="preconditioner"):
            run_scenario(get_scenario("smoke2x2"), precond="jacobi")

    def test_single_cell_partition_trivial(self):
        s = customize(get_scenario("smoke2x2"), n_rows=1, n_cols=1)
        report = run_scenario(s)
        assert report.dd.dim == 0
        assert report.converged
        assert report.iterations <= 1
        assert len(report.fields) == 1

    def test_settings_overrides_apply(self):
        report = run_scenario(
            get_scenario("smoke2x2"), tolerance=1e-3, max_iterations=50,
            restart=10,
        )
        assert report.run.tolerance == 1e-3
        assert report.run.restart == 10
        assert report.run.history[-1][1] <= 1e-3

    def test_non_convergence_reported(self):
        report = run_scenario(
            get_scenario("smoke2x2"), precond="none", max_iterations=2
        )
        assert not report.converged
        assert report.run.outcome == "max-iter"

    def test_reusing_decomposition_matches_fresh_run(self):
        s = get_scenario("smoke2x2")
        fresh = run_scenario(s)
        dd = scenarios.build_decomposition(s)
        reused = run_scenario(s, dd=dd)
        assert reused.run.history == fresh.run.history


class TestMonoDomainReference:
    def test_smoke_scenario_matches_reference(self):
        s = get_scenario("smoke2x2")
        report = run_scenario(s)
        mesh, node_maps, u_ref = mono_domain_reference(s, dd=report.dd)
        err = mono_domain_error(
            report.dd, report.fields, node_maps, u_ref, mesh.n_nodes
        )
        assert err <= 1e-5

    def test_obstacle_scenario_matches_reference(self):
        s = get_scenario("obstacle2x2")
        report = run_scenario(s)
        assert report.converged
        mesh, node_maps, u_ref = mono_domain_reference(s, dd=report.dd)
        err = mono_domain_error(
            report.dd, report.fields, node_maps, u_ref, mesh.n_nodes
        )
        assert err <= 1e-5

    def test_masked_scenario_unsupported(self):
        with pytest.raises(UnsupportedGeometryError, match="all-active"):
            mono_domain_reference(get_scenario("masked-L"))

    def test_reference_self_convergence_under_refinement(self):
        # Doubling the mesh density halves h on nested grids (dyadic cell
        # size, grid-aligned obstacle), so the reference fields can be
        # compared node-for-node; the error against the finest level should
        # drop at an O(h^2) trend.
        base = get_scenario("obstacle2x2")
        rect = (0.75, 0.75, 1.5, 1.5)
        fields = {}
        for density in (8, 16, 32):
            s = customize(
                base,
                density=float(density),
                obstacle={**base.obstacle, "rect": rect},
            )
            mesh, _, u_ref = mono_domain_reference(s)
            keys = np.round(mesh.nodes * 32).astype(int)
            fields[density] = dict(zip(map(tuple, keys), u_ref))
        reference = fields[32]
        errors = {}
        for density in (8, 16):
            diff = [val - reference[key] for key, val in fields[density].items()]
            base_vals = [reference[key] for key in fields[density]]
            errors[density] = np.linalg.norm(diff) / np.linalg.norm(base_vals)
        assert errors[8] / errors[16] >= 3.0

    def test_masked_scenario_converges(self):
        report = run_scenario(get_scenario("masked-L"))
        assert report.converged
        assert len(report.dd.systems) == 8
