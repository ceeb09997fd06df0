"""Tests for the grouped-sweep preconditioners (SGS and double sweep).

The dense oracles probe the interface operator F column by column,
split it into block triangular parts along the group structure (with
identity diagonal), and compare the matrix-free sweeps against exact
dense triangular solves.
"""

import numpy as np
import pytest

from sweepddm import habc, sweeping
from sweepddm.ddm import DomainDecomposition
from sweepddm.geometry import ConstantWavenumber, Rect, build_partition
from sweepddm.sweeping import (
    DIRECTIONS,
    GroupArrangement,
    PrecondConfig,
    SweepPreconditioner,
    build_groups,
    ds_apply,
    group_indices,
    next_direction,
    sgs_apply,
    write_set,
)


def make_dd(n_rows, n_cols, mask=None, n_aux=1, h=0.5, k=4.0, order=1):
    bounds = Rect(0, 0, float(n_cols), float(n_rows))
    part = build_partition(bounds, n_rows, n_cols, mask=mask)
    return DomainDecomposition(
        part,
        ConstantWavenumber(k),
        habc.PadeParams(n_aux, np.pi / 3),
        h,
        element_order=order,
    )


def rand_vec(dd, seed):
    rng = np.random.default_rng(seed)
    v = dd.new_vector(
        rng.standard_normal(dd.dim) + 1j * rng.standard_normal(dd.dim)
    )
    return v.project_dummy()


def probe_dense_f(dd):
    mat = np.zeros((dd.dim, dd.dim), dtype=complex)
    for j in range(dd.dim):
        e = np.zeros(dd.dim, dtype=complex)
        e[j] = 1.0
        mat[:, j] = dd.apply_F_array(e)
    return mat


def triangular_split(dd, arr, f_dense):
    """I + strictly lower / upper block parts of F along the arrangement."""
    idx = [group_indices(dd, arr, g) for g in range(arr.n_groups)]
    lower = np.eye(dd.dim, dtype=complex)
    upper = np.eye(dd.dim, dtype=complex)
    for s in range(arr.n_groups - 1):
        if len(idx[s]) and len(idx[s + 1]):
            lower[np.ix_(idx[s + 1], idx[s])] = f_dense[np.ix_(idx[s + 1], idx[s])]
            upper[np.ix_(idx[s], idx[s + 1])] = f_dense[np.ix_(idx[s], idx[s + 1])]
    return lower, upper


class TestGroups:
    def test_diagonal_groups_on_3x3(self):
        dd = make_dd(3, 3)
        arr = build_groups(dd.partition, "d1")
        assert arr.n_groups == 5
        assert [len(g) for g in arr.groups] == [1, 2, 3, 2, 1]
        cid = dd.partition.cell_id
        assert arr.groups[0] == [cid(0, 0)]
        assert set(arr.groups[2]) == {cid(0, 2), cid(1, 1), cid(2, 0)}
        assert arr.groups[4] == [cid(2, 2)]

    def test_d2_starts_at_top_left(self):
        dd = make_dd(3, 3)
        arr = build_groups(dd.partition, "d2")
        cid = dd.partition.cell_id
        assert arr.groups[0] == [cid(2, 0)]
        assert arr.groups[-1] == [cid(0, 2)]

    @pytest.mark.parametrize("shape", [(1, 1), (2, 3), (3, 3), (4, 2)])
    @pytest.mark.parametrize("direction", DIRECTIONS)
    def test_group_count_and_partitioning(self, shape, direction):
        n_r, n_c = shape
        part = build_partition(Rect(0, 0, n_c, n_r), n_r, n_c)
        arr = build_groups(part, direction)
        if direction.startswith("h-"):
            assert arr.n_groups == n_c
        elif direction.startswith("v-"):
            assert arr.n_groups == n_r
        else:
            assert arr.n_groups == n_r + n_c - 1
        seen = sorted(c for g in arr.groups for c in g)
        assert seen == list(range(n_r * n_c))

    def test_strip_gives_singleton_groups(self):
        part = build_partition(Rect(0, 0, 4, 1), 1, 4)
        arr = build_groups(part, "h-forward")
        assert arr.groups == [[0], [1], [2], [3]]

    def test_backward_reverses_order(self):
        part = build_partition(Rect(0, 0, 3, 1), 1, 3)
        arr = build_groups(part, "h-backward")
        assert arr.groups == [[2], [1], [0]]

    @pytest.mark.parametrize("shape", [(3, 3), (2, 4)])
    @pytest.mark.parametrize("direction", ["d1", "d2"])
    def test_diagonal_groups_contain_no_neighbors(self, shape, direction):
        n_r, n_c = shape
        part = build_partition(Rect(0, 0, n_c, n_r), n_r, n_c)
        arr = build_groups(part, direction)
        for group in arr.groups:
            rcs = [part.cell_rc(c) for c in group]
            for i, (r1, c1) in enumerate(rcs):
                for r2, c2 in rcs[i + 1:]:
                    assert abs(r1 - r2) + abs(c1 - c2) >= 2
        assert all(not edges for edges in arr.within.values())

    def test_column_arrangement_within_group_edges(self):
        dd = make_dd(2, 2)
        arr = build_groups(dd.partition, "h-forward")
        cid = dd.partition.cell_id
        assert set(arr.within[0]) == {(cid(0, 0), "top"), (cid(1, 0), "bottom")}
        assert set(arr.within[1]) == {(cid(0, 1), "top"), (cid(1, 1), "bottom")}
        forward = arr.crossing(0, 1)
        assert {(e.receiver, e.receiver_side) for e in forward} == {
            (cid(0, 1), "left"),
            (cid(1, 1), "left"),
        }
        assert all(e.producer_side == "right" for e in forward)

    def test_crossing_edges_skip_masked_cells(self):
        mask = np.array([[True, True], [True, False]])
        dd = make_dd(2, 2, mask=mask)
        arr = build_groups(dd.partition, "d1")
        masked = dd.partition.cell_id(1, 1)
        for edges in arr.between.values():
            for e in edges:
                assert masked not in (e.producer, e.receiver)

    def test_unknown_direction_rejected(self):
        part = build_partition(Rect(0, 0, 2, 2), 2, 2)
        with pytest.raises(ValueError, match="direction"):
            build_groups(part, "diagonal")


class TestSchedule:
    def test_config_validation(self):
        with pytest.raises(ValueError, match="kind"):
            PrecondConfig("jacobi", ("d1",))
        with pytest.raises(ValueError, match="nonempty"):
            PrecondConfig("sgs", ())
        with pytest.raises(ValueError, match="direction"):
            PrecondConfig("ds", ("d3",))

    def test_next_direction_cycles(self):
        cfg = PrecondConfig("sgs", ("d1", "d2"))
        assert [next_direction(cfg, n) for n in range(4)] == ["d1", "d2", "d1", "d2"]
        single = PrecondConfig("ds", ("h-forward",))
        assert next_direction(single, 7) == "h-forward"


class TestSgs:
    def test_single_group_is_identity(self):
        dd = make_dd(2, 1)  # one column: h-forward has a single group
        arr = build_groups(dd.partition, "h-forward")
        assert arr.n_groups == 1
        r = rand_vec(dd, 0)
        out = sgs_apply(dd, arr, r)
        assert np.array_equal(out.values, r.values)

    def test_input_never_mutated(self):
        dd = make_dd(2, 2)
        r = rand_vec(dd, 1)
        before = r.values.copy()
        arr = build_groups(dd.partition, "d1")
        sgs_apply(dd, arr, r)
        ds_apply(dd, arr, r)
        assert np.array_equal(r.values, before)

    @pytest.mark.parametrize(
        "shape,direction,mask",
        [
            ((2, 1), "v-forward", None),
            ((1, 2), "h-forward", None),
            ((2, 2), "d1", None),
            ((2, 2), "h-forward", None),
            ((2, 2), "d1", "corner"),
        ],
    )
    def test_matches_dense_triangular_oracle(self, shape, direction, mask):
        if mask == "corner":
            mask = np.ones(shape, dtype=bool)
            mask[-1, -1] = False
        dd = make_dd(*shape, mask=mask)
        arr = build_groups(dd.partition, direction)
        f_dense = probe_dense_f(dd)
        lower, upper = triangular_split(dd, arr, f_dense)
        r = rand_vec(dd, 2)
        expected = np.linalg.solve(upper, np.linalg.solve(lower, r.values))
        got = sgs_apply(dd, arr, r).values
        assert np.linalg.norm(got - expected) <= 1e-10 * np.linalg.norm(expected)

    @pytest.mark.parametrize(
        "shape,direction",
        [((1, 3), "h-forward"), ((2, 2), "d1"), ((3, 3), "d1")],
    )
    def test_round_trip_through_probed_product(self, shape, direction):
        dd = make_dd(*shape)
        arr = build_groups(dd.partition, direction)
        f_dense = probe_dense_f(dd)
        lower, upper = triangular_split(dd, arr, f_dense)
        r = rand_vec(dd, 3)
        out = sgs_apply(dd, arr, r).values
        back = lower @ (upper @ out)
        assert np.linalg.norm(back - r.values) <= 1e-10 * np.linalg.norm(r.values)

    def test_skip_level_blocks_vanish(self):
        # the grouped operator is block tridiagonal: groups two or more
        # apart never couple directly
        dd = make_dd(3, 3)
        arr = build_groups(dd.partition, "d1")
        f_dense = probe_dense_f(dd)
        idx = [group_indices(dd, arr, g) for g in range(arr.n_groups)]
        scale = np.abs(f_dense).max()
        for s in range(arr.n_groups):
            for t in range(arr.n_groups):
                if abs(s - t) >= 2:
                    block = f_dense[np.ix_(idx[s], idx[t])]
                    assert np.abs(block).max() <= 1e-12 * scale

    def test_linearity(self):
        dd = make_dd(2, 2)
        arr = build_groups(dd.partition, "d1")
        r1, r2 = rand_vec(dd, 4), rand_vec(dd, 5)
        a, b = 0.7 - 0.2j, -1.1 + 0.4j
        combo = dd.new_vector(a * r1.values + b * r2.values)
        lhs = sgs_apply(dd, arr, combo).values
        rhs = a * sgs_apply(dd, arr, r1).values + b * sgs_apply(dd, arr, r2).values
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)

    def test_within_group_blocks_pass_through(self):
        dd = make_dd(2, 2)
        arr = build_groups(dd.partition, "h-forward")
        r = rand_vec(dd, 6)
        out = sgs_apply(dd, arr, r)
        for g, edges in arr.within.items():
            for owner, side in edges:
                assert np.array_equal(out.block(owner, side), r.block(owner, side))


class TestDoubleSweep:
    def test_single_group_is_identity(self):
        dd = make_dd(2, 1)
        arr = build_groups(dd.partition, "h-forward")
        r = rand_vec(dd, 7)
        assert np.array_equal(ds_apply(dd, arr, r).values, r.values)

    @pytest.mark.parametrize(
        "shape,direction", [((3, 3), "d1"), ((2, 2), "h-forward")]
    )
    def test_sweep_order_commutes(self, shape, direction):
        dd = make_dd(*shape)
        arr = build_groups(dd.partition, direction)
        r = rand_vec(dd, 8)
        fwd_first = ds_apply(dd, arr, r, order="forward-first").values
        bwd_first = ds_apply(dd, arr, r, order="backward-first").values
        assert np.max(np.abs(fwd_first - bwd_first)) <= 1e-14 * np.max(
            np.abs(fwd_first)
        )

    def test_bad_order_rejected(self):
        dd = make_dd(1, 2)
        arr = build_groups(dd.partition, "h-forward")
        with pytest.raises(ValueError, match="order"):
            ds_apply(dd, arr, rand_vec(dd, 9), order="sideways")

    @pytest.mark.parametrize(
        "shape,direction,mask",
        [
            ((3, 3), "d1", None),
            ((2, 2), "h-forward", None),
            ((3, 3), "v-backward", None),
            ((3, 3), "d2", "corner"),
        ],
    )
    def test_write_sets_disjoint(self, shape, direction, mask):
        if mask == "corner":
            mask = np.ones(shape, dtype=bool)
            mask[0, 0] = False
        dd = make_dd(*shape, mask=mask)
        arr = build_groups(dd.partition, direction)
        fwd = write_set(dd, arr, "forward")
        bwd = write_set(dd, arr, "backward")
        assert fwd and bwd
        assert not fwd & bwd
        # within-group data is never written by either sweep
        for g, edges in arr.within.items():
            for owner, side in edges:
                sl = dd.layout.block_slice(owner, side)
                span = set(range(sl.start, sl.stop))
                assert not span & fwd and not span & bwd

    def test_modified_block_product_cancels(self):
        # the forward sweep writes data that the backward solves zero out,
        # so the chained block maps annihilate each other
        dd = make_dd(3, 3)
        arr = build_groups(dd.partition, "d1")
        idx1 = group_indices(dd, arr, 1)
        idx2 = group_indices(dd, arr, 2)

        def probe_step(cols, rows, s_from, s_to):
            mat = np.zeros((len(rows), len(cols)), dtype=complex)
            for j, col in enumerate(cols):
                v = dd.new_vector()
                v.values[col] = 1.0
                w = v.copy()
                sweeping._sweep_step(dd, arr, w, s_from, s_to, "ds")
                mat[:, j] = (w.values - v.values)[rows]
            return mat

        m_lower = probe_step(idx1, idx2, 1, 2)  # group 2 -> group 3 data
        m_upper = probe_step(idx2, idx1, 2, 1)  # group 3 -> group 2 data
        assert np.abs(m_lower).max() > 1e-3  # the factors are not trivially zero
        assert np.abs(m_upper).max() > 1e-3
        product = m_upper @ m_lower
        assert np.abs(product).max() <= 1e-12

    def test_linearity(self):
        dd = make_dd(2, 2)
        arr = build_groups(dd.partition, "d2")
        r1, r2 = rand_vec(dd, 10), rand_vec(dd, 11)
        a, b = 1.3 + 0.5j, -0.2 - 0.9j
        combo = dd.new_vector(a * r1.values + b * r2.values)
        lhs = ds_apply(dd, arr, combo).values
        rhs = a * ds_apply(dd, arr, r1).values + b * ds_apply(dd, arr, r2).values
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)

    def test_differs_from_sgs(self):
        dd = make_dd(2, 2)
        arr = build_groups(dd.partition, "d1")
        r = rand_vec(dd, 12)
        assert not np.allclose(
            ds_apply(dd, arr, r).values, sgs_apply(dd, arr, r).values, atol=1e-8
        )

    def test_masked_dummy_blocks_stay_zero(self):
        mask = np.array([[True, True], [True, False]])
        dd = make_dd(2, 2, mask=mask)
        arr = build_groups(dd.partition, "d1")
        r = rand_vec(dd, 13)
        assert ds_apply(dd, arr, r).conforms()
        assert sgs_apply(dd, arr, r).conforms()


class TestPreconditionerGlue:
    def test_callable_matches_direct_application(self):
        dd = make_dd(2, 2)
        pre = SweepPreconditioner(dd, PrecondConfig("sgs", ("d1", "d2")))
        assert pre.flexible
        r = rand_vec(dd, 14)
        got0 = pre(r.values, outer_iteration=0)
        got1 = pre(r.values, outer_iteration=1)
        arr1 = build_groups(dd.partition, "d1")
        arr2 = build_groups(dd.partition, "d2")
        assert np.array_equal(got0, sgs_apply(dd, arr1, r).values)
        assert np.array_equal(got1, sgs_apply(dd, arr2, r).values)

    def test_fixed_schedule_not_flexible(self):
        dd = make_dd(1, 2)
        pre = SweepPreconditioner(dd, PrecondConfig("ds", ("h-forward",)))
        assert not pre.flexible
        r = rand_vec(dd, 15)
        arr = build_groups(dd.partition, "h-forward")
        assert np.array_equal(pre(r.values, 3), ds_apply(dd, arr, r).values)
