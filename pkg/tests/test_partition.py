import logging
import math

import numpy as np
import pytest
from scipy import stats

from asymcc.errors import EmptyRadiusSet, GuaranteeViolation, InvalidParameter
from asymcc.instance import Instance, gen_gap, gen_random
from asymcc.intervals import IntervalSet, pi_inverse
from asymcc.metrics import (blob_metric, clump_line_metric, line_metric, separated_metric,
                            star_metric)
from asymcc.params import STRICT, PartitionParams, beta_star
from asymcc.partition import (F_cdf, F_inverse, MetricView, cluster_instance, cluster_select,
                              compute_S, is_heavy, partition_metric, sample_preimage,
                              select_pivot)
from asymcc.rng import Xoshiro256

P05 = PartitionParams.from_beta(0.05)


def shell_ok_naive(d, active, members, params):
    """The shell inequality at every active point, by explicit double loop."""
    members = set(int(v) for v in members)
    for u in active:
        lhs, rhs = 0, 0.0
        for v in active:
            sep = (u in members) != (v in members)
            touch = (u in members) or (v in members)
            if d[u, v] <= params.r and sep:
                lhs += 1
            if d[u, v] <= 2 * params.R and touch:
                rhs += d[u, v] / params.R
        if lhs > params.shell_coeff * rhs * (1 + 1e-12):
            return False
    return True


def shell_ok_masks(d, members_mask, params):
    """Same inequality with boolean pair masks, for long grids."""
    m = members_mask
    sep = m[:, None] != m[None, :]
    touch = m[:, None] | m[None, :]
    lhs = ((d <= params.r) & sep).sum(axis=1)
    rhs = np.where((d <= 2 * params.R) & touch, d, 0.0).sum(axis=1) / params.R
    return bool(np.all(lhs <= params.shell_coeff * rhs * (1 + 1e-12)))


# -- metric view ----------------------------------------------------------------

def test_view_rejects_non_metric():
    d = np.array([[0, 0.1, 1.0], [0.1, 0, 0.1], [1.0, 0.1, 0]])
    with pytest.raises(InvalidParameter, match="triangle"):
        MetricView(d)
    with pytest.raises(InvalidParameter, match="symmetric"):
        MetricView(np.array([[0, 1.0], [0.5, 0]]))
    with pytest.raises(InvalidParameter):
        MetricView(np.array([[0, -1.0], [-1.0, 0]]))
    MetricView(d + np.array([[0, 0, -0.8], [0, 0, 0], [-0.8, 0, 0]]))


def test_view_tolerates_rounding():
    d = np.array([[0, 0.1, 0.2 + 5e-10], [0.1, 0, 0.1], [0.2 + 5e-10, 0.1, 0]])
    MetricView(d)


def test_view_ball_and_restrict():
    v = line_metric([0, 0.1, 0.2, 5])
    assert v.ball(1, 0.15).tolist() == [0, 1, 2]
    sub = v.restrict([1, 3])
    assert sub.ball(1, 10).tolist() == [1, 3] and sub.local.shape == (2, 2)


# -- pivot and heavy ------------------------------------------------------------

def test_pivot_examples():
    assert select_pivot(line_metric([0.7]), 0.1) == 0
    assert select_pivot(line_metric([0, 0.1, 0.2, 5]), 0.15) == 1
    assert select_pivot(separated_metric(6, 1.0), 0.5) == 0
    v = line_metric([0, 0.1, 0.2, 5]).restrict([2, 3])
    assert select_pivot(v, 0.15) == 2


def _rho16():
    # beta = 1/4, q = 1 gives rho = 16 exactly
    return PartitionParams.from_beta(0.25, q=1, check=False)


def test_heavy_equality_inclusive():
    p = _rho16()
    assert p.rho == 16.0
    assert is_heavy(star_metric(15, p.R1 / 2), 0, p)
    assert not is_heavy(star_metric(14, p.R1 / 2), 0, p)


def test_heavy_needs_more_than_core():
    v = separated_metric(5, 1.0)
    assert not is_heavy(v, 0, P05)
    assert not is_heavy(blob_metric(100, 0), 0, P05)  # n < rho = 8000


# -- the radius set S -------------------------------------------------------------

def test_S_full_when_r_below_min_distance():
    v = line_metric(np.arange(20) * 0.02)
    assert 0.02 > P05.r
    S = compute_S(v, select_pivot(v, P05.R0), P05)
    assert S.to_list() == [[3 * P05.R0, P05.R1]] and S.closed_end


def test_S_matches_dense_grid_oracle():
    p = PartitionParams.from_beta(1e-6)
    v = clump_line_metric(p, seed=3)
    assert v.size == 60
    z = select_pivot(v, p.R0)
    S = compute_S(v, z, p)
    dz = v.d[z]
    lo, hi = 3 * p.R0, p.R1
    grid = [np.linspace(lo, hi, 10_001)[1:]]
    # the clumps are narrower than the uniform spacing: add a local grid over each
    xs = np.sort(dz[dz > lo])
    for a, b in zip(xs[:-1], xs[1:]):
        if b - a < p.r:
            grid.append(np.linspace(a - p.r, b + p.r, 7))
    grid = np.unique(np.concatenate(grid))
    grid = grid[(grid > lo) & (grid <= hi)]
    oracle = np.array([shell_ok_masks(v.d, dz <= s, p) for s in grid])
    # spot-check the mask form against the double loop
    for s in grid[:: len(grid) // 15]:
        assert shell_ok_naive(v.d, range(v.size), np.flatnonzero(dz <= s), p) == \
            shell_ok_masks(v.d, dz <= s, p)
    member = np.array([s in S for s in grid])
    assert not oracle.all(), "metric should produce gaps in S"
    assert np.array_equal(member, oracle)
    # measure agreement on the uniform part of the grid
    uni = np.linspace(lo, hi, 10_001)[1:]
    frac = np.mean([s in S for s in uni])
    assert frac * (hi - lo) == pytest.approx(S.measure, abs=2 * (hi - lo) / 10_000 * len(S))


@pytest.mark.parametrize("seed", range(4))
def test_S_within_range(seed):
    p = PartitionParams.from_beta(1e-6)
    v = clump_line_metric(p, seed=seed)
    S = compute_S(v, select_pivot(v, p.R0), p)
    assert S.intervals[0][0] >= 3 * p.R0 and S.intervals[-1][1] <= p.R1
    assert S.measure == pytest.approx(sum(b - a for a, b in S.intervals), rel=1e-15)


# -- the sampling law F --------------------------------------------------------

def test_F_endpoints():
    assert F_cdf(0.0, P05) == 0 and F_inverse(0.0, P05) == 0
    assert F_cdf(P05.R / 2, P05) == pytest.approx(1, abs=1e-15)
    assert F_inverse(1.0, P05) == pytest.approx(P05.R / 2, rel=1e-14)
    u = np.linspace(0, 1, 101)
    assert np.allclose(F_cdf(F_inverse(u, P05), P05), u, rtol=0, atol=1e-14)


def test_zero_preimage_gives_inf_S():
    S = IntervalSet(((0.1, 0.2), (0.25, 0.3)))
    assert pi_inverse(S, float(F_inverse(0.0, P05))) == S.inf


def test_sample_preimage_ks():
    S = IntervalSet(((0.0, 1.0),))
    rng = Xoshiro256(5)
    xs = np.array([sample_preimage(S, P05, rng) for _ in range(20_000)])
    assert xs.min() >= 0 and xs.max() < P05.R / 2
    assert stats.kstest(xs, lambda x: F_cdf(x, P05)).statistic < 0.015


def test_sample_preimage_short_S_modes(caplog):
    S = IntervalSet(((0.1, 0.12),))
    strict = PartitionParams.from_beta(beta_star(2) / 2, mode=STRICT)
    with pytest.raises(GuaranteeViolation):
        sample_preimage(S, strict, Xoshiro256(0))
    with caplog.at_level(logging.WARNING):
        xs = [sample_preimage(S, P05, Xoshiro256(s)) for s in range(200)]
    assert max(xs) <= S.measure and "mu(S)" in caplog.text
    with pytest.raises(EmptyRadiusSet):
        sample_preimage(IntervalSet(()), P05, Xoshiro256(0))


# -- one cluster ---------------------------------------------------------------

def test_select_singleton():
    sel = cluster_select(line_metric([0.3]), P05, Xoshiro256(0))
    assert sel.members.tolist() == [0] and sel.pivot == 0


def test_select_empty_view():
    with pytest.raises(InvalidParameter):
        cluster_select(line_metric([0.3]).restrict([]), P05, Xoshiro256(0))


def test_heavy_is_deterministic():
    p = _rho16()
    v = star_metric(20, p.R1 / 2)
    sels = [cluster_select(v, p, Xoshiro256(s)) for s in range(5)]
    assert all(s.heavy and s.t == p.R1 for s in sels)
    assert all(np.array_equal(s.members, np.arange(21)) for s in sels)


@pytest.mark.parametrize("seed", range(5))
def test_light_t_in_S_and_shell_holds(seed):
    p = PartitionParams.from_beta(1e-6)
    v = clump_line_metric(p, seed=seed)
    sel = cluster_select(v, p, Xoshiro256(seed))
    assert not sel.heavy and sel.t in sel.S
    assert 3 * p.R0 <= sel.t <= p.R1
    assert shell_ok_naive(v.d, range(v.size), sel.members, p)
    assert np.array_equal(sel.members, v.ball(sel.pivot, sel.t))


# -- full partitions --------------------------------------------------------------

def test_partition_single_point():
    c = partition_metric(line_metric([0.0]), P05, 0)
    assert c.labels.tolist() == [0]


def test_partition_far_apart_gives_singletons():
    c = partition_metric(separated_metric(7, 1.0), P05, 3)
    assert c.n_clusters == 7


@pytest.mark.parametrize("seed", range(3))
def test_partition_diameter_and_cover(seed):
    v = blob_metric(100, seed)
    c = partition_metric(v, P05, seed)
    assert c.labels.size == 100
    for m in c.clusters():
        assert v.d[np.ix_(m, m)].max() <= 2 * P05.R


def test_partition_deterministic():
    v = blob_metric(100, 1)
    a = partition_metric(v, P05, 42)
    b = partition_metric(v, P05, 42)
    c = partition_metric(v, P05, 43)
    assert a == b
    trace = []
    partition_metric(v, P05, 42, trace=trace)
    assert trace[0]["iteration"] == 0 and not trace[0]["heavy"]
    assert sum(len(t["members"]) for t in trace) == 100
    assert c.labels.size == 100


def test_partition_on_subset():
    v = blob_metric(40, 2).restrict(np.arange(0, 40, 2))
    c = partition_metric(v, P05, 0)
    assert c.labels.size == 20


# -- end to end ------------------------------------------------------------------

def test_cluster_all_positive_zero_cost():
    n = 6
    inst = Instance(n, 0.5, 1.0, np.ones((n, n)), np.full((n, n), 0.8))
    res = cluster_instance(inst, "inf")
    assert res.clustering.n_clusters == 1 and res.report.norm("inf") == 0


@pytest.mark.parametrize("seed", range(3))
def test_cluster_noiseless_planted(seed):
    inst, planted = gen_random(9, 0.25, 3, 0.0, seed)
    c, sol, rep = cluster_instance(inst, 1, seed=seed)
    assert sol.objective <= 1e-6
    assert rep.norm(1) == 0
    assert c == planted


def test_cluster_gap_finite():
    res = cluster_instance(gen_gap(1 / 64), "inf", seed=0, trace=True)
    assert math.isfinite(res.report.norm("inf")) and res.solution.objective > 0
    assert len(res.trace) == res.clustering.n_clusters


def test_cluster_strict_mode_and_x_in():
    inst, _ = gen_random(8, 0.25, 2, 0.2, 1)
    res = cluster_instance(inst, 2, mode=STRICT)
    assert res.params.mode == STRICT and res.params.beta < 1e-7
    again = cluster_instance(inst, 2, mode=STRICT, x=res.solution.x)
    assert again.clustering == res.clustering
    with pytest.raises(InvalidParameter):
        cluster_instance(inst, 2, x=np.zeros((3, 3)))


def test_cluster_repairs_non_metric_x():
    inst, _ = gen_random(5, 0.25, 2, 0.2, 1)
    x = np.full((5, 5), 0.9)
    x[0, 1] = x[1, 0] = 0.1
    x[1, 2] = x[2, 1] = 0.1
    np.fill_diagonal(x, 0)
    res = cluster_instance(inst, 1, x=x)
    assert res.solution.x[0, 2] == pytest.approx(0.2)
    assert res.solution.max_triangle_residual <= 1e-12
