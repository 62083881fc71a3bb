"""Probabilistic partitioning of a finite metric space and the clustering driver.

One round (``cluster_select``) picks the pivot with the most populous
R0-ball. If its R1-ball is heavy, that ball is the cluster. Otherwise a
radius t is drawn from the admissible set S and the cluster is Ball(z, t).
``partition_metric`` repeats rounds on the unclustered points until none
remain.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRadiusSet, GuaranteeViolation, InvalidParameter
from .instance import Clustering, Instance
from .intervals import IntervalSet, pi_inverse
from .params import STRICT, PartitionParams, derive_params, practical_params
from .relaxation import (FractionalSolution, SolverOptions, parse_p, project_metric,
                         solution_from_x, solve_cp)
from .rng import Xoshiro256

log = logging.getLogger(__name__)

TRIANGLE_TOL = 1e-9


class MetricView:
    """A distance matrix restricted to a subset of active points.

    The full matrix is validated once; restricted views share it.
    """

    def __init__(self, d, active=None, *, check: bool = True):
        d = np.asarray(d, dtype=float)
        if check:
            _check_metric(d)
        self.d = d
        n = d.shape[0]
        self.active = (np.arange(n) if active is None
                       else np.asarray(active, dtype=np.int64))
        self._local = None

    @property
    def size(self) -> int:
        return int(self.active.size)

    @property
    def local(self) -> np.ndarray:
        """Distance matrix among active points, in active order."""
        if self._local is None:
            self._local = self.d[np.ix_(self.active, self.active)]
        return self._local

    def restrict(self, active) -> "MetricView":
        return MetricView(self.d, active, check=False)

    def dist(self, u: int, v: int) -> float:
        return float(self.d[u, v])

    def ball(self, u: int, radius: float) -> np.ndarray:
        """Active points within ``radius`` of u (global indices)."""
        return self.active[self.d[u, self.active] <= radius]

    def ball_sizes(self, radius: float) -> np.ndarray:
        return np.count_nonzero(self.local <= radius, axis=1)

    def sorted_distances(self, u: int) -> np.ndarray:
        return np.sort(self.d[u, self.active])


def _check_metric(d: np.ndarray) -> None:
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidParameter("distance matrix must be square")
    if not np.all(np.isfinite(d)):
        raise InvalidParameter("distances must be finite")
    if not np.array_equal(d, d.T):
        raise InvalidParameter("distance matrix must be symmetric")
    if (d < 0).any() or (np.diag(d) != 0).any():
        raise InvalidParameter("distances must be nonnegative with zero diagonal")
    for b in range(d.shape[0]):
        if (d - d[:, b][:, None] - d[b, :][None, :]).max() > TRIANGLE_TOL:
            raise InvalidParameter("triangle inequality violated beyond 1e-9")


def select_pivot(view: MetricView, R0: float) -> int:
    """Active point with the largest R0-ball; smallest index on ties."""
    sizes = view.ball_sizes(R0)
    best = sizes.max()
    return int(view.active[np.flatnonzero(sizes == best)].min())


def is_heavy(view: MetricView, z: int, params: PartitionParams) -> bool:
    core = view.ball(z, params.R0).size
    outer = view.ball(z, params.R1).size
    return outer >= params.rho * core


def shell_terms(view: MetricView, members: np.ndarray, params: PartitionParams):
    """Per-point sides of the shell condition for candidate clusters.

    ``members`` is a (k, m) 0/1 matrix over active points (rows are candidate
    clusters). Returns ``(lhs, rhs)``, both (k, m): lhs counts points in
    Ball(u, r) separated from u, rhs is 25 beta D^2 times the distance-weighted
    touch mass over Ball(u, 2R).
    """
    A = view.local
    M = np.asarray(members, dtype=float)
    near = (A <= params.r).astype(float)
    W = np.where(A <= 2 * params.R, A / params.R, 0.0)
    # delta_P(u,v) = m_u + m_v - 2 m_u m_v ; or_P(u,v) = m_u + m_v - m_u m_v
    nM = M @ near
    lhs = M * near.sum(axis=1) + nM - 2 * M * nM
    wM = M @ W
    rhs = params.shell_coeff * (M * W.sum(axis=1) + wM - M * wM)
    return lhs, rhs


def compute_S(view: MetricView, z: int, params: PartitionParams) -> IntervalSet:
    """Radii s in (3 R0, R1] whose ball Ball(z, s) passes the shell condition at every point.

    Ball(z, s) only changes at distances from z, so the condition is
    evaluated once per elementary interval between consecutive breakpoints.
    """
    lo, hi = 3 * params.R0, params.R1
    dz = view.d[z, view.active]
    inner = np.unique(dz[(dz > lo) & (dz < hi)])
    bps = np.concatenate([[lo], inner, [hi]])
    members = dz[None, :] <= bps[:-1, None]
    lhs, rhs = shell_terms(view, members, params)
    ok = np.all(lhs <= rhs, axis=1)
    pieces = [(bps[j], bps[j + 1]) for j in np.flatnonzero(ok)]
    closed = False
    if ok[-1] and not np.any(dz == hi):
        closed = True
    return IntervalSet.from_pieces(pieces, closed_end=closed)


def F_cdf(x, params: PartitionParams):
    """Truncated-exponential CDF on [0, R/2]."""
    return np.expm1(-np.asarray(x, dtype=float) / params.R0) / math.expm1(
        -params.R / (2 * params.R0))


def F_inverse(u, params: PartitionParams):
    c = -math.expm1(-params.R / (2 * params.R0))
    return -params.R0 * np.log1p(-np.asarray(u, dtype=float) * c)


def sample_preimage(S: IntervalSet, params: PartitionParams, rng: Xoshiro256) -> float:
    """Draw x ~ F, applying the mode's rule when mu(S) < R/2."""
    mu = S.measure
    if mu == 0:
        raise EmptyRadiusSet("admissible radius set S is empty")
    if mu < params.R / 2:
        if params.mode == STRICT:
            raise GuaranteeViolation(f"mu(S)={mu:.6g} < R/2={params.R / 2:.6g}")
        log.warning("mu(S)=%.6g < R/2; draw clamped to mu(S)", mu)
    x = float(F_inverse(rng.random(), params))
    return min(x, mu)


def sample_radius(S: IntervalSet, params: PartitionParams, rng: Xoshiro256) -> float:
    return pi_inverse(S, sample_preimage(S, params, rng))


@dataclass
class Selection:
    members: np.ndarray
    pivot: int
    heavy: bool
    t: float
    x: float | None = None
    S: IntervalSet | None = None
    active: np.ndarray | None = None

    @property
    def mu_S(self) -> float | None:
        return None if self.S is None else self.S.measure

    def trace(self) -> dict:
        return {
            "pivot": self.pivot,
            "heavy": self.heavy,
            "mu_S": self.mu_S,
            "t": self.t,
            "members": self.members.tolist(),
        }


def cluster_select(view: MetricView, params: PartitionParams, rng: Xoshiro256) -> Selection:
    if view.size == 0:
        raise InvalidParameter("cannot select a cluster from an empty space")
    z = select_pivot(view, params.R0)
    if is_heavy(view, z, params):
        return Selection(view.ball(z, params.R1), z, True, params.R1,
                         active=view.active)
    S = compute_S(view, z, params)
    x = sample_preimage(S, params, rng)
    t = pi_inverse(S, x)
    return Selection(view.ball(z, t), z, False, t, x, S, view.active)


def _as_rng(rng) -> Xoshiro256:
    return rng if isinstance(rng, Xoshiro256) else Xoshiro256(int(rng))


def partition_metric(view: MetricView, params: PartitionParams, rng,
                     trace: list | None = None,
                     selections: list | None = None) -> Clustering:
    """Peel clusters off the remaining points until every point is assigned."""
    rng = _as_rng(rng)
    n = view.d.shape[0]
    remaining = np.zeros(n, dtype=bool)
    remaining[view.active] = True
    labels = np.full(n, -1, dtype=np.int64)
    k = 0
    while remaining.any():
        sel = cluster_select(view.restrict(np.flatnonzero(remaining)), params, rng)
        labels[sel.members] = k
        remaining[sel.members] = False
        if trace is not None:
            trace.append({"iteration": k, **sel.trace()})
        if selections is not None:
            selections.append(sel)
        k += 1
    return Clustering(labels[view.active])


@dataclass
class ClusterResult:
    clustering: Clustering
    solution: FractionalSolution
    report: "object"
    params: PartitionParams
    trace: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.clustering, self.solution, self.report))


def cluster_instance(inst: Instance, p, opts: SolverOptions | None = None,
                     mode: str = "practical", seed: int = 0, x=None,
                     params: PartitionParams | None = None,
                     trace: bool = False) -> ClusterResult:
    """Solve (or ingest) the relaxation, then partition its metric.

    Strict mode derives (r, R = 1/3, q = 2) from alpha after clamping it to
    alpha*. Practical mode caps beta (see ``practical_params``) unless
    explicit ``params`` are given.
    """
    from .analysis import disagreements

    p = parse_p(p)
    if x is None:
        sol = solve_cp(inst, p, opts)
    else:
        x = np.asarray(x, dtype=float)
        if x.shape != (inst.n, inst.n):
            raise InvalidParameter(f"x has shape {x.shape}, expected {(inst.n, inst.n)}")
        sol = solution_from_x(inst, project_metric(x), p)
    if params is None:
        if mode == STRICT:
            params = derive_params(min(inst.alpha, 0.5), mode=STRICT)
        else:
            params = practical_params(inst.alpha)
    view = MetricView(sol.x)
    steps: list = []
    c = partition_metric(view, params, Xoshiro256(seed), trace=steps if trace else None)
    return ClusterResult(c, sol, disagreements(inst, c, p), params, steps)
