"""Disagreement accounting and Monte Carlo / exact verifiers for the decomposition.

Every verifier returns a dataclass with a ``passed`` property covering only
the properties that must hold on every sample. Statistical quantities (the
separation-probability ratio, per-vertex approximation ratios) are reported
alongside but never decide ``passed``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bruteforce import brute_force_opt
from .errors import EmptyRadiusSet, GuaranteeViolation
from .instance import Clustering, Instance, gap_size, gen_gap
from .intervals import IntervalSet, pi_forward, pi_forward_array, pi_inverse
from .params import SHELL_CONSTANT, PartitionParams
from .partition import (F_cdf, MetricView, Selection, cluster_select,
                        partition_metric)
from .relaxation import check_feasible, eval_y, format_p, gap_fractional, objective, parse_p
from .rng import Xoshiro256

# relative slack when an independent re-evaluation compares two float sums
REL_SLACK = 1e-9
CONFIDENCE_DELTA = 0.01


# -- disagreements ----------------------------------------------------------

@dataclass
class DisagreementReport:
    dis: np.ndarray
    norms: dict

    def norm(self, p) -> float:
        return objective(self.dis, parse_p(p))

    def to_dict(self) -> dict:
        return {"dis": self.dis.tolist(),
                "norms": {k: float(v) for k, v in self.norms.items()}}


def disagreements(inst: Instance, c: Clustering, p=None) -> DisagreementReport:
    """Per-vertex weight of disagreeing edges; each edge counts at both ends."""
    if c.labels.shape != (inst.n,):
        raise ValueError(f"clustering has {c.labels.size} labels, instance has n={inst.n}")
    same = c.same()
    bad = (inst.positive & ~same) | (inst.negative & same)
    dis = np.where(bad, inst.weight, 0.0).sum(axis=1)
    orders = [1.0, 2.0, math.inf] + ([] if p is None else [parse_p(p)])
    norms = {format_p(q): objective(dis, q) for q in orders}
    return DisagreementReport(dis, norms)


def embed_clustering_x(c: Clustering) -> np.ndarray:
    """0/1 metric of a clustering: x_uv = 0 inside a cluster, 1 across."""
    return (~c.same()).astype(float)


# -- local (per-vertex) guarantee ---------------------------------------------

@dataclass
class LocalGuaranteeReport:
    alpha: float
    A1: float
    A_inf: float
    ratios: np.ndarray
    max_ratio_over_Ainf: float
    mean_ratio_over_A1: float
    diameter_ok: bool
    negative_violations: int
    long_edge_weight_violations: int
    long_edge_count_violations: int
    zero_cost_violations: int

    @property
    def passed(self) -> bool:
        return (self.diameter_ok and self.negative_violations == 0
                and self.long_edge_weight_violations == 0
                and self.zero_cost_violations == 0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = self.ratios.tolist()
        d["passed"] = self.passed
        return d


def verify_local_guarantee(inst: Instance, x, c: Clustering,
                           params: PartitionParams) -> LocalGuaranteeReport:
    """Deterministic per-vertex bounds implied by the cluster diameter bound.

    (i)  negative-edge disagreement at u is at most y_u / (1 - 2R), i.e. 3 y_u
         at R = 1/3: a negative edge kept inside a cluster has x <= 2R.
    (ii) the positive edges with x_uv >= r carry weight at most y_u / r. The
         unweighted count of such edges is also reported; it is bounded by
         y_u / (alpha r) in general and by y_u / r only when weights are >= 1.
    """
    x = np.asarray(x, dtype=float)
    y = eval_y(inst, x)
    same = c.same()
    dis = disagreements(inst, c).dis
    slack = REL_SLACK * (1.0 + y)
    R, r = params.R, params.r

    diam_ok = all(x[np.ix_(m, m)].max() <= 2 * R for m in c.clusters())

    neg = np.where(inst.negative & same, inst.weight, 0.0).sum(axis=1)
    neg_bound = y / (1 - 2 * R) if R < 0.5 else np.full_like(y, np.inf)
    neg_viol = int(np.count_nonzero(neg > neg_bound + slack))

    long_pos = inst.positive & (x >= r)
    w_long = np.where(long_pos, inst.weight, 0.0).sum(axis=1)
    weight_viol = int(np.count_nonzero(w_long > y / r + slack))
    count_viol = int(np.count_nonzero(long_pos.sum(axis=1) > y / r + slack))

    zero_viol = int(np.count_nonzero((y == 0) & (dis > 0)))

    a = inst.alpha
    A1 = math.log(1 / a)
    A_inf = A1 / math.sqrt(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(y > 0, dis / y, 0.0)
    pos = y > 0
    max_inf = float(ratios.max() / A_inf) if A_inf > 0 and pos.any() else 0.0
    mean_1 = float(ratios[pos].mean() / A1) if A1 > 0 and pos.any() else 0.0
    return LocalGuaranteeReport(a, A1, A_inf, ratios, max_inf, mean_1, bool(diam_ok),
                                neg_viol, weight_viol, count_viol, zero_viol)


# -- decomposition verifiers --------------------------------------------------

@dataclass
class DecompositionCheck:
    """Monte Carlo summary of a partitioner.

    shell_violations counts points where the r-neighbourhood cut exceeds
    25 beta D^2 times the distance-weighted mass; size_violations counts
    light rounds with |P| > 2 D Y_P at points d(z, u) in [2R0, R]. sep_ratio
    is the largest excess of the empirical separation frequency over
    D d(u,v)/R, summed over Ball(u, R) after subtracting the Hoeffding slack,
    divided by beta^q Y(u); sep_ratio_raw is the same without the slack.
    """

    trials: int
    n: int
    diameter_ok: bool
    shell_violations: int
    mu_S_min: float | None
    mu_S_violations: int
    size_violations: int
    sep_ratio: float
    sep_flagged: int
    sep_ratio_raw: float
    epsilon: float
    heavy_selections: int
    light_selections: int
    Y_mean: float
    Y_max: float
    ratio_bound: float | None = None

    @property
    def ratio_ok(self) -> bool:
        return (self.sep_flagged == 0 and math.isfinite(self.sep_ratio)
                and (self.ratio_bound is None or self.sep_ratio <= self.ratio_bound))

    @property
    def passed(self) -> bool:
        return (self.diameter_ok and self.shell_violations == 0
                and self.mu_S_violations == 0 and self.size_violations == 0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        d["ratio_ok"] = self.ratio_ok
        return d


def hoeffding_eps(n: int, trials: int, delta: float = CONFIDENCE_DELTA) -> float:
    """Uniform two-sided slack over all n^2 pair frequencies at confidence 1 - delta."""
    if trials <= 0:
        return math.inf
    return math.sqrt(math.log(2 * max(n, 1) ** 2 / delta) / (2 * trials))


def _shell_check(A: np.ndarray, m: np.ndarray, params: PartitionParams) -> np.ndarray:
    """Boolean mask of points violating the shell inequality for the 0/1 cluster m.

    Evaluated pairwise from the definition, independently of the matrix form
    used inside compute_S.
    """
    sep = m[:, None] != m[None, :]
    touch = m[:, None] | m[None, :]
    lhs = np.count_nonzero((A <= params.r) & sep, axis=1)
    W = np.where(A <= 2 * params.R, A / params.R, 0.0)
    rhs = params.shell_coeff * np.where(touch, W, 0.0).sum(axis=1)
    return lhs > rhs * (1 + REL_SLACK)


def _Y(A: np.ndarray, m: np.ndarray, R: float) -> np.ndarray:
    """Y_P(u) = sum over Ball(u, 2R) of d(u,v)/R * or_P(u,v)."""
    touch = m[:, None] | m[None, :]
    return np.where((A <= 2 * R) & touch, A / R, 0.0).sum(axis=1)


@dataclass
class _RoundStats:
    diam_ok: bool
    shell_viol: int
    size_viol: int
    Y: np.ndarray


def _check_round(view: MetricView, sel: Selection, params: PartitionParams) -> _RoundStats:
    """Checks for one cluster drawn from ``view`` (local indexing)."""
    A = view.local
    m = np.isin(view.active, sel.members)
    diam = A[np.ix_(m, m)].max() if m.any() else 0.0
    Y = _Y(A, m, params.R)
    size_bad = 0
    if 3 * params.R0 < sel.t <= params.R1:
        dz = view.d[sel.pivot, view.active]
        cond = (dz >= 2 * params.R0) & (dz <= params.R)
        size = int(m.sum())
        size_bad = int(np.count_nonzero(cond & (size > 2 * params.D_beta * Y * (1 + REL_SLACK))))
    return _RoundStats(bool(diam <= 2 * params.R),
                       int(np.count_nonzero(_shell_check(A, m, params))),
                       size_bad, Y)


def _ratio(lhs: np.ndarray, rhs: np.ndarray) -> tuple[float, int]:
    """max lhs/rhs with 0/0 -> 0; positive lhs over zero rhs is flagged instead."""
    flagged = int(np.count_nonzero((rhs <= 0) & (lhs > 0)))
    pos = rhs > 0
    ratio = float((lhs[pos] / rhs[pos]).max()) if pos.any() else 0.0
    return max(ratio, 0.0), flagged


def _sum_pos(terms: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, np.maximum(terms, 0.0), 0.0).sum(axis=1)


def verify_cluster(view: MetricView, params: PartitionParams, trials: int = 10_000,
                   seed: int = 0, ratio_bound: float | None = None) -> DecompositionCheck:
    """Repeated single-cluster draws on ``view``; trial i uses seed + i."""
    A = view.local
    m_pts = view.size
    sep = np.zeros((m_pts, m_pts))
    touch = np.zeros((m_pts, m_pts))
    Ysum = np.zeros(m_pts)
    diam_ok, shell_viol, size_viol, mu_viol = True, 0, 0, 0
    mu_min, heavy, light, Y_max = math.inf, 0, 0, 0.0
    done = 0
    for i in range(trials):
        try:
            sel = cluster_select(view, params, Xoshiro256(seed + i))
        except (GuaranteeViolation, EmptyRadiusSet):
            mu_viol += 1
            continue
        done += 1
        st = _check_round(view, sel, params)
        diam_ok &= st.diam_ok
        shell_viol += st.shell_viol
        size_viol += st.size_viol
        if sel.heavy:
            heavy += 1
        else:
            light += 1
            mu_min = min(mu_min, sel.mu_S)
        m = np.isin(view.active, sel.members)
        sep += m[:, None] != m[None, :]
        touch += m[:, None] | m[None, :]
        Ysum += st.Y
        Y_max = max(Y_max, float(st.Y.max()))
    eps = hoeffding_eps(m_pts, done)
    if done:
        p_hat, v_hat = sep / done, touch / done
        in_R = A <= params.R
        excess = p_hat - params.D_beta * A / params.R * v_hat
        rhs = params.beta ** params.q * Ysum / done
        ratio, flagged = _ratio(_sum_pos(excess - eps, in_R), rhs)
        raw, _ = _ratio(_sum_pos(excess, in_R), rhs)
        Y_mean = float(Ysum.mean() / done) if m_pts else 0.0
    else:
        ratio, flagged, raw, Y_mean = math.nan, 0, math.nan, 0.0
    return DecompositionCheck(trials, m_pts, diam_ok, shell_viol,
                              None if light == 0 else float(mu_min), mu_viol, size_viol,
                              ratio, flagged, raw, eps, heavy, light, Y_mean, Y_max, ratio_bound)


def verify_decomposition(view: MetricView, params: PartitionParams, trials: int = 10_000,
                         seed: int = 0, ratio_bound: float | None = None,
                         per_round: bool = True) -> DecompositionCheck:
    """Repeated full partitions of ``view``; trial i uses seed + i.

    Every trial asserts the diameter bound and the partition-level shell
    inequality at each point. ``per_round`` additionally re-checks every
    individual cluster against the points remaining when it was drawn.
    """
    A = view.local
    m_pts = view.size
    W = np.where(A <= 2 * params.R, A / params.R, 0.0)
    rhs3 = params.shell_coeff * W.sum(axis=1) * (1 + REL_SLACK)
    near = A <= params.r
    sep = np.zeros((m_pts, m_pts))
    diam_ok, shell_bad, size_bad, mu_viol = True, 0, 0, 0
    mu_min, heavy, light, Y_max, Y_tot, rounds = math.inf, 0, 0, 0.0, 0.0, 0
    done = 0
    for i in range(trials):
        sels: list[Selection] = []
        try:
            c = partition_metric(view, params, Xoshiro256(seed + i), selections=sels)
        except (GuaranteeViolation, EmptyRadiusSet):
            mu_viol += 1
            continue
        done += 1
        same = c.same()
        for members in c.clusters():
            if A[np.ix_(members, members)].max() > 2 * params.R:
                diam_ok = False
        shell_bad += int(np.count_nonzero(np.count_nonzero(near & ~same, axis=1) > rhs3))
        sep += ~same
        for sel in sels:
            if sel.heavy:
                heavy += 1
            else:
                light += 1
                mu_min = min(mu_min, sel.mu_S)
            if per_round:
                st = _check_round(view.restrict(sel.active), sel, params)
                diam_ok &= st.diam_ok
                shell_bad += st.shell_viol
                size_bad += st.size_viol
                Y_max = max(Y_max, float(st.Y.max()))
                Y_tot += float(st.Y.mean())
                rounds += 1
    eps = hoeffding_eps(m_pts, done)
    if done:
        p_hat = sep / done
        excess = p_hat - params.D_beta * A / params.R
        in_R = A <= params.R
        rhs = params.beta ** params.q * W.sum(axis=1)
        ratio, flagged = _ratio(_sum_pos(excess - eps, in_R), rhs)
        raw, _ = _ratio(_sum_pos(excess, in_R), rhs)
    else:
        ratio, flagged, raw = math.nan, 0, math.nan
    return DecompositionCheck(trials, m_pts, diam_ok, shell_bad,
                              None if light == 0 else float(mu_min), mu_viol, size_bad,
                              ratio, flagged, raw, eps, heavy, light,
                              Y_tot / rounds if rounds else 0.0, Y_max, ratio_bound)


# -- closed-form claims about F -----------------------------------------------

@dataclass
class FClaimsReport:
    beta: float
    q: float
    identity_lhs: float
    identity_rhs: float
    identity_residual: float
    exp_identity_residual: float
    pairs: int
    grid_violations: int
    max_grid_excess: float
    tol: float = 1e-12

    @property
    def passed(self) -> bool:
        return (self.identity_residual <= self.tol and self.exp_identity_residual <= self.tol
                and self.grid_violations == 0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def check_F_claims(params: PartitionParams, grid_points: int = 2001,
                   max_pairs: int | None = None, seed: int = 0) -> FClaimsReport:
    """Tail identity of F at R/2 - 2R0 and its increment bound on a grid.

    With ``max_pairs`` the ordered grid pairs are sub-sampled uniformly
    (with replacement) instead of enumerated.
    """
    b, q, R, R0, D = params.beta, params.q, params.R, params.R0, params.D_beta
    bq1 = b ** (q + 1)
    lhs = float(1 - F_cdf(R / 2 - 2 * R0, params))
    rhs = math.expm1(2) * bq1 / (1 - bq1)
    exp_res = abs(math.exp(-D / 2) - bq1)

    xs = np.linspace(0.0, R / 2, grid_points)
    Fx = F_cdf(xs, params)
    if max_pairs is None:
        i, j = np.triu_indices(grid_points)
    else:
        rng = Xoshiro256(seed)
        u = rng.uniforms(2 * max_pairs).reshape(2, max_pairs)
        a, c = (np.minimum((u * grid_points).astype(np.int64), grid_points - 1))
        i, j = np.minimum(a, c), np.maximum(a, c)
    inc = Fx[j] - Fx[i]
    bound = D * (xs[j] - xs[i]) / R * (1 - Fx[i] + 2 * bq1)
    excess = inc - bound
    return FClaimsReport(b, q, lhs, rhs, abs(lhs - rhs), exp_res, int(i.size),
                         int(np.count_nonzero(excess > 1e-12)), float(excess.max()))


# -- pi_S ---------------------------------------------------------------------

@dataclass
class PiReport:
    intervals: int
    samples: int
    lipschitz_violations: int
    monotone_violations: int
    max_inverse_residual: float
    inverse_outside_S: int
    inverse_not_increasing: int
    tol: float = 1e-12

    @property
    def passed(self) -> bool:
        return (self.lipschitz_violations == 0 and self.monotone_violations == 0
                and self.max_inverse_residual <= self.tol and self.inverse_outside_S == 0
                and self.inverse_not_increasing == 0)

    def merge(self, other: "PiReport") -> "PiReport":
        return PiReport(self.intervals + other.intervals, self.samples + other.samples,
                        self.lipschitz_violations + other.lipschitz_violations,
                        self.monotone_violations + other.monotone_violations,
                        max(self.max_inverse_residual, other.max_inverse_residual),
                        self.inverse_outside_S + other.inverse_outside_S,
                        self.inverse_not_increasing + other.inverse_not_increasing, self.tol)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def random_interval_set(rng: Xoshiro256, k: int, lo: float = 0.0, hi: float = 1.0,
                        closed_end: bool | None = None) -> IntervalSet:
    """k disjoint intervals with endpoints drawn uniformly from [lo, hi]."""
    while True:
        pts = np.sort(lo + (hi - lo) * rng.uniforms(2 * k))
        if np.all(np.diff(pts) > 0):
            break
    pieces = pts.reshape(k, 2)
    if closed_end is None:
        closed_end = rng.random() < 0.5
    return IntervalSet(tuple(map(tuple, pieces)), closed_end)


def check_pi_properties(S: IntervalSet, samples: int = 10_000, seed: int = 0,
                        domain: tuple[float, float] | None = None) -> PiReport:
    """Lipschitz, monotonicity and right-inverse checks of pi_S on random points."""
    rng = Xoshiro256(seed)
    if domain is None:
        hi = S.intervals[-1][1] if S.intervals else 1.0
        domain = (0.0, hi * 1.1)
    lo, hi = domain
    x = lo + (hi - lo) * rng.uniforms(2 * samples).reshape(2, samples)
    x1, x2 = np.minimum(x[0], x[1]), np.maximum(x[0], x[1])
    f1, f2 = pi_forward_array(S, x1), pi_forward_array(S, x2)
    lip = int(np.count_nonzero(np.abs(f2 - f1) > (x2 - x1) + 1e-12))
    mono = int(np.count_nonzero(f2 < f1))

    mu = S.measure
    ys = np.sort(mu * rng.uniforms(samples))
    ts = np.array([pi_inverse(S, float(y)) for y in ys])
    res = max((abs(pi_forward(S, float(t)) - y) for t, y in zip(ts, ys)), default=0.0)
    outside = sum(1 for t in ts if float(t) not in S) if S.intervals else 0
    # strictly increasing wherever the y gap is resolvable in floating point
    dt, dy = np.diff(ts), np.diff(ys)
    not_inc = int(np.count_nonzero((dt < 0) | ((dy > 1e-12) & (dt <= 0))))
    return PiReport(len(S), samples, lip, mono, float(res), outside, not_inc)


# -- ball-growth function -----------------------------------------------------

@dataclass
class PhiCheck:
    gamma: float
    eta: float
    r_prime: float
    R_prime: float
    mu_S_prime: float
    phi_R_prime: float
    lower_bound: float
    phi_samples: list
    skipped: bool
    bound_ok: bool

    @property
    def passed(self) -> bool:
        return self.skipped or self.bound_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def check_phi_bound(view: MetricView, z: int, params: PartitionParams) -> PhiCheck:
    """Growth bound Phi(R') >= exp(eta * mu(S') - 1) around pivot z.

    Phi(t) = |Ball(z, t + 3R0)| / |Ball(z, 3R0)| and S' is the set of
    t in [0, R' - r'] with Phi(t + r') >= Phi(t) + gamma * int_0^t Phi,
    where r' = 2r, gamma = 25 r / R0^2 and R' = R1 - 3R0 - r. Between
    breakpoints both Phi terms are constant and the integral is linear, so
    S' is measured exactly piece by piece.
    """
    r, R0 = params.r, params.R0
    rp = 2 * r
    gamma = SHELL_CONSTANT * r / R0 ** 2
    eta = math.sqrt(gamma / (math.expm1(1) * rp))
    Rp = params.R1 - 3 * R0 - r
    dz = np.sort(view.d[z, view.active])
    base = 3 * R0

    def N(s):
        return int(np.searchsorted(dz, s, side="right"))

    c0 = N(base)
    T = Rp - rp
    cuts = np.concatenate([dz - base, dz - base - rp])
    bps = np.unique(np.concatenate([[0.0], cuts[(cuts > 0) & (cuts < T)], [max(T, 0.0)]]))
    samples = [(float(t), N(t + base) / c0) for t in np.unique(np.concatenate(
        [[0.0], (dz - base)[(dz > base) & (dz - base <= Rp)], [Rp]]))]
    phi_Rp = N(Rp + base) / c0

    if gamma * rp >= 1:
        return PhiCheck(gamma, eta, rp, Rp, math.nan, phi_Rp, math.nan, samples, True, True)

    mu, integral = 0.0, 0.0
    for a, b in zip(bps[:-1], bps[1:]):
        Na = N(a + base)
        gap = N(a + base + rp) - Na - gamma * integral
        if gap >= 0:
            mu += min(b - a, gap / (gamma * Na))
        integral += Na * (b - a)
    bound = math.exp(eta * mu - 1)
    ok = phi_Rp >= bound * (1 - 1e-9)
    return PhiCheck(gamma, eta, rp, Rp, mu, phi_Rp, bound, samples, False, bool(ok))



# -- integrality gap ----------------------------------------------------------

GAP_COLUMNS = ("alpha", "p", "n", "fractional_cost", "integral_lb",
               "bruteforce_opt_or_null", "ratio")


@dataclass
class GapReport:
    rows: list
    slopes: dict
    expected: dict
    max_feasibility_residual: float

    def to_csv(self) -> str:
        lines = [",".join(GAP_COLUMNS)]
        for row in self.rows:
            vals = []
            for k in GAP_COLUMNS:
                v = row[k]
                if v is None:
                    vals.append("")
                elif isinstance(v, str):
                    vals.append(v)
                elif isinstance(v, int):
                    vals.append(str(v))
                else:
                    vals.append(repr(float(v)))
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return asdict(self)


def gap_exponent(p: float) -> float:
    return 0.5 - 0.5 / p if math.isfinite(p) else 0.5


def gap_report(alphas, ps, bruteforce_max_n: int = 10) -> GapReport:
    """Ratio of the integral lower bound 1 to the fractional path-metric cost.

    Slopes are least-squares fits of ln(ratio) against ln(1/alpha), one per p.
    """
    ps = [parse_p(p) for p in ps]
    rows, resid = [], 0.0
    for a in alphas:
        inst = gen_gap(a)
        for p in ps:
            sol = gap_fractional(inst, p)
            resid = max(resid, check_feasible(sol.x).max_triangle_residual)
            bf = brute_force_opt(inst, p, max_n=bruteforce_max_n)[0] \
                if inst.n <= bruteforce_max_n else None
            rows.append({"alpha": float(a), "p": format_p(p), "n": gap_size(a),
                         "fractional_cost": sol.objective, "integral_lb": 1.0,
                         "bruteforce_opt_or_null": bf, "ratio": 1.0 / sol.objective})
    slopes, expected = {}, {}
    for p in ps:
        key = format_p(p)
        pts = [(math.log(1 / r["alpha"]), math.log(r["ratio"]))
               for r in rows if r["p"] == key]
        expected[key] = gap_exponent(p)
        if len({u for u, _ in pts}) >= 2:
            u, v = np.array(pts).T
            slopes[key] = float(np.polyfit(u, v, 1)[0])
        else:
            slopes[key] = None
    return GapReport(rows, slopes, expected, resid)
