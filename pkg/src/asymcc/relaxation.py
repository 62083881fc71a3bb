"""Convex relaxation: minimise ||y||_p over the multicut metric polytope.

``x[u, v]`` is a fractional co-clustering distance and ``y[u]`` the fractional
disagreement at u, a fixed affine function of ``x``. Two solvers share one
contract: a conic backend (cvxpy) that is accurate to solver tolerance, and a
dependency-free projected-subgradient method with Dykstra triangle fixing.
Both hand back a metric: the final iterate is repaired by its shortest-path
closure before ``y`` and the objective are recomputed.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter
from .instance import Instance, gap_size

log = logging.getLogger(__name__)


def parse_p(p) -> float:
    """Accept 1, 2, any real >= 1, or 'inf'."""
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "∞"):
            return math.inf
        try:
            p = float(s)
        except ValueError:
            raise InvalidParameter(f"bad norm order {p!r}") from None
    p = float(p)
    if math.isnan(p) or p < 1:
        raise InvalidParameter(f"norm order must be >= 1, got {p}")
    return p


def format_p(p: float) -> str:
    return "inf" if math.isinf(p) else (str(int(p)) if float(p).is_integer() else repr(p))


def objective(y, p) -> float:
    """l_p norm of a nonnegative vector; max for p = inf."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return 0.0
    p = parse_p(p)
    if math.isinf(p):
        return float(y.max())
    if p == 1:
        return float(y.sum())
    m = float(y.max())
    if m == 0:
        return 0.0
    # scaled to avoid overflow for large p
    return m * float(np.sum((y / m) ** p) ** (1.0 / p))


def eval_y(inst: Instance, x) -> np.ndarray:
    """Per-vertex fractional disagreement (P1) for a distance matrix x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n, inst.n):
        raise InvalidParameter(f"x has shape {x.shape}, expected {(inst.n, inst.n)}")
    contrib = np.where(inst.positive, inst.weight * x,
                       np.where(inst.negative, inst.weight * (1.0 - x), 0.0))
    return contrib.sum(axis=1)


@dataclass
class FeasibilityReport:
    max_triangle_residual: float
    range_violations: int
    symmetry_violations: int

    def ok(self, tol: float) -> bool:
        return (self.max_triangle_residual <= tol and not self.range_violations
                and not self.symmetry_violations)


def triangle_residual(x) -> float:
    """max over ordered triples of x[a, c] - x[a, b] - x[b, c], floored at 0."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    worst = 0.0
    for b in range(n):
        # x[a, c] - x[a, b] - x[b, c] for fixed middle vertex b
        viol = x - x[:, b][:, None] - x[b, :][None, :]
        worst = max(worst, float(viol.max()))
    return worst


def check_feasible(x, tol: float = 0.0) -> FeasibilityReport:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    off = ~np.eye(n, dtype=bool)
    rng_bad = int(np.count_nonzero(((x < -tol) | (x > 1 + tol)) & off))
    rng_bad += int(np.count_nonzero(np.abs(np.diag(x)) > tol))
    sym_bad = int(np.count_nonzero(np.triu(np.abs(x - x.T) > tol, 1)))
    return FeasibilityReport(triangle_residual(x) if n else 0.0, rng_bad, sym_bad)


def project_metric(x) -> np.ndarray:
    """Shortest-path closure of x, clamped to [0, 1].

    The closure never increases an entry and is a metric up to rounding (the
    triangle residual is a few ulps at most); clamping to [0, 1] afterwards
    keeps the triangle inequality.
    """
    d = np.array(x, dtype=float)
    n = d.shape[0]
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    for k in range(n):
        np.minimum(d, d[:, k][:, None] + d[k, :][None, :], out=d)
    np.clip(d, 0.0, 1.0, out=d)
    return d


@dataclass
class SolverOptions:
    max_iters: int = 5000
    step0: float | None = None      # default 1 / (n * max weight)
    tol_residual: float = 1e-6
    tol_obj: float = 1e-8
    projection_rounds: int = 3
    method: str = "conic"           # "conic" | "subgradient"

    def __post_init__(self):
        if self.max_iters <= 0 or self.projection_rounds <= 0:
            raise InvalidParameter("max_iters and projection_rounds must be positive")
        if self.tol_residual <= 0 or self.tol_obj <= 0:
            raise InvalidParameter("tolerances must be positive")
        if self.step0 is not None and self.step0 <= 0:
            raise InvalidParameter("step0 must be positive")
        if self.method not in ("conic", "subgradient"):
            raise InvalidParameter(f"unknown solver method {self.method!r}")


@dataclass
class FractionalSolution:
    x: np.ndarray
    y: np.ndarray
    p: float
    objective: float
    max_triangle_residual: float
    converged: bool = True
    iterations: int = 0
    pre_repair_objective: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "p": format_p(self.p),
            "objective": self.objective,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "max_triangle_residual": self.max_triangle_residual,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, doc) -> "FractionalSolution":
        x = np.array(doc["x"], dtype=float)
        return cls(x=x, y=np.array(doc["y"], dtype=float), p=parse_p(doc["p"]),
                   objective=float(doc["objective"]),
                   max_triangle_residual=float(doc["max_triangle_residual"]),
                   converged=bool(doc.get("converged", True)))


def solution_from_x(inst: Instance, x, p, *, converged=True, iterations=0,
                    pre_repair_objective=None) -> FractionalSolution:
    x = np.asarray(x, dtype=float)
    y = eval_y(inst, x)
    return FractionalSolution(
        x=x, y=y, p=parse_p(p), objective=objective(y, p),
        max_triangle_residual=triangle_residual(x), converged=converged,
        iterations=iterations, pre_repair_objective=pre_repair_objective)


def solve_cp(inst: Instance, p, opts: SolverOptions | None = None) -> FractionalSolution:
    """Solve the relaxation and return an exactly metric fractional solution."""
    opts = opts or SolverOptions()
    p = parse_p(p)
    if inst.n == 1:
        return solution_from_x(inst, np.zeros((1, 1)), p)
    if opts.method == "conic":
        return _solve_conic(inst, p)
    return _solve_subgradient(inst, p, opts)


# ------------------------------------------------------------ conic backend

def _pair_index(n):
    iu, iv = np.triu_indices(n, 1)
    idx = -np.ones((n, n), dtype=np.int64)
    idx[iu, iv] = np.arange(iu.size)
    idx[iv, iu] = idx[iu, iv]
    return iu, iv, idx


def _triangle_matrix(n, idx):
    import scipy.sparse as sp

    rows, cols, vals = [], [], []
    row = 0
    for a, b, c in itertools.combinations(range(n), 3):
        for far, s1, s2 in ((idx[a, c], idx[a, b], idx[b, c]),
                            (idx[a, b], idx[a, c], idx[b, c]),
                            (idx[b, c], idx[a, b], idx[a, c])):
            rows += [row, row, row]
            cols += [far, s1, s2]
            vals += [1.0, -1.0, -1.0]
            row += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(row, idx.max() + 1))


def _affine_y(inst: Instance, iu, iv):
    """y = B z + c for z the upper-triangular vector of x."""
    import scipy.sparse as sp

    n, m = inst.n, iu.size
    w = inst.weight[iu, iv]
    s = np.where(inst.sign[iu, iv] > 0, 1.0, -1.0)
    coef = s * w
    cols = np.arange(m)
    B = sp.csr_matrix((np.concatenate([coef, coef]),
                       (np.concatenate([iu, iv]), np.concatenate([cols, cols]))),
                      shape=(n, m))
    c = np.zeros(n)
    neg = s < 0
    np.add.at(c, iu[neg], w[neg])
    np.add.at(c, iv[neg], w[neg])
    return B, c


def _solve_conic(inst: Instance, p: float) -> FractionalSolution:
    import cvxpy as cp

    n = inst.n
    iu, iv, idx = _pair_index(n)
    B, c = _affine_y(inst, iu, iv)
    z = cp.Variable(iu.size)
    cons = [z >= 0, z <= 1]
    if n >= 3:
        cons.append(_triangle_matrix(n, idx) @ z <= 0)
    y = B @ z + c
    # Scale by the largest weight so solver tolerances are relative.
    scale = float(inst.weight.max()) or 1.0
    obj = cp.norm(y / scale, "inf" if math.isinf(p) else p)
    prob = cp.Problem(cp.Minimize(obj), cons)
    with warnings.catch_warnings():
        # an inaccurate status is recorded in meta and logged below instead
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10,
                       tol_feas=1e-10)
        except cp.error.SolverError:
            prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200_000)
    if prob.status != "optimal":
        log.info("conic solver status %s", prob.status)
    ok = prob.status in ("optimal", "optimal_inaccurate") and z.value is not None
    zv = np.clip(np.asarray(z.value if z.value is not None else np.zeros(iu.size)), 0, 1)
    x = np.zeros((n, n))
    x[iu, iv] = zv
    x[iv, iu] = zv
    raw = objective(np.maximum(eval_y(inst, x), 0.0), p)
    x = project_metric(x)
    sol = solution_from_x(inst, x, p, converged=ok and prob.status == "optimal",
                          pre_repair_objective=raw)
    sol.meta["status"] = prob.status
    return sol


# ---------------------------------------------------- first-order backend

def _grad_norm(y: np.ndarray, p: float) -> np.ndarray:
    """A subgradient of ||y||_p at y >= 0."""
    if math.isinf(p):
        g = np.zeros_like(y)
        g[int(np.argmax(y))] = 1.0
        return g
    if p == 1:
        return np.ones_like(y)
    nrm = objective(y, p)
    if nrm == 0:
        return np.zeros_like(y)
    return (y / nrm) ** (p - 1)


def _dykstra_triangles(x: np.ndarray, triples: np.ndarray, rounds: int) -> np.ndarray:
    """Cyclic Dykstra projection onto the triangle half-spaces and [0, 1].

    Each constraint x_ac - x_ab - x_bc <= 0 has normal (1, -1, -1) on the
    three pair coordinates; box constraints are handled as one extra set.
    """
    n = x.shape[0]
    iu, iv = np.triu_indices(n, 1)
    z = x[iu, iv].copy()
    idx = -np.ones((n, n), dtype=np.int64)
    idx[iu, iv] = np.arange(iu.size)
    idx[iv, iu] = idx[iu, iv]
    cons = []
    for a, b, c in triples:
        ab, ac, bc = idx[a, b], idx[a, c], idx[b, c]
        cons += [(ac, ab, bc), (ab, ac, bc), (bc, ab, ac)]
    corr = np.zeros((len(cons), 3))
    box_corr = np.zeros_like(z)
    zl = z.tolist()
    for _ in range(rounds):
        for k, (i, j, l) in enumerate(cons):
            ck = corr[k]
            vi, vj, vl = zl[i] + ck[0], zl[j] + ck[1], zl[l] + ck[2]
            s = vi - vj - vl
            if s > 0:
                t = s / 3.0
                ni, nj, nl = vi - t, vj + t, vl + t
            else:
                ni, nj, nl = vi, vj, vl
            ck[0], ck[1], ck[2] = vi - ni, vj - nj, vl - nl
            zl[i], zl[j], zl[l] = ni, nj, nl
        zb = np.asarray(zl) + box_corr
        clipped = np.clip(zb, 0.0, 1.0)
        box_corr = zb - clipped
        zl = clipped.tolist()
    out = np.zeros_like(x)
    out[iu, iv] = zl
    out[iv, iu] = zl
    return out


def _solve_subgradient(inst: Instance, p: float, opts: SolverOptions) -> FractionalSolution:
    n = inst.n
    sgn = np.where(inst.positive, 1.0, np.where(inst.negative, -1.0, 0.0)) * inst.weight
    step0 = opts.step0 or 1.0 / (n * float(inst.weight.max()))
    triples = list(itertools.combinations(range(n), 3))
    x = np.full((n, n), 0.5)
    np.fill_diagonal(x, 0.0)
    best_x = project_metric(x)
    best_obj = objective(eval_y(inst, best_x), p)
    history = []
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        y = eval_y(inst, x)
        g_y = _grad_norm(y, p)
        g = (g_y[:, None] + g_y[None, :]) * sgn
        x = np.clip(x - (step0 / math.sqrt(it)) * g, 0.0, 1.0)
        np.fill_diagonal(x, 0.0)
        x = _dykstra_triangles(x, triples, opts.projection_rounds)
        cand = project_metric(x)
        cand_obj = objective(eval_y(inst, cand), p)
        if cand_obj < best_obj:
            best_obj, best_x = cand_obj, cand
        cur = objective(eval_y(inst, x), p)
        history.append(cur)
        if len(history) > 50:
            old = history[-51]
            rel = abs(old - cur) / max(abs(old), 1e-300)
            if triangle_residual(x) <= opts.tol_residual and rel <= opts.tol_obj:
                converged = True
                break
    if not converged:
        log.warning("subgradient solver stopped at max_iters=%d", opts.max_iters)
    return solution_from_x(inst, best_x, p, converged=converged, iterations=it,
                           pre_repair_objective=objective(eval_y(inst, x), p))


# ------------------------------------------------------- gap instance CP

def gap_fractional(inst: Instance, p) -> FractionalSolution:
    """Path-distance fractional solution x_uv = |u - v| / (n - 1) for a gap instance."""
    n = inst.n
    if n < 3 or n != gap_size(inst.alpha) or not _is_gap_shape(inst):
        raise InvalidParameter("instance is not a gap-family instance")
    idx = np.arange(n)
    x = np.abs(idx[:, None] - idx[None, :]) / (n - 1)
    return solution_from_x(inst, x, p)


def _is_gap_shape(inst: Instance) -> bool:
    n = inst.n
    neg = np.argwhere(np.triu(inst.negative, 1))
    if neg.tolist() != [[0, n - 1]]:
        return False
    path = np.zeros((n, n), dtype=bool)
    i = np.arange(n - 1)
    path[i, i + 1] = path[i + 1, i] = True
    off = ~np.eye(n, dtype=bool)
    other = off & ~path & inst.positive
    return (np.all(inst.weight[path] == 1.0) and inst.weight[0, n - 1] == 1.0
            and np.all(inst.weight[other] == inst.alpha))
