"""Constants of the metric decomposition and their admissible regimes.

Given radii r < R and an order q >= 1::

    beta  = r / R
    D     = 2 (q + 1) ln(1 / beta)
    R0    = R / D,    R1 = R - R0
    rho   = beta ** -(q + 1)

``strict`` mode admits only betas satisfying the working assumptions the
guarantees are proved under; ``practical`` mode needs just r < R0 and a
nonempty radius range (3 R0, R1].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import InvalidParameter

log = logging.getLogger(__name__)

STRICT = "strict"
PRACTICAL = "practical"
MODES = (STRICT, PRACTICAL)

SHELL_CONSTANT = 25.0
# beta used by the end-to-end driver in practical mode when the alpha-derived
# radius is not admissible (moderate alpha).
PRACTICAL_BETA_CAP = 0.05


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def strict_violations(beta: float, q: float) -> list[str]:
    """Which of the four strict working assumptions fail at (beta, q), with R = 1."""
    if not 0 < beta < 1:
        return ["beta outside (0, 1)"]
    D = 2 * (q + 1) * math.log(1 / beta)
    r, R = beta, 1.0
    R0 = R / D
    R1 = R - R0
    out = []
    if not (r < R0 < R1 < R):
        out.append("r < R0 < R1 < R")
    if not (R0 + r < R1 / 100):
        out.append("R0 + r < R1/100")
    if not (2 * beta * D < 1):
        out.append("2 beta D < 1")
    if not (beta * D < 1 / (5 * math.sqrt(2))):
        out.append("beta D < 1/(5 sqrt 2)")
    return out


@dataclass(frozen=True)
class PartitionParams:
    r: float
    R: float
    q: float
    beta: float
    D_beta: float
    R0: float
    R1: float
    rho: float
    mode: str

    @classmethod
    def from_radii(cls, r: float, R: float, q: float = 2.0,
                   mode: str = PRACTICAL, check: bool = True) -> "PartitionParams":
        """Derived constants for radii r < R.

        ``check=False`` skips the mode's admissibility test; such parameters
        are only fit for evaluating closed-form quantities, not for partitioning.
        """
        _check_mode(mode)
        if not (r > 0 and R > 0 and r < R):
            raise InvalidParameter(f"need 0 < r < R, got r={r}, R={R}")
        if q < 1:
            raise InvalidParameter(f"q must be >= 1, got {q}")
        beta = r / R
        D = 2 * (q + 1) * math.log(1 / beta)
        R0 = R / D
        R1 = R - R0
        rho = beta ** -(q + 1)
        p = cls(r, R, float(q), beta, D, R0, R1, rho, mode)
        if not check:
            return p
        if mode == STRICT:
            bad = strict_violations(beta, q)
            if bad:
                raise InvalidParameter(
                    f"beta={beta:.6g} not admissible in strict mode: {', '.join(bad)}")
        else:
            if not r < R0:
                raise InvalidParameter(f"practical mode needs r < R0 (r={r:.6g}, R0={R0:.6g})")
            if not 3 * R0 < R1:
                raise InvalidParameter(f"radius range (3R0, R1] is empty (R0={R0:.6g})")
        return p

    @classmethod
    def from_beta(cls, beta: float, R: float = 1 / 3, q: float = 2.0,
                  mode: str = PRACTICAL, check: bool = True) -> "PartitionParams":
        return cls.from_radii(beta * R, R, q, mode, check)

    @property
    def shell_coeff(self) -> float:
        """Right-hand-side coefficient 25 * beta * D^2 of the shell condition."""
        return SHELL_CONSTANT * self.beta * self.D_beta ** 2

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("r", "R", "q", "beta", "D_beta", "R0", "R1", "rho", "mode")}


def beta_star(q: float, tol: float = 1e-12) -> float:
    """Largest beta in (0, 1/e) meeting all four strict assumptions, by bisection.

    The admissible set is an interval (0, beta*): beta * D and 101/D + 100 beta
    both increase with beta on (0, 1/e). Returns the feasible end of the
    final bracket.
    """
    if q < 1:
        raise InvalidParameter(f"q must be >= 1, got {q}")
    lo, hi = 0.0, 1 / math.e
    # find a feasible lower end on a log grid first
    probe = 1e-3
    while strict_violations(probe, q):
        probe *= 1e-3
        if probe < 1e-300:
            raise InvalidParameter(f"no admissible beta for q={q}")
    lo = probe
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if strict_violations(mid, q):
            hi = mid
        else:
            lo = mid
    return lo


def radius_from_alpha(alpha: float) -> float:
    """r = sqrt(alpha) / ln(1/alpha)."""
    if not 0 < alpha < 1:
        raise InvalidParameter(f"alpha must be in (0, 1), got {alpha}")
    return math.sqrt(alpha) / math.log(1 / alpha)


def alpha_star(q: float = 2.0, R: float = 1 / 3) -> float:
    """Alpha at which r(alpha) / R equals beta_star(q)."""
    target = beta_star(q)

    def f(log_a):
        return math.log(radius_from_alpha(math.exp(log_a)) / R) - math.log(target)

    # r(alpha)/R is increasing for alpha < e^-2
    return math.exp(brentq(f, -700.0, -2.0, xtol=1e-14, rtol=1e-15))


def derive_params(alpha: float, q: float = 2.0, R: float = 1 / 3,
                  mode: str = PRACTICAL) -> PartitionParams:
    """Parameters for the clustering driver from the asymmetry alpha.

    Strict mode clamps alpha to alpha_star first, so the strict assumptions
    hold by construction. Practical mode uses alpha as given and rejects it
    when the resulting beta is not admissible.
    """
    _check_mode(mode)
    if not 0 < alpha < 1:
        raise InvalidParameter(f"alpha must be in (0, 1), got {alpha}")
    if mode == STRICT:
        # a hair inside the root so rounding cannot push beta past beta*
        a_star = alpha_star(q, R) * (1 - 1e-9)
        if alpha > a_star:
            log.info("alpha=%g clamped to alpha*=%g", alpha, a_star)
            alpha = a_star
    r = radius_from_alpha(alpha)
    if r >= R:
        raise InvalidParameter(f"alpha={alpha} gives beta={r / R:.6g} >= 1")
    return PartitionParams.from_radii(r, R, q, mode)


def practical_params(alpha: float, q: float = 2.0, R: float = 1 / 3,
                     beta_cap: float = PRACTICAL_BETA_CAP) -> PartitionParams:
    """Alpha-derived parameters with beta capped so moderate alpha stays admissible."""
    try:
        r = radius_from_alpha(alpha)
    except InvalidParameter:
        r = math.inf
    beta = min(r / R, beta_cap)
    if beta < beta_cap:
        try:
            return PartitionParams.from_radii(beta * R, R, q, PRACTICAL)
        except InvalidParameter:
            pass
    return PartitionParams.from_beta(beta_cap, R, q, PRACTICAL)
