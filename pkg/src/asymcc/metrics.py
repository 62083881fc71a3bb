"""Seeded finite metric spaces for exercising the decomposition.

All generators draw from ``Xoshiro256`` so a seed fixes the space on every
platform.
"""

from __future__ import annotations

import numpy as np

from .params import PartitionParams
from .partition import MetricView
from .rng import Xoshiro256


def euclidean(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=-1))
    return np.minimum(d, d.T)  # exact symmetry


def blob_points(n: int, seed: int = 0, k: int = 5, spread: float = 0.08) -> np.ndarray:
    """n points around k centres in the unit square, offsets uniform in +-spread."""
    rng = Xoshiro256(seed)
    centres = rng.uniforms(2 * k).reshape(k, 2)
    offs = (2 * rng.uniforms(2 * n) - 1).reshape(n, 2) * spread
    return centres[np.arange(n) * k // n] + offs


def blob_metric(n: int = 100, seed: int = 0, k: int = 5, spread: float = 0.08) -> MetricView:
    """The default test corpus: Euclidean blobs in the unit square."""
    return MetricView(euclidean(blob_points(n, seed, k, spread)))


def line_metric(xs) -> MetricView:
    return MetricView(euclidean(np.asarray(xs, dtype=float)))


def site_line_metric(params: PartitionParams, sites: int = 24, per_site: int = 12,
                     length: float = 0.5, seed: int = 0) -> MetricView:
    """Points on a line grouped in tight sites, for tiny-beta (strict) parameters.

    Sites sit at jittered positions along [0, length]; each holds ``per_site``
    points spaced r/4 apart, so r-balls straddle site members and the
    admissible radius set has genuine gaps at every site.
    """
    rng = Xoshiro256(seed)
    gap = length / sites
    base = gap * (np.arange(sites) + 0.25 + 0.5 * rng.uniforms(sites))
    xs = (base[:, None] + params.r / 4 * np.arange(per_site)[None, :]).ravel()
    return line_metric(xs)


def star_metric(leaves: int, arm: float) -> MetricView:
    """Centre 0 at distance ``arm`` from every leaf; leaves are 2*arm apart."""
    n = leaves + 1
    d = np.full((n, n), 2 * arm)
    d[0, :] = d[:, 0] = arm
    np.fill_diagonal(d, 0.0)
    return MetricView(d)


def separated_metric(n: int, gap: float) -> MetricView:
    """n points with every pairwise distance equal to ``gap``."""
    d = np.full((n, n), float(gap))
    np.fill_diagonal(d, 0.0)
    return MetricView(d)


def clump_line_metric(params: PartitionParams, clumps: int = 6, per_clump: int = 8,
                      core: int = 12, seed: int = 0) -> MetricView:
    """A dense core at 0 plus tight clumps scattered over (3 R0, R1).

    Each clump spans r/2, so radii cutting through one fail the shell
    inequality whenever the shell constant is small (beta D well below 1);
    the core is the unique largest R0-ball.
    """
    rng = Xoshiro256(seed)
    lo, hi = 3 * params.R0, params.R1
    width = (hi - lo) / clumps
    starts = lo + width * (np.arange(clumps) + 0.2 + 0.5 * rng.uniforms(clumps))
    core_pts = params.R0 / 4 * rng.uniforms(core)
    clump_pts = starts[:, None] + params.r / 2 * rng.uniforms(clumps * per_clump).reshape(
        clumps, per_clump)
    return line_metric(np.concatenate([core_pts, clump_pts.ravel()]))
