"""Exhaustive optimum over all set partitions (restricted-growth strings)."""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidParameter
from .instance import Clustering, Instance
from .relaxation import parse_p

DEFAULT_MAX_N = 10
HARD_MAX_N = 12


def bell(n: int) -> int:
    """Bell number via the Bell triangle."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def restricted_growth_strings(n: int) -> np.ndarray:
    """All RGS of length n in lexicographic order, shape (Bell(n), n).

    Row i is a set partition: a[0] = 0 and a[j] <= 1 + max(a[:j]).
    """
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    a = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        counts = top.astype(np.int64) + 2
        rows = np.repeat(a, counts, axis=0)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        new = (np.arange(rows.shape[0]) - starts).astype(np.int8)
        a = np.concatenate([rows, new[:, None]], axis=1)
        top = np.maximum(np.repeat(top, counts), new)
    return a


def brute_force_opt(inst: Instance, p, max_n: int = DEFAULT_MAX_N,
                    chunk: int = 200_000) -> tuple[float, Clustering]:
    """Minimum ||dis||_p over every partition, with the lexicographically first witness."""
    p = parse_p(p)
    n = inst.n
    cap = min(max_n, HARD_MAX_N)
    if n > cap:
        raise InvalidParameter(
            f"brute force refused for n={n} > {cap}: Bell({n}) = {bell(n):.3e} partitions")
    rgs = restricted_growth_strings(n)
    pos_w = np.where(inst.positive, inst.weight, 0.0)
    neg_w = np.where(inst.negative, inst.weight, 0.0)
    pos_row = pos_w.sum(axis=1)
    best_val, best_i = math.inf, -1
    for lo in range(0, rgs.shape[0], chunk):
        block = rgs[lo:lo + chunk]
        same = block[:, :, None] == block[:, None, :]
        # positive edges disagree when cut, negative when kept together
        dis = pos_row[None, :] - np.einsum("buv,uv->bu", same, pos_w) \
            + np.einsum("buv,uv->bu", same, neg_w)
        if math.isinf(p):
            vals = dis.max(axis=1)
        elif p == 1:
            vals = dis.sum(axis=1)
        else:
            vals = np.sum(np.maximum(dis, 0.0) ** p, axis=1) ** (1.0 / p)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_i = float(vals[i]), lo + i
    witness = Clustering(rgs[best_i].astype(np.int64))
    # recompute exactly on the witness to drop the einsum rounding path
    from .analysis import disagreements
    return disagreements(inst, witness).norm(p), witness
