"""Correlation Clustering instances with asymmetric classification errors.

An instance is a complete graph stored as two dense symmetric matrices:
``sign`` (+1 similar, -1 dissimilar) and ``weight`` (positive off the
diagonal). Positive weights live in ``[alpha * w, w]`` and negative weights are
at least ``alpha * w``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InstanceFormatError, InvalidParameter
from .rng import Xoshiro256


@dataclass(frozen=True, eq=False)
class Instance:
    n: int
    alpha: float
    w_scale: float
    sign: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        sign = np.array(self.sign, dtype=np.int8)
        weight = np.array(self.weight, dtype=np.float64)
        if sign.shape != (self.n, self.n) or weight.shape != (self.n, self.n):
            raise InvalidParameter(f"matrices must be {self.n}x{self.n}")
        np.fill_diagonal(sign, 0)
        np.fill_diagonal(weight, 0.0)
        sign.setflags(write=False)
        weight.setflags(write=False)
        object.__setattr__(self, "sign", sign)
        object.__setattr__(self, "weight", weight)

    @property
    def positive(self) -> np.ndarray:
        """Boolean mask of similar (E+) pairs."""
        return self.sign > 0

    @property
    def negative(self) -> np.ndarray:
        return self.sign < 0

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.n == other.n and self.alpha == other.alpha
                and self.w_scale == other.w_scale
                and np.array_equal(self.sign, other.sign)
                and np.array_equal(self.weight, other.weight))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Clustering:
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if labels.ndim != 1:
            raise InvalidParameter("labels must be one-dimensional")
        if labels.size:
            k = int(labels.max()) + 1
            if labels.min() < 0 or np.unique(labels).size != k:
                raise InvalidParameter("labels must be contiguous from 0")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_clusters(cls, clusters, n: int) -> "Clustering":
        """Build labels from an ordered list of vertex collections."""
        labels = np.full(n, -1, dtype=np.int64)
        for i, members in enumerate(clusters):
            labels[np.asarray(list(members), dtype=np.int64)] = i
        if (labels < 0).any():
            raise InvalidParameter("clusters do not cover every vertex")
        return cls(labels)

    @classmethod
    def canonical(cls, labels) -> "Clustering":
        """Relabel arbitrary ids to first-occurrence order."""
        _, first, inv = np.unique(np.asarray(labels), return_index=True,
                                  return_inverse=True)
        order = np.argsort(np.argsort(first))
        return cls(order[inv])

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.n_clusters)]

    def same(self) -> np.ndarray:
        """n x n co-clustering indicator."""
        return self.labels[:, None] == self.labels[None, :]

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    __hash__ = None


def validate(inst: Instance) -> list[str]:
    """Describe every weight-range violation; empty when the instance is valid."""
    lo = inst.alpha * inst.w_scale
    hi = inst.w_scale
    out = []
    iu, iv = np.triu_indices(inst.n, 1)
    for u, v in zip(iu.tolist(), iv.tolist()):
        w = float(inst.weight[u, v])
        if inst.sign[u, v] > 0:
            if not lo <= w <= hi:
                out.append(f"positive edge ({u},{v}) weight {w!r} outside "
                           f"[{lo!r}, {hi!r}]")
        elif w < lo:
            out.append(f"negative edge ({u},{v}) weight {w!r} below {lo!r}")
    return out


def gap_size(alpha: float) -> int:
    return 1 + math.ceil(math.sqrt(1.0 / alpha))


def gen_gap(alpha: float) -> Instance:
    """Weighted path instance with one negative edge between its endpoints.

    Path edges (i, i+1) are positive with weight 1, the endpoint pair
    (0, n-1) is negative with weight 1, and every other pair is positive with
    weight ``alpha``. Requires ``alpha <= 1/4`` so the endpoints are not
    adjacent on the path.
    """
    if not (0.0 < alpha <= 0.25):
        raise InvalidParameter(f"gap instance needs alpha in (0, 1/4], got {alpha}")
    n = gap_size(alpha)
    sign = np.ones((n, n), dtype=np.int8)
    weight = np.full((n, n), float(alpha))
    idx = np.arange(n - 1)
    weight[idx, idx + 1] = weight[idx + 1, idx] = 1.0
    sign[0, n - 1] = sign[n - 1, 0] = -1
    weight[0, n - 1] = weight[n - 1, 0] = 1.0
    return Instance(n, float(alpha), 1.0, sign, weight)


def gen_random(n: int, alpha: float, planted_k: int, flip_prob: float,
               seed: int, w_scale: float = 1.0) -> tuple[Instance, Clustering]:
    """Planted balanced clustering with independently flipped edge labels.

    Vertex v is planted in cluster ``v * planted_k // n``. Pairs are visited in
    row-major upper-triangular order; each draws one uniform for the flip and
    one for the weight, so the stream is fixed by ``seed`` alone.
    """
    if n < 1 or planted_k < 1:
        raise InvalidParameter("need n >= 1 and planted_k >= 1")
    if not (0.0 < alpha <= 1.0):
        raise InvalidParameter(f"alpha must be in (0, 1], got {alpha}")
    if not (0.0 <= flip_prob < 0.5):
        raise InvalidParameter(f"flip_prob must be in [0, 1/2), got {flip_prob}")
    if not w_scale > 0:
        raise InvalidParameter("w_scale must be positive")
    k = min(planted_k, n)
    planted = np.arange(n) * k // n
    rng = Xoshiro256(seed)
    sign = np.zeros((n, n), dtype=np.int8)
    weight = np.zeros((n, n))
    lo = alpha * w_scale
    for u in range(n):
        for v in range(u + 1, n):
            s = 1 if planted[u] == planted[v] else -1
            if rng.random() < flip_prob:
                s = -s
            w = lo + (w_scale - lo) * rng.random()
            sign[u, v] = sign[v, u] = s
            weight[u, v] = weight[v, u] = w
    return Instance(n, float(alpha), float(w_scale), sign, weight), Clustering(planted)


# ---------------------------------------------------------------- file I/O

def instance_to_dict(inst: Instance) -> dict:
    return {
        "n": inst.n,
        "alpha": inst.alpha,
        "w_scale": inst.w_scale,
        "sign": inst.sign.astype(int).tolist(),
        "weight": inst.weight.tolist(),
    }


def instance_from_dict(doc) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    for key in ("n", "alpha", "w_scale", "sign", "weight"):
        if key not in doc:
            raise InstanceFormatError(f"missing field '{key}'")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InstanceFormatError(f"field 'n' must be a positive integer, got {n!r}")
    alpha, w_scale = doc["alpha"], doc["w_scale"]
    for name, val in (("alpha", alpha), ("w_scale", w_scale)):
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise InstanceFormatError(f"field '{name}' must be a number")
    if not 0 < alpha <= 1:
        raise InstanceFormatError(f"field 'alpha' must be in (0, 1], got {alpha!r}")
    if not w_scale > 0:
        raise InstanceFormatError(f"field 'w_scale' must be positive, got {w_scale!r}")
    sign = _matrix(doc["sign"], n, "sign")
    weight = _matrix(doc["weight"], n, "weight")
    for u in range(n):
        for v in range(u + 1, n):
            if sign[u][v] != sign[v][u]:
                raise InstanceFormatError(f"field 'sign' asymmetric at ({u},{v})")
            if sign[u][v] not in (1, -1):
                raise InstanceFormatError(
                    f"field 'sign' entry ({u},{v}) must be +1 or -1, got {sign[u][v]!r}")
            if weight[u][v] != weight[v][u]:
                raise InstanceFormatError(f"field 'weight' asymmetric at ({u},{v})")
            w = weight[u][v]
            if not (isinstance(w, (int, float)) and math.isfinite(w) and w > 0):
                raise InstanceFormatError(
                    f"field 'weight' edge ({u},{v}) must be positive, got {w!r}")
    return Instance(n, float(alpha), float(w_scale),
                    np.array(sign, dtype=np.int8), np.array(weight, dtype=float))


def _matrix(rows, n: int, name: str):
    if not isinstance(rows, list) or len(rows) != n:
        raise InstanceFormatError(f"field '{name}' must have {n} rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise InstanceFormatError(f"field '{name}' row {i} must have {n} entries")
        for j, val in enumerate(row):
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise InstanceFormatError(f"field '{name}' entry ({i},{j}) is not a number")
    return rows


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc) -> str:
    return json.dumps(doc, indent=None, separators=(",", ":")) + "\n"


def save(inst: Instance, path) -> None:
    atomic_write_text(path, dumps(instance_to_dict(inst)))


def _load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(
            f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def load(path) -> Instance:
    return instance_from_dict(_load_json(path))


def save_clustering(c: Clustering, path) -> None:
    atomic_write_text(path, dumps({"labels": c.labels.tolist()}))


def load_clustering(path) -> Clustering:
    doc = _load_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("labels"), list):
        raise InstanceFormatError("clustering document needs a 'labels' list")
    try:
        return Clustering(doc["labels"])
    except InvalidParameter as exc:
        raise InstanceFormatError(f"field 'labels': {exc}") from exc
