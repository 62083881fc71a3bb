import math

import numpy as np
import pytest

from asymcc.bruteforce import bell, brute_force_opt, restricted_growth_strings
from asymcc.errors import InvalidParameter
from asymcc.instance import Clustering, Instance, gen_gap, gen_random


def _partitions(items):
    """All set partitions, by recursion on the first element."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _rgs(part, n):
    lab = [0] * n
    for b in part:
        for v in b:
            lab[v] = min(b)
    seen = {}
    return tuple(seen.setdefault(x, len(seen)) for x in lab)


def _cost(inst, labels, p):
    n = inst.n
    dis = [0.0] * n
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            same = labels[u] == labels[v]
            if (inst.sign[u, v] > 0 and not same) or (inst.sign[u, v] < 0 and same):
                dis[u] += inst.weight[u, v]
    if math.isinf(p):
        return max(dis)
    return sum(d ** p for d in dis) ** (1 / p)


def test_bell_numbers():
    assert [bell(n) for n in range(10)] == [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147]
    assert bell(12) == 4213597


@pytest.mark.parametrize("n", range(1, 8))
def test_rgs_against_recursive_enumeration(n):
    rgs = restricted_growth_strings(n)
    assert rgs.shape == (bell(n), n)
    rows = [tuple(r) for r in rgs.tolist()]
    assert rows == sorted(rows)
    assert set(rows) == {_rgs(p, n) for p in _partitions(list(range(n)))}


@pytest.mark.parametrize("p,val", [("inf", 1.0), (1, 2.0), (2, math.sqrt(2))])
def test_gap_quarter_optimum(p, val):
    opt, c = brute_force_opt(gen_gap(0.25), p)
    assert opt == pytest.approx(val, abs=1e-15)


@pytest.mark.parametrize("p", [1, 2, 3, math.inf])
def test_matches_naive_oracle(p):
    inst, _ = gen_random(6, 0.3, 2, 0.3, 17)
    best = min((_cost(inst, _rgs(part, 6), p), _rgs(part, 6))
               for part in _partitions(list(range(6))))
    opt, c = brute_force_opt(inst, p)
    assert opt == pytest.approx(best[0], rel=1e-12)
    assert tuple(c.labels.tolist()) == best[1]


def test_planted_n8_optimum_zero():
    inst, planted = gen_random(8, 0.25, 3, 0.0, 2)
    opt, c = brute_force_opt(inst, 1)
    assert opt == 0 and c == planted


def test_all_positive_single_cluster():
    inst = Instance(3, 1.0, 1.0, np.ones((3, 3)), np.ones((3, 3)))
    opt, c = brute_force_opt(inst, 2)
    assert opt == 0 and c.labels.tolist() == [0, 0, 0]


def test_refuses_large_n():
    inst, _ = gen_random(11, 0.5, 2, 0.1, 0)
    with pytest.raises(InvalidParameter, match="Bell"):
        brute_force_opt(inst, 1)
    inst13, _ = gen_random(13, 0.5, 2, 0.1, 0)
    with pytest.raises(InvalidParameter, match="> 12"):
        brute_force_opt(inst13, 1, max_n=20)


def test_ties_pick_first_rgs():
    # two isolated vertices joined by a negative edge: only the split is optimal,
    # three vertices all-negative: every singleton split is the unique optimum
    inst = Instance(3, 1.0, 1.0, -np.ones((3, 3)), np.ones((3, 3)))
    opt, c = brute_force_opt(inst, 1)
    assert opt == 0 and c == Clustering([0, 1, 2])
