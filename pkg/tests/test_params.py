import math

import pytest
from scipy.optimize import brentq

from asymcc.errors import InvalidParameter
from asymcc.params import (PRACTICAL, STRICT, PartitionParams, alpha_star, beta_star,
                           derive_params, practical_params, radius_from_alpha,
                           strict_violations)


def _D(beta, q):
    return 2 * (q + 1) * math.log(1 / beta)


def _beta_star_oracle(q):
    """Independent root-finding: the binding constraints are 101/D + 100 beta < 1
    (from R0 + r < R1/100 at R = 1) and beta D < 1/(5 sqrt 2)."""
    f = lambda b: 101 / _D(b, q) + 100 * b - 1
    g = lambda b: b * _D(b, q) - 1 / (5 * math.sqrt(2))
    return min(brentq(f, 1e-300, 1 / math.e, xtol=1e-300, rtol=1e-15),
               brentq(g, 1e-300, 1 / math.e, xtol=1e-300, rtol=1e-15))


def test_q2_beta_tenth_constants():
    p = PartitionParams.from_beta(0.1, q=2, check=False)
    assert p.D_beta == pytest.approx(6 * math.log(10), rel=1e-15)
    assert p.D_beta == pytest.approx(13.8155, abs=1e-4)
    assert p.rho == pytest.approx(1000, rel=1e-12)
    assert p.R0 == pytest.approx(p.R / p.D_beta) and p.R1 == pytest.approx(p.R - p.R0)


@pytest.mark.parametrize("beta,q", [(0.2, 2), (0.1, 2), (0.05, 2), (0.01, 2), (0.1, 1),
                                    (1e-6, 3.5)])
def test_exp_identity(beta, q):
    p = PartitionParams.from_beta(beta, q=q, check=False)
    assert abs(math.exp(-p.D_beta / 2) - beta ** (q + 1)) <= 1e-12 * beta ** (q + 1) + 1e-300


@pytest.mark.parametrize("q", [1, 2, 3, 5, 10, 20])
def test_beta_star_matches_oracle(q):
    b = beta_star(q)
    assert b == pytest.approx(_beta_star_oracle(q), rel=1e-9, abs=1e-12)
    assert strict_violations(b, q) == []
    assert strict_violations(b + 2e-12, q) != []


def test_beta_star_scale():
    assert 1e-9 < beta_star(2) < 1e-7


def test_beta_star_not_monotone_in_q():
    # for small q the R0 + r < R1/100 constraint binds and loosens as q grows
    assert beta_star(1) < beta_star(2) < beta_star(3)
    assert beta_star(20) < beta_star(10)


def test_beta_star_rejects_q():
    with pytest.raises(InvalidParameter):
        beta_star(0.5)


def test_strict_mode_rejects_large_beta():
    with pytest.raises(InvalidParameter, match="strict"):
        PartitionParams.from_beta(0.05, mode=STRICT)


def test_practical_mode_constraints():
    with pytest.raises(InvalidParameter, match="r < R0"):
        PartitionParams.from_beta(0.2, q=2)
    with pytest.raises(InvalidParameter):
        PartitionParams.from_radii(0.5, 0.4)
    with pytest.raises(InvalidParameter):
        PartitionParams.from_radii(0.01, 1, q=0.5)
    with pytest.raises(InvalidParameter):
        PartitionParams.from_radii(0.01, 1, mode="lenient")


def test_derive_alpha_quarter_rejected():
    assert 3 * radius_from_alpha(0.25) == pytest.approx(1.0820, abs=1e-4)
    with pytest.raises(InvalidParameter):
        derive_params(0.25, mode=PRACTICAL)


@pytest.mark.parametrize("alpha", [0.25, 1e-3, 1e-12, 1e-30, 1e-80])
def test_derive_strict_clamps(alpha):
    p = derive_params(alpha, mode=STRICT)
    assert strict_violations(p.beta, p.q) == []
    assert p.R == pytest.approx(1 / 3) and p.q == 2


def test_alpha_star_root():
    a = alpha_star()
    assert 3 * math.sqrt(a) / math.log(1 / a) == pytest.approx(beta_star(2), rel=1e-9)


def test_derive_small_alpha_kept():
    a = alpha_star() / 10
    p = derive_params(a, mode=STRICT)
    assert p.r == pytest.approx(math.sqrt(a) / math.log(1 / a), rel=1e-15)


@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
def test_derive_rejects_alpha(alpha):
    with pytest.raises(InvalidParameter):
        derive_params(alpha)


def test_practical_params_cap():
    assert practical_params(0.25).beta == pytest.approx(0.05)
    tiny = practical_params(1e-8)
    assert tiny.beta == pytest.approx(3 * radius_from_alpha(1e-8))
    assert tiny.beta < 0.05


def test_shell_coeff():
    p = PartitionParams.from_beta(0.05)
    assert p.shell_coeff == pytest.approx(25 * 0.05 * p.D_beta ** 2)
