import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from deqcd.distributions import (
    DensityError,
    FamilySpec,
    Gaussian,
    Poisson,
    check_least_favorable,
    gaussian_family,
    glr_sup,
    kl,
    llr,
    member_drift,
    poisson_family,
)

means = st.floats(-3, 3, allow_nan=False)
xs = st.floats(-20, 20, allow_nan=False)


def test_llr_examples():
    assert llr(Gaussian(0.6), Gaussian(0.0), 1.0) == pytest.approx(0.42, abs=1e-12)
    assert llr(Gaussian(0.4), Gaussian(0.0), 0.0) == pytest.approx(-0.08, abs=1e-12)
    assert llr(Gaussian(0.3), Gaussian(0.3), 7.1) == 0.0


@given(means, means, xs)
def test_llr_matches_logpdf_difference_and_is_antisymmetric(a, b, x):
    p, q = Gaussian(a), Gaussian(b)
    direct = stats.norm.logpdf(x, a) - stats.norm.logpdf(x, b)
    assert llr(p, q, x) == pytest.approx(direct, abs=1e-9)
    assert llr(p, q, x) == pytest.approx(-llr(q, p, x), abs=1e-12)


def test_llr_rejects_non_finite():
    with pytest.raises(ValueError):
        llr(Gaussian(0.6), Gaussian(0.0), math.nan)
    with pytest.raises(ValueError):
        llr(Poisson(2.0), Poisson(1.0), math.inf)


def test_kl_examples_and_quadrature():
    assert kl(Gaussian(0.6), Gaussian(0.0)) == pytest.approx(0.18, abs=1e-12)
    assert kl(Gaussian(0.4), Gaussian(0.0)) == pytest.approx(0.08, abs=1e-12)
    assert kl(Gaussian(0.2), Gaussian(0.2)) == 0.0
    p, q = stats.norm(0.6), stats.norm(0.0)
    val, _ = integrate.quad(lambda x: p.pdf(x) * (p.logpdf(x) - q.logpdf(x)), -np.inf, np.inf)
    assert val == pytest.approx(0.18, abs=1e-9)


def test_kl_monte_carlo_poisson():
    # D(Poi(a) || Poi(b)) = a log(a/b) - a + b
    exact = 2 * math.log(2) - 1
    est = kl(Poisson(2.0), Poisson(1.0), np.random.default_rng(1), 200_000)
    assert est == pytest.approx(exact, abs=0.01)


def test_drift_examples():
    fam = FamilySpec.gaussian_finite([0.4, 0.6, 0.8, 1.0], 0.4)
    assert member_drift(fam, 0.6).drift == pytest.approx(0.16, abs=1e-12)
    assert member_drift(fam, 0.4).drift == pytest.approx(0.08, abs=1e-12)
    assert check_least_favorable(fam).assumption_holds

    bad = FamilySpec.gaussian_finite([0.1, 0.4, 0.6], 0.4)
    rep = check_least_favorable(bad)
    assert not rep.assumption_holds
    assert [m.theta for m in rep.violations()] == [0.1]
    assert rep.violations()[0].drift == pytest.approx(-0.04, abs=1e-12)


def test_drift_outside_control_and_monte_carlo():
    fam = FamilySpec.gaussian_finite([0.4, 0.6], 0.4, control=Gaussian(0.3))
    # (c - m0) m - (c^2 - m0^2)/2 with c = 0.3
    assert member_drift(fam, 0.4).drift == pytest.approx(0.3 * 0.4 - 0.045)
    pois = FamilySpec.exponential(poisson_family(1.0, 0.3, 1.0), 0.3)
    rep = check_least_favorable(pois, np.random.default_rng(0), 20_000, 5)
    assert rep.assumption_holds
    assert all(not m.exact and m.se > 0 for m in rep.members)


def test_family_validation():
    with pytest.raises(DensityError):
        FamilySpec.gaussian_finite([0.4, 0.6], 0.5)
    with pytest.raises(DensityError):
        FamilySpec.gaussian_finite([0.0, 0.6], 0.6)
    with pytest.raises(DensityError):
        gaussian_family(-0.1, 1.0)
    fam = FamilySpec.exponential(gaussian_family(0.2, 1.0), 0.2)
    with pytest.raises(DensityError):
        fam.member(1.5)


@pytest.mark.parametrize("total,count,val,th", [(3.0, 5, 0.9, 0.6), (-5.0, 5, -1.1, 0.2), (10.0, 5, 7.5, 1.0)])
def test_glr_sup_examples(total, count, val, th):
    v, t = glr_sup(total, count, gaussian_family(0.2, 1.0))
    assert float(v) == pytest.approx(val, abs=1e-12)
    assert float(t) == pytest.approx(th, abs=1e-12)


def test_glr_sup_against_dense_grid():
    fam = gaussian_family(0.2, 1.0)
    grid = np.linspace(0.2, 1.0, 100_001)
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 40))
        s = float(rng.normal(0.5 * n, math.sqrt(n)))
        brute = float(np.max(grid * s - n * grid**2 / 2))
        v, _ = glr_sup(s, n, fam)
        assert float(v) >= brute - 1e-12
        assert float(v) - brute < 1e-9


def test_glr_sup_epsilon_interval():
    # epsilon lifts the lower end of the search interval
    v, t = glr_sup(-5.0, 5, gaussian_family(0.2, 1.0, epsilon=0.5))
    assert float(t) == pytest.approx(0.5)
    assert float(v) == pytest.approx(0.5 * -5 - 5 * 0.125)


@settings(max_examples=200)
@given(st.floats(-50, 50), st.integers(1, 60), st.floats(0.2, 1.0))
def test_glr_sup_dominates_every_member(total, count, theta):
    fam = gaussian_family(0.2, 1.0)
    v, _ = glr_sup(total, count, fam)
    assert float(v) >= theta * total - count * fam.b(theta) - 1e-12


def test_glr_sup_poisson_golden_section():
    fam = poisson_family(1.0, 0.1, 1.5)
    grid = np.linspace(0.1, 1.5, 200_001)
    for s, n in [(0.0, 3), (4.0, 3), (30.0, 4), (7.0, 5)]:
        v, t = glr_sup(s, n, fam)
        brute = np.max(grid * s - n * fam.b(grid))
        assert float(v) == pytest.approx(float(brute), abs=1e-7)
        assert 0.1 <= float(t) <= 1.5


def test_sample_means():
    rng = np.random.default_rng(11)
    n = 100_000
    for d in (Gaussian(0.6), Poisson(3.0), poisson_family(2.0, 0.1, 1.0).member(0.5)):
        x = d.sample(rng, n)
        se = math.sqrt(np.var(x) / n)
        assert abs(x.mean() - d.mean) < 5 * se
