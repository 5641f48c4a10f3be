"""Densities, log-likelihood ratios, KL divergences and the least-favorable check.

Observations are scalar. Gaussian members always have unit variance. A
one-parameter exponential family is written as

    f_theta(x) = exp(theta * x - b(theta)) * f_0(x),    b(0) = 0,

so the sufficient statistic of a block of observations is their plain sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

ArrayLike = Union[float, np.ndarray]


class DensityError(ValueError):
    """A density could not be evaluated, or a family is malformed."""


class Density:
    """Base class for scalar densities."""

    name = "density"

    def logpdf(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(Density):
    """N(mean, 1)."""

    loc: float = 0.0

    name = "gaussian"

    @property
    def mean(self) -> float:
        return self.loc

    def logpdf(self, x: ArrayLike) -> ArrayLike:
        d = np.asarray(x, dtype=float) - self.loc
        out = -0.5 * (d * d) - _HALF_LOG_2PI
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal(size) + self.loc

    def __repr__(self) -> str:
        return f"N({self.loc:g},1)"


@dataclass(frozen=True)
class Poisson(Density):
    """Poisson(rate) on the non-negative integers (-inf log-density elsewhere)."""

    rate: float = 1.0

    name = "poisson"

    def __post_init__(self):
        if not self.rate > 0:
            raise DensityError("Poisson rate must be positive")

    @property
    def mean(self) -> float:
        return self.rate

    def logpdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        ok = (x >= 0) & (x == np.floor(x))
        with np.errstate(invalid="ignore"):
            out = np.where(ok, x * math.log(self.rate) - self.rate - gammaln(x + 1.0), -np.inf)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.poisson(self.rate, size).astype(float)

    def __repr__(self) -> str:
        return f"Poisson({self.rate:g})"


@dataclass(frozen=True)
class ExponentialFamilySpec:
    """Tilted family exp(theta*x - b(theta)) f_0(x) over [theta_lo, theta_hi].

    ``epsilon`` removes the neighbourhood |theta| <= epsilon from the set the
    GLR maximizes over. ``closed_form="gaussian"`` marks b(theta)=theta^2/2 with
    a N(0,1) base, for which the maximizer is a clamped sample mean.
    """

    base: Density
    log_partition: Callable[[ArrayLike], ArrayLike]
    theta_lo: float
    theta_hi: float
    epsilon: float = 0.0
    sampler: Optional[Callable[[float, np.random.Generator, int], np.ndarray]] = None
    closed_form: Optional[str] = None
    name: str = "expfam"

    def __post_init__(self):
        if not (self.theta_lo > 0 and self.theta_hi > self.theta_lo):
            raise DensityError("need 0 < theta_lo < theta_hi")
        if self.epsilon < 0:
            raise DensityError("epsilon must be >= 0")
        if abs(float(self.log_partition(0.0))) != 0.0:
            raise DensityError("log-partition must satisfy b(0) = 0")
        grid = np.linspace(self.theta_lo, self.theta_hi, 201)
        b = np.asarray(self.log_partition(grid), dtype=float)
        if np.any(np.diff(b, 2) < -1e-9):
            raise DensityError("log-partition is not convex on the interval")

    @property
    def effective_interval(self) -> tuple[float, float]:
        lo = max(self.theta_lo, self.epsilon)
        if lo > self.theta_hi:
            raise DensityError(
                f"epsilon={self.epsilon} leaves no parameters in [{self.theta_lo}, {self.theta_hi}]"
            )
        return lo, self.theta_hi

    def b(self, theta: ArrayLike) -> ArrayLike:
        return self.log_partition(theta)

    def member(self, theta: float) -> Density:
        if self.closed_form == "gaussian":
            return Gaussian(float(theta))
        return ExpFamilyMember(float(theta), self)


@dataclass(frozen=True)
class ExpFamilyMember(Density):
    theta: float
    family: ExponentialFamilySpec = field(repr=False)

    name = "expfam_member"

    @property
    def mean(self) -> float:
        # E_theta[X] = b'(theta)
        step = 1e-5 * max(1.0, abs(self.theta))
        b = self.family.log_partition
        return float((b(self.theta + step) - b(self.theta - step)) / (2 * step))

    def logpdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        out = self.theta * x - self.family.b(self.theta) + self.family.base.logpdf(x)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family.sampler is None:
            raise DensityError(f"family {self.family.name} has no sampler")
        return self.family.sampler(self.theta, rng, size)


def gaussian_family(theta_lo: float, theta_hi: float, epsilon: float = 0.0) -> ExponentialFamilySpec:
    """N(theta,1) against N(0,1): b(theta) = theta^2 / 2."""
    return ExponentialFamilySpec(
        base=Gaussian(0.0),
        log_partition=_gauss_b,
        theta_lo=theta_lo,
        theta_hi=theta_hi,
        epsilon=epsilon,
        sampler=lambda th, rng, n: rng.standard_normal(n) + th,
        closed_form="gaussian",
        name="gaussian",
    )


def poisson_family(rate0: float, theta_lo: float, theta_hi: float, epsilon: float = 0.0) -> ExponentialFamilySpec:
    """Poisson(rate0 * e^theta) against Poisson(rate0): b(theta) = rate0 (e^theta - 1)."""
    return ExponentialFamilySpec(
        base=Poisson(rate0),
        log_partition=lambda th: rate0 * np.expm1(th),
        theta_lo=theta_lo,
        theta_hi=theta_hi,
        epsilon=epsilon,
        sampler=lambda th, rng, n: rng.poisson(rate0 * math.exp(th), n).astype(float),
        name="poisson",
    )


def _gauss_b(theta):
    theta = np.asarray(theta, dtype=float)
    out = 0.5 * theta * theta
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FamilySpec:
    """Pre-change density, post-change family and the observation-control density.

    ``post`` is either a tuple of member densities (labelled by ``thetas``) or an
    ExponentialFamilySpec. ``control`` defaults to the member at ``theta_star``
    but may be any density g whose log-ratio against ``pre`` drifts upward
    under every post-change member.
    """

    pre: Density
    post: Union[tuple, ExponentialFamilySpec]
    theta_star: float
    thetas: tuple = ()
    control: Optional[Density] = None

    def __post_init__(self):
        if self.is_finite:
            if len(self.post) == 0:
                raise DensityError("empty post-change family")
            if len(self.thetas) != len(self.post):
                raise DensityError("thetas and post-change members differ in length")
            if self.theta_star not in self.thetas:
                raise DensityError(f"theta_star={self.theta_star} is not a family member")
            for t, m in zip(self.thetas, self.post):
                if m == self.pre:
                    raise DensityError(f"member theta={t} coincides with the pre-change density")
        else:
            if not (self.post.theta_lo <= self.theta_star <= self.post.theta_hi):
                raise DensityError(f"theta_star={self.theta_star} outside the family interval")

    @classmethod
    def gaussian_finite(cls, thetas: Sequence[float], theta_star: float, control: Optional[Density] = None):
        thetas = tuple(float(t) for t in thetas)
        return cls(
            pre=Gaussian(0.0),
            post=tuple(Gaussian(t) for t in thetas),
            theta_star=float(theta_star),
            thetas=thetas,
            control=control,
        )

    @classmethod
    def exponential(cls, family: ExponentialFamilySpec, theta_star: Optional[float] = None,
                    control: Optional[Density] = None):
        ts = family.theta_lo if theta_star is None else float(theta_star)
        return cls(pre=family.base, post=family, theta_star=ts, control=control)

    @property
    def is_finite(self) -> bool:
        return isinstance(self.post, tuple)

    @property
    def members(self) -> tuple:
        if not self.is_finite:
            raise DensityError("an exponential family has no finite member list")
        return self.post

    @property
    def star_index(self) -> int:
        return self.thetas.index(self.theta_star)

    @property
    def control_is_member(self) -> bool:
        return self.control is None

    @property
    def control_density(self) -> Density:
        if self.control is not None:
            return self.control
        return self.member(self.theta_star)

    def member(self, theta: float) -> Density:
        if self.is_finite:
            try:
                return self.post[self.thetas.index(float(theta))]
            except ValueError:
                raise DensityError(f"theta={theta} is not a family member") from None
        if not (self.post.theta_lo - 1e-12 <= theta <= self.post.theta_hi + 1e-12):
            raise DensityError(f"theta={theta} outside the family interval")
        return self.post.member(theta)

    def check_grid(self, n_points: int = 21) -> tuple:
        """Parameters to test: all members, or an even grid over the interval."""
        if self.is_finite:
            return self.thetas
        return tuple(np.linspace(self.post.theta_lo, self.post.theta_hi, n_points))


def llr(num: Density, den: Density, x: ArrayLike) -> ArrayLike:
    """log num(x) - log den(x)."""
    if isinstance(num, Gaussian) and isinstance(den, Gaussian):
        m1, m0 = num.loc, den.loc
        out = (m1 - m0) * np.asarray(x, dtype=float) - 0.5 * (m1 * m1 - m0 * m0)
    elif num == den:
        out = np.zeros_like(np.asarray(x, dtype=float))
    else:
        with np.errstate(invalid="ignore"):
            out = np.asarray(num.logpdf(x)) - np.asarray(den.logpdf(x))
    if not np.all(np.isfinite(out)):
        bad = np.asarray(x, dtype=float)[~np.isfinite(out)] if np.ndim(out) else x
        raise DensityError(f"non-finite log-likelihood ratio {num!r}/{den!r} at x={np.ravel(bad)[:3]}")
    return float(out) if np.ndim(out) == 0 else out


def kl(p: Density, q: Density, rng: Optional[np.random.Generator] = None, n_samples: int = 100_000) -> float:
    """D(p || q); exact for unit-variance Gaussians, Monte Carlo otherwise."""
    if isinstance(p, Gaussian) and isinstance(q, Gaussian):
        d = p.loc - q.loc
        return 0.5 * d * d
    if p == q:
        return 0.0
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    est = float(np.mean(llr(p, q, p.sample(rng, n_samples))))
    if not math.isfinite(est):
        raise DensityError(f"KL estimate diverged for {p!r} || {q!r}")
    return est


@dataclass(frozen=True)
class MemberDrift:
    theta: float
    drift: float
    se: float
    exact: bool


@dataclass(frozen=True)
class DriftReport:
    members: tuple
    assumption_holds: bool

    def violations(self) -> list:
        return [m for m in self.members if not _drift_positive(m)]


def _drift_positive(m: MemberDrift) -> bool:
    return m.drift > 0 if m.exact else m.drift > 3 * m.se


def member_drift(spec: FamilySpec, theta: float, rng: Optional[np.random.Generator] = None,
                 n_samples: int = 100_000) -> MemberDrift:
    """E_theta[log g(X)/f_0(X)] for the control density g."""
    g, f0, fth = spec.control_density, spec.pre, spec.member(theta)
    if all(isinstance(d, Gaussian) for d in (g, f0, fth)):
        c, m0, m = g.loc, f0.loc, fth.loc
        return MemberDrift(float(theta), (c - m0) * m - 0.5 * (c * c - m0 * m0), 0.0, True)
    rng = np.random.default_rng() if rng is None else rng
    vals = llr(g, f0, fth.sample(rng, n_samples))
    return MemberDrift(float(theta), float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples)), False)


def check_least_favorable(spec: FamilySpec, rng: Optional[np.random.Generator] = None,
                          n_samples: int = 10_000, n_grid: int = 21) -> DriftReport:
    """Drift of the control log-ratio under each post-change member.

    The assumption holds when every drift is positive (at 3 standard errors
    for Monte Carlo estimates).
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    thetas = spec.check_grid(n_grid)
    if len(thetas) == 0:
        raise DensityError("empty family")
    rng = np.random.default_rng() if rng is None else rng
    members = tuple(member_drift(spec, t, rng, n_samples) for t in thetas)
    return DriftReport(members, all(_drift_positive(m) for m in members))


def _golden_max(obj: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, shape, tol: float = 1e-10):
    """Vectorized golden-section search for a concave objective on [lo, hi]."""
    a = np.full(shape, lo, dtype=float)
    b = np.full(shape, hi, dtype=float)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    while np.max(b - a) > tol:
        left = obj(c) > obj(d)
        a, b = np.where(left, a, c), np.where(left, d, b)
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
    mid = 0.5 * (a + b)
    cand = np.stack([np.full(shape, lo), mid, np.full(shape, hi)])
    vals = np.stack([obj(cand[0]), obj(cand[1]), obj(cand[2])])
    best = np.argmax(vals, axis=0)
    return np.take_along_axis(cand, best[None], 0)[0]


def glr_sup(total: ArrayLike, count: ArrayLike, fam: ExponentialFamilySpec):
    """sup over the effective interval of theta*total - count*b(theta).

    Returns ``(value, argmax_theta)``; scalars in, scalars out.
    """
    lo, hi = fam.effective_interval
    s = np.asarray(total, dtype=float)
    n = np.asarray(count, dtype=float)
    if np.any(n < 1):
        raise ValueError("count must be >= 1")
    if fam.closed_form == "gaussian":
        th = np.clip(s / n, lo, hi)
        val = th * s - 0.5 * n * th * th
    else:
        s, n = np.broadcast_arrays(s, n)

        def obj(t):
            return t * s - n * np.asarray(fam.b(t))

        th = _golden_max(obj, lo, hi, s.shape)
        val = obj(th)
    if np.ndim(val) == 0:
        return float(val), float(th)
    return val, th
