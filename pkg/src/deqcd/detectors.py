"""Streaming change detectors with on-off observation control.

Every detector follows the same causal contract: ask ``wants_sample()``; if it
returns True pass the next observation to ``step(x)``, otherwise call
``step()`` with no observation. A skip decision therefore never sees the value
it skips.

Detectors
---------
Cusum             log-likelihood ratio accumulated and reflected at zero.
DECusum           CuSum whose undershoot below zero is spent skipping samples,
                  ramping back at rate ``mu``; undershoot truncated at ``-h``.
GCusum            max of per-parameter CuSums over a finite family.
GCusumExpFam      GLR CuSum over an exponential-family interval, optional window.
GDECusum          DECusum on the control density drives sampling; a GLR
                  statistic over the sampled data drives stopping.
FractionalSampling  GLR CuSum that skips samples by a fixed data-blind pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from .distributions import Density, ExponentialFamilySpec, FamilySpec, glr_sup, llr

# Largest double below zero; keeps w negative until a counted skip run ends.
_NEG_TINY = -math.ulp(0.0)


class ContractViolation(RuntimeError):
    """An observation was supplied when skipping, or withheld when sampling."""


@dataclass(frozen=True)
class SkipPattern:
    kind: Literal["period2", "bernoulli"] = "period2"
    keep_prob: float = 0.5

    def __post_init__(self):
        if self.kind not in ("period2", "bernoulli"):
            raise ValueError(f"unknown skip pattern {self.kind!r}")
        if not 0.0 <= self.keep_prob <= 1.0:
            raise ValueError("keep_prob must lie in [0, 1]")


@dataclass(frozen=True)
class DetectorParams:
    threshold: float
    mu: Optional[float] = None
    h: float = math.inf
    window: Optional[int] = None
    skip_pattern: Optional[SkipPattern] = None

    def __post_init__(self):
        if not self.threshold >= 0:
            raise ValueError("threshold must be >= 0")
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be > 0")
        if not self.h >= 0:
            raise ValueError("h must be >= 0")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")

    @property
    def max_skip_run(self) -> float:
        """Longest possible run of consecutive skips, ceil(h / mu)."""
        if self.mu is None:
            return 0
        return math.ceil(self.h / self.mu) if math.isfinite(self.h) else math.inf


@dataclass(frozen=True, slots=True)
class StepOutcome:
    requested_sample: bool
    statistic: float
    stopped: bool


@dataclass(frozen=True, slots=True)
class DecusumState:
    """DECuSum statistic plus the number of skips left in the current run."""

    w: float = 0.0
    skips_left: int = 0

    @property
    def sampling(self) -> bool:
        return self.skips_left == 0


def _check_llr(value: float) -> float:
    if not math.isfinite(value):
        raise ValueError(f"non-finite log-likelihood ratio {value}")
    return value


def cusum_step(c: float, llr_value: float, threshold: float) -> tuple[float, StepOutcome]:
    c = max(0.0, c + _check_llr(llr_value))
    return c, StepOutcome(True, c, c >= threshold)


def decusum_step(state: DecusumState, params: DetectorParams,
                 llr_value: Optional[float] = None) -> tuple[DecusumState, StepOutcome]:
    if params.mu is None:
        raise ValueError("DECuSum needs mu > 0")
    if state.sampling:
        if llr_value is None:
            raise ContractViolation("DECuSum is sampling but no observation was supplied")
        w = max(-params.h, state.w + _check_llr(llr_value))
        skips = math.ceil(-w / params.mu) if w < 0 else 0
        new = DecusumState(w, skips)
    else:
        if llr_value is not None:
            raise ContractViolation("DECuSum is skipping but an observation was supplied")
        skips = state.skips_left - 1
        w = 0.0 if skips == 0 else min(state.w + params.mu, _NEG_TINY)
        new = DecusumState(w, skips)
    return new, StepOutcome(state.sampling, new.w, new.w >= params.threshold)


def decusum_state(w: float, mu: float) -> DecusumState:
    """State with statistic ``w``; a negative ``w`` starts a fresh skip run."""
    return DecusumState(w, math.ceil(-w / mu) if w < 0 else 0)


def gcusum_step_finite(stats: np.ndarray, llr_values: Sequence[float],
                       threshold: float) -> tuple[np.ndarray, StepOutcome]:
    llr_values = np.asarray(llr_values, dtype=float)
    if llr_values.shape != stats.shape:
        raise ValueError(f"expected {stats.shape[0]} log-likelihood ratios, got {llr_values.shape}")
    if not np.all(np.isfinite(llr_values)):
        raise ValueError("non-finite log-likelihood ratio")
    stats = np.maximum(0.0, stats + llr_values)
    g = float(stats.max())
    return stats, StepOutcome(True, g, g >= threshold)


class Detector:
    """Base class implementing the observation-control contract."""

    kind = "detector"

    def __init__(self, params: DetectorParams):
        self.params = params
        self.n = 0
        self.stopped = False
        self.statistic = 0.0

    @property
    def threshold(self) -> float:
        return self.params.threshold

    def wants_sample(self) -> bool:
        return True

    def step(self, x: Optional[float] = None) -> StepOutcome:
        if self.stopped:
            raise RuntimeError(f"{self.kind} already stopped at n={self.n}")
        want = self.wants_sample()
        if want and x is None:
            raise ContractViolation(f"{self.kind} requested a sample at n={self.n + 1} but none was given")
        if not want and x is not None:
            raise ContractViolation(f"{self.kind} is skipping n={self.n + 1} but an observation was given")
        if x is not None and not math.isfinite(x):
            raise ValueError(f"non-finite observation {x}")
        out = self._advance(x)
        self.n += 1
        self.statistic = out.statistic
        self.stopped = out.stopped
        return out

    def _advance(self, x: Optional[float]) -> StepOutcome:
        raise NotImplementedError

    def run(self, xs: Iterable[float]) -> list[StepOutcome]:
        """Drive the detector over the observation process ``xs`` until it stops.

        ``xs[n]`` is the value at time n+1 whether or not it gets sampled.
        """
        outs = []
        for x in xs:
            outs.append(self.step(float(x) if self.wants_sample() else None))
            if self.stopped:
                break
        return outs


class Cusum(Detector):
    kind = "cusum"

    def __init__(self, post: Density, pre: Density, params: DetectorParams):
        super().__init__(params)
        self.post, self.pre = post, pre

    def _advance(self, x):
        self.statistic, out = cusum_step(self.statistic, llr(self.post, self.pre, x), self.threshold)
        return out


class DECusum(Detector):
    kind = "decusum"

    def __init__(self, post: Density, pre: Density, params: DetectorParams):
        if params.mu is None:
            raise ValueError("DECuSum needs mu > 0")
        super().__init__(params)
        self.post, self.pre = post, pre
        self.state = DecusumState()

    @property
    def w(self) -> float:
        return self.state.w

    def wants_sample(self) -> bool:
        return self.state.sampling

    def _advance(self, x):
        value = None if x is None else llr(self.post, self.pre, x)
        self.state, out = decusum_step(self.state, self.params, value)
        return out


class GCusum(Detector):
    """Finite-family GLR CuSum (max of per-member CuSums)."""

    kind = "gcusum"

    def __init__(self, members: Sequence[Density], pre: Density, params: DetectorParams):
        if params.threshold <= 0:
            raise ValueError("GCuSum needs threshold > 0")
        super().__init__(params)
        self.members, self.pre = tuple(members), pre
        self.stats = np.zeros(len(self.members))

    def member_llrs(self, x: float) -> np.ndarray:
        return np.array([llr(m, self.pre, x) for m in self.members])

    def _advance(self, x):
        self.stats, out = gcusum_step_finite(self.stats, self.member_llrs(x), self.threshold)
        return out


class GCusumExpFam(Detector):
    """GLR CuSum over an exponential-family interval.

    Keeps one (sum, count) hypothesis per candidate change index; with a
    window only the latest ``window`` hypotheses survive. The statistic can
    be negative.
    """

    kind = "gcusum"

    def __init__(self, family: ExponentialFamilySpec, params: DetectorParams):
        if params.threshold <= 0:
            raise ValueError("GCuSum needs threshold > 0")
        family.effective_interval
        super().__init__(params)
        self.family = family
        self.sums = np.zeros(0)
        self.counts = np.zeros(0)
        self.statistic = -math.inf
        self.theta_hat = math.nan

    def _advance(self, x):
        self.sums = np.append(self.sums + x, x)
        self.counts = np.append(self.counts + 1.0, 1.0)
        w = self.params.window
        if w is not None and self.sums.size > w:
            self.sums, self.counts = self.sums[-w:], self.counts[-w:]
        vals, ths = glr_sup(self.sums, self.counts, self.family)
        i = int(np.argmax(vals))
        self.theta_hat = float(ths[i])
        g = float(vals[i])
        return StepOutcome(True, g, g >= self.threshold)


class GDECusum(Detector):
    """GLR CuSum with on-off observation control by a DECuSum on the control density.

    Finite families stop on max{W, CuSums of the members other than theta*}
    when the control is the theta* member; with an outside control density g
    every member's CuSum enters the maximum. Exponential families stop on the
    GLR statistic of the sampled data. Detection state is frozen on skips.
    """

    kind = "gdecusum"

    def __init__(self, family: FamilySpec, params: DetectorParams):
        if params.mu is None:
            raise ValueError("GDECuSum needs mu > 0")
        if params.threshold <= 0:
            raise ValueError("GDECuSum needs threshold > 0")
        super().__init__(params)
        self.family = family
        self.control = family.control_density
        self.ctrl = DecusumState()
        if family.is_finite:
            self.inner = None
            self.stats = np.zeros(len(family.members))
            self._others = [k for k in range(len(family.members))
                            if not (family.control_is_member and k == family.star_index)]
        else:
            self.inner = GCusumExpFam(family.post, DetectorParams(params.threshold, window=params.window))
            self.statistic = -math.inf

    def wants_sample(self) -> bool:
        return self.ctrl.sampling

    @property
    def w(self) -> float:
        return self.ctrl.w

    def detection_state(self):
        if self.inner is None:
            return self.stats.copy()
        return self.inner.sums.copy(), self.inner.counts.copy()

    def _stop_statistic(self) -> float:
        if self.inner is not None:
            return self.inner.statistic
        if not self._others:
            return self.ctrl.w
        g = float(self.stats[self._others].max())
        return max(self.ctrl.w, g) if self.family.control_is_member else g

    def _advance(self, x):
        if x is None:
            self.ctrl, _ = decusum_step(self.ctrl, self.params)
        else:
            self.ctrl, _ = decusum_step(self.ctrl, self.params, llr(self.control, self.family.pre, x))
            if self.inner is None:
                vals = np.array([llr(m, self.family.pre, x) for m in self.family.members])
                self.stats, _ = gcusum_step_finite(self.stats, vals, self.threshold)
            else:
                self.inner.step(x)
        g = self._stop_statistic()
        return StepOutcome(x is not None, g, g >= self.threshold)


class FractionalSampling(Detector):
    """GLR CuSum that samples by a data-blind pattern.

    ``period2`` keeps the odd time steps; ``bernoulli`` keeps each step with
    probability ``keep_prob`` using the detector's own generator.
    """

    kind = "fractional"

    def __init__(self, inner: Detector, pattern: SkipPattern,
                 rng: Optional[np.random.Generator] = None):
        super().__init__(inner.params)
        if pattern.kind == "bernoulli" and rng is None:
            raise ValueError("bernoulli skipping needs a generator")
        self.inner, self.pattern, self.rng = inner, pattern, rng
        self.statistic = inner.statistic
        self._pending: Optional[bool] = None

    def wants_sample(self) -> bool:
        if self._pending is None:
            if self.pattern.kind == "period2":
                self._pending = (self.n + 1) % 2 == 1
            else:
                self._pending = bool(self.rng.random() < self.pattern.keep_prob)
        return self._pending

    def _advance(self, x):
        self._pending = None
        if x is not None:
            return self.inner.step(x)
        g = self.inner.statistic
        return StepOutcome(False, g, g >= self.threshold)


DETECTOR_KINDS = ("cusum", "decusum", "gcusum", "gdecusum", "fractional")


@dataclass(frozen=True)
class DetectorSpec:
    """Recipe for building a detector against a FamilySpec.

    ``theta`` selects the member for the single-parameter detectors (cusum,
    decusum); it defaults to theta_star.
    """

    kind: str
    params: DetectorParams
    theta: Optional[float] = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.kind in ("decusum", "gdecusum") and self.params.mu is None:
            raise ValueError(f"{self.kind} needs mu > 0")
        if self.kind == "fractional" and self.params.skip_pattern is None:
            raise ValueError("fractional sampling needs a skip pattern")

    @property
    def name(self) -> str:
        return self.label or self.kind

    @property
    def data_efficient(self) -> bool:
        return self.kind in ("decusum", "gdecusum")

    def with_threshold(self, threshold: float) -> "DetectorSpec":
        p = self.params
        return DetectorSpec(self.kind, DetectorParams(threshold, p.mu, p.h, p.window, p.skip_pattern),
                            self.theta, self.label)

    def build(self, family: FamilySpec, rng: Optional[np.random.Generator] = None) -> Detector:
        p = self.params
        if self.kind in ("cusum", "decusum"):
            theta = family.theta_star if self.theta is None else self.theta
            post = family.member(theta)
            if self.kind == "decusum" and self.theta is None:
                post = family.control_density
            cls = Cusum if self.kind == "cusum" else DECusum
            return cls(post, family.pre, p)
        if self.kind == "gdecusum":
            return GDECusum(family, p)
        inner = (GCusum(family.members, family.pre, p) if family.is_finite
                 else GCusumExpFam(family.post, p))
        if self.kind == "gcusum":
            return inner
        return FractionalSampling(inner, p.skip_pattern, rng)
