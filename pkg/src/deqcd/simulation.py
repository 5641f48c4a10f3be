"""Monte Carlo estimation of FAR, CADD, WADD proxy and PDC.

Every trial owns a generator seeded by ``SeedSequence(seed, spawn_key=stream)``,
so a batch gives the same numbers whatever the worker count or execution
order. Trials with equal ``stream`` see the same observation process, which
gives common random numbers across detectors and thresholds.

The observation at time n is drawn whether or not the detector samples it.
Two engines drive a trial on the same draws: a compiled one for finite
families and the Gaussian exponential family, and the pure-Python detectors
for everything else (and for cross-checking).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .detectors import DetectorParams, DetectorSpec
from .distributions import FamilySpec, llr

Z95 = 1.959963984540054

TAG_FAR, TAG_CADD, TAG_PROBE, TAG_LONGRUN, TAG_RENEWAL, TAG_Q = range(6)
RENEWAL_CYCLE_CAP = 10**7


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrialConfig:
    """One sample path of the change-point model.

    ``gamma`` is the change point (``math.inf`` for no change). With
    ``change_on_skip`` the change instead happens at the first skipped step at
    or after ``gamma``, which places it at the start of a skip run.
    """

    family: FamilySpec
    detector: DetectorSpec
    gamma: float = math.inf
    theta_true: Optional[float] = None
    horizon: int = 100_000
    seed: int = 0
    stream: tuple = ()
    change_on_skip: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.gamma >= 1:
            raise ValueError("gamma must be >= 1")
        if math.isfinite(self.gamma) and self.theta_true is None:
            raise ValueError("a finite change point needs theta_true")


@dataclass(frozen=True)
class TrialResult:
    tau: int
    censored: bool
    pre_change_samples_used: int
    steps_before_change: int
    change_at: Optional[int] = None


@dataclass
class TrialBatch:
    tau: np.ndarray
    censored: np.ndarray
    pre_used: np.ndarray
    steps_before: np.ndarray
    change_at: np.ndarray  # 0 when the change never happened

    def __len__(self):
        return self.tau.size

    def result(self, i: int) -> TrialResult:
        c = int(self.change_at[i])
        return TrialResult(int(self.tau[i]), bool(self.censored[i]), int(self.pre_used[i]),
                           int(self.steps_before[i]), c or None)


def trial_rngs(seed: int, stream: tuple) -> tuple[np.random.Generator, np.random.Generator]:
    """(observation generator, detector generator) for one trial."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    obs, det = ss.spawn(2)
    return np.random.Generator(np.random.PCG64(obs)), np.random.Generator(np.random.PCG64(det))


def _block_sizes(horizon: int):
    size, done = 64, 0
    while done < horizon:
        L = min(size, horizon - done)
        yield done, L
        done += L
        size = min(size * 2, 16384)


class _Observations:
    """Block draws of the observation process for one trial."""

    def __init__(self, cfg: TrialConfig, rng: np.random.Generator):
        self.pre = cfg.family.pre
        self.post = cfg.family.member(cfg.theta_true) if cfg.theta_true is not None else None
        self.cfg, self.rng = cfg, rng

    def block(self, n0: int, L: int):
        cfg = self.cfg
        if cfg.change_on_skip and math.isfinite(cfg.gamma):
            return self.pre.sample(self.rng, L), self.post.sample(self.rng, L)
        k = L if not math.isfinite(cfg.gamma) else int(min(L, max(0, cfg.gamma - 1 - n0)))
        parts = [self.pre.sample(self.rng, k)]
        if k < L:
            parts.append(self.post.sample(self.rng, L - k))
        x = np.concatenate(parts) if len(parts) > 1 else parts[0]
        return x, x


def _keep_flags(spec: DetectorSpec, det_rng, n0: int, L: int) -> np.ndarray:
    pat = spec.params.skip_pattern
    if spec.kind != "fractional" or pat is None:
        return np.ones(L, dtype=np.bool_)
    if pat.kind == "period2":
        return (np.arange(n0 + 1, n0 + L + 1) % 2) == 1
    return det_rng.random(L) < pat.keep_prob


def _finish(istate, horizon) -> TrialResult:
    tau = int(istate[K.TAU])
    censored = tau == 0
    if censored:
        tau = horizon
    change_at = int(istate[K.CHANGE_AT])
    end = min(change_at, tau) if change_at else tau
    return TrialResult(tau, censored, int(istate[K.PRE_USED]), end - 1, change_at or None)


class _CompiledTrial:
    """Runs trials of one (family, detector, theta_true) on the compiled kernels."""

    def __init__(self, family: FamilySpec, spec: DetectorSpec):
        self.family, self.spec = family, spec
        p = spec.params
        self.mode = {"decusum": K.MODE_CONTROL, "gdecusum": K.MODE_CONTROL,
                     "fractional": K.MODE_PATTERN}.get(spec.kind, K.MODE_ALWAYS)
        self.mu = p.mu if p.mu is not None else 1.0
        self.h = p.h
        if spec.kind in ("cusum", "decusum"):
            theta = family.theta_star if spec.theta is None else spec.theta
            member = family.member(theta)
            if spec.kind == "decusum" and spec.theta is None:
                member = family.control_density
            self.members = (member,)
            self.control = member
            self.star, self.member_control = 0, True
            self.glr = False
        else:
            self.control = family.control_density
            self.glr = not family.is_finite
            if family.is_finite:
                self.members = family.members
                self.star, self.member_control = family.star_index, family.control_is_member
            else:
                self.lo, self.hi = family.post.effective_interval
                self.star, self.member_control = -1, False

    @staticmethod
    def supports(family: FamilySpec, spec: DetectorSpec) -> bool:
        if family.is_finite or spec.kind in ("cusum", "decusum"):
            return True
        return family.post.closed_form == "gaussian"

    def run(self, cfg: TrialConfig) -> TrialResult:
        obs_rng, det_rng = trial_rngs(cfg.seed, cfg.stream)
        obs = _Observations(cfg, obs_rng)
        pre = self.family.pre
        fstate = np.zeros(2)
        istate = np.zeros(7, dtype=np.int64)
        gamma = int(cfg.gamma) if math.isfinite(cfg.gamma) else np.iinfo(np.int64).max
        probe = bool(cfg.change_on_skip)
        A = float(cfg.detector.params.threshold)
        if self.glr:
            window = cfg.detector.params.window
            cap = min(cfg.horizon, window) if window else cfg.horizon
            sums, counts = np.zeros(cap), np.zeros(cap)
            fstate[1] = -np.inf
        else:
            stats = np.zeros(len(self.members))
        for n0, L in _block_sizes(cfg.horizon):
            xa, xb = obs.block(n0, L)
            keep = _keep_flags(self.spec, det_rng, n0, L)
            if self.mode == K.MODE_CONTROL:
                ca = llr(self.control, pre, xa)
                cb = ca if xb is xa else llr(self.control, pre, xb)
            else:
                ca = cb = np.zeros(L)
            if self.glr:
                done = K.gaussian_glr_block(xa, xb, ca, cb, keep, sums, counts, fstate, istate,
                                            A, self.mu, self.h, self.mode, self.lo, self.hi,
                                            gamma, probe, cfg.horizon)
            else:
                la = np.ascontiguousarray(np.column_stack([llr(m, pre, xa) for m in self.members]))
                lb = la if xb is xa else np.ascontiguousarray(
                    np.column_stack([llr(m, pre, xb) for m in self.members]))
                done = K.finite_block(la, lb, ca, cb, keep, stats, fstate, istate,
                                      A, self.mu, self.h, self.mode, self.star,
                                      self.member_control, gamma, probe, cfg.horizon)
            if done:
                break
        return _finish(istate, cfg.horizon)


def _run_python(cfg: TrialConfig) -> TrialResult:
    obs_rng, det_rng = trial_rngs(cfg.seed, cfg.stream)
    obs = _Observations(cfg, obs_rng)
    det = cfg.detector.build(cfg.family, rng=det_rng)
    change_at, pre_used = 0, 0
    for n0, L in _block_sizes(cfg.horizon):
        xa, xb = obs.block(n0, L)
        for r in range(L):
            n = n0 + r + 1
            sample = det.wants_sample()
            if not change_at:
                if cfg.change_on_skip:
                    if n >= cfg.gamma and not sample:
                        change_at = n
                elif n >= cfg.gamma:
                    change_at = n
            x = (xb[r] if change_at else xa[r]) if sample else None
            out = det.step(None if x is None else float(x))
            if out.stopped:
                end = min(change_at, n) if change_at else n
                return TrialResult(n, False, pre_used, end - 1, change_at or None)
            if sample and not change_at:
                pre_used += 1
    end = min(change_at, cfg.horizon) if change_at else cfg.horizon
    return TrialResult(cfg.horizon, True, pre_used, end - 1, change_at or None)


def run_trial(cfg: TrialConfig, engine: str = "auto") -> TrialResult:
    """Simulate one path; deterministic given ``cfg.seed`` and ``cfg.stream``.

    ``engine`` is "compiled", "python" or "auto" (compiled when supported).
    Both engines consume the same draws and return the same result.
    """
    if engine == "python" or (engine == "auto" and not _CompiledTrial.supports(cfg.family, cfg.detector)):
        return _run_python(cfg)
    if engine not in ("auto", "compiled"):
        raise ValueError(f"unknown engine {engine!r}")
    return _CompiledTrial(cfg.family, cfg.detector).run(cfg)


def run_trials(cfg: TrialConfig, n_trials: int, stream: tuple = (), threads: int = 1,
               engine: str = "auto") -> TrialBatch:
    """Trials i = 0..n_trials-1 of ``cfg`` on streams ``stream + (i,)``."""
    if engine == "python" or (engine == "auto" and not _CompiledTrial.supports(cfg.family, cfg.detector)):
        runner = _run_python
    else:
        runner = _CompiledTrial(cfg.family, cfg.detector).run

    def one(i):
        return runner(replace(cfg, stream=tuple(stream) + (i,)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n_trials)))
    else:
        results = [one(i) for i in range(n_trials)]
    return TrialBatch(
        tau=np.array([r.tau for r in results], dtype=np.int64),
        censored=np.array([r.censored for r in results], dtype=bool),
        pre_used=np.array([r.pre_change_samples_used for r in results], dtype=np.int64),
        steps_before=np.array([r.steps_before_change for r in results], dtype=np.int64),
        change_at=np.array([r.change_at or 0 for r in results], dtype=np.int64),
    )


# ---------------------------------------------------------------- estimators


@dataclass(frozen=True)
class FarEstimate:
    far: float
    ci_lo: float
    ci_hi: float
    mean_tau: float
    se_tau: float
    censoring_rate: float
    trials: int

    @property
    def far_se(self) -> float:
        return self.se_tau / self.mean_tau**2

    @property
    def conservative(self) -> bool:
        """True when censoring exceeds 1%: mean_tau is then a lower bound on E_inf[tau]."""
        return self.censoring_rate > 0.01


def far_horizon(threshold: float) -> int:
    return int(max(10**5, math.ceil(20 * math.exp(min(threshold, 700.0)))))


def estimate_far(cfg: TrialConfig, n_trials: int = 20_000, threads: int = 1,
                 engine: str = "auto") -> FarEstimate:
    """FAR = 1 / E_inf[tau] with a 95% interval mapped from the interval of mean(tau)."""
    if math.isfinite(cfg.gamma):
        raise ValueError("FAR needs gamma = inf")
    if n_trials < 100:
        raise ValueError("n_trials must be >= 100")
    batch = run_trials(cfg, n_trials, (TAG_FAR,), threads, engine)
    cens = float(batch.censored.mean())
    if cens == 1.0:
        raise EstimationError(f"all {n_trials} FAR trials hit the horizon {cfg.horizon}")
    m = float(batch.tau.mean())
    se = float(batch.tau.std(ddof=1) / math.sqrt(n_trials))
    lo_tau = max(m - Z95 * se, 1.0)
    return FarEstimate(1.0 / m, 1.0 / (m + Z95 * se), 1.0 / lo_tau, m, se, cens, n_trials)


@dataclass(frozen=True)
class GammaDelay:
    gamma: int
    after_skip: bool
    delay: float
    se: float
    survivors: int
    censored: int

    @property
    def label(self) -> str:
        return f"skip@{self.gamma}" if self.after_skip else str(self.gamma)


@dataclass(frozen=True)
class CaddEstimate:
    per_gamma: tuple
    value: float
    se: float
    argmax: str

    @property
    def gamma_one(self) -> Optional[GammaDelay]:
        for g in self.per_gamma:
            if g.gamma == 1 and not g.after_skip:
                return g
        return None


DEFAULT_GAMMA_GRID = (1, 5, 25, 100, 400)


def conditional_delay(cfg: TrialConfig, n_trials: int, threads: int = 1, engine: str = "auto") -> GammaDelay:
    """E[tau - gamma | tau >= gamma] at the change point of ``cfg``."""
    tag = TAG_PROBE if cfg.change_on_skip else TAG_CADD
    batch = run_trials(cfg, n_trials, (tag, int(cfg.gamma)), threads, engine)
    ok = (batch.change_at > 0) & (batch.tau >= batch.change_at)
    n_ok = int(ok.sum())
    label = f"skip@{int(cfg.gamma)}" if cfg.change_on_skip else str(int(cfg.gamma))
    if n_ok < 10:
        raise EstimationError(f"only {n_ok} of {n_trials} paths survive to the change at gamma={label}")
    d = (batch.tau[ok] - batch.change_at[ok]).astype(float)
    se = float(d.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else math.inf
    return GammaDelay(int(cfg.gamma), cfg.change_on_skip, float(d.mean()), se, n_ok,
                      int(batch.censored[ok].sum()))


def estimate_cadd(cfg: TrialConfig, gamma_grid: Sequence[int] = DEFAULT_GAMMA_GRID,
                  n_trials: int = 4000, threads: int = 1, skip_probes: Sequence[int] = (),
                  engine: str = "auto") -> CaddEstimate:
    """Conditional delay on a grid of change points; CADD is the grid maximum.

    ``skip_probes`` adds change points placed at the start of a skip run.
    """
    if not gamma_grid:
        raise ValueError("empty gamma grid")
    if n_trials < 100:
        raise ValueError("n_trials must be >= 100")
    if cfg.theta_true is None:
        raise ValueError("CADD needs theta_true")
    rows = [conditional_delay(replace(cfg, gamma=int(g), change_on_skip=False), n_trials, threads, engine)
            for g in gamma_grid]
    rows += [conditional_delay(replace(cfg, gamma=int(g), change_on_skip=True), n_trials, threads, engine)
             for g in skip_probes]
    best = max(rows, key=lambda r: r.delay)
    return CaddEstimate(tuple(rows), best.delay, best.se, best.label)


@dataclass(frozen=True)
class PdcEstimate:
    value: float
    se: float
    method: str
    mean_on: float = math.nan
    mean_off: float = math.nan
    trials: int = 0

    @property
    def ci(self) -> tuple[float, float]:
        return self.value - Z95 * self.se, self.value + Z95 * self.se


def ladder_cycles(family: FamilySpec, params: DetectorParams, n_cycles: int, seed: int = 0,
                  control=None) -> tuple[np.ndarray, np.ndarray]:
    """On and off times of i.i.d. DECuSum renewal cycles under f_0.

    On time: first n with the control log-ratio walk below zero. Off time:
    ceil(|max(W, -h)| / mu) for the walk's value W at that moment.
    """
    if params.mu is None:
        raise ValueError("renewal cycles need mu > 0")
    control = family.control_density if control is None else control
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(TAG_RENEWAL,))))
    pos = np.zeros(n_cycles)
    on = np.zeros(n_cycles, dtype=np.int64)
    height = np.zeros(n_cycles)
    alive = np.arange(n_cycles)
    steps = 0
    while alive.size:
        steps += 1
        if steps > RENEWAL_CYCLE_CAP:
            raise EstimationError("a ladder cycle exceeded 10^7 steps; is the control drift negative under f_0?")
        pos[alive] += llr(control, family.pre, family.pre.sample(rng, alive.size))
        down = pos[alive] < 0
        done = alive[down]
        on[done] = steps
        height[done] = pos[done]
        alive = alive[~down]
    off = np.ceil(-np.maximum(height, -params.h) / params.mu).astype(np.int64)
    return on, off


def estimate_pdc_renewal(family: FamilySpec, params: DetectorParams, n_cycles: int = 100_000,
                         seed: int = 0, control=None) -> PdcEstimate:
    """PDC = E[on] / (E[on] + E[off]) over renewal cycles, delta-method SE."""
    if n_cycles < 100:
        raise ValueError("n_cycles must be >= 100")
    on, off = ladder_cycles(family, params, n_cycles, seed, control)
    total = on + off
    r = on.mean() / total.mean()
    resid = on - r * total
    se = float(resid.std(ddof=1) / (math.sqrt(n_cycles) * total.mean()))
    return PdcEstimate(float(r), se, "renewal-reward", float(on.mean()), float(off.mean()), n_cycles)


def estimate_pdc_longrun(cfg: TrialConfig, horizon: int = 10_000, n_trials: int = 200,
                         threads: int = 1, engine: str = "auto") -> PdcEstimate:
    """Mean fraction of the first ``horizon`` steps that were sampled, change never occurring.

    The detector runs with its threshold disabled so sampling continues for the
    whole window.
    """
    if horizon < 10**4:
        raise ValueError("horizon must be >= 10^4")
    det = cfg.detector.with_threshold(math.inf)
    run_cfg = replace(cfg, detector=det, gamma=math.inf, horizon=horizon)
    batch = run_trials(run_cfg, n_trials, (TAG_LONGRUN,), threads, engine)
    frac = batch.pre_used / horizon
    se = float(frac.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else 0.0
    return PdcEstimate(float(frac.mean()), se, "long-run", trials=n_trials)


def pdc_bound(mu: float, kl_pre_control: float) -> float:
    """mu / (mu + D(f_0 || control)); an upper bound on PDC when h is infinite."""
    return mu / (mu + kl_pre_control)


@dataclass(frozen=True)
class QEstimate:
    value: float
    se: float
    horizon: int
    trials: int


def estimate_q_theta(family: FamilySpec, theta_true: float, n_trials: int = 4000,
                     horizon: int = 10_000, seed: int = 0,
                     require_positive_drift: bool = True) -> QEstimate:
    """P(control log-ratio walk stays >= 0 for n <= horizon) under f_theta.

    Truncation at ``horizon`` biases the estimate upward.
    """
    from .distributions import member_drift

    if require_positive_drift:
        d = member_drift(family, theta_true)
        if not (d.drift > 0 if d.exact else d.drift > 3 * d.se):
            raise EstimationError(f"control drift {d.drift:.4g} under theta={theta_true} is not positive")
    post = family.member(theta_true)
    control = family.control_density
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(TAG_Q,))))
    pos = np.zeros(n_trials)
    alive = np.ones(n_trials, dtype=bool)
    block = 1024
    for start in range(0, horizon, block):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        L = min(block, horizon - start)
        inc = llr(control, family.pre, post.sample(rng, idx.size * L)).reshape(idx.size, L)
        path = pos[idx, None] + np.cumsum(inc, axis=1)
        alive[idx] = path.min(axis=1) >= 0
        pos[idx] = path[:, -1]
    q = float(alive.mean())
    return QEstimate(q, math.sqrt(q * (1 - q) / n_trials), horizon, n_trials)


def lower_bound(alpha: float, kl_value: float) -> float:
    """|log alpha| / D(f_theta || f_0)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not kl_value > 0:
        raise ValueError("KL divergence must be > 0")
    return abs(math.log(alpha)) / kl_value


def delay_gap_bound(q: float, h: float, mu: float) -> float:
    """(1/q + 1) * ceil(h / mu) + 1: the worst-case delay gap over GCuSum."""
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    return (1.0 / q + 1.0) * math.ceil(h / mu) + 1.0


# ------------------------------------------------------------------ reports


@dataclass(frozen=True)
class MetricsReport:
    detector: str
    threshold: float
    far: FarEstimate
    cadd: CaddEstimate
    pdc: PdcEstimate
    seed: int
    gap_bound: Optional[float] = None
    q_theta: Optional[QEstimate] = None

    @property
    def wadd_proxy(self) -> float:
        return self.cadd.value

    @property
    def censoring_rate(self) -> float:
        return self.far.censoring_rate

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "A": self.threshold,
            "far": {"estimate": self.far.far, "ci": [self.far.ci_lo, self.far.ci_hi],
                    "mean_tau": self.far.mean_tau, "se_tau": self.far.se_tau,
                    "conservative": self.far.conservative},
            "cadd": {"estimate": self.cadd.value, "se": self.cadd.se, "argmax": self.cadd.argmax,
                     "per_gamma": [{"gamma": g.label, "delay": g.delay, "se": g.se,
                                    "survivors": g.survivors} for g in self.cadd.per_gamma]},
            "wadd_proxy": self.wadd_proxy,
            "wadd_gap_bound": self.gap_bound,
            "q_theta": None if self.q_theta is None else {"estimate": self.q_theta.value,
                                                          "se": self.q_theta.se,
                                                          "horizon": self.q_theta.horizon},
            "pdc": {"estimate": self.pdc.value, "se": self.pdc.se, "method": self.pdc.method},
            "trials": self.far.trials,
            "censoring_rate": self.censoring_rate,
            "seed": self.seed,
        }


def exact_or_estimated_pdc(family: FamilySpec, spec: DetectorSpec, seed: int, n_cycles: int = 100_000,
                           longrun_trials: int = 200, threads: int = 1) -> PdcEstimate:
    """The applicable PDC estimator for a detector."""
    if spec.kind in ("cusum", "gcusum"):
        return PdcEstimate(1.0, 0.0, "exact")
    if spec.kind == "fractional":
        if spec.params.skip_pattern.kind == "period2":
            return PdcEstimate(0.5, 0.0, "exact")
        cfg = TrialConfig(family, spec, seed=seed)
        return estimate_pdc_longrun(cfg, n_trials=longrun_trials, threads=threads)
    control = None
    if spec.kind == "decusum":
        control = spec.build(family).post
    return estimate_pdc_renewal(family, spec.params, n_cycles, seed, control)


@dataclass(frozen=True)
class CurveRow:
    detector: str
    theta_true: float
    threshold: float
    far: FarEstimate
    cadd: CaddEstimate
    pdc: PdcEstimate
    seed: int


def tradeoff_curve(family: FamilySpec, detectors: Sequence[DetectorSpec], thresholds: Sequence[float],
                   theta_true: float, seed: int = 0, far_trials: int = 20_000, cadd_trials: int = 4000,
                   gamma_grid: Sequence[int] = DEFAULT_GAMMA_GRID, horizon: Optional[int] = None,
                   threads: int = 1, progress=None, skip_probes: Sequence[int] = ()) -> list[CurveRow]:
    """FAR, CADD and PDC for every (detector, threshold), rows in detector then threshold order.

    ``skip_probes`` are extra change points at skip-run starts, used for data-efficient detectors only.
    """
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("no thresholds")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly increasing")
    rows = []
    for spec in detectors:
        pdc = exact_or_estimated_pdc(family, spec, seed, threads=threads)
        for A in thresholds:
            det = spec.with_threshold(A)
            hz = horizon if horizon is not None else far_horizon(A)
            base = TrialConfig(family, det, math.inf, theta_true, hz, seed)
            far = estimate_far(base, far_trials, threads)
            probes = skip_probes if spec.data_efficient else ()
            cadd = estimate_cadd(base, gamma_grid, cadd_trials, threads, probes)
            rows.append(CurveRow(spec.name, theta_true, A, far, cadd, pdc, seed))
            if progress is not None:
                progress(rows[-1])
    return rows


def fitted_slope(rows: Sequence[CurveRow]) -> float:
    """Least-squares slope of CADD against |log FAR|."""
    x = np.array([abs(math.log(r.far.far)) for r in rows])
    y = np.array([r.cadd.value for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def metrics_report(family: FamilySpec, spec: DetectorSpec, theta_true: float, seed: int = 0,
                   far_trials: int = 20_000, cadd_trials: int = 4000,
                   gamma_grid: Sequence[int] = DEFAULT_GAMMA_GRID, skip_probes: Sequence[int] = (),
                   horizon: Optional[int] = None, threads: int = 1) -> MetricsReport:
    """All metrics for one detector at its configured threshold."""
    A = spec.params.threshold
    hz = horizon if horizon is not None else far_horizon(A)
    base = TrialConfig(family, spec, math.inf, theta_true, hz, seed)
    far = estimate_far(base, far_trials, threads)
    probes = skip_probes if spec.data_efficient else ()
    cadd = estimate_cadd(base, gamma_grid, cadd_trials, threads, probes)
    pdc = exact_or_estimated_pdc(family, spec, seed, threads=threads)
    gap, q = None, None
    if spec.kind == "gdecusum" and math.isfinite(spec.params.h):
        q = estimate_q_theta(family, theta_true, seed=seed)
        if q.value > 0:
            gap = delay_gap_bound(q.value, spec.params.h, spec.params.mu)
    return MetricsReport(spec.name, A, far, cadd, pdc, seed, gap, q)
