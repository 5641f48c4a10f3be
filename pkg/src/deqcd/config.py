"""JSON experiment configuration.

Example::

    {
      "family": {"type": "gaussian_finite", "thetas": [0.4, 0.6, 0.8, 1.0], "theta_star": 0.4},
      "theta_true": 0.6,
      "detectors": [
        {"type": "gcusum"},
        {"type": "gdecusum", "mu": 0.08, "h": "inf"},
        {"type": "fractional", "skip_pattern": "period2"}
      ],
      "thresholds": [3.0, 4.0, 5.0],
      "trials": 20000,
      "cadd_trials": 4000,
      "gamma_grid": [1, 5, 25, 100],
      "seed": 7,
      "output": "curve.csv"
    }

``h`` may be the string "inf". An exponential family is declared with
``"type": "gaussian_expfam", "theta_l": ..., "theta_u": ..., "epsilon": ...``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .detectors import DETECTOR_KINDS, DetectorParams, DetectorSpec, SkipPattern
from .distributions import FamilySpec, Gaussian, gaussian_family

FAMILY_TYPES = ("gaussian_finite", "gaussian_expfam")


class ConfigError(ValueError):
    pass


def _num(d: dict, key: str, where: str, default: Any = ..., kind=float, allow_inf=False):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{where}: missing field '{key}'")
        return default
    v = d[key]
    if v is None:
        return None if default is None else v
    if allow_inf and v in ("inf", "Infinity", "+inf"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _inf_out(v: float):
    return "inf" if v == math.inf else v


@dataclass
class FamilyConfig:
    type: str
    theta_star: float
    thetas: Optional[list] = None
    theta_l: Optional[float] = None
    theta_u: Optional[float] = None
    epsilon: float = 0.0
    control_mean: Optional[float] = None

    @classmethod
    def from_dict(cls, d: dict) -> "FamilyConfig":
        if not isinstance(d, dict):
            raise ConfigError("family: expected an object")
        t = d.get("type")
        if t not in FAMILY_TYPES:
            raise ConfigError(f"family.type: expected one of {FAMILY_TYPES}, got {t!r}")
        cfg = cls(type=t, theta_star=_num(d, "theta_star", "family"))
        if t == "gaussian_finite":
            thetas = d.get("thetas")
            if not isinstance(thetas, list) or not thetas:
                raise ConfigError("family.thetas: expected a non-empty list")
            cfg.thetas = [_num({"v": v}, "v", f"family.thetas[{i}]") for i, v in enumerate(thetas)]
        else:
            cfg.theta_l = _num(d, "theta_l", "family")
            cfg.theta_u = _num(d, "theta_u", "family")
            cfg.epsilon = _num(d, "epsilon", "family", 0.0)
        ctrl = d.get("control_density")
        if ctrl is not None:
            if not isinstance(ctrl, dict) or ctrl.get("type") != "gaussian":
                raise ConfigError("family.control_density: only {\"type\": \"gaussian\", \"mean\": m} is supported")
            cfg.control_mean = _num(ctrl, "mean", "family.control_density")
        return cfg

    def to_dict(self) -> dict:
        d: dict = {"type": self.type, "theta_star": self.theta_star}
        if self.type == "gaussian_finite":
            d["thetas"] = list(self.thetas)
        else:
            d.update(theta_l=self.theta_l, theta_u=self.theta_u, epsilon=self.epsilon)
        if self.control_mean is not None:
            d["control_density"] = {"type": "gaussian", "mean": self.control_mean}
        return d

    def contains(self, theta: float) -> bool:
        if self.type == "gaussian_finite":
            return theta in self.thetas
        return self.theta_l <= theta <= self.theta_u

    def build(self) -> FamilySpec:
        control = None if self.control_mean is None else Gaussian(self.control_mean)
        if self.type == "gaussian_finite":
            return FamilySpec.gaussian_finite(self.thetas, self.theta_star, control)
        return FamilySpec.exponential(gaussian_family(self.theta_l, self.theta_u, self.epsilon),
                                      self.theta_star, control)


@dataclass
class DetectorConfig:
    type: str
    mu: Optional[float] = None
    h: float = math.inf
    window: Optional[int] = None
    skip_pattern: Optional[str] = None
    keep_prob: float = 0.5
    theta: Optional[float] = None
    label: str = ""

    @classmethod
    def from_dict(cls, d: dict, where: str) -> "DetectorConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: expected an object")
        t = d.get("type")
        if t not in DETECTOR_KINDS:
            raise ConfigError(f"{where}.type: expected one of {DETECTOR_KINDS}, got {t!r}")
        cfg = cls(
            type=t,
            mu=_num(d, "mu", where, None),
            h=_num(d, "h", where, math.inf, allow_inf=True),
            window=_num(d, "window", where, None, kind=int),
            skip_pattern=d.get("skip_pattern"),
            keep_prob=_num(d, "keep_prob", where, 0.5),
            theta=_num(d, "theta", where, None),
            label=str(d.get("label", "")),
        )
        if t in ("decusum", "gdecusum") and (cfg.mu is None or cfg.mu <= 0):
            raise ConfigError(f"{where}.mu: {t} needs mu > 0")
        if cfg.h < 0:
            raise ConfigError(f"{where}.h: must be >= 0")
        if cfg.window is not None and cfg.window < 1:
            raise ConfigError(f"{where}.window: must be >= 1")
        if t == "fractional":
            cfg.skip_pattern = cfg.skip_pattern or "period2"
        if cfg.skip_pattern not in (None, "period2", "bernoulli"):
            raise ConfigError(f"{where}.skip_pattern: expected 'period2' or 'bernoulli'")
        if not 0 <= cfg.keep_prob <= 1:
            raise ConfigError(f"{where}.keep_prob: must lie in [0, 1]")
        return cfg

    def to_dict(self) -> dict:
        d: dict = {"type": self.type, "h": _inf_out(self.h), "keep_prob": self.keep_prob}
        for key in ("mu", "window", "skip_pattern", "theta"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        if self.label:
            d["label"] = self.label
        return d

    def spec(self, threshold: float) -> DetectorSpec:
        pattern = None
        if self.skip_pattern is not None:
            pattern = SkipPattern(self.skip_pattern, self.keep_prob)
        params = DetectorParams(threshold, self.mu, self.h, self.window, pattern)
        return DetectorSpec(self.type, params, self.theta, self.label)


@dataclass
class ExperimentConfig:
    family: FamilyConfig
    detectors: list
    thresholds: list
    theta_true: float
    trials: int = 20_000
    cadd_trials: int = 4000
    horizon: Optional[int] = None
    gamma_grid: list = field(default_factory=lambda: [1, 5, 25, 100, 400])
    skip_probes: list = field(default_factory=list)
    seed: int = 0
    output: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        fam = FamilyConfig.from_dict(d.get("family"))
        dets = d.get("detectors")
        if not isinstance(dets, list) or not dets:
            raise ConfigError("detectors: expected a non-empty list")
        detectors = [DetectorConfig.from_dict(x, f"detectors[{i}]") for i, x in enumerate(dets)]
        thr = d.get("thresholds")
        if not isinstance(thr, list) or not thr:
            raise ConfigError("thresholds: expected a non-empty list")
        thresholds = [_num({"v": v}, "v", f"thresholds[{i}]") for i, v in enumerate(thr)]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ConfigError("thresholds: must be strictly increasing")
        if any(a <= 0 for a in thresholds):
            raise ConfigError("thresholds: must be > 0")
        grid = d.get("gamma_grid", [1, 5, 25, 100, 400])
        probes = d.get("skip_probes", [])
        for name, seq in (("gamma_grid", grid), ("skip_probes", probes)):
            if not isinstance(seq, list) or any(isinstance(g, bool) or not isinstance(g, int) or g < 1 for g in seq):
                raise ConfigError(f"{name}: expected a list of integers >= 1")
        if not grid:
            raise ConfigError("gamma_grid: must not be empty")
        cfg = cls(
            family=fam,
            detectors=detectors,
            thresholds=thresholds,
            theta_true=_num(d, "theta_true", "config"),
            trials=_num(d, "trials", "config", 20_000, kind=int),
            cadd_trials=_num(d, "cadd_trials", "config", 4000, kind=int),
            horizon=_num(d, "horizon", "config", None, kind=int),
            gamma_grid=list(grid),
            skip_probes=list(probes),
            seed=_num(d, "seed", "config", 0, kind=int),
            output=d.get("output"),
        )
        cfg.validate()
        return cfg

    def validate(self):
        fam = self.family
        if not fam.contains(fam.theta_star):
            raise ConfigError(f"family.theta_star: {fam.theta_star} is not in the family")
        if not fam.contains(self.theta_true):
            raise ConfigError(f"theta_true: {self.theta_true} is not in the family")
        for i, d in enumerate(self.detectors):
            if d.theta is not None and not fam.contains(d.theta):
                raise ConfigError(f"detectors[{i}].theta: {d.theta} is not in the family")
        if self.trials < 100 or self.cadd_trials < 100:
            raise ConfigError("trials and cadd_trials must be >= 100")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon: must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        d = {
            "family": self.family.to_dict(),
            "detectors": [x.to_dict() for x in self.detectors],
            "thresholds": list(self.thresholds),
            "theta_true": self.theta_true,
            "trials": self.trials,
            "cadd_trials": self.cadd_trials,
            "gamma_grid": list(self.gamma_grid),
            "skip_probes": list(self.skip_probes),
            "seed": self.seed,
        }
        if self.horizon is not None:
            d["horizon"] = self.horizon
        if self.output is not None:
            d["output"] = self.output
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def loads(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return ExperimentConfig.from_dict(data)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    return loads(text)
