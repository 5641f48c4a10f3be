"""Command-line interface: ``deqcd {check-family,curve,pdc,simulate} --config FILE``.

Exit codes: 0 success, 1 bad config or arguments, 2 the requested quantity
does not apply (failed drift assumption, PDC of an always-sampling detector),
3 an estimator could not produce a value.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load
from .distributions import DensityError, check_least_favorable, kl
from .simulation import (
    EstimationError,
    TrialConfig,
    estimate_pdc_longrun,
    estimate_pdc_renewal,
    metrics_report,
    pdc_bound,
    tradeoff_curve,
)

EXIT_OK, EXIT_CONFIG, EXIT_SEMANTIC, EXIT_ESTIMATOR = 0, 1, 2, 3

CSV_HEADER = ["detector", "theta_true", "A", "far_hat", "far_ci_lo", "far_ci_hi", "cadd_hat",
              "cadd_se", "pdc_hat", "pdc_method", "trials", "censoring_rate", "seed"]


class SemanticError(RuntimeError):
    pass


def _g(v: float) -> str:
    return f"{v:.6g}"


def _err(msg: str):
    print(f"deqcd: {msg}", file=sys.stderr)


def _write_atomic(path: str, text: str):
    """Write via a temp file in the target directory so a failure leaves nothing behind."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(args, cfg: ExperimentConfig, text: str):
    """--stdout wins; otherwise --out, then the config's output path, then stdout."""
    out = None if args.stdout else (args.out or cfg.output)
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        _write_atomic(out, text)


# ---------------------------------------------------------------- commands


def cmd_check_family(cfg: ExperimentConfig, args) -> int:
    family = cfg.family.build()
    rng = np.random.default_rng(cfg.seed)
    report = check_least_favorable(family, rng)
    g = family.control_density
    print(f"control density: {g}")
    print(f"{'theta':>10} {'drift':>12} {'se':>10} {'D(f_th||f0)':>12} {'D(f0||f_th)':>12}")
    for m in report.members:
        fth = family.member(m.theta)
        print(f"{m.theta:>10.6g} {m.drift:>12.6g} {m.se:>10.3g} "
              f"{kl(fth, family.pre, rng):>12.6g} {kl(family.pre, fth, rng):>12.6g}")
    if report.assumption_holds:
        print("assumption holds: every member has positive drift")
        return EXIT_OK
    bad = ", ".join(f"{m.theta:.6g}" for m in report.violations())
    print(f"assumption FAILS at theta = {bad}")
    return EXIT_SEMANTIC


def _curve_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.detector, _g(r.theta_true), _g(r.threshold), _g(r.far.far), _g(r.far.ci_lo),
                    _g(r.far.ci_hi), _g(r.cadd.value), _g(r.cadd.se), _g(r.pdc.value), r.pdc.method,
                    r.far.trials, _g(r.far.censoring_rate), r.seed])
    return buf.getvalue()


def cmd_curve(cfg: ExperimentConfig, args) -> int:
    family = cfg.family.build()
    specs = [d.spec(cfg.thresholds[0]) for d in cfg.detectors]

    def progress(row):
        print(f"[curve] {row.detector} A={_g(row.threshold)} far={_g(row.far.far)} "
              f"cadd={_g(row.cadd.value)}", file=sys.stderr)

    rows = tradeoff_curve(family, specs, cfg.thresholds, cfg.theta_true, cfg.seed, cfg.trials,
                          cfg.cadd_trials, cfg.gamma_grid, cfg.horizon, args.threads, progress,
                          cfg.skip_probes)
    _emit(args, cfg, _curve_csv(rows))
    return EXIT_OK


def cmd_pdc(cfg: ExperimentConfig, args) -> int:
    family = cfg.family.build()
    picked = [d for d in cfg.detectors if d.type in ("decusum", "gdecusum")]
    if not picked:
        print("PDC is identically 1 for the configured detectors (they sample every step)")
        return EXIT_SEMANTIC
    for d in picked:
        spec = d.spec(cfg.thresholds[0])
        control = spec.build(family).post if d.type == "decusum" else family.control_density
        ren = estimate_pdc_renewal(family, spec.params, seed=cfg.seed, control=control)
        lr = estimate_pdc_longrun(TrialConfig(family, spec, seed=cfg.seed), threads=args.threads)
        print(f"detector {spec.name} mu={_g(d.mu)} h={_g(d.h)}")
        print(f"  renewal-reward: {ren.value:.6f} (95% CI {ren.ci[0]:.6f}, {ren.ci[1]:.6f})")
        print(f"  long-run:       {lr.value:.6f} (95% CI {lr.ci[0]:.6f}, {lr.ci[1]:.6f})")
        # Printed for finite h too, as a reference; no ordering is implied.
        b = pdc_bound(d.mu, kl(family.pre, control))
        print(f"  h=inf bound:    {b:.6f}")
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    family = cfg.family.build()
    out = []
    for d in cfg.detectors:
        for A in cfg.thresholds:
            rep = metrics_report(family, d.spec(A), cfg.theta_true, cfg.seed, cfg.trials,
                                 cfg.cadd_trials, cfg.gamma_grid, cfg.skip_probes, cfg.horizon,
                                 args.threads)
            print(f"[simulate] {rep.detector} A={_g(A)} done", file=sys.stderr)
            out.append(rep.to_dict())
    _emit(args, cfg, json.dumps(out, indent=2) + "\n")
    return EXIT_OK


COMMANDS = {"check-family": cmd_check_family, "curve": cmd_curve, "pdc": cmd_pdc,
            "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deqcd", description="Data-efficient composite change detection")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("check-family", "check the drift assumption for the family"),
                        ("curve", "FAR/CADD/PDC trade-off curve as CSV"),
                        ("pdc", "PDC estimates for the data-efficient detectors"),
                        ("simulate", "full metrics report as JSON")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--out", help="output path (overrides the config)")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        s.add_argument("--stdout", action="store_true", help="write the output to stdout")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        cfg = load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.validate()
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.family.build()
    except (ConfigError, DensityError) as e:
        _err(f"config error: {e}")
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except EstimationError as e:
        _err(f"estimation failed: {e}")
        return EXIT_ESTIMATOR
    except (SemanticError, DensityError) as e:
        _err(str(e))
        return EXIT_SEMANTIC
    except ValueError as e:
        _err(f"config error: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
