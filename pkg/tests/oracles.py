"""Brute-force reference implementations, written from the definitions.

Nothing here reuses package code paths beyond the Gaussian log-density
difference, which is recomputed inline.
"""

import math
from fractions import Fraction

import numpy as np


def gauss_llr(theta, x, m0=0.0):
    return (theta - m0) * x - (theta * theta - m0 * m0) / 2


def windowed_max(llr_rows):
    """max over k <= n and members of sum_{i=k}^n llr[theta, i], or 0 for the empty window.

    ``llr_rows`` has one row per member; returns the statistic after each n.
    """
    llr_rows = np.atleast_2d(np.asarray(llr_rows, float))
    m, n = llr_rows.shape
    out = []
    for t in range(1, n + 1):
        best = 0.0
        for k in range(t):
            best = max(best, float(llr_rows[:, k:t].sum(axis=1).max()))
        out.append(best)
    return np.array(out)


def sampling_decisions(ctrl_llr, mu, h):
    """Sampling flags of a DECuSum driven by ``ctrl_llr`` (one value per time step).

    Skip runs are counted directly: after an undershoot to W < 0 the detector
    skips the smallest m with W + m*mu >= 0 steps, m computed exactly in
    rational arithmetic.
    """
    flags = []
    w, skip = 0.0, 0
    for v in ctrl_llr:
        if skip > 0:
            flags.append(False)
            skip -= 1
            continue
        flags.append(True)
        w = w + v
        if w < 0:
            w = max(w, -h)
            skip = math.ceil(Fraction(-w) / Fraction(mu))
            w = 0.0
    return np.array(flags)


def gdecusum_oracle(thetas, xs, mu, h, control=None):
    """Composite statistic with skipped indices contributing zero log-likelihood."""
    ctrl = thetas[0] if control is None else control
    flags = sampling_decisions([gauss_llr(ctrl, x) for x in xs], mu, h)
    rows = np.array([[gauss_llr(th, x) if s else 0.0 for x, s in zip(xs, flags)] for th in thetas])
    return windowed_max(rows), flags


def expfam_window_oracle(xs, lo, hi, window=None, grid=20_001):
    """Gaussian GLR statistic by search over a theta grid plus the clamped sample mean."""
    thetas = np.linspace(lo, hi, grid)
    out = []
    for t in range(1, len(xs) + 1):
        ks = range(max(0, t - window) if window else 0, t)
        best = -math.inf
        for k in ks:
            s, c = float(np.sum(xs[k:t])), t - k
            cand = np.append(thetas, min(max(s / c, lo), hi))
            best = max(best, float(np.max(cand * s - c * cand**2 / 2)))
        out.append(best)
    return np.array(out)
