"""Compiled trial loops.

These replay exactly the recursions in ``detectors`` on blocks of
precomputed log-likelihood ratios, so a Monte Carlo trial costs a few
nanoseconds per time step. State lives in small arrays so a trial can be
resumed block after block:

    fstate = [w, statistic]
    istate = [n, skips_left, change_at, pre_used, tau, n_hyp, ring_pos]

``change_at`` and ``tau`` are 0 until the event happens. The ``*_a`` inputs
are used before the change and the ``*_b`` inputs after it.
"""

import math

import numpy as np
from numba import njit

MODE_ALWAYS = 0
MODE_CONTROL = 1
MODE_PATTERN = 2

N, SKIPS, CHANGE_AT, PRE_USED, TAU, N_HYP, RING_POS = range(7)
NEG_TINY = -math.ulp(0.0)


@njit(cache=True, nogil=True)
def _sample_flag(mode, skips_left, keep_r):
    if mode == MODE_CONTROL:
        return skips_left == 0
    if mode == MODE_PATTERN:
        return keep_r
    return True


@njit(cache=True, nogil=True)
def _advance_change(istate, n, sample, gamma, probe):
    if istate[CHANGE_AT] == 0:
        if probe:
            if n >= gamma and not sample:
                istate[CHANGE_AT] = n
        elif n >= gamma:
            istate[CHANGE_AT] = n
    return istate[CHANGE_AT] > 0


@njit(cache=True, nogil=True)
def _control_update(fstate, istate, sample, v, mu, h):
    if sample:
        w = max(-h, fstate[0] + v)
        if w < 0.0:
            istate[SKIPS] = np.int64(math.ceil(-w / mu))
        else:
            istate[SKIPS] = 0
    else:
        istate[SKIPS] -= 1
        if istate[SKIPS] == 0:
            w = 0.0
        else:
            w = min(fstate[0] + mu, NEG_TINY)
    fstate[0] = w


@njit(cache=True, nogil=True)
def _finish_step(fstate, istate, n, stat, threshold, sample, changed, horizon):
    """Record the step; return True when the trial is over."""
    fstate[1] = stat
    istate[N] = n
    if stat >= threshold:
        istate[TAU] = n
        return True
    if sample and not changed:
        istate[PRE_USED] += 1
    return n >= horizon


@njit(cache=True, nogil=True)
def finite_block(llr_a, llr_b, ctrl_a, ctrl_b, keep, stats, fstate, istate,
                 threshold, mu, h, mode, star, member_control, gamma, probe, horizon):
    """Per-member CuSums plus optional DECuSum control; returns True when done."""
    n_rows, m = llr_a.shape
    for r in range(n_rows):
        n = istate[N] + 1
        sample = _sample_flag(mode, istate[SKIPS], keep[r])
        changed = _advance_change(istate, n, sample, gamma, probe)
        if mode == MODE_CONTROL:
            v = ctrl_b[r] if changed else ctrl_a[r]
            _control_update(fstate, istate, sample, v, mu, h)
        if sample:
            for k in range(m):
                v = llr_b[r, k] if changed else llr_a[r, k]
                stats[k] = max(0.0, stats[k] + v)
        if mode == MODE_CONTROL and member_control:
            stat = fstate[0]
            for k in range(m):
                if k != star:
                    stat = max(stat, stats[k])
        else:
            stat = stats[0]
            for k in range(1, m):
                stat = max(stat, stats[k])
        if _finish_step(fstate, istate, n, stat, threshold, sample, changed, horizon):
            return True
    return False


@njit(cache=True, nogil=True)
def gaussian_glr_block(x_a, x_b, ctrl_a, ctrl_b, keep, sums, counts, fstate, istate,
                       threshold, mu, h, mode, lo, hi, gamma, probe, horizon):
    """Gaussian exponential-family GLR CuSum over sampled data (ring buffer of hypotheses)."""
    cap = sums.shape[0]
    for r in range(x_a.shape[0]):
        n = istate[N] + 1
        sample = _sample_flag(mode, istate[SKIPS], keep[r])
        changed = _advance_change(istate, n, sample, gamma, probe)
        if mode == MODE_CONTROL:
            v = ctrl_b[r] if changed else ctrl_a[r]
            _control_update(fstate, istate, sample, v, mu, h)
        stat = fstate[1]
        if sample:
            x = x_b[r] if changed else x_a[r]
            nh = istate[N_HYP]
            for j in range(nh):
                sums[j] += x
                counts[j] += 1.0
            if nh < cap:
                sums[nh] = x
                counts[nh] = 1.0
                istate[N_HYP] = nh + 1
            else:
                pos = istate[RING_POS]
                sums[pos] = x
                counts[pos] = 1.0
                istate[RING_POS] = (pos + 1) % cap
            stat = -np.inf
            for j in range(istate[N_HYP]):
                s = sums[j]
                c = counts[j]
                th = min(max(s / c, lo), hi)
                val = th * s - 0.5 * c * th * th
                if val > stat:
                    stat = val
        if _finish_step(fstate, istate, n, stat, threshold, sample, changed, horizon):
            return True
    return False
