"""Hot inner loops of the simulator.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy one.
The compiled path is used when numba imports cleanly and the environment
variable ``CSIJAM_DISABLE_NUMBA`` is unset (or ``0``). Both paths produce
identical results up to floating point reassociation; the test-suite checks
them against each other.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("CSIJAM_DISABLE_NUMBA", "").strip().lower()
_DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no", "off")

try:
    if _DISABLED_BY_ENV:
        raise ImportError("numba disabled via CSIJAM_DISABLE_NUMBA")
    from numba import njit
except ImportError:
    njit = None

NUMBA_ENABLED = njit is not None


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


# --------------------------------------------------------------------------
# radix-2 decimation-in-time FFT over the last axis of a 2-D array
# --------------------------------------------------------------------------

def fft_rows_numpy(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 FFT of every row, vectorised across rows and blocks."""
    m, n = x.shape
    out = x[:, _bit_reverse_indices(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(m, n // size, size)
        even = blocks[:, :, :half].copy()
        odd = blocks[:, :, half:] * tw
        blocks[:, :, :half] = even + odd
        blocks[:, :, half:] = even - odd
        size *= 2
    return out


def _fft_rows_loop(x, rev, tw):
    m, n = x.shape
    out = np.empty((m, n), dtype=np.complex128)
    for r in range(m):
        for i in range(n):
            out[r, rev[i]] = x[r, i]
    size = 2
    while size <= n:
        half = size // 2
        step = n // size
        for r in range(m):
            for start in range(0, n, size):
                for k in range(half):
                    t = tw[k * step] * out[r, start + k + half]
                    u = out[r, start + k]
                    out[r, start + k] = u + t
                    out[r, start + k + half] = u - t
        size *= 2
    return out


# --------------------------------------------------------------------------
# delay binning of multipath components into CIR taps
# --------------------------------------------------------------------------

def bin_taps_numpy(amp, phase, bins, n_taps):
    """Coherently sum ``amp * exp(-j*phase)`` into ``bins`` per row."""
    m = amp.shape[0]
    taps = np.zeros((m, n_taps), dtype=np.complex128)
    rows = np.broadcast_to(np.arange(m)[:, None], bins.shape)
    np.add.at(taps, (rows, bins), amp * np.exp(-1j * phase))
    return taps


def _bin_taps_loop(amp, phase, bins, n_taps):
    m, c = amp.shape
    taps = np.zeros((m, n_taps), dtype=np.complex128)
    for r in range(m):
        for j in range(c):
            taps[r, bins[r, j]] += amp[r, j] * (np.cos(phase[r, j]) - 1j * np.sin(phase[r, j]))
    return taps


# --------------------------------------------------------------------------
# receiver clock: turns per-attempt outcomes into arrival timestamps
# --------------------------------------------------------------------------

def _clock_loop(delivered, jam_active, u_base, u_slack, u_hit, u_len,
                interval, base_lo, base_hi, slack_max, stall_prob, stall_lo, stall_hi):
    n = delivered.shape[0]
    ts = np.full(n, np.nan)
    t = 0.0
    acc = 0.0
    stalled = False
    for i in range(n):
        if jam_active[i]:
            cost = interval
            if not delivered[i]:
                cost += slack_max * u_slack[i]
                if not stalled and u_hit[i] < stall_prob:
                    cost += stall_lo + (stall_hi - stall_lo) * u_len[i]
                    stalled = True
        else:
            cost = interval * (base_lo + (base_hi - base_lo) * u_base[i])
        acc += cost
        if delivered[i]:
            t += acc
            ts[i] = t
            acc = 0.0
            stalled = False
    return ts, t + acc


def clock_numpy(delivered, jam_active, u_base, u_slack, u_hit, u_len,
                interval, base_lo, base_hi, slack_max, stall_prob, stall_lo, stall_hi):
    """Arrival time of each delivered attempt (NaN for lost ones) and run end time.

    Per-attempt costs are vectorised; only the cumulative sum is sequential.
    At most one stall hits each run of losses between two deliveries.
    """
    delivered = np.asarray(delivered, dtype=bool)
    jam_active = np.asarray(jam_active, dtype=bool)
    normal_cost = interval * (base_lo + (base_hi - base_lo) * u_base)
    hit = np.flatnonzero(jam_active & ~delivered & (u_hit < stall_prob))
    run_id = np.cumsum(delivered)[hit]
    first = hit[np.r_[True, run_id[1:] != run_id[:-1]]] if hit.size else hit
    stall = np.zeros(delivered.shape[0])
    stall[first] = stall_lo + (stall_hi - stall_lo) * u_len[first]
    jam_cost = interval + np.where(delivered, 0.0, slack_max * u_slack + stall)
    cost = np.where(jam_active, jam_cost, normal_cost)
    clock = np.cumsum(cost)
    ts = np.where(delivered, clock, np.nan)
    end = float(clock[-1]) if clock.size else 0.0
    return ts, end


# --------------------------------------------------------------------------
# antenna misalignment as a two-state Markov chain, active only while moving
# --------------------------------------------------------------------------

def _orientation_loop(moving, u_switch, u_depth, p_enter, p_exit, lo_db, hi_db):
    n = moving.shape[0]
    loss = np.zeros(n)
    bad = False
    for i in range(n):
        if moving[i]:
            if bad:
                if u_switch[i] < p_exit:
                    bad = False
            elif u_switch[i] < p_enter:
                bad = True
        else:
            bad = False
        if bad:
            loss[i] = lo_db + (hi_db - lo_db) * u_depth[i]
    return loss


# The chain and the clock are inherently sequential; their numpy paths are
# the same loops run by the interpreter.
orientation_numpy = _orientation_loop


if NUMBA_ENABLED:
    _fft_rows_nb = njit(cache=True)(_fft_rows_loop)
    bin_taps_numba = njit(cache=True)(_bin_taps_loop)
    _clock_nb = njit(cache=True)(_clock_loop)
    orientation_numba = njit(cache=True)(_orientation_loop)

    def fft_rows_numba(x: np.ndarray) -> np.ndarray:
        n = x.shape[1]
        tw = np.exp(-2j * np.pi * np.arange(n // 2) / n)
        return _fft_rows_nb(np.ascontiguousarray(x, dtype=np.complex128), _bit_reverse_indices(n), tw)

    def clock_numba(delivered, jam_active, u_base, u_slack, u_hit, u_len,
                    interval, base_lo, base_hi, slack_max, stall_prob, stall_lo, stall_hi):
        return _clock_nb(np.asarray(delivered, dtype=np.bool_), np.asarray(jam_active, dtype=np.bool_),
                         u_base, u_slack, u_hit, u_len, float(interval), float(base_lo), float(base_hi),
                         float(slack_max), float(stall_prob), float(stall_lo), float(stall_hi))

    fft_rows = fft_rows_numba
    bin_taps = bin_taps_numba
    clock = clock_numba
    orientation_chain = orientation_numba
else:
    fft_rows = fft_rows_numpy
    bin_taps = bin_taps_numpy
    clock = clock_numpy
    orientation_chain = orientation_numpy
