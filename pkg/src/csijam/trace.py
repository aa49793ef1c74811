"""CSI trace data model, on-disk format and derived series.

File layout::

    #meta {"format": "csijam-trace/1", "csi_scale": 80.3, ...}
    timestamp_us,seq,rssi,im0,re0,im1,re1,...,im51,re51
    ...

The header is a single line, ``#meta `` followed by a JSON object. Each row
holds the timestamp in microseconds, the sequence number, the RSSI (empty if
unknown) and 104 signed integers, two per subcarrier. CSI values are stored
as ``round(value * csi_scale)``; the writer picks the scale so that the
largest real or imaginary magnitude maps to 127. Pairs are imaginary-first
unless the header sets ``"imag_first": false``, and an optional
``"subcarrier_map"`` list says which subcarrier index each column pair holds.

Lost packets are not written; they show up only as gaps in ``seq``.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .channel import N_SUBCARRIERS
from .errors import InsufficientDataError, TraceFormatError

FORMAT_ID = "csijam-trace/1"
META_PREFIX = "#meta "
QUANT_CEILING = 127


class CsiRecord(NamedTuple):
    timestamp_us: int
    seq: int
    rssi_dbm: float | None
    csi: np.ndarray


class PdrWindow(NamedTuple):
    start_seq: int
    end_seq: int
    expected: int
    received: int

    @property
    def pdr(self) -> float:
        return self.received / self.expected


@dataclass
class CsiTrace:
    """Delivered packets of one capture, stored column-wise.

    ``rssi`` uses NaN for "not reported". Treat instances as immutable.
    """

    meta: dict = field(default_factory=dict)
    timestamps_us: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    seq: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    rssi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    csi: np.ndarray = field(default_factory=lambda: np.zeros((0, N_SUBCARRIERS), np.complex128))

    def __post_init__(self):
        self.timestamps_us = np.asarray(self.timestamps_us, dtype=np.int64)
        self.seq = np.asarray(self.seq, dtype=np.int64)
        self.rssi = np.asarray(self.rssi, dtype=np.float64)
        n = len(self.seq)
        csi = np.asarray(self.csi, dtype=np.complex128)
        self.csi = csi.reshape(n, -1) if n else csi.reshape(0, N_SUBCARRIERS)
        if not (len(self.timestamps_us) == len(self.rssi) == n):
            raise ValueError("trace columns differ in length")
        if np.any(np.diff(self.seq) <= 0):
            raise ValueError("sequence numbers must strictly increase")
        if np.any(np.diff(self.timestamps_us) < 0):
            raise ValueError("records must be sorted by timestamp")
        if np.any(self.seq < 0) or np.any(self.timestamps_us < 0):
            raise ValueError("timestamps and sequence numbers are non-negative")

    def __len__(self) -> int:
        return len(self.seq)

    def __iter__(self) -> Iterator[CsiRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> CsiRecord:
        r = self.rssi[i]
        return CsiRecord(int(self.timestamps_us[i]), int(self.seq[i]),
                         None if np.isnan(r) else float(r), self.csi[i])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.csi)

    def select(self, mask) -> "CsiTrace":
        return CsiTrace(dict(self.meta), self.timestamps_us[mask], self.seq[mask], self.rssi[mask], self.csi[mask])

    def seq_range(self, start: int | None = None, stop: int | None = None) -> "CsiTrace":
        """Records with ``start <= seq < stop``."""
        lo = 0 if start is None else np.searchsorted(self.seq, start)
        hi = len(self) if stop is None else np.searchsorted(self.seq, stop)
        return self.select(slice(lo, hi))

    @classmethod
    def from_records(cls, records, meta: dict | None = None) -> "CsiTrace":
        records = list(records)
        return cls(
            meta=dict(meta or {}),
            timestamps_us=[r.timestamp_us for r in records],
            seq=[r.seq for r in records],
            rssi=[np.nan if r.rssi_dbm is None else r.rssi_dbm for r in records],
            csi=np.array([r.csi for r in records], dtype=np.complex128).reshape(len(records), -1)
            if records else np.zeros((0, N_SUBCARRIERS), np.complex128),
        )

    def same_records(self, other: "CsiTrace") -> bool:
        return (np.array_equal(self.timestamps_us, other.timestamps_us)
                and np.array_equal(self.seq, other.seq)
                and np.array_equal(self.rssi, other.rssi, equal_nan=True)
                and self.csi.shape == other.csi.shape
                and np.array_equal(self.csi, other.csi))


# --------------------------------------------------------------------------
# quantisation
# --------------------------------------------------------------------------

def csi_peak(csi: np.ndarray) -> float:
    if csi.size == 0:
        return 0.0
    return float(max(np.max(np.abs(csi.real)), np.max(np.abs(csi.imag))))


def choose_scale(csi: np.ndarray) -> float:
    peak = csi_peak(csi)
    return QUANT_CEILING / peak if peak > 0 else 1.0


def quantize(csi: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer (imag, real) parts; raises if anything overflows int8."""
    im = np.rint(csi.imag * scale).astype(np.int64)
    re = np.rint(csi.real * scale).astype(np.int64)
    if im.size and max(np.max(np.abs(im)), np.max(np.abs(re))) > QUANT_CEILING:
        raise ValueError("csi_scale too large for the signed 8-bit range")
    return im, re


def dequantize(im: np.ndarray, re: np.ndarray, scale: float) -> np.ndarray:
    return re / scale + 1j * (im / scale)


def quantized(trace: CsiTrace, scale: float | None = None) -> CsiTrace:
    """The trace as it will read back from disk."""
    scale = _scale_for(trace) if scale is None else scale
    im, re = quantize(trace.csi, scale)
    return CsiTrace(dict(trace.meta), trace.timestamps_us, trace.seq, trace.rssi, dequantize(im, re, scale))


def _scale_for(trace: CsiTrace) -> float:
    # reuse a scale read from disk so re-writing a parsed trace is lossless
    old = trace.meta.get("csi_scale")
    if isinstance(old, (int, float)) and old > 0 and csi_peak(trace.csi) * old <= QUANT_CEILING + 0.5 - 1e-9:
        return float(old)
    return choose_scale(trace.csi)


# --------------------------------------------------------------------------
# writing and parsing
# --------------------------------------------------------------------------

def _format_rssi(r: float) -> str:
    if np.isnan(r):
        return ""
    if float(r).is_integer():
        return str(int(r))
    return repr(float(r))


def write_trace(trace: CsiTrace, sink) -> None:
    """Write ``trace`` to a path or a text stream."""
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="ascii", newline="\n") as fh:
            write_trace(trace, fh)
        return
    scale = _scale_for(trace)
    im, re = quantize(trace.csi, scale)
    reserved = ("csi_scale", "imag_first", "subcarrier_map", "format", "subcarriers")
    meta = {k: v for k, v in trace.meta.items() if k not in reserved}
    header = {"format": FORMAT_ID, "subcarriers": int(trace.csi.shape[1]) if len(trace) else N_SUBCARRIERS,
              "csi_scale": scale, "imag_first": True, **meta}
    sink.write(META_PREFIX + json.dumps(header, sort_keys=True) + "\n")
    pairs = np.empty((len(trace), 2 * im.shape[1] if len(trace) else 0), dtype=np.int64)
    if len(trace):
        pairs[:, 0::2] = im
        pairs[:, 1::2] = re
    for i in range(len(trace)):
        sink.write(f"{trace.timestamps_us[i]},{trace.seq[i]},{_format_rssi(trace.rssi[i])},"
                   + ",".join(map(str, pairs[i].tolist())) + "\n")


def dumps_trace(trace: CsiTrace) -> str:
    buf = io.StringIO()
    write_trace(trace, buf)
    return buf.getvalue()


def _parse_header(line: str) -> dict:
    if not line.startswith(META_PREFIX):
        raise TraceFormatError(f"first line must start with {META_PREFIX!r}", 1)
    try:
        meta = json.loads(line[len(META_PREFIX):])
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"header is not valid JSON ({exc.msg})", 1) from None
    if not isinstance(meta, dict):
        raise TraceFormatError("header must be a JSON object", 1)
    scale = meta.get("csi_scale")
    if not isinstance(scale, (int, float)) or isinstance(scale, bool) or not scale > 0:
        raise TraceFormatError("header needs a positive csi_scale", 1)
    n_sub = meta.get("subcarriers", N_SUBCARRIERS)
    if not isinstance(n_sub, int) or n_sub <= 0:
        raise TraceFormatError("header subcarriers must be a positive integer", 1)
    perm = meta.get("subcarrier_map")
    if perm is not None:
        if sorted(perm) != list(range(n_sub)):
            raise TraceFormatError("subcarrier_map must be a permutation of 0..subcarriers-1", 1)
    return meta


def parse_trace(source) -> CsiTrace:
    """Read a trace from a path, a text stream or a string of file content."""
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source and os.path.exists(source)):
        with open(source, encoding="ascii", errors="replace") as fh:
            return parse_trace(fh)
    lines = source.splitlines() if isinstance(source, str) else source
    it = iter(lines)
    try:
        first = next(it)
    except StopIteration:
        raise TraceFormatError("empty input, missing #meta header", 1) from None
    meta = _parse_header(first.rstrip("\r\n"))
    n_sub = meta.get("subcarriers", N_SUBCARRIERS)
    ncol = 3 + 2 * n_sub

    ts, seq, rssi, ints = [], [], [], []
    last_seq = last_ts = None
    for lineno, raw in enumerate(it, start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != ncol:
            raise TraceFormatError(f"expected {ncol} columns ({2 * n_sub} CSI integers), got {len(parts)}", lineno)
        try:
            t, s = int(parts[0]), int(parts[1])
            r = float(parts[2]) if parts[2].strip() else np.nan
            vals = [int(p) for p in parts[3:]]
        except ValueError as exc:
            raise TraceFormatError(f"malformed number: {exc}", lineno) from None
        if t < 0 or s < 0:
            raise TraceFormatError("timestamp and seq must be non-negative", lineno)
        if last_seq is not None and s <= last_seq:
            raise TraceFormatError(f"sequence number {s} does not increase (previous {last_seq})", lineno)
        if last_ts is not None and t < last_ts:
            raise TraceFormatError(f"timestamp {t} goes backwards (previous {last_ts})", lineno)
        if max(vals, default=0) > QUANT_CEILING or min(vals, default=0) < -QUANT_CEILING - 1:
            raise TraceFormatError("CSI integer outside the signed 8-bit range", lineno)
        last_seq, last_ts = s, t
        ts.append(t)
        seq.append(s)
        rssi.append(r)
        ints.append(vals)

    scale = float(meta["csi_scale"])
    arr = np.array(ints, dtype=np.int64).reshape(len(ints), 2 * n_sub)
    first_part, second_part = arr[:, 0::2], arr[:, 1::2]
    im, re = (first_part, second_part) if meta.get("imag_first", True) else (second_part, first_part)
    cols = dequantize(im, re, scale)
    perm = meta.get("subcarrier_map")
    if perm is not None:
        csi = np.empty_like(cols)
        csi[:, np.asarray(perm)] = cols
    else:
        csi = cols
    return CsiTrace(meta=meta, timestamps_us=ts, seq=seq, rssi=rssi, csi=csi)


def loads_trace(text: str) -> CsiTrace:
    return parse_trace(io.StringIO(text))


# --------------------------------------------------------------------------
# derived series
# --------------------------------------------------------------------------

def jitter_series(trace: CsiTrace) -> tuple[np.ndarray, np.ndarray]:
    """``(seq, delay_us)``: gap from the previous delivered packet to each one."""
    if len(trace) < 2:
        raise InsufficientDataError("jitter needs at least two records")
    return trace.seq[1:].copy(), np.diff(trace.timestamps_us)


def pdr_windows(trace: CsiTrace, window_size: int) -> list[PdrWindow]:
    """Delivery ratio over consecutive blocks of ``window_size`` sequence numbers.

    The span runs from the first to the last received sequence number; the
    final block may be shorter.
    """
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    if len(trace) == 0:
        raise InsufficientDataError("cannot compute PDR of an empty trace")
    lo, hi = int(trace.seq[0]), int(trace.seq[-1]) + 1
    starts = np.arange(lo, hi, window_size)
    ends = np.minimum(starts + window_size, hi)
    counts = np.searchsorted(trace.seq, ends) - np.searchsorted(trace.seq, starts)
    return [PdrWindow(int(s), int(e - 1), int(e - s), int(c)) for s, e, c in zip(starts, ends, counts)]


def overall_pdr(trace: CsiTrace, expected: int | None = None) -> float:
    if expected is None:
        if len(trace) == 0:
            raise InsufficientDataError("cannot compute PDR of an empty trace")
        expected = int(trace.seq[-1] - trace.seq[0] + 1)
    return len(trace) / expected if expected else 0.0
