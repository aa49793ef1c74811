"""Baseline calibration and windowed jamming verdicts.

A window is judged against a jammer-free :class:`BaselineProfile` with four
tests:

``amplitude-shift``
    window mean amplitude outside ``mu_i +/- k*sigma_i`` on at least ``m``
    subcarriers.
``amplitude-suppression``
    window mean below ``mu_i - k*sigma_i`` on at least ``suppression_count``
    subcarriers at once.
``jitter``
    95th percentile inter-arrival above ``max(jitter_multiplier * baseline
    p95, jitter_floor_us)``.
``pdr``
    window delivery ratio below ``pdr_ref - pdr_drop``.

A window is *jammed* when the PDR test fires together with at least one of
the other three. A window spanning fewer than ``min_samples`` packet slots
is *insufficient-data*; the amplitude tests additionally need
``min_samples`` received records and are skipped otherwise, so a near-total
outage is still judged on its PDR and jitter.

Windows
-------
Hop windows sit on boundaries ``b = first_seq + j*hop`` (``j >= 1``) and
cover sequence numbers ``[max(first_seq, b - window), b)``. The streaming
detector emits one as soon as a record with ``seq >= b - 1`` arrives, or at
:meth:`StreamDetector.finish` for boundaries up to the attempt count.

When nothing has arrived for longer than ``gap_timeout_s`` after the last
record (timestamp ``t_L``, sequence ``s_L``), a gap window is forced at each
deadline ``t_L + n*gap_timeout``. It assumes the ``M = floor(gap * rate)``
slots after ``s_L`` (at most ``window``) were lost, covers the ``window``
slots ending with them, and counts those slots as censored inter-arrival
samples equal to the open gap. A total outage is therefore reported one
timeout after the last delivery instead of never.
"""

from __future__ import annotations

import dataclasses
import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .trace import CsiRecord, CsiTrace

NORMAL = "normal"
JAMMED = "jammed"
INSUFFICIENT = "insufficient-data"

TEST_SHIFT = "amplitude-shift"
TEST_SUPPRESSION = "amplitude-suppression"
TEST_JITTER = "jitter"
TEST_PDR = "pdr"
TEST_ORDER = (TEST_SHIFT, TEST_SUPPRESSION, TEST_JITTER, TEST_PDR)

MODES = ("static", "dynamic")


@dataclass(frozen=True)
class DetectionPolicy:
    mode: str = "static"
    k_static: float = 4.0
    k_dynamic: float = 6.0
    min_shifted: int = 6
    suppression_count: int = 40
    jitter_multiplier: float = 5.0
    jitter_floor_us: float = 100_000.0
    pdr_drop: float = 0.25
    window: int = 200
    hop: int = 100
    gap_timeout_s: float = 2.0
    packet_rate_hz: float = 100.0
    sigma_floor: float = 1e-6
    min_samples: int = 10
    min_calibration: int = 500

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"policy mode must be one of {MODES}, got {self.mode!r}")
        if self.window < 1 or not 1 <= self.hop <= self.window:
            raise ConfigError("policy needs window >= 1 and 1 <= hop <= window")
        if not (self.gap_timeout_s > 0 and self.packet_rate_hz > 0 and self.sigma_floor > 0):
            raise ConfigError("gap_timeout_s, packet_rate_hz and sigma_floor must be positive")
        if self.k_static <= 0 or self.k_dynamic <= 0:
            raise ConfigError("k must be positive")

    @property
    def k(self) -> float:
        return self.k_static if self.mode == "static" else self.k_dynamic

    @property
    def gap_timeout_us(self) -> int:
        return int(round(self.gap_timeout_s * 1e6))

    def with_overrides(self, overrides: dict) -> "DetectionPolicy":
        """Apply ``name=value`` overrides; ``k`` sets the k of the current mode."""
        changes = {}
        names = {f.name: f for f in dataclasses.fields(self)}
        mode = overrides.get("mode", self.mode)
        for key, value in overrides.items():
            if key == "k":
                key = "k_static" if mode == "static" else "k_dynamic"
            if key not in names:
                raise ConfigError(f"unknown policy field {key!r}")
            current = getattr(self, key)
            try:
                if isinstance(current, str):
                    changes[key] = str(value)
                elif isinstance(current, int):
                    as_float = float(value)
                    if not as_float.is_integer():
                        raise ValueError
                    changes[key] = int(as_float)
                else:
                    changes[key] = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for policy field {key!r}: {value!r}") from None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionPolicy":
        return cls().with_overrides(dict(d))


@dataclass(frozen=True)
class BaselineProfile:
    mean: np.ndarray
    std: np.ndarray
    jitter_p95_us: float
    jitter_max_us: float
    pdr_ref: float
    mode: str
    calibration_packet_count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ConfigError("baseline mean and std must be equal-length vectors")
        if np.any(std < 0) or not np.all(np.isfinite(mean)) or not np.all(np.isfinite(std)):
            raise ConfigError("baseline std must be finite and >= 0")
        if not 0.0 <= self.pdr_ref <= 1.0:
            raise ConfigError("baseline pdr_ref must lie in [0, 1]")
        if self.mode not in MODES:
            raise ConfigError(f"baseline mode must be one of {MODES}")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "calibration_packet_count": int(self.calibration_packet_count),
            "pdr_ref": float(self.pdr_ref),
            "jitter_p95_us": float(self.jitter_p95_us),
            "jitter_max_us": float(self.jitter_max_us),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineProfile":
        try:
            return cls(mean=d["mean"], std=d["std"], jitter_p95_us=float(d["jitter_p95_us"]),
                       jitter_max_us=float(d["jitter_max_us"]), pdr_ref=float(d["pdr_ref"]),
                       mode=d["mode"], calibration_packet_count=int(d["calibration_packet_count"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed baseline: {exc!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "BaselineProfile":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"baseline is not valid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("baseline must be a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class FeatureVector:
    window_id: str
    mean: np.ndarray
    std: np.ndarray
    jitter_p95_us: float
    jitter_max_us: float
    pdr: float
    sample_count: int
    expected_count: int
    censored_count: int = 0
    start_seq: int = 0
    end_seq: int = 0
    time_us: int = 0

    @property
    def observations(self) -> int:
        """Settled packet slots: received, lost before a later arrival, or censored by a gap."""
        return self.expected_count


@dataclass(frozen=True)
class Verdict:
    window_id: str
    decision: str
    triggered: tuple = ()
    score: float = 0.0
    affected_subcarriers: tuple = ()
    time_us: int = 0
    start_seq: int = 0
    end_seq: int = 0

    def __post_init__(self):
        if self.decision == JAMMED and not self.triggered:
            raise ValueError("a jammed verdict needs at least one triggered test")
        if self.decision != JAMMED and self.affected_subcarriers:
            raise ValueError("only jammed verdicts carry affected subcarriers")

    @property
    def jammed(self) -> bool:
        return self.decision == JAMMED

    def to_dict(self) -> dict:
        return {"window": self.window_id, "decision": self.decision, "triggered": list(self.triggered),
                "score": self.score, "affected": list(self.affected_subcarriers),
                "time_us": self.time_us, "start_seq": self.start_seq, "end_seq": self.end_seq}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        return cls(window_id=d["window"], decision=d["decision"], triggered=tuple(d["triggered"]),
                   score=float(d["score"]), affected_subcarriers=tuple(d["affected"]),
                   time_us=int(d["time_us"]), start_seq=int(d["start_seq"]), end_seq=int(d["end_seq"]))


@dataclass(frozen=True)
class DetectionReport:
    window_count: int
    jammed_count: int
    insufficient_count: int
    first_jammed: Verdict | None
    affected_union: tuple = ()

    @property
    def jammed_fraction(self) -> float:
        return self.jammed_count / self.window_count if self.window_count else 0.0

    def to_dict(self) -> dict:
        return {"windows": self.window_count, "jammed": self.jammed_count,
                "insufficient": self.insufficient_count, "jammed_fraction": self.jammed_fraction,
                "first_jammed": self.first_jammed.to_dict() if self.first_jammed else None,
                "affected_union": list(self.affected_union)}


def dump_verdicts(verdicts: Iterable[Verdict]) -> str:
    return "".join(v.to_json() + "\n" for v in verdicts)


def load_verdicts(text: str) -> list[Verdict]:
    return [Verdict.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def summarize(verdicts: Sequence[Verdict]) -> DetectionReport:
    jammed = [v for v in verdicts if v.jammed]
    union = sorted({i for v in jammed for i in v.affected_subcarriers})
    return DetectionReport(len(verdicts), len(jammed), sum(v.decision == INSUFFICIENT for v in verdicts),
                           jammed[0] if jammed else None, tuple(union))


# --------------------------------------------------------------------------
# calibration and features
# --------------------------------------------------------------------------

def _as_trace(records) -> CsiTrace:
    return records if isinstance(records, CsiTrace) else CsiTrace.from_records(records)


def calibrate_baseline(segment, mode: str = "static", min_records: int = 500) -> BaselineProfile:
    """Learn the jammer-free reference from a trace segment or record list."""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    tr = _as_trace(segment)
    if len(tr) < max(min_records, 2):
        raise InsufficientDataError(f"calibration needs at least {min_records} records, got {len(tr)}")
    amp = np.abs(tr.csi)
    jitter = np.diff(tr.timestamps_us).astype(np.float64)
    span = int(tr.seq[-1] - tr.seq[0] + 1)
    return BaselineProfile(
        mean=amp.mean(axis=0), std=amp.std(axis=0),
        jitter_p95_us=float(np.percentile(jitter, 95)), jitter_max_us=float(jitter.max()),
        pdr_ref=len(tr) / span, mode=mode, calibration_packet_count=len(tr))


def _features(window_id, amp, jitter_us, expected, censored_count=0, censored_us=0.0,
              start_seq=0, end_seq=0, time_us=0) -> FeatureVector:
    n = amp.shape[0]
    if n > expected:
        raise ValueError("window holds more records than expected packets")
    if n:
        amp = np.ascontiguousarray(amp)
        mean, std = amp.mean(axis=0), amp.std(axis=0)
    else:
        mean = std = np.full(amp.shape[1], np.nan)
    samples = np.asarray(jitter_us, dtype=np.float64)
    if censored_count:
        samples = np.concatenate([samples, np.full(censored_count, float(censored_us))])
    p95 = float(np.percentile(samples, 95)) if samples.size else 0.0
    mx = float(samples.max()) if samples.size else 0.0
    return FeatureVector(window_id, mean, std, p95, mx, n / expected, n, expected,
                         censored_count, start_seq, end_seq, time_us)


def window_features(records, expected_count: int, window_id: str = "w",
                    previous_timestamp_us: int | None = None) -> FeatureVector:
    """Features of one window of records.

    Jitter is taken between consecutive records of the window, plus the gap
    from ``previous_timestamp_us`` to the first record when given.
    """
    tr = _as_trace(records)
    if len(tr) == 0:
        raise InsufficientDataError("empty window")
    if expected_count < len(tr):
        raise ValueError("expected_count must be >= number of records")
    ts = tr.timestamps_us
    if previous_timestamp_us is not None:
        ts = np.concatenate([[previous_timestamp_us], ts])
    return _features(window_id, np.abs(tr.csi), np.diff(ts), expected_count,
                     start_seq=int(tr.seq[0]), end_seq=int(tr.seq[-1]), time_us=int(tr.timestamps_us[-1]))


def affected_subcarriers(features: FeatureVector, baseline: BaselineProfile, k: float,
                         sigma_floor: float = 1e-6) -> set:
    """Indices whose window mean lies more than ``k`` sigma from the baseline."""
    if features.sample_count == 0:
        return set()
    sigma = np.maximum(baseline.std, sigma_floor)
    return set(np.flatnonzero(np.abs(features.mean - baseline.mean) > k * sigma).tolist())


def detect(features: FeatureVector, baseline: BaselineProfile, policy: DetectionPolicy) -> Verdict:
    if baseline.mode != policy.mode:
        raise ConfigError(f"baseline mode {baseline.mode!r} does not match policy mode {policy.mode!r}")
    common = dict(window_id=features.window_id, time_us=features.time_us,
                  start_seq=features.start_seq, end_seq=features.end_seq)
    if features.observations < policy.min_samples:
        return Verdict(decision=INSUFFICIENT, **common)
    fired = set()
    affected = set()
    if features.sample_count >= policy.min_samples:
        sigma = np.maximum(baseline.std, policy.sigma_floor)
        dev = features.mean - baseline.mean
        bound = policy.k * sigma
        outside = np.abs(dev) > bound
        affected = set(np.flatnonzero(outside).tolist())
        if len(affected) >= policy.min_shifted:
            fired.add(TEST_SHIFT)
        if int(np.count_nonzero(dev < -bound)) >= policy.suppression_count:
            fired.add(TEST_SUPPRESSION)
    if features.jitter_p95_us > max(policy.jitter_multiplier * baseline.jitter_p95_us, policy.jitter_floor_us):
        fired.add(TEST_JITTER)
    if features.pdr < baseline.pdr_ref - policy.pdr_drop:
        fired.add(TEST_PDR)
    triggered = tuple(t for t in TEST_ORDER if t in fired)
    jammed = TEST_PDR in fired and len(fired) >= 2
    return Verdict(decision=JAMMED if jammed else NORMAL, triggered=triggered, score=float(len(triggered)),
                   affected_subcarriers=tuple(sorted(affected)) if jammed else (), **common)


# --------------------------------------------------------------------------
# streaming and batch evaluation
# --------------------------------------------------------------------------

def _gap_slots(gap_us: int, policy: DetectionPolicy) -> int:
    return min(int(np.floor(gap_us * 1e-6 * policy.packet_rate_hz + 1e-9)), policy.window)


class StreamDetector:
    """Online detector: feed records in order, collect verdicts as they fall due."""

    def __init__(self, baseline: BaselineProfile, policy: DetectionPolicy | None = None):
        self.baseline = baseline
        self.policy = policy or DetectionPolicy(mode=baseline.mode)
        if baseline.mode != self.policy.mode:
            raise ConfigError(f"baseline mode {baseline.mode!r} does not match policy mode {self.policy.mode!r}")
        self._buf: deque = deque()  # (seq, jitter_us or None, amplitudes)
        self._first_seq: int | None = None
        self._next_j = 1
        self._last_ts: int | None = None
        self._last_seq: int | None = None
        self._gaps_fired = 0
        self._gap_count = 0
        self._finished = False

    # windows ---------------------------------------------------------------

    def _slice(self, lo: int, hi: int):
        rows = [r for r in self._buf if lo <= r[0] < hi]
        amp = np.array([r[2] for r in rows]).reshape(len(rows), -1) if rows else np.zeros((0, self.baseline.mean.size))
        jit = [r[1] for r in rows if r[1] is not None]
        return amp, jit

    def _hop_verdict(self, time_us: int) -> Verdict:
        p = self.policy
        b = self._first_seq + self._next_j * p.hop
        lo = max(self._first_seq, b - p.window)
        amp, jit = self._slice(lo, b)
        f = _features(f"w{self._next_j}", amp, jit, b - lo, start_seq=lo, end_seq=b - 1, time_us=time_us)
        self._next_j += 1
        return detect(f, self.baseline, p)

    def _gap_verdict(self, deadline_us: int) -> Verdict:
        p = self.policy
        gap = deadline_us - self._last_ts
        m = _gap_slots(gap, p)
        hi = self._last_seq + 1 + m
        lo = max(self._first_seq, hi - p.window)
        amp, jit = self._slice(lo, hi)
        self._gap_count += 1
        f = _features(f"g{self._gap_count}", amp, jit, hi - lo, censored_count=m, censored_us=gap,
                      start_seq=lo, end_seq=hi - 1, time_us=deadline_us)
        return detect(f, self.baseline, p)

    def _prune(self):
        p = self.policy
        keep_from = min(self._first_seq + self._next_j * p.hop - p.window, self._last_seq + 1 - p.window)
        while self._buf and self._buf[0][0] < keep_from:
            self._buf.popleft()

    # events ----------------------------------------------------------------

    def _due_gaps(self, now_us: int) -> list[Verdict]:
        out = []
        if self._last_ts is None:
            return out
        while True:
            deadline = self._last_ts + (self._gaps_fired + 1) * self.policy.gap_timeout_us
            if not now_us > deadline:
                return out
            self._gaps_fired += 1
            out.append(self._gap_verdict(deadline))

    def push(self, record: CsiRecord) -> list[Verdict]:
        if self._finished:
            raise RuntimeError("detector already finished")
        seq, ts = int(record.seq), int(record.timestamp_us)
        if self._last_seq is not None and (seq <= self._last_seq or ts < self._last_ts):
            raise ValueError("records must arrive with increasing seq and non-decreasing time")
        out = self._due_gaps(ts)
        if self._first_seq is None:
            self._first_seq = seq
        jitter = None if self._last_ts is None else ts - self._last_ts
        self._buf.append((seq, jitter, np.abs(np.asarray(record.csi))))
        self._last_seq, self._last_ts, self._gaps_fired = seq, ts, 0
        while self._first_seq + self._next_j * self.policy.hop <= seq + 1:
            out.append(self._hop_verdict(ts))
        self._prune()
        return out

    def tick(self, now_us: int) -> list[Verdict]:
        """Let wall-clock time pass without a packet; fires due gap windows."""
        return self._due_gaps(int(now_us))

    def finish(self, end_us: int | None = None, end_seq: int | None = None) -> list[Verdict]:
        """Flush at the end of a capture.

        ``end_us`` fires gap windows that fell due before the capture ended;
        ``end_seq`` (the number of attempted packets) closes hop windows
        whose boundary lies at or below it.
        """
        out = [] if end_us is None else self._due_gaps(int(end_us))
        if self._first_seq is not None and end_seq is not None:
            t = self._last_ts if end_us is None else max(int(end_us), self._last_ts)
            while self._first_seq + self._next_j * self.policy.hop <= end_seq:
                out.append(self._hop_verdict(t))
        self._finished = True
        return out


def _iter_records(source) -> Iterator[CsiRecord]:
    return iter(source) if not isinstance(source, CsiTrace) else iter(source)


def detect_stream(source, baseline: BaselineProfile, policy: DetectionPolicy | None = None,
                  end_us: int | None = None, end_seq: int | None = None) -> Iterator[Verdict]:
    sd = StreamDetector(baseline, policy)
    for rec in _iter_records(source):
        yield from sd.push(rec)
    yield from sd.finish(end_us, end_seq)


def trace_end(trace: CsiTrace) -> tuple[int | None, int | None]:
    """``(end_us, end_seq)`` recorded by the simulator, if any."""
    end_us = trace.meta.get("end_us")
    attempts = trace.meta.get("attempts")
    return (int(end_us) if end_us is not None else None, int(attempts) if attempts is not None else None)


def window_plan(trace: CsiTrace, policy: DetectionPolicy, end_us: int | None = None,
                end_seq: int | None = None) -> list[tuple]:
    """The window partition as ``(kind, index, lo_seq, hi_seq, time_us, censored, gap_us, known)``.

    Computed directly from the whole trace; the stream detector reaches the
    same partition incrementally. ``known`` is how many records had arrived
    when the window fell due; a gap window must not see later arrivals.
    """
    plan = []
    if len(trace) == 0:
        return plan
    seq, ts = trace.seq, trace.timestamps_us
    first = int(seq[0])
    timeout = policy.gap_timeout_us
    j, g = 1, 0

    def gaps(last_i, until_us):
        nonlocal g
        t_l, s_l = int(ts[last_i]), int(seq[last_i])
        n = 1
        while until_us > t_l + n * timeout:
            gap = n * timeout
            m = _gap_slots(gap, policy)
            hi = s_l + 1 + m
            g += 1
            plan.append(("gap", g, max(first, hi - policy.window), hi, t_l + gap, m, gap, last_i + 1))
            n += 1

    def hops(limit, t, known):
        nonlocal j
        while first + j * policy.hop <= limit:
            b = first + j * policy.hop
            plan.append(("hop", j, max(first, b - policy.window), b, t, 0, 0, known))
            j += 1

    for i in range(len(trace)):
        if i:
            gaps(i - 1, int(ts[i]))
        hops(int(seq[i]) + 1, int(ts[i]), i + 1)
    if end_us is not None:
        gaps(len(trace) - 1, int(end_us))
    if end_seq is not None:
        hops(int(end_seq), int(ts[-1]) if end_us is None else max(int(end_us), int(ts[-1])), len(trace))
    return plan


def window_feature_vectors(trace: CsiTrace, policy: DetectionPolicy, end_us: int | None = None,
                           end_seq: int | None = None) -> list[FeatureVector]:
    amp_all = np.abs(trace.csi)
    jit_all = np.diff(trace.timestamps_us)
    out = []
    for kind, idx, lo, hi, t, m, gap, known in window_plan(trace, policy, end_us, end_seq):
        a, b = np.searchsorted(trace.seq[:known], [lo, hi])
        # jitter of record i is the gap from record i-1
        jit = jit_all[max(a, 1) - 1:b - 1] if b > 0 else jit_all[:0]
        wid = f"w{idx}" if kind == "hop" else f"g{idx}"
        out.append(_features(wid, amp_all[a:b], jit, hi - lo, censored_count=m, censored_us=gap,
                             start_seq=lo, end_seq=hi - 1, time_us=t))
    return out


def detect_trace(trace: CsiTrace, baseline: BaselineProfile, policy: DetectionPolicy | None = None,
                 end_us: int | None = None, end_seq: int | None = None) -> list[Verdict]:
    """Batch detection over a whole trace.

    ``end_us``/``end_seq`` default to the values the simulator stored in the
    trace header, so batch and stream runs agree on the same file.
    """
    policy = policy or DetectionPolicy(mode=baseline.mode)
    meta_end_us, meta_end_seq = trace_end(trace)
    end_us = meta_end_us if end_us is None else end_us
    end_seq = meta_end_seq if end_seq is None else end_seq
    return [detect(f, baseline, policy) for f in window_feature_vectors(trace, policy, end_us, end_seq)]
