"""Acceptance criteria, one test each, printing a PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed even under output capture.
"""

import dataclasses
import time

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import reference_baseline, simulate
from csijam.channel import (
    CHANNEL_11_HZ,
    SUBCARRIER_SPACING_HZ,
    MultipathComponent,
    cir_compose,
    cir_to_cfr,
    decompose,
    sample_subcarrier_csi,
)
from csijam.detector import (
    DetectionPolicy,
    affected_subcarriers,
    calibrate_baseline,
    detect_stream,
    detect_trace,
    trace_end,
    window_features,
)
from csijam.errors import TraceFormatError
from csijam.scenario import JammerConfig, preset, run_scenario
from csijam.trace import dumps_trace, jitter_series, loads_trace, quantized
from oracles import naive_dft
from strategies import malformed_corpus, traces

SEEDS = range(10)
NOJAM = ("static-nojam", "dynamic-nojam")
JAM = ("static-jam-10m", "static-jam-30m", "dynamic-jam-20m", "dynamic-jam-25m", "dynamic-jam-30m")
ALL = NOJAM + JAM


@pytest.fixture
def criterion(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail
    return emit


def phase_two(trace):
    return trace.seq_range(trace.meta["activation_seq"])


def phase_two_pdr(trace):
    a, n = trace.meta["activation_seq"], trace.meta["attempts"]
    return len(phase_two(trace)) / (n - a)


def activation_trace_us(trace):
    """Receiver-clock time of activation, bounded below by the last phase-1 delivery."""
    return int(trace.timestamps_us[trace.seq < trace.meta["activation_seq"]][-1])


def verdicts(name, seed):
    t = simulate(name, seed)
    return detect_trace(t, reference_baseline(name, seed))


def test_c01_fft_oracle(criterion):
    rng = np.random.default_rng(2024)
    cirs = rng.standard_normal((100, 64)) + 1j * rng.standard_normal((100, 64))
    start = time.perf_counter()
    cfrs = [cir_to_cfr(x) for x in cirs]
    elapsed = time.perf_counter() - start
    err = max(np.max(np.abs(h - naive_dft(x))) for h, x in zip(cfrs, cirs))
    criterion(1, err < 1e-9 and elapsed < 1.0, f"max abs error {err:.2e} over 100 CIRs in {elapsed * 1e3:.1f} ms")


def test_c02_unit_tap_identity(criterion):
    csi = sample_subcarrier_csi(cir_to_cfr(cir_compose([MultipathComponent(1.0, 0.0, 0.0)])))
    amp, phase = decompose(csi)
    da, dp = np.max(np.abs(amp - 1)), np.max(np.abs(phase))
    ok = csi.size == 52 and da <= 1e-12 and dp <= 1e-12
    criterion(2, ok, f"max |amp - 1| = {da:.1e}, max |phase| = {dp:.1e} on {csi.size} subcarriers")


def test_c03_static_nojam_calibration(criterion):
    pdrs, lo, hi = [], np.inf, 0.0
    for seed in SEEDS:
        t = simulate("static-nojam", seed)
        pdrs.append(len(t) / t.meta["attempts"])
        _, d = jitter_series(t)
        lo, hi = min(lo, d.min()), max(hi, d.max())
    ok = min(pdrs) >= 0.97 and lo >= 5_000 and hi <= 20_000
    criterion(3, ok, f"PDR min {min(pdrs):.4f}; jitter range [{lo / 1e3:.2f}, {hi / 1e3:.2f}] ms")


def test_c04_static_30m_calibration(criterion):
    pdrs, max_jitter = [], []
    for seed in SEEDS:
        t = simulate("static-jam-30m", seed)
        pdrs.append(phase_two_pdr(t))
        seq, d = jitter_series(t)
        max_jitter.append(d[seq >= t.meta["activation_seq"]].max() / 1e6)
    mean = float(np.mean(pdrs))
    ok = 0.41 <= mean <= 0.61 and min(max_jitter) >= 1.0
    criterion(4, ok, f"phase-2 PDR mean {mean:.3f}; smallest per-seed max jitter {min(max_jitter):.2f} s")


def test_c05_dynamic_calibration(criterion):
    nojam = [len(t) / t.meta["attempts"] for t in (simulate("dynamic-nojam", s) for s in SEEDS)]
    means = {d: float(np.mean([phase_two_pdr(simulate(f"dynamic-jam-{d}m", s)) for s in SEEDS]))
             for d in (20, 25, 30)}
    ok = (0.82 <= min(nojam) and max(nojam) <= 0.95 and means[20] < means[25] < means[30]
          and 0.22 <= means[20] <= 0.42)
    criterion(5, ok, f"no-jam PDR [{min(nojam):.3f}, {max(nojam):.3f}]; phase-2 PDR 20/25/30 m = "
                     f"{means[20]:.3f}/{means[25]:.3f}/{means[30]:.3f}")


def test_c06_detector_soundness(criterion):
    false_pos, windows, fewest = 0, 0, np.inf
    for name in NOJAM:
        for seed in SEEDS:
            vs = verdicts(name, seed)
            fewest = min(fewest, len(vs))
            windows += len(vs)
            false_pos += sum(v.jammed for v in vs)
    # the jammer-free phase of every jam preset counts as a further no-jam run
    for name in JAM:
        for seed in SEEDS:
            a = simulate(name, seed).meta["activation_seq"]
            vs = [v for v in verdicts(name, seed) if v.end_seq < a]
            windows += len(vs)
            false_pos += sum(v.jammed for v in vs)
    ok = false_pos == 0 and fewest >= 60
    criterion(6, ok, f"{false_pos} jammed of {windows} jammer-free windows; fewest per no-jam trace {fewest}")


def test_c07_completeness_and_latency(criterion):
    worst, worst_outage, misses = 0.0, 0.0, []
    for name in JAM:
        for seed in SEEDS:
            t = simulate(name, seed)
            jammed = [v for v in verdicts(name, seed) if v.jammed]
            if not jammed:
                misses.append((name, seed))
                continue
            latency = (jammed[0].time_us - activation_trace_us(t)) / 1e6
            worst = max(worst, latency)
            if name == "static-jam-10m":
                worst_outage = max(worst_outage, (jammed[0].time_us - int(t.timestamps_us[-1])) / 1e6)
    ok = not misses and worst <= 5.0 and worst_outage <= 2.5
    criterion(7, ok, f"missed {misses or 'none'}; worst latency {worst:.2f} s; "
                     f"10 m outage flagged {worst_outage:.2f} s after last delivery")


def partial_band(seed):
    cfg = preset("static-jam-30m", seed)
    cfg.link.agc_enabled = False
    cfg.jammer = JammerConfig(enabled=True, tx_power_dbm=0.0, distance_to_receiver_m=48.0,
                              jam_center_hz=CHANNEL_11_HZ + 22.5 * SUBCARRIER_SPACING_HZ,
                              jam_bandwidth_hz=8 * SUBCARRIER_SPACING_HZ, activation_time_s=30.0)
    cfg.validate()
    return cfg


def test_c08_partial_band_identification(criterion):
    target = set(range(44, 52))
    exact, sizes = 0, []
    for seed in range(20):
        t = run_scenario(partial_band(seed))
        a, n = t.meta["activation_seq"], t.meta["attempts"]
        base = calibrate_baseline(t.seq_range(None, a), "static")
        f = window_features(phase_two(t), n - a)
        found = affected_subcarriers(f, base, DetectionPolicy().k)
        exact += found == target
        sizes.append(len(found))
    criterion(8, exact >= 19, f"exact set {{44..51}} in {exact}/20 seeds; set sizes {sorted(set(sizes))}")


def test_c09_dynamic_suppression(criterion):
    passing, worst = 0, 0.0
    for seed in SEEDS:
        jam = np.median(np.abs(phase_two(simulate("dynamic-jam-20m", seed)).csi), axis=0)
        ref = np.median(np.abs(simulate("dynamic-nojam", seed).csi), axis=0)
        passing += bool(np.all(jam < ref))
        worst = max(worst, float(np.max(jam / ref)))
    criterion(9, passing == len(SEEDS), f"{passing}/{len(SEEDS)} seeds suppressed on all 52 subcarriers; "
                                        f"largest median ratio {worst:.3f}")


def test_c10_trace_format(criterion):
    failures = []

    @settings(max_examples=1000, database=None)
    @given(traces())
    def roundtrip(t):
        back = loads_trace(dumps_trace(t))
        if not back.same_records(quantized(t)):
            failures.append(t)
        assert back.same_records(quantized(t))

    roundtrip()
    rejected = 0
    corpus = malformed_corpus()
    for _, text, line in corpus:
        try:
            loads_trace(text)
        except TraceFormatError as exc:
            rejected += exc.line == line and f"line {line}" in str(exc)
    ok = not failures and rejected == len(corpus)
    criterion(10, ok, f"1000 round trips, {len(failures)} mismatches; {rejected}/{len(corpus)} malformed inputs "
                      f"rejected at the right line")


def test_c11_batch_stream_equivalence(criterion):
    mismatched, total = [], 0
    for name in ALL:
        for seed in SEEDS:
            t = simulate(name, seed)
            b = reference_baseline(name, seed)
            batch = detect_trace(t, b)
            stream = list(detect_stream(t, b, None, *trace_end(t)))
            total += len(batch)
            if batch != stream:
                mismatched.append((name, seed))
    criterion(11, not mismatched, f"{total} verdicts over {len(ALL) * len(SEEDS)} traces; "
                                  f"mismatches {mismatched or 'none'}")


SCALE_PRESETS = ("static-nojam", "static-jam-30m", "static-jam-10m", "dynamic-nojam", "dynamic-jam-20m")


def test_c12_scale_awareness(criterion):
    changed, total = [], 0
    for name in SCALE_PRESETS:
        t = simulate(name, 0)
        ref = [v.decision for v in verdicts(name, 0)]
        stop = t.meta["activation_seq"] if t.meta["jammer_enabled"] else t.meta["attempts"] // 2
        for c in (0.1, 10.0):
            scaled = dataclasses.replace(t, csi=t.csi * c)
            base = calibrate_baseline(scaled.seq_range(None, stop), t.meta["mode"])
            got = [v.decision for v in detect_trace(scaled, base)]
            total += len(got)
            if got != ref:
                changed.append((name, c))
    criterion(12, not changed, f"{total} scaled verdicts on {len(SCALE_PRESETS)} presets; changed {changed or 'none'}")
