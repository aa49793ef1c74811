import functools
import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from csijam.scenario import preset, run_scenario  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def simulate(name: str, seed: int):
    """Preset traces are shared across test modules; treat them as read-only."""
    return run_scenario(preset(name, seed))


@functools.lru_cache(maxsize=None)
def reference_baseline(name: str, seed: int):
    """Baseline from the jammer-free part of a preset: phase 1, or the first half without a jammer."""
    from csijam.detector import calibrate_baseline

    t = simulate(name, seed)
    stop = t.meta["activation_seq"] if t.meta["jammer_enabled"] else t.meta["attempts"] // 2
    return calibrate_baseline(t.seq_range(None, stop), t.meta["mode"])
