"""Deterministic UAV-to-ground CSI trace synthesis.

The simulator sends ``duration_s * packet_rate_hz`` packets on a fixed
schedule. For every packet it places the transmitter on its mission, draws a
multipath channel, runs the link budget against the noise floor and an
optional constant AWGN jammer, decides delivery, and for delivered packets
records the CSI the receiver would report.

Randomness comes from one seed, split into independent streams per purpose
(``SeedSequence(seed, spawn_key=(stream,))``). Each stream is drawn as an
array indexed by packet number, so the draws for packet ``n`` never depend on
what happened to earlier packets.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .channel import (
    BANDWIDTH_HZ,
    CHANNEL_11_HZ,
    DEFAULT_DELAY_RESOLUTION,
    DEFAULT_FFT_SIZE,
    FrequencyGrid,
    MultipathComponent,
    _delay_bins,
    cir_to_cfr,
    sample_subcarrier_csi,
)
from .errors import ConfigError
from .trace import CsiTrace

SPEED_OF_LIGHT = 299_792_458.0
JAMMER_MAX_DBM = 17.0
SDR_MIN_HZ = 70e6
SDR_MAX_HZ = 6e9

# spawn keys of the per-purpose random streams
_STREAM_FIELD = 0
_STREAM_JITTER = 1
_STREAM_PHASE = 2
_STREAM_OUTCOME = 3
_STREAM_DELAY = 4
_STREAM_NOISE = 5
_STREAM_ORIENTATION = 6


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class LinkConfig:
    tx_power_dbm: float = 10.0
    packet_rate_hz: float = 100.0
    center_frequency_hz: float = CHANNEL_11_HZ
    bandwidth_hz: float = BANDWIDTH_HZ
    noise_floor_dbm: float = -95.0
    duration_s: float = 60.0
    agc_enabled: bool = True

    def validate(self):
        if not self.packet_rate_hz > 0:
            raise ConfigError("link.packet_rate_hz must be positive")
        if not self.bandwidth_hz > 0:
            raise ConfigError("link.bandwidth_hz must be positive")
        if not self.duration_s > 0:
            raise ConfigError("link.duration_s must be positive")
        if not self.center_frequency_hz > 0:
            raise ConfigError("link.center_frequency_hz must be positive")

    @property
    def interval_s(self) -> float:
        return 1.0 / self.packet_rate_hz

    @property
    def packet_count(self) -> int:
        return int(round(self.duration_s * self.packet_rate_hz))


@dataclass
class JammerConfig:
    """Constant jammer emitting complex white Gaussian noise.

    Power is absolute transmit power in dBm. SDR gain settings map onto this
    only through a hardware-specific calibration, so gain is not modelled.
    """

    enabled: bool = False
    tx_power_dbm: float = JAMMER_MAX_DBM
    distance_to_receiver_m: float = 30.0
    jam_center_hz: float = CHANNEL_11_HZ
    jam_bandwidth_hz: float = BANDWIDTH_HZ
    activation_time_s: float = 0.0

    def validate(self):
        if not 0.0 <= self.tx_power_dbm <= JAMMER_MAX_DBM:
            raise ConfigError(f"jammer.tx_power_dbm must lie in [0, {JAMMER_MAX_DBM}]")
        if not self.distance_to_receiver_m > 0:
            raise ConfigError("jammer.distance_to_receiver_m must be positive")
        if not self.jam_bandwidth_hz > 0:
            raise ConfigError("jammer.jam_bandwidth_hz must be positive")
        if not SDR_MIN_HZ <= self.jam_center_hz <= SDR_MAX_HZ:
            raise ConfigError("jammer.jam_center_hz outside the 70 MHz - 6 GHz SDR range")
        if not self.activation_time_s >= 0:
            raise ConfigError("jammer.activation_time_s must be >= 0")


@dataclass
class OrientationModel:
    """Antenna misalignment while the airframe moves.

    A two-state chain per packet: aligned (no extra loss) or misaligned
    (uniform extra loss in ``[loss_min_db, loss_max_db]``). Hovering resets
    to aligned.
    """

    enter_prob: float = 0.0
    exit_prob: float = 1.0
    loss_min_db: float = 0.0
    loss_max_db: float = 0.0

    def validate(self):
        if not (0 <= self.enter_prob <= 1 and 0 <= self.exit_prob <= 1):
            raise ConfigError("orientation probabilities must lie in [0, 1]")
        if self.loss_max_db < self.loss_min_db:
            raise ConfigError("orientation.loss_max_db must be >= loss_min_db")

    @property
    def active(self) -> bool:
        return self.enter_prob > 0 and self.loss_max_db > 0


@dataclass
class Mission:
    mode: str = "static"
    waypoints: list = field(default_factory=lambda: [(50.0, 0.0, 1.5)])
    hold_time_s: float = 1.0
    speed_mps: float = 10.0
    receiver_position: tuple = (0.0, 0.0, 1.5)
    loop: bool = False
    orientation: OrientationModel = field(default_factory=OrientationModel)

    def validate(self):
        if self.mode not in ("static", "dynamic"):
            raise ConfigError(f"mission.mode must be 'static' or 'dynamic', got {self.mode!r}")
        if not self.waypoints:
            raise ConfigError("mission needs at least one waypoint")
        if self.mode == "static" and len(self.waypoints) != 1:
            raise ConfigError("a static mission has exactly one transmitter position")
        if not self.speed_mps > 0:
            raise ConfigError("mission.speed_mps must be positive")
        if not self.hold_time_s >= 0:
            raise ConfigError("mission.hold_time_s must be >= 0")
        for p in list(self.waypoints) + [self.receiver_position]:
            if len(p) != 3:
                raise ConfigError("positions are 3-D (x, y, z) in metres")
        self.orientation.validate()

    @classmethod
    def static(cls, distance_m: float = 50.0, height_m: float = 1.5) -> "Mission":
        return cls(mode="static", waypoints=[(distance_m, 0.0, height_m)],
                   receiver_position=(0.0, 0.0, height_m))

    @classmethod
    def lawnmower(cls, origin=(84.0, -15.0), row_length_m: float = 30.0, row_spacing_m: float = -4.0,
                  rows: int = 17, altitude_m: float = 10.0, speed_mps: float = 12.0,
                  hold_time_s: float = 1.0, **kwargs) -> "Mission":
        """Rectangular survey pattern: ``rows`` passes, two waypoints per pass.

        The default starts at the corner farthest from the receiver and works
        its way in, 4 m per row.
        """
        x0, y0 = origin
        wps = []
        for r in range(rows):
            x = x0 + r * row_spacing_m
            ends = (y0, y0 + row_length_m) if r % 2 == 0 else (y0 + row_length_m, y0)
            wps.extend([(x, ends[0], altitude_m), (x, ends[1], altitude_m)])
        return cls(mode="dynamic", waypoints=wps, speed_mps=speed_mps, hold_time_s=hold_time_s, **kwargs)

    def _knots(self):
        wps = np.asarray(self.waypoints, dtype=np.float64)
        times, points, moving = [0.0], [wps[0]], []
        t = 0.0
        for i, w in enumerate(wps):
            if i > 0:
                t += float(np.linalg.norm(w - wps[i - 1])) / self.speed_mps
                times.append(t)
                points.append(w)
                moving.append(True)
            t += self.hold_time_s
            times.append(t)
            points.append(w)
            moving.append(False)
        if self.loop and len(wps) > 1:
            # fly back to the start; the next lap opens with its hold there
            t += float(np.linalg.norm(wps[0] - wps[-1])) / self.speed_mps
            times.append(t)
            points.append(wps[0])
            moving.append(True)
        return np.asarray(times), np.asarray(points), np.asarray(moving, dtype=bool)

    @property
    def duration_s(self) -> float:
        return float(self._knots()[0][-1])

    def _mission_time(self, t):
        t = np.asarray(t, dtype=np.float64)
        total = self.duration_s
        if self.loop and total > 0:
            return np.mod(t, total)
        return np.clip(t, 0.0, total)

    def position(self, t) -> np.ndarray:
        times, points, _ = self._knots()
        tm = self._mission_time(t)
        return np.stack([np.interp(tm, times, points[:, k]) for k in range(3)], axis=-1)

    def is_moving(self, t) -> np.ndarray:
        times, _, moving = self._knots()
        tm = np.atleast_1d(self._mission_time(t))
        if len(times) < 2:
            return np.zeros(tm.shape, dtype=bool)
        seg = np.clip(np.searchsorted(times, tm, side="right") - 1, 0, len(moving) - 1)
        # zero-length hold segments never count as moving
        return moving[seg] & (times[seg + 1] > times[seg])


def transmitter_position(mission: Mission, t: float) -> np.ndarray:
    """Transmitter position at mission time ``t``; past the end it stays put."""
    return mission.position(t)


@dataclass
class MultipathProfile:
    """Scatterer statistics around a line-of-sight path of unit gain."""

    n_scatterers: int = 6
    scatter_power_db: float = -15.0
    decay_s: float = 150e-9
    max_excess_delay_s: float = 500e-9
    amplitude_jitter: float = 0.02
    fast_fading: bool = False

    def validate(self):
        if self.n_scatterers < 0:
            raise ConfigError("profile.n_scatterers must be >= 0")
        if not 0 <= self.amplitude_jitter < 1:
            raise ConfigError("profile.amplitude_jitter must lie in [0, 1)")
        if not (self.max_excess_delay_s >= 0 and self.decay_s > 0):
            raise ConfigError("profile delays must be positive")


@dataclass
class LossModel:
    """Delivery probability logistic in mean SINR (dB)."""

    threshold_db: float = 3.0
    steepness: float = 1.2

    def validate(self):
        if not self.steepness > 0:
            raise ConfigError("loss_model.steepness must be positive")


@dataclass
class DelayModel:
    """Receiver-side inter-arrival model.

    Without the jammer every packet slot costs ``U[normal_low, normal_high]``
    nominal intervals. Under the jammer each slot costs one interval, and a
    lost slot adds ``U[0, retry_slack_s]`` of retry time plus, with
    probability ``stall_prob``, a deferral stall of ``U[stall_min_s,
    stall_max_s]``. A receiver stalls at most once per run of losses; the
    next delivery re-arms it.
    """

    normal_low: float = 0.5
    normal_high: float = 2.0
    retry_slack_s: float = 0.005
    stall_prob: float = 0.004
    stall_min_s: float = 2.5
    stall_max_s: float = 13.0

    def validate(self):
        if not 0 < self.normal_low <= self.normal_high:
            raise ConfigError("delay_model normal range must satisfy 0 < low <= high")
        if self.retry_slack_s < 0 or not 0 <= self.stall_prob <= 1:
            raise ConfigError("delay_model retry parameters out of range")
        if self.stall_max_s < self.stall_min_s:
            raise ConfigError("delay_model.stall_max_s must be >= stall_min_s")


@dataclass
class ScenarioConfig:
    name: str = "custom"
    link: LinkConfig = field(default_factory=LinkConfig)
    jammer: JammerConfig = field(default_factory=JammerConfig)
    mission: Mission = field(default_factory=Mission)
    multipath_profile: MultipathProfile = field(default_factory=MultipathProfile)
    loss_model: LossModel = field(default_factory=LossModel)
    delay_model: DelayModel = field(default_factory=DelayModel)
    seed: int = 0

    def validate(self) -> "ScenarioConfig":
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for part in (self.link, self.jammer, self.mission, self.multipath_profile,
                     self.loss_model, self.delay_model):
            part.validate()
        return self

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return dataclasses.replace(self, seed=seed)

    # serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mission"]["waypoints"] = [list(map(float, w)) for w in self.mission.waypoints]
        d["mission"]["receiver_position"] = list(map(float, self.mission.receiver_position))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        try:
            mission = dict(d.pop("mission", {}))
            orientation = OrientationModel(**mission.pop("orientation", {}))
            if "waypoints" in mission:
                mission["waypoints"] = [tuple(map(float, w)) for w in mission["waypoints"]]
            if "receiver_position" in mission:
                mission["receiver_position"] = tuple(map(float, mission["receiver_position"]))
            cfg = cls(
                name=d.pop("name", "custom"),
                seed=int(d.pop("seed", 0)),
                link=LinkConfig(**d.pop("link", {})),
                jammer=JammerConfig(**d.pop("jammer", {})),
                mission=Mission(orientation=orientation, **mission),
                multipath_profile=MultipathProfile(**d.pop("multipath_profile", {})),
                loss_model=LossModel(**d.pop("loss_model", {})),
                delay_model=DelayModel(**d.pop("delay_model", {})),
            )
        except TypeError as exc:
            raise ConfigError(f"bad scenario config: {exc}") from None
        if d:
            raise ConfigError(f"unknown scenario config keys: {sorted(d)}")
        return cfg

    def to_yaml(self) -> str:
        import yaml
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ScenarioConfig":
        import yaml
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(data)


# --------------------------------------------------------------------------
# link budget
# --------------------------------------------------------------------------

def free_space_path_loss(distance_m, frequency_hz):
    """Friis free-space loss in dB."""
    d = np.asarray(distance_m, dtype=np.float64)
    if np.any(~(d > 0)):
        raise ConfigError("distance must be positive")
    if np.any(~(np.asarray(frequency_hz) > 0)):
        raise ConfigError("frequency must be positive")
    loss = 20 * np.log10(d) + 20 * np.log10(frequency_hz) + 20 * math.log10(4 * math.pi / SPEED_OF_LIGHT)
    return float(loss) if loss.ndim == 0 else loss


def dbm_to_mw(x):
    return np.power(10.0, np.asarray(x, dtype=np.float64) / 10.0)


def mw_to_dbm(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def powersum_dbm(a, b):
    """Add two powers given in dBm; ``-inf`` means no power."""
    return mw_to_dbm(dbm_to_mw(a) + dbm_to_mw(b))


def jammer_noise_psd(jammer: JammerConfig, grid: FrequencyGrid | None = None,
                     reference_bandwidth_hz: float = BANDWIDTH_HZ) -> np.ndarray:
    """Jammer power landing on each subcarrier, in dBm.

    Values are referred to the full channel bandwidth so they compare
    directly with the link budget's signal power: a jammer of bandwidth
    ``B`` concentrates ``reference_bandwidth_hz / B`` times its received
    power onto each covered subcarrier. Uncovered subcarriers get ``-inf``.
    """
    grid = grid or FrequencyGrid()
    if not jammer.jam_bandwidth_hz > 0:
        raise ConfigError("jam_bandwidth_hz must be positive")
    psd = np.full(grid.subcarrier_count, -np.inf)
    if not jammer.enabled:
        return psd
    rx = jammer.tx_power_dbm - free_space_path_loss(jammer.distance_to_receiver_m, jammer.jam_center_hz)
    covered = np.abs(grid.frequencies - jammer.jam_center_hz) <= jammer.jam_bandwidth_hz / 2
    psd[covered] = rx + 10 * math.log10(reference_bandwidth_hz / jammer.jam_bandwidth_hz)
    return psd


def sinr_per_subcarrier(signal_csi, link: LinkConfig, jam_psd, path_loss_db) -> np.ndarray:
    """Per-subcarrier SINR in dB; accepts a single CSI vector or a batch."""
    csi = np.asarray(signal_csi)
    pl = np.asarray(path_loss_db, dtype=np.float64)
    if csi.ndim == 2 and pl.ndim == 1:
        pl = pl[:, None]
    with np.errstate(divide="ignore"):
        signal = link.tx_power_dbm - pl + 20 * np.log10(np.abs(csi))
    return signal - powersum_dbm(link.noise_floor_dbm, jam_psd)


def delivery_probability(mean_sinr_db, loss_model: LossModel):
    z = loss_model.steepness * (np.asarray(mean_sinr_db, dtype=np.float64) - loss_model.threshold_db)
    with np.errstate(over="ignore", invalid="ignore"):
        ez = np.exp(-np.abs(z))
        p = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    p = np.where(np.isnan(z), 0.0, p)
    return float(p) if p.ndim == 0 else p


def packet_outcome(mean_sinr_db: float, loss_model: LossModel, rng: np.random.Generator) -> bool:
    """True when the packet is delivered."""
    return bool(rng.random() < delivery_probability(mean_sinr_db, loss_model))


def _slot_cost(jam_active: bool, lost: bool, u, interval: float, model: DelayModel,
               may_stall: bool = True) -> tuple[float, bool]:
    """Cost of one slot and whether it stalled."""
    u_base, u_slack, u_hit, u_len = u
    if not jam_active:
        return interval * (model.normal_low + (model.normal_high - model.normal_low) * u_base), False
    cost = interval
    stalled = False
    if lost:
        cost += model.retry_slack_s * u_slack
        if may_stall and u_hit < model.stall_prob:
            cost += model.stall_min_s + (model.stall_max_s - model.stall_min_s) * u_len
            stalled = True
    return cost, stalled


def delivery_delay(previous_outcomes: Sequence[bool], nominal_interval_s: float, jam_active: bool,
                   rng: np.random.Generator, model: DelayModel | None = None) -> float:
    """Gap between this delivered packet and the previous delivered one.

    ``previous_outcomes`` lists earlier outcomes, most recent last; only the
    trailing run of losses matters. Every slot in that run plus the current
    one contributes its cost, with four uniforms drawn per slot.
    """
    if not nominal_interval_s > 0:
        raise ConfigError("nominal_interval_s must be positive")
    model = model or DelayModel()
    k = 0
    for delivered in reversed(list(previous_outcomes)):
        if delivered:
            break
        k += 1
    total = 0.0
    stalled = False
    for j in range(k + 1):
        cost, hit = _slot_cost(jam_active, j < k, rng.random(4), nominal_interval_s, model, not stalled)
        total += cost
        stalled = stalled or hit
    return total


# --------------------------------------------------------------------------
# channel realisation and receiver
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScattererField:
    """Scatterer geometry fixed for one run: excess delays, gains, phases."""

    excess_delay: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray

    @classmethod
    def draw(cls, profile: MultipathProfile, rng: np.random.Generator) -> "ScattererField":
        n = profile.n_scatterers
        delay = np.sort(rng.uniform(0.0, profile.max_excess_delay_s, n))
        weight = np.exp(-delay / profile.decay_s)
        power = 10 ** (profile.scatter_power_db / 10)
        amp = np.sqrt(power * weight / weight.sum()) if n else np.zeros(0)
        return cls(delay, amp, rng.uniform(0, 2 * np.pi, n))


def _realize(distance, field_: ScattererField, profile: MultipathProfile, frequency_hz,
             jitter_u, phase_u):
    """Vectorised realisation: arrays of shape (packets, 1 + scatterers)."""
    distance = np.asarray(distance, dtype=np.float64)
    m = distance.shape[0]
    tau_los = distance / SPEED_OF_LIGHT
    amp = np.concatenate([np.ones((m, 1)), np.broadcast_to(field_.amplitude, (m, field_.amplitude.size))], axis=1)
    amp = amp * (1.0 + profile.amplitude_jitter * (2.0 * jitter_u - 1.0))
    los_phase = np.mod(2 * np.pi * frequency_hz * tau_los, 2 * np.pi)[:, None]
    if profile.fast_fading:
        sc_phase = 2 * np.pi * phase_u
    else:
        sc_phase = np.broadcast_to(field_.phase, (m, field_.phase.size))
    phase = np.concatenate([los_phase, sc_phase], axis=1)
    excess = np.broadcast_to(field_.excess_delay, (m, field_.excess_delay.size))
    delay = tau_los[:, None] + np.concatenate([np.zeros((m, 1)), excess], axis=1)
    return amp, phase, delay


def channel_realization(position, profile: MultipathProfile, rng: np.random.Generator, *,
                        receiver_position=(0.0, 0.0, 1.5), field_: ScattererField | None = None,
                        frequency_hz: float = CHANNEL_11_HZ) -> list[MultipathComponent]:
    """Paths for one packet sent from ``position``.

    A line-of-sight path of unit gain (path loss lives in the link budget)
    plus the scatterers of ``field_`` (drawn from ``profile`` if omitted).
    """
    if field_ is None:
        field_ = ScattererField.draw(profile, rng)
    d = np.linalg.norm(np.asarray(position, float) - np.asarray(receiver_position, float))
    c = 1 + field_.amplitude.size
    amp, phase, delay = _realize(np.array([max(d, 1e-3)]), field_, profile, frequency_hz,
                                 rng.random((1, c)), rng.random((1, c - 1)))
    return [MultipathComponent(float(a), float(p), float(t)) for a, p, t in zip(amp[0], phase[0], delay[0])]


def agc_report(raw_csi, signal_power_dbm, jam_power_dbm):
    """Gain-normalised CSI: scale by S / (S + J) in linear power."""
    s = dbm_to_mw(signal_power_dbm)
    j = dbm_to_mw(jam_power_dbm)
    g = s / (s + j)
    raw = np.asarray(raw_csi)
    if np.ndim(g) == 1 and raw.ndim == 2:
        g = g[:, None]
    return raw * g


# --------------------------------------------------------------------------
# full run
# --------------------------------------------------------------------------

def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def run_scenario(config: ScenarioConfig, grid: FrequencyGrid | None = None) -> CsiTrace:
    config.validate()
    grid = grid or FrequencyGrid()
    link, jam, mission, profile = config.link, config.jammer, config.mission, config.multipath_profile
    n = link.packet_count
    seed = config.seed

    send_t = np.arange(n) / link.packet_rate_hz
    rx_pos = np.asarray(mission.receiver_position, dtype=np.float64)
    distance = np.maximum(np.linalg.norm(mission.position(send_t) - rx_pos, axis=-1), 1e-3)

    path_loss = free_space_path_loss(distance, link.center_frequency_hz)
    if mission.orientation.active:
        o = mission.orientation
        draws = _stream(seed, _STREAM_ORIENTATION).random((2, n))
        path_loss = path_loss + kernels.orientation_chain(
            mission.is_moving(send_t), draws[0], draws[1], o.enter_prob, o.exit_prob,
            o.loss_min_db, o.loss_max_db)

    field_ = ScattererField.draw(profile, _stream(seed, _STREAM_FIELD))
    c = 1 + profile.n_scatterers
    amp, phase, delay = _realize(distance, field_, profile, link.center_frequency_hz,
                                 _stream(seed, _STREAM_JITTER).random((n, c)),
                                 _stream(seed, _STREAM_PHASE).random((n, c - 1)))
    bins = _delay_bins(delay, DEFAULT_DELAY_RESOLUTION, DEFAULT_FFT_SIZE)
    taps = kernels.bin_taps(amp, phase, bins, DEFAULT_FFT_SIZE)
    raw = sample_subcarrier_csi(cir_to_cfr(taps), grid)

    active = jam.enabled & (send_t >= jam.activation_time_s)
    jam_psd = jammer_noise_psd(jam, grid, link.bandwidth_hz)
    jam_now = np.where(active[:, None], jam_psd[None, :], -np.inf)

    sinr = sinr_per_subcarrier(raw, link, jam_now, path_loss)
    p = delivery_probability(sinr.mean(axis=1), config.loss_model)
    delivered = _stream(seed, _STREAM_OUTCOME).random(n) < p

    # receiver view: estimation noise from the jammer, then gain control
    signal_dbm = link.tx_power_dbm - path_loss + mw_to_dbm(np.mean(np.abs(raw) ** 2, axis=1))
    noise_var = dbm_to_mw(jam_now - (link.tx_power_dbm - path_loss)[:, None])
    w = _stream(seed, _STREAM_NOISE).standard_normal((n, grid.subcarrier_count, 2))
    reported = raw + np.sqrt(noise_var / 2) * (w[..., 0] + 1j * w[..., 1])
    jam_total_dbm = mw_to_dbm(np.mean(dbm_to_mw(jam_now), axis=1))
    if link.agc_enabled:
        reported = agc_report(reported, signal_dbm, jam_total_dbm)
    rssi = np.round(mw_to_dbm(dbm_to_mw(signal_dbm) + dbm_to_mw(jam_total_dbm) + dbm_to_mw(link.noise_floor_dbm)))

    d = config.delay_model
    u = _stream(seed, _STREAM_DELAY).random((4, n))
    ts, end = kernels.clock(delivered, active, u[0], u[1], u[2], u[3], link.interval_s,
                            d.normal_low, d.normal_high, d.retry_slack_s, d.stall_prob,
                            d.stall_min_s, d.stall_max_s)

    idx = np.flatnonzero(delivered)
    first_active = np.flatnonzero(active)
    meta = {
        "scenario": config.name,
        "seed": seed,
        "mode": mission.mode,
        "packet_rate_hz": link.packet_rate_hz,
        "attempts": n,
        "duration_s": link.duration_s,
        "end_us": int(round(end * 1e6)),
        "jammer_enabled": bool(jam.enabled),
        "activation_s": float(jam.activation_time_s) if jam.enabled else None,
        "activation_seq": int(first_active[0]) if first_active.size else None,
    }
    return CsiTrace(
        meta=meta,
        timestamps_us=np.round(ts[idx] * 1e6).astype(np.int64),
        seq=idx.astype(np.int64),
        rssi=rssi[idx],
        csi=reported[idx],
    )


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

STATIC_ACTIVATION_S = 30.0
STATIC_DURATION_S = 60.0
# jammer powers (dBm) calibrated so the presets land in the reference PDR bands
STATIC_JAMMER_DBM = 2.5
DYNAMIC_JAMMER_DBM = 0.5
DYNAMIC_ORIENTATION = OrientationModel(enter_prob=0.15, exit_prob=0.65, loss_min_db=30.0, loss_max_db=45.0)
DYNAMIC_PROFILE = MultipathProfile(scatter_power_db=-30.0, amplitude_jitter=0.02, fast_fading=True)


def _static(name: str, jammer: JammerConfig | None = None) -> ScenarioConfig:
    return ScenarioConfig(
        name=name,
        link=LinkConfig(duration_s=STATIC_DURATION_S),
        jammer=jammer or JammerConfig(),
        mission=Mission.static(50.0),
    )


def _dynamic(name: str, jammer_distance: float | None = None) -> ScenarioConfig:
    # the looped mission is flown twice: first without, then with the jammer
    mission = Mission.lawnmower(loop=True, orientation=dataclasses.replace(DYNAMIC_ORIENTATION))
    lap = mission.duration_s
    jammer = JammerConfig()
    if jammer_distance is not None:
        jammer = JammerConfig(enabled=True, tx_power_dbm=DYNAMIC_JAMMER_DBM,
                              distance_to_receiver_m=jammer_distance, activation_time_s=lap)
    return ScenarioConfig(
        name=name,
        link=LinkConfig(duration_s=round(2 * lap, 2)),
        jammer=jammer,
        mission=mission,
        multipath_profile=dataclasses.replace(DYNAMIC_PROFILE),
    )


def _build_presets() -> dict:
    return {
        "static-nojam": _static("static-nojam"),
        "static-jam-10m": _static("static-jam-10m", JammerConfig(
            enabled=True, tx_power_dbm=JAMMER_MAX_DBM, distance_to_receiver_m=10.0,
            activation_time_s=STATIC_ACTIVATION_S)),
        "static-jam-30m": _static("static-jam-30m", JammerConfig(
            enabled=True, tx_power_dbm=STATIC_JAMMER_DBM, distance_to_receiver_m=30.0,
            activation_time_s=STATIC_ACTIVATION_S)),
        "dynamic-nojam": _dynamic("dynamic-nojam"),
        "dynamic-jam-20m": _dynamic("dynamic-jam-20m", 20.0),
        "dynamic-jam-25m": _dynamic("dynamic-jam-25m", 25.0),
        "dynamic-jam-30m": _dynamic("dynamic-jam-30m", 30.0),
    }


PRESET_NAMES = tuple(_build_presets())


def preset(name: str, seed: int = 0) -> ScenarioConfig:
    """A fresh copy of a named preset with the given seed."""
    presets = _build_presets()
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; choose from: {', '.join(PRESET_NAMES)}")
    return presets[name].with_seed(seed)
