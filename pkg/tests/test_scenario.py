import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import simulate
from csijam.channel import (
    CHANNEL_11_HZ,
    SUBCARRIER_SPACING_HZ,
    FrequencyGrid,
    cir_compose,
    cir_to_cfr,
    sample_subcarrier_csi,
)
from csijam.errors import ConfigError
from csijam.scenario import (
    PRESET_NAMES,
    DelayModel,
    JammerConfig,
    LinkConfig,
    LossModel,
    Mission,
    MultipathProfile,
    ScenarioConfig,
    ScattererField,
    agc_report,
    channel_realization,
    delivery_delay,
    delivery_probability,
    free_space_path_loss,
    jammer_noise_psd,
    packet_outcome,
    powersum_dbm,
    preset,
    run_scenario,
    sinr_per_subcarrier,
    transmitter_position,
)
from csijam.trace import dumps_trace, jitter_series
from oracles import friis_db, interp_position


# --------------------------------------------------------------------------
# link budget
# --------------------------------------------------------------------------

def test_fspl_examples():
    at1 = free_space_path_loss(1.0, 2.462e9)
    assert at1 == pytest.approx(40.27, abs=0.01)
    assert free_space_path_loss(10.0, 2.462e9) == pytest.approx(at1 + 20.0, abs=1e-9)
    assert free_space_path_loss(30.0, 2.462e9) == pytest.approx(69.81, abs=0.01)


@given(st.floats(0.01, 1e5), st.floats(1e6, 1e11))
def test_fspl_matches_closed_form(d, f):
    assert free_space_path_loss(d, f) == pytest.approx(friis_db(d, f), abs=1e-9)


@given(st.floats(0.1, 1e4), st.floats(1.001, 10))
def test_fspl_monotone(d, factor):
    assert free_space_path_loss(d * factor, 2.4e9) > free_space_path_loss(d, 2.4e9)
    assert free_space_path_loss(d, 2.4e9 * factor) > free_space_path_loss(d, 2.4e9)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_fspl_rejects_non_positive_distance(d):
    with pytest.raises(ConfigError):
        free_space_path_loss(d, 2.462e9)


def test_powersum():
    assert powersum_dbm(-95.0, -np.inf) == pytest.approx(-95.0)
    assert powersum_dbm(-90.0, -90.0) == pytest.approx(-90.0 + 10 * math.log10(2))


def test_full_band_jammer_even():
    psd = jammer_noise_psd(JammerConfig(enabled=True, tx_power_dbm=10, distance_to_receiver_m=30))
    assert np.all(psd == psd[0])
    assert psd[0] == pytest.approx(10 - 69.81, abs=0.01)


def test_partial_band_top_eight():
    jam = JammerConfig(enabled=True, jam_center_hz=CHANNEL_11_HZ + 22.5 * SUBCARRIER_SPACING_HZ,
                       jam_bandwidth_hz=8 * SUBCARRIER_SPACING_HZ)
    psd = jammer_noise_psd(jam)
    assert np.flatnonzero(np.isfinite(psd)).tolist() == list(range(44, 52))


def test_disabled_jammer_adds_nothing():
    assert np.all(jammer_noise_psd(JammerConfig(enabled=False)) == -np.inf)


def test_bad_jammer_bandwidth():
    with pytest.raises(ConfigError):
        jammer_noise_psd(JammerConfig(enabled=True, jam_bandwidth_hz=0))


@settings(max_examples=60)
@given(st.floats(-40, 40), st.floats(0.2e6, 30e6))
def test_partial_band_locality(center_subcarrier, bandwidth):
    grid = FrequencyGrid()
    center = CHANNEL_11_HZ + center_subcarrier * SUBCARRIER_SPACING_HZ
    psd = jammer_noise_psd(JammerConfig(enabled=True, jam_center_hz=center, jam_bandwidth_hz=bandwidth), grid)
    inside = np.abs(grid.frequencies - center) <= bandwidth / 2
    assert np.array_equal(np.isfinite(psd), inside)
    hit = np.flatnonzero(inside)
    if hit.size:
        assert np.array_equal(hit, np.arange(hit[0], hit[-1] + 1))


def test_sinr_arithmetic_example():
    sinr = sinr_per_subcarrier(np.ones(52), LinkConfig(tx_power_dbm=10, noise_floor_dbm=-95),
                               np.full(52, -np.inf), 74.0)
    assert np.allclose(sinr, 31.0)


def test_sinr_zero_gain_is_minus_inf():
    h = np.ones(52)
    h[5] = 0
    sinr = sinr_per_subcarrier(h, LinkConfig(), np.full(52, -np.inf), 74.0)
    assert sinr[5] == -np.inf and np.isfinite(sinr[4])


@pytest.mark.parametrize("distance", [5.0, 20.0, 60.0])
def test_doubling_jammer_distance(distance):
    link = LinkConfig()
    near = jammer_noise_psd(JammerConfig(enabled=True, distance_to_receiver_m=distance))
    far = jammer_noise_psd(JammerConfig(enabled=True, distance_to_receiver_m=2 * distance))
    assert near[0] - far[0] == pytest.approx(20 * math.log10(2), abs=1e-9)
    gain = sinr_per_subcarrier(np.ones(52), link, far, 74) - sinr_per_subcarrier(np.ones(52), link, near, 74)
    assert np.all(gain > 0) and np.all(gain <= 6.0206)


# --------------------------------------------------------------------------
# loss and delay
# --------------------------------------------------------------------------

def test_logistic_midpoint_and_saturation():
    m = LossModel()
    assert delivery_probability(3.0, m) == 0.5
    assert delivery_probability(43.0, m) > 0.999999
    assert delivery_probability(-np.inf, m) == 0.0
    assert delivery_probability(np.inf, m) == 1.0


@given(st.floats(-100, 100), st.floats(0.01, 1))
def test_logistic_monotone(x, dx):
    m = LossModel()
    assert delivery_probability(x + dx, m) >= delivery_probability(x, m)


def test_packet_outcome_uses_rng():
    rng = np.random.default_rng(0)
    hits = sum(packet_outcome(3.0, LossModel(), rng) for _ in range(4000))
    assert 1800 < hits < 2200
    assert packet_outcome(100.0, LossModel(), rng) is True


def test_loss_model_validation():
    with pytest.raises(ConfigError):
        LossModel(steepness=0).validate()


def test_normal_delay_range():
    rng = np.random.default_rng(1)
    d = [delivery_delay([True], 0.01, False, rng) for _ in range(2000)]
    assert min(d) >= 0.005 and max(d) <= 0.020


def test_delay_after_nine_losses():
    rng = np.random.default_rng(2)
    for jam in (False, True):
        d = delivery_delay([True] + [False] * 9, 0.01, jam, rng)
        assert d >= 0.1 - 1e-12 if jam else d >= 10 * 0.005


def test_delay_only_trailing_run_counts():
    model = DelayModel(stall_prob=0.0, retry_slack_s=0.0)
    d = delivery_delay([False] * 50 + [True, False, False], 0.01, True, np.random.default_rng(3), model)
    assert d == pytest.approx(0.03)


def test_at_most_one_stall_per_loss_run():
    model = DelayModel(stall_prob=1.0, retry_slack_s=0.0, stall_min_s=3.0, stall_max_s=3.0)
    d = delivery_delay([True] + [False] * 20, 0.01, True, np.random.default_rng(4), model)
    assert d == pytest.approx(0.21 + 3.0)


def test_delay_rejects_bad_interval():
    with pytest.raises(ConfigError):
        delivery_delay([], 0.0, False, np.random.default_rng(0))


# --------------------------------------------------------------------------
# motion
# --------------------------------------------------------------------------

def test_static_position_constant():
    m = Mission.static(50.0)
    for t in (0, 1.5, 100, 1e6):
        assert np.allclose(transmitter_position(m, t), [50, 0, 1.5])


def test_lawnmower_shape():
    m = Mission.lawnmower()
    assert len(m.waypoints) == 34
    assert np.allclose(transmitter_position(m, 0.0), m.waypoints[0])


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 1.7, 3.5, 4.2, 10.0, 33.3, 60.0])
def test_position_matches_segment_oracle(t):
    m = Mission.lawnmower(rows=4)
    expected = interp_position(m.waypoints, m.speed_mps, m.hold_time_s, t)
    assert np.allclose(transmitter_position(m, t), expected, atol=1e-9)


def test_position_clamps_after_end():
    m = Mission.lawnmower(rows=2)
    assert np.allclose(transmitter_position(m, m.duration_s + 50), m.waypoints[-1])


def test_loop_returns_to_start():
    m = Mission.lawnmower(rows=3, loop=True)
    open_m = dataclasses.replace(m, loop=False)
    back = math.dist(m.waypoints[-1], m.waypoints[0]) / m.speed_mps
    assert m.duration_s == pytest.approx(open_m.duration_s + back)
    assert np.allclose(transmitter_position(m, m.duration_s), m.waypoints[0])
    assert np.allclose(transmitter_position(m, m.duration_s + 0.3), transmitter_position(m, 0.3))
    assert m.is_moving(open_m.duration_s + back / 2).all()


def test_moving_flag_follows_holds():
    m = Mission.lawnmower(rows=2, hold_time_s=1.0)
    assert not m.is_moving(0.5).any()
    assert m.is_moving(1.5).all()


def test_mission_validation():
    with pytest.raises(ConfigError):
        Mission(mode="static", waypoints=[(0, 0, 0), (1, 1, 1)]).validate()
    with pytest.raises(ConfigError):
        Mission(mode="hover").validate()
    with pytest.raises(ConfigError):
        Mission(speed_mps=0).validate()


# --------------------------------------------------------------------------
# channel realisation and receiver
# --------------------------------------------------------------------------

def test_zero_scatterers_flat_phase_ramp():
    profile = MultipathProfile(n_scatterers=0, amplitude_jitter=0.0)
    comps = channel_realization((30.0, 0.0, 1.5), profile, np.random.default_rng(0))
    assert len(comps) == 1 and comps[0].amplitude_attenuation == 1.0
    assert comps[0].delay == pytest.approx(30.0 / 299_792_458.0)
    csi = sample_subcarrier_csi(cir_to_cfr(cir_compose(comps)))
    assert np.allclose(np.abs(csi), 1.0, atol=1e-12)


def test_realization_scatterers():
    profile = MultipathProfile()
    rng = np.random.default_rng(1)
    comps = channel_realization((50.0, 0.0, 1.5), profile, rng)
    assert len(comps) == 1 + profile.n_scatterers
    los = comps[0]
    for c in comps[1:]:
        assert 0 <= c.delay - los.delay <= profile.max_excess_delay_s
        assert c.amplitude_attenuation < los.amplitude_attenuation
    field_ = ScattererField.draw(profile, np.random.default_rng(2))
    assert np.sum(field_.amplitude ** 2) == pytest.approx(10 ** (profile.scatter_power_db / 10))


def _cov(trace):
    amp = np.abs(trace.csi)
    return amp.std(axis=0) / amp.mean(axis=0)


def test_static_amplitude_fluctuation_low():
    t = simulate("static-nojam", 0).select(slice(0, 1000))
    assert np.all(_cov(t) < 0.05)


def test_dynamic_fluctuation_exceeds_static():
    static = _cov(simulate("static-nojam", 0))
    dynamic = _cov(simulate("dynamic-nojam", 0))
    assert np.all(dynamic > static)


def test_agc_identity_and_halving():
    x = np.random.default_rng(0).standard_normal(52) + 1j
    assert np.array_equal(agc_report(x, -60.0, -np.inf), x)
    assert np.allclose(np.abs(agc_report(x, -60.0, -60.0)), np.abs(x) / 2)


# --------------------------------------------------------------------------
# full runs
# --------------------------------------------------------------------------

def test_same_seed_identical_trace():
    a = run_scenario(preset("static-jam-30m", 5))
    b = run_scenario(preset("static-jam-30m", 5))
    assert dumps_trace(a) == dumps_trace(b)
    c = run_scenario(preset("static-jam-30m", 6))
    assert dumps_trace(a) != dumps_trace(c)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_sequence_and_time_increase(name):
    t = simulate(name, 1)
    assert np.all(np.diff(t.seq) > 0) and np.all(np.diff(t.timestamps_us) > 0)
    assert t.csi.shape == (len(t), 52) and np.all(np.isfinite(t.csi))


def test_static_nojam_example():
    t = simulate("static-nojam", 0)
    assert len(t) / t.meta["attempts"] >= 0.97
    _, d = jitter_series(t)
    assert d.min() >= 5000 and d.max() <= 20000


def test_total_outage_at_ten_metres():
    t = simulate("static-jam-10m", 0)
    assert not np.any(t.seq >= t.meta["activation_seq"])
    assert t.meta["activation_seq"] == 3000


@pytest.mark.parametrize("name", ["static-jam-30m", "dynamic-jam-25m"])
def test_phase_two_onset(name):
    """Before activation, the jammed run is record-for-record the jammer-free run."""
    cfg = preset(name, 4)
    quiet = dataclasses.replace(cfg, jammer=dataclasses.replace(cfg.jammer, enabled=False))
    jammed, clean = run_scenario(cfg), run_scenario(quiet)
    a = jammed.meta["activation_seq"]
    pre_j, pre_c = jammed.seq_range(0, a), clean.seq_range(0, a)
    assert pre_j.same_records(pre_c)
    t_on = jammed.timestamps_us[jammed.seq >= a]
    assert t_on.size == 0 or t_on[0] >= pre_j.timestamps_us[-1]


def test_pdr_monotone_in_jammer_distance():
    base = preset("static-jam-30m")
    means = []
    for d in (10.0, 20.0, 25.0, 30.0):
        ratios = []
        for seed in range(10):
            cfg = dataclasses.replace(base, seed=seed,
                                      jammer=dataclasses.replace(base.jammer, distance_to_receiver_m=d))
            ratios.append(len(run_scenario(cfg)) / cfg.link.packet_count)
        means.append(np.mean(ratios))
    assert all(b >= a for a, b in zip(means, means[1:]))


def test_invalid_config_rejected_before_work(monkeypatch):
    import csijam.scenario as sc

    def boom(*a, **k):
        raise AssertionError("work started")

    monkeypatch.setattr(sc, "_realize", boom)
    cfg = preset("static-jam-30m")
    cfg.jammer.tx_power_dbm = 30.0
    with pytest.raises(ConfigError):
        run_scenario(cfg)


@pytest.mark.parametrize("mutate", [
    lambda c: setattr(c.link, "packet_rate_hz", 0),
    lambda c: setattr(c.link, "duration_s", -1),
    lambda c: setattr(c.link, "bandwidth_hz", 0),
    lambda c: setattr(c.jammer, "jam_center_hz", 10e9),
    lambda c: setattr(c.jammer, "distance_to_receiver_m", 0),
    lambda c: setattr(c.multipath_profile, "amplitude_jitter", 1.5),
    lambda c: setattr(c.delay_model, "normal_low", 0),
    lambda c: setattr(c, "seed", -1),
])
def test_config_validation(mutate):
    cfg = preset("static-nojam")
    mutate(cfg)
    with pytest.raises(ConfigError):
        cfg.validate()


# --------------------------------------------------------------------------
# presets and config files
# --------------------------------------------------------------------------

def test_preset_names():
    assert set(PRESET_NAMES) == {"static-nojam", "static-jam-10m", "static-jam-30m", "dynamic-nojam",
                                 "dynamic-jam-20m", "dynamic-jam-25m", "dynamic-jam-30m"}
    with pytest.raises(ConfigError, match="static-nojam"):
        preset("bogus")


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_preset_envelope(name):
    cfg = preset(name)
    cfg.validate()
    assert cfg.link.tx_power_dbm == 10 and cfg.link.packet_rate_hz == 100
    if cfg.jammer.enabled:
        assert cfg.jammer.distance_to_receiver_m <= 30
    if cfg.mission.mode == "dynamic":
        assert len(cfg.mission.waypoints) == 34


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_yaml_roundtrip(name):
    cfg = preset(name, 9)
    again = ScenarioConfig.from_yaml(cfg.to_yaml())
    assert again == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"link": {"tx_power_dbm": 10}, "colour": "red"})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"link": {"bogus": 1}})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_yaml("- just\n- a list\n")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_yaml("link: [unclosed")
