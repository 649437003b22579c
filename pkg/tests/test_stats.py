import math

import numpy as np
import pytest

from second_lab.dynamics import DecayChannel, DriveEntry, ModelSpec, basis_state
from second_lab.integrate import IntegrationConfig
from second_lab.models import (
    TwoLevelParams,
    cz_params,
    cz_single_body_model,
    cz_two_body_model,
    default_readout_model,
    raman_phase_model,
    raman_pi2_model,
    two_level_model,
)
from second_lab.stats import (
    decay_statistics,
    first_event_channel_probability,
    no_decay_probability,
    norm_squared_oracle,
)
from second_lab.waveform import constant, constant_mhz, mhz

TWO_PI = 2.0 * math.pi


def test_no_channels_means_certain_survival():
    m = two_level_model(TwoLevelParams(omega=constant_mhz(1.0)))
    grid = np.linspace(0.0, 1.0, 11)
    assert np.allclose(no_decay_probability(m, m.initial_state, grid), 1.0, atol=1e-12)


def test_pure_decay_is_analytic_exponential():
    m = two_level_model(TwoLevelParams(omega=constant(0.0), gamma_excited=TWO_PI))
    grid = np.linspace(0.0, 0.5, 26)
    p0 = no_decay_probability(m, basis_state(2, 1), grid)
    assert np.max(np.abs(p0 - np.exp(-TWO_PI * grid))) < 1e-8
    assert p0[-1] == pytest.approx(math.exp(-math.pi), abs=1e-9)


def test_readout_survival_approaches_half():
    m = default_readout_model(omega1_mhz=2.0)
    grid = np.linspace(0.0, 10.0, 41)
    p0 = no_decay_probability(m, m.initial_state, grid)
    oracle = norm_squared_oracle(m, m.initial_state, grid)
    assert np.max(np.abs(p0 - oracle)) < 1e-7
    assert abs(p0[-1] - 0.5) < 1e-3


def test_single_channel_first_event_is_complement():
    m = two_level_model(TwoLevelParams(omega=constant_mhz(1.0), gamma_excited=TWO_PI))
    T = 1.0
    q = first_event_channel_probability(m, m.initial_state, T)
    p0 = no_decay_probability(m, m.initial_state, np.array([0.0, T]))[-1]
    assert q.shape == (1,)
    assert q[0] == pytest.approx(1.0 - p0, abs=1e-9)


def test_split_channel_symmetry():
    # one gamma channel split into two gamma/2 channels fed by the same state
    def build(split):
        if split:
            channels = (
                DecayChannel(1, math.pi, branches=((0, 1.0),)),
                DecayChannel(1, math.pi, branches=((0, 1.0),)),
            )
        else:
            channels = (DecayChannel(1, TWO_PI, branches=((0, 1.0),)),)
        return ModelSpec(
            labels=("g", "e"),
            entries=(DriveEntry(0, 1, constant_mhz(1.0), 0.5),),
            channels=channels,
            initial_state=basis_state(2, 0),
            name="split-test",
        )

    m2 = build(split=True)
    q2 = first_event_channel_probability(m2, m2.initial_state, 1.0)
    assert q2[0] == pytest.approx(q2[1], abs=1e-9)
    m1 = build(split=False)
    q1 = first_event_channel_probability(m1, m1.initial_state, 1.0)
    assert q1[0] == pytest.approx(q2[0] + q2[1], abs=1e-9)


def test_cz_two_body_without_rydberg_decay():
    p = cz_params(gamma_rydberg=0.0)
    m = cz_two_body_model(p)
    sources = {ch.source for ch in m.channels}
    assert sources == {1, 3}  # only the intermediate-state channels remain
    T = p.gate_time
    q = first_event_channel_probability(m, m.initial_state, T)
    p0 = no_decay_probability(m, m.initial_state, np.array([0.0, T]))[-1]
    assert np.sum(q) == pytest.approx(1.0 - p0, abs=1e-7)


def test_completeness_and_monotonicity_across_presets():
    presets = [
        two_level_model(TwoLevelParams(omega=constant_mhz(1.0), gamma_excited=mhz(1.0))),
        raman_pi2_model(),
        raman_phase_model(),
        default_readout_model(),
        cz_single_body_model(cz_params(), "10"),
        cz_two_body_model(cz_params()),
    ]
    for m in presets:
        T = 0.25 if m.name.startswith("cz") else 1.0
        grid = np.linspace(0.0, T, 21)
        stats = decay_statistics(m, m.initial_state, grid)
        assert np.all(np.diff(stats.p0) <= 1e-12), m.name
        assert stats.p0[0] == pytest.approx(1.0, abs=1e-12)
        total = stats.p0 + np.sum(stats.channel_event_prob, axis=1)
        assert np.max(np.abs(total - 1.0)) < 1e-7, m.name
        assert np.all(np.diff(stats.channel_event_prob, axis=0) >= -1e-12), m.name


def test_oracle_agreement_across_presets():
    presets = [
        two_level_model(TwoLevelParams(omega=constant_mhz(1.0), gamma_excited=mhz(1.0))),
        raman_pi2_model(),
        raman_phase_model(),
        default_readout_model(),
        cz_single_body_model(cz_params(), "10"),
        cz_two_body_model(cz_params()),
    ]
    for m in presets:
        T = 0.25 if m.name.startswith("cz") else 1.0
        grid = np.linspace(0.0, T, 21)
        p0 = no_decay_probability(m, m.initial_state, grid)
        oracle = norm_squared_oracle(m, m.initial_state, grid)
        assert np.max(np.abs(p0 - oracle)) < 1e-7, m.name


def test_strict_decrease_while_monitored_population_present():
    m = two_level_model(TwoLevelParams(omega=constant(0.0), gamma_excited=TWO_PI))
    grid = np.linspace(0.0, 0.3, 16)
    p0 = no_decay_probability(m, basis_state(2, 1), grid)
    assert np.all(np.diff(p0) < 0.0)


def test_grid_validation():
    m = default_readout_model()
    with pytest.raises(ValueError):
        decay_statistics(m, m.initial_state, np.array([0.3, 0.2]))
    with pytest.raises(ValueError):
        decay_statistics(m, m.initial_state, np.array([]))
    with pytest.raises(ValueError):
        decay_statistics(m, np.array([1.0, 1.0, 0.0]), np.array([0.0, 1.0]))
