import math

import numpy as np
import pytest

from second_lab.dynamics import decay_diagonal, hamiltonian
from second_lab.integrate import IntegrationConfig, integrate
from second_lab.mcwf import wrap_angle
from second_lab.models import (
    CZ_PROBE_COEFFS,
    SINGLE_QUBIT_COEFFS,
    RamanParams,
    TwoLevelParams,
    cz_params,
    cz_single_body_model,
    cz_two_body_model,
    default_readout_model,
    preset_model,
    raman_model,
    raman_pi2_model,
    readout_model,
    two_level_model,
)
from second_lab.stats import no_decay_probability
from second_lab.waveform import constant, constant_mhz, eval_waveform, fourier, mhz

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# two-level


def test_two_level_without_decay_has_no_channels():
    m = two_level_model(TwoLevelParams(omega=constant_mhz(1.0)))
    assert m.channels == ()


def test_two_level_decay_diagonal():
    m = two_level_model(TwoLevelParams(omega=constant_mhz(1.0), gamma_excited=TWO_PI))
    assert np.allclose(decay_diagonal(m.channels, m.dim), [0.0, math.pi], atol=1e-15)


def test_two_level_structure_with_shaped_pulse():
    pulse = fourier(SINGLE_QUBIT_COEFFS, 1.0)
    m = two_level_model(TwoLevelParams(omega=pulse, detuning=constant_mhz(3.0)))
    for t in (0.05, 0.4, 0.77):
        h = hamiltonian(m, t)
        assert h[0, 1] == pytest.approx(0.5 * eval_waveform(pulse, t), rel=1e-14)
        assert h[1, 0] == pytest.approx(np.conj(h[0, 1]), rel=1e-14)
        assert h[1, 1] == pytest.approx(TWO_PI * 3.0, rel=1e-14)
        assert h[0, 0] == 0.0


# ---------------------------------------------------------------------------
# raman


def test_raman_matrix_layout():
    p = RamanParams(
        omega0=constant(2.0), omega1=constant(3.0),
        delta_one_photon=constant(5.0), delta_two_photon=constant(7.0),
        gamma=TWO_PI,
    )
    m = raman_model(p)
    h = hamiltonian(m, 0.0)
    expected = np.array([
        [0.0, 0.0, 1.0],
        [0.0, 7.0, 1.5],
        [1.0, 1.5, 5.0],
    ])
    assert np.allclose(h, expected, atol=1e-15)
    assert m.channels[0].source == 2
    assert m.channels[0].rate == TWO_PI
    assert m.channels[0].branches == ((0, 0.5), (1, 0.5))


def test_raman_pi2_preset_values():
    m = raman_pi2_model()
    h = hamiltonian(m, 0.5)
    drive = eval_waveform(fourier(SINGLE_QUBIT_COEFFS, 1.0), 0.5)
    assert h[0, 2] == pytest.approx(0.5 * drive, rel=1e-14)
    assert h[1, 2] == pytest.approx(0.5 * drive, rel=1e-14)
    assert h[2, 2] == pytest.approx(TWO_PI * 1000.0, rel=1e-14)
    assert h[1, 1] == 0.0


def test_raman_without_decay_matches_unitary():
    m = raman_pi2_model(gamma=0.0)
    assert m.channels == ()
    grid = tuple(np.linspace(0.0, 1.0, 11))
    cfg = IntegrationConfig(sample_grid=grid)
    tr_s = integrate("second", m, m.initial_state, (0.0, 1.0), cfg)
    tr_u = integrate("unitary", m, m.initial_state, (0.0, 1.0), cfg)
    assert np.max(np.abs(tr_s.states - tr_u.states)) < 1e-12


def test_raman_pi2_transfer_at_zero_decay():
    m = raman_pi2_model(gamma=0.0)
    tr = integrate("unitary", m, m.initial_state, (0.0, 1.0))
    pops = np.abs(tr.final_state) ** 2
    assert pops[0] == pytest.approx(0.5, abs=1e-2)
    assert pops[2] < 1e-6


def test_phase_gate_preset_only_drives_one_leg():
    m = preset_model("raman-phase")
    h = hamiltonian(m, 0.37)
    assert h[0, 2] == 0.0
    assert h[1, 2] != 0.0
    # balanced input by default
    assert np.allclose(np.abs(m.initial_state) ** 2, [0.5, 0.5, 0.0], atol=1e-12)


# ---------------------------------------------------------------------------
# readout


def test_readout_without_drive_never_decays():
    m = readout_model(constant(0.0), delta=0.0, gamma=TWO_PI)
    grid = np.linspace(0.0, 2.0, 21)
    p0 = no_decay_probability(m, m.initial_state, grid)
    assert np.allclose(p0, 1.0, atol=1e-12)


def test_readout_projects_to_half():
    # |0> never couples: its share of the superposition survives forever
    m = default_readout_model(omega1_mhz=2.0)
    grid = np.linspace(0.0, 10.0, 11)
    p0 = no_decay_probability(m, m.initial_state, grid)
    assert p0[-1] == pytest.approx(0.5, abs=1e-3)


def test_readout_defaults_to_balanced_input():
    m = default_readout_model()
    assert np.allclose(np.abs(m.initial_state) ** 2, [0.5, 0.5, 0.0], atol=1e-12)


# ---------------------------------------------------------------------------
# CZ single-body


def test_cz_single_body_layout():
    p = cz_params()
    m = cz_single_body_model(p, "10")
    assert m.labels[:3] == ("10", "e0", "r0")
    h = hamiltonian(m, 0.1)
    assert h[1, 1] == pytest.approx(TWO_PI * 5000.0, rel=1e-14)
    assert h[2, 2] == pytest.approx(TWO_PI * -0.53, rel=1e-12)
    assert h[1, 2] == pytest.approx(0.5 * TWO_PI * 350.0, rel=1e-14)
    rates = {ch.source: ch.rate for ch in m.channels}
    assert rates[1] == pytest.approx(TWO_PI * 5.0)
    assert rates[2] == pytest.approx(TWO_PI * 0.01)


def test_cz_single_body_mirror_labels():
    m = cz_single_body_model(cz_params(), "01")
    assert m.labels[:3] == ("01", "0e", "0r")
    with pytest.raises(ValueError):
        cz_single_body_model(cz_params(), "11")


def test_cz_single_body_unitary_return():
    p = cz_params(gamma_intermediate=0.0, gamma_rydberg=0.0)
    m = cz_single_body_model(p, "10")
    tr = integrate("unitary", m, m.initial_state, (0.0, p.gate_time))
    assert abs(tr.final_state[0]) ** 2 > 0.99


def test_cz_single_body_without_stokes_never_reaches_rydberg():
    p = cz_params(gamma_intermediate=0.0, gamma_rydberg=0.0)
    import dataclasses
    p = dataclasses.replace(p, omega_stokes=constant(0.0))
    m = cz_single_body_model(p, "10")
    grid = tuple(np.linspace(0.0, p.gate_time, 11))
    tr = integrate("unitary", m, m.initial_state, (0.0, p.gate_time),
                   IntegrationConfig(sample_grid=grid))
    assert np.max(np.abs(tr.states[:, 2])) < 1e-12


# ---------------------------------------------------------------------------
# CZ two-body


def test_cz_two_body_layout_and_rates():
    p = cz_params()
    m = cz_two_body_model(p)
    assert m.labels[:6] == ("11", "ẽ", "r̃", "R̃", "rr", "qq'")
    h = hamiltonian(m, 0.1)
    probe = eval_waveform(p.omega_probe, 0.1)
    assert h[0, 1] == pytest.approx(probe / math.sqrt(2.0), rel=1e-14)
    assert h[1, 2] == pytest.approx(0.5 * TWO_PI * 350.0, rel=1e-14)
    assert h[2, 3] == pytest.approx(0.5 * probe, rel=1e-14)
    assert h[3, 4] == pytest.approx(TWO_PI * 350.0 / math.sqrt(2.0), rel=1e-14)
    assert h[4, 5] == pytest.approx(TWO_PI * 100.0, rel=1e-14)
    d1, d2 = TWO_PI * 5000.0, TWO_PI * -0.53
    assert h[1, 1] == pytest.approx(d1, rel=1e-14)
    assert h[2, 2] == pytest.approx(d2, rel=1e-12)
    assert h[3, 3] == pytest.approx(d1 + d2, rel=1e-14)
    assert h[4, 4] == pytest.approx(2 * d2, rel=1e-12)
    assert h[5, 5] == pytest.approx(2 * d2, rel=1e-12)  # pair-state penalty defaults to 0

    # composite decay rates per dressed state: gamma_e, gamma_e + gamma_r,
    # 2 gamma_r, 2 gamma_r on the four listed states, gamma_r on the single-
    # Rydberg state
    totals = {}
    for ch in m.channels:
        totals[ch.source] = totals.get(ch.source, 0.0) + ch.rate
    ge, gr = TWO_PI * 5.0, TWO_PI * 0.01
    assert totals[1] == pytest.approx(ge)
    assert totals[3] == pytest.approx(ge + gr)
    assert totals[4] == pytest.approx(2 * gr)
    assert totals[5] == pytest.approx(2 * gr)
    assert totals[2] == pytest.approx(gr)


def test_cz_two_body_pair_state_decoupled_without_exchange():
    import dataclasses
    p = dataclasses.replace(cz_params(gamma_intermediate=0.0, gamma_rydberg=0.0),
                            foerster_coupling=0.0, foerster_penalty=12.3)
    m = cz_two_body_model(p)
    grid = tuple(np.linspace(0.0, p.gate_time, 11))
    tr = integrate("unitary", m, m.initial_state, (0.0, p.gate_time),
                   IntegrationConfig(sample_grid=grid))
    assert np.max(np.abs(tr.states[:, 5])) < 1e-12


def test_cz_conditional_phase_and_population_at_zero_decay():
    p = cz_params(gamma_intermediate=0.0, gamma_rydberg=0.0)
    m1 = cz_single_body_model(p, "10")
    m2 = cz_two_body_model(p)
    a10 = integrate("unitary", m1, m1.initial_state, (0.0, p.gate_time)).final_state[0]
    a11 = integrate("unitary", m2, m2.initial_state, (0.0, p.gate_time)).final_state[0]
    assert abs(a10) ** 2 > 0.99
    assert abs(a11) ** 2 > 0.99
    conditional = float(np.angle(a11)) - 2.0 * float(np.angle(a10))
    assert abs(float(wrap_angle(conditional - math.pi))) < 0.05


def test_sinks_stay_empty_under_conditioned_evolution():
    m = cz_two_body_model(cz_params())
    tr = integrate("second", m, m.initial_state, (0.0, 0.25))
    assert np.max(np.abs(tr.final_state[6:])) == 0.0


def test_preset_registry():
    for name in ("two-level", "raman-pi2", "raman-phase", "readout",
                 "cz-single-10", "cz-single-01", "cz-two-body"):
        m = preset_model(name)
        assert m.dim >= 2
    with pytest.raises(ValueError):
        preset_model("bogus")
