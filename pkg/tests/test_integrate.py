import math

import numpy as np
import pytest

from second_lab.errors import IntegrationError
from second_lab.integrate import IntegrationConfig, integrate
from second_lab.models import TwoLevelParams, two_level_model
from second_lab.waveform import constant, constant_mhz

TWO_PI = 2.0 * math.pi


def rabi_model(gamma=0.0):
    return two_level_model(TwoLevelParams(omega=constant_mhz(1.0), gamma_excited=gamma))


def decay_model():
    return two_level_model(TwoLevelParams(omega=constant(0.0), gamma_excited=TWO_PI))


def rabi_excited_population(t):
    # resonant drive at 2*pi x 1 MHz: |Y(t)|^2 = sin^2(pi * t[us])
    return math.sin(math.pi * t) ** 2


def test_rabi_oscillation_hits_half_transfer():
    m = rabi_model()
    tr = integrate("unitary", m, [1.0, 0.0], (0.0, 0.5),
                   IntegrationConfig(sample_grid=(0.25,)))
    pops = tr.populations()
    idx = int(np.where(tr.times == 0.25)[0][0])
    assert pops[idx, 1] == pytest.approx(0.5, abs=1e-9)
    assert pops[idx, 1] == pytest.approx(rabi_excited_population(0.25), abs=1e-9)


def test_effective_norm_is_analytic_exponential():
    m = decay_model()
    tr = integrate("effective", m, [0.0, 1.0], (0.0, 0.5))
    norm2 = float(np.sum(np.abs(tr.final_state) ** 2))
    assert norm2 == pytest.approx(math.exp(-TWO_PI * 0.5), abs=1e-10)


def test_conditioned_pure_decay_state_is_stationary():
    m = decay_model()
    tr = integrate("second", m, [0.0, 1.0], (0.0, 0.5),
                   IntegrationConfig(sample_grid=tuple(np.linspace(0.0, 0.5, 21))))
    assert np.max(np.abs(tr.states - np.array([0.0, 1.0]))) < 1e-10
    norms = np.sum(np.abs(tr.states) ** 2, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-12


def test_convergence_under_tolerance_halving():
    m = rabi_model()
    end = {}
    for tol in (1e-8, 5e-9):
        tr = integrate("unitary", m, [1.0, 0.0], (0.0, 1.0),
                       IntegrationConfig(rel_tol=tol, abs_tol=tol * 1e-2))
        end[tol] = tr.final_state
    assert np.max(np.abs(end[1e-8] - end[5e-9])) < 10.0 * 5e-9


def test_order_at_least_four_on_fixed_steps():
    # huge tolerances + max_step pin the stepper to constant steps h
    m = rabi_model()
    errors = []
    hs = [2.0**-k for k in range(6, 11)]
    for h in hs:
        tr = integrate("unitary", m, [1.0, 0.0], (0.0, 0.5),
                       IntegrationConfig(rel_tol=1e6, abs_tol=1e6, max_step=h))
        err = abs(abs(tr.final_state[1]) ** 2 - rabi_excited_population(0.5))
        errors.append(max(err, 1e-16))
    rates = [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]
    assert min(rates) > 4.0, (errors, rates)


def test_unitary_norm_bounded_by_tolerance():
    m = rabi_model()
    rel = 1e-10
    tr = integrate("unitary", m, [1.0, 0.0], (0.0, 1.0),
                   IntegrationConfig(rel_tol=rel, abs_tol=1e-12,
                                     sample_grid=tuple(np.linspace(0.0, 1.0, 41))))
    norms = np.sum(np.abs(tr.states) ** 2, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 10.0 * rel * 100  # accumulated over ~1e2 steps


def test_bitwise_determinism():
    m = rabi_model(gamma=TWO_PI * 0.3)
    cfg = IntegrationConfig(sample_grid=tuple(np.linspace(0.0, 1.0, 17)))
    a = integrate("second", m, [1.0, 0.0], (0.0, 1.0), cfg)
    b = integrate("second", m, [1.0, 0.0], (0.0, 1.0), cfg)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.times, b.times)


def test_sample_grid_is_hit_exactly():
    m = rabi_model()
    grid = (0.1, 0.2, 0.35, 0.7)
    tr = integrate("unitary", m, [1.0, 0.0], (0.0, 1.0),
                   IntegrationConfig(sample_grid=grid))
    for t in (0.0,) + grid + (1.0,):
        assert t in tr.times
    assert np.all(np.diff(tr.times) > 0)


def test_precondition_errors():
    m = rabi_model()
    with pytest.raises(ValueError):
        integrate("unitary", m, [1.0, 0.0], (0.5, 0.5))
    with pytest.raises(ValueError):
        integrate("unitary", m, [1.0, 0.0, 0.0], (0.0, 1.0))
    with pytest.raises(ValueError):
        integrate("second", m, [1.0, 1.0], (0.0, 1.0))  # not normalized
    with pytest.raises(ValueError):
        integrate("spooky", m, [1.0, 0.0], (0.0, 1.0))
    with pytest.raises(ValueError):
        IntegrationConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegrationConfig(sample_grid=(0.2, 0.1))


def test_step_underflow_raises_integration_error():
    m = rabi_model()
    with pytest.raises(IntegrationError) as err:
        integrate("unitary", m, [1.0, 0.0], (0.0, 1.0),
                  IntegrationConfig(rel_tol=1e-300, abs_tol=1e-300))
    assert err.value.t is not None
