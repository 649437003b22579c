import math

import numpy as np
import pytest

from second_lab.waveform import (
    Waveform,
    constant,
    constant_mhz,
    endpoint_residual,
    eval_waveform,
    fourier,
    mhz,
)

TWO_PI = 2.0 * math.pi

SINGLE_QUBIT = (208.05, -92.59, -3.66, -3.35, -2.38, -2.03)
CZ_PROBE = (2338.8, -1082.4, 230.9, -176.6, -138.9, -2.3)


def series_oracle(coeffs, tau, t):
    """Independent evaluation: plain term-by-term sum via numpy."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = np.arange(1, coeffs.shape[0])
    acc = coeffs[0] + np.sum(2.0 * coeffs[1:] * np.cos(2.0 * np.pi * n * t / tau))
    return TWO_PI * acc / (2 * (coeffs.shape[0] - 1) + 1)


def test_constant_is_flat():
    w = constant_mhz(350.0)
    for t in (0.0, 0.1, 0.25, 17.3):
        assert eval_waveform(w, t) == TWO_PI * 350.0


def test_degenerate_single_term_series():
    w = fourier([5.0], tau=1.0)
    for t in (0.0, 0.3, 0.9):
        assert eval_waveform(w, t) == pytest.approx(TWO_PI * 5.0, rel=1e-15)


def test_single_qubit_coefficients_midpoint():
    # at t = tau/2 the cosines alternate sign: a0 + 2*sum a_n (-1)^n
    alternating = SINGLE_QUBIT[0] + 2.0 * sum(
        a * (-1) ** n for n, a in enumerate(SINGLE_QUBIT[1:], start=1)
    )
    assert alternating == pytest.approx(391.91, abs=1e-9)
    w = fourier(SINGLE_QUBIT, tau=1.0)
    assert eval_waveform(w, 0.5) == pytest.approx(TWO_PI * 391.91 / 11.0, rel=1e-12)
    assert eval_waveform(w, 0.5) == pytest.approx(TWO_PI * 35.628181818181818, rel=1e-12)


def test_eval_matches_series_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        coeffs = rng.normal(size=rng.integers(1, 8))
        tau = float(rng.uniform(0.1, 4.0))
        t = float(rng.uniform(-2.0, 6.0))
        w = fourier(coeffs, tau)
        assert eval_waveform(w, t) == pytest.approx(series_oracle(coeffs, tau, t), rel=1e-12, abs=1e-12)


def test_endpoint_residual_single_qubit():
    # f(0) is proportional to a0 + 2*sum a_n = 208.05 - 2*104.01 = 0.03
    f0 = SINGLE_QUBIT[0] + 2.0 * sum(SINGLE_QUBIT[1:])
    assert f0 == pytest.approx(0.03, abs=1e-9)
    w = fourier(SINGLE_QUBIT, tau=1.0)
    ts = np.linspace(0.0, 1.0, 8192)
    peak = max(abs(series_oracle(SINGLE_QUBIT, 1.0, t)) for t in ts)
    expected = (TWO_PI * f0 / 11.0) / peak
    assert endpoint_residual(w) == pytest.approx(expected, rel=1e-3)
    assert endpoint_residual(w) == pytest.approx(7.65e-5, rel=0.02)


def test_endpoint_residual_cz():
    f0 = CZ_PROBE[0] + 2.0 * sum(CZ_PROBE[1:])
    assert f0 == pytest.approx(0.2, abs=1e-9)
    w = fourier(CZ_PROBE, tau=0.25)
    ts = np.linspace(0.0, 0.25, 8192)
    peak = max(abs(series_oracle(CZ_PROBE, 0.25, t)) for t in ts)
    expected = (TWO_PI * f0 / 11.0) / peak
    assert endpoint_residual(w) == pytest.approx(expected, rel=1e-3)


def test_endpoint_residual_degenerate_constant_series():
    # N=1 with a1=0 is a constant: its own peak, residual exactly 1
    assert endpoint_residual(fourier([1.0, 0.0], tau=1.0)) == 1.0


def test_published_sets_switch_off_at_the_edges():
    assert endpoint_residual(fourier(SINGLE_QUBIT, 1.0)) < 1e-3
    assert endpoint_residual(fourier(CZ_PROBE, 0.25)) < 1e-3


def test_periodicity_random_series():
    rng = np.random.default_rng(11)
    for _ in range(100):
        coeffs = rng.normal(size=rng.integers(1, 8))
        tau = float(rng.uniform(0.1, 3.0))
        t = float(rng.uniform(0.0, tau))
        w = fourier(coeffs, tau)
        a, b = eval_waveform(w, t), eval_waveform(w, t + tau)
        assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


def test_even_symmetry_about_half_period():
    rng = np.random.default_rng(13)
    for _ in range(100):
        coeffs = rng.normal(size=rng.integers(1, 8))
        tau = float(rng.uniform(0.1, 3.0))
        t = float(rng.uniform(0.0, tau))
        w = fourier(coeffs, tau)
        assert eval_waveform(w, tau - t) == pytest.approx(eval_waveform(w, t), rel=1e-10, abs=1e-12)


def test_eval_is_real_valued():
    w = fourier(SINGLE_QUBIT, 1.0)
    assert isinstance(eval_waveform(w, 0.123), float)


def test_invalid_arguments():
    w = fourier(SINGLE_QUBIT, 1.0)
    with pytest.raises(ValueError):
        eval_waveform(w, math.nan)
    with pytest.raises(ValueError):
        eval_waveform(w, math.inf)
    with pytest.raises(ValueError):
        fourier([], tau=1.0)
    with pytest.raises(ValueError):
        fourier([1.0, 2.0 + 1.0j], tau=1.0)
    with pytest.raises(ValueError):
        fourier([1.0], tau=0.0)
    with pytest.raises(ValueError):
        fourier([1.0], tau=-1.0)
    with pytest.raises(ValueError):
        Waveform(kind="triangle")
    with pytest.raises(ValueError):
        endpoint_residual(constant(1.0))


def test_mhz_conversion():
    assert mhz(1.0) == TWO_PI
    assert constant_mhz(350.0).value == pytest.approx(TWO_PI * 350.0, rel=1e-15)
