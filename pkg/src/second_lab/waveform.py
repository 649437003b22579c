"""Drive pulse shapes: constants and truncated cosine (Fourier) series.

Units contract for the whole package: every frequency-like quantity is
angular, in rad/us, and every time is in microseconds.  Configuration files
and the preset tables quote plain MHz; ``mhz()`` converts at the boundary so
the factor of 2*pi lives in exactly one place.

A Fourier waveform with coefficients [a0, ..., aN] and reference time tau
evaluates to

    f(t) = 2*pi * (a0 + sum_{n=1..N} 2 * a_n * cos(2*pi*n*t/tau)) / (2N + 1)

in rad/us, i.e. the coefficients are MHz-scale numbers and the series is
normalized by its term count.  Coefficients must be real, which makes f real
and even about tau/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def mhz(value: float) -> float:
    """Convert an ordinary frequency in MHz to angular rad/us."""
    return TWO_PI * float(value)


@dataclass(frozen=True)
class Waveform:
    """A drive amplitude as a function of time, in rad/us.

    kind is "constant" (fixed ``value``) or "fourier" (normalized cosine
    series over ``coeffs`` with period ``tau``).  Instances are immutable and
    evaluation is pure, so they are safe to share between threads.
    """

    kind: str
    value: float = 0.0
    coeffs: tuple = field(default_factory=tuple)
    tau: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "fourier"):
            raise ValueError(f"unknown waveform kind {self.kind!r}")
        if self.kind == "fourier":
            if len(self.coeffs) == 0:
                raise ValueError("fourier waveform needs at least one coefficient")
            for c in self.coeffs:
                if isinstance(c, complex):
                    raise ValueError("fourier coefficients must be real")
                if not math.isfinite(float(c)):
                    raise ValueError("fourier coefficients must be finite")
            if not (self.tau > 0.0):
                raise ValueError("fourier reference time tau must be > 0")
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        else:
            if not math.isfinite(float(self.value)):
                raise ValueError("constant waveform value must be finite")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "tau", float(self.tau))

    def __call__(self, t: float) -> float:
        return eval_waveform(self, t)


def constant(value_rad_per_us: float) -> Waveform:
    """Constant drive given directly in angular units (rad/us)."""
    return Waveform(kind="constant", value=value_rad_per_us)


def constant_mhz(value_mhz: float) -> Waveform:
    """Constant drive given in MHz (multiplied by 2*pi internally)."""
    return Waveform(kind="constant", value=mhz(value_mhz))


def fourier(coeffs, tau: float = 1.0) -> Waveform:
    """Truncated cosine series with MHz-scale coefficients [a0..aN]."""
    return Waveform(kind="fourier", coeffs=tuple(coeffs), tau=tau)


def eval_waveform(w: Waveform, t: float) -> float:
    """Evaluate a waveform at time t (us), returning rad/us.

    Raises ValueError on non-finite t; the result is real by construction.
    """
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"waveform evaluation time must be finite, got {t!r}")
    if w.kind == "constant":
        return w.value
    coeffs = w.coeffs
    if len(coeffs) == 0:
        raise ValueError("fourier waveform has no coefficients")
    n_max = len(coeffs) - 1
    acc = coeffs[0]
    x = TWO_PI * t / w.tau
    for n in range(1, n_max + 1):
        acc += 2.0 * coeffs[n] * math.cos(n * x)
    return TWO_PI * acc / (2 * n_max + 1)


def endpoint_residual(w: Waveform, grid_points: int = 2048) -> float:
    """How well a series pulse switches off at its endpoints.

    Returns |f(0)| / max_t |f(t)| with the maximum taken on a uniform grid of
    at least 1024 points over one period.  Only meaningful for "fourier"
    waveforms; constants raise ValueError.
    """
    if w.kind != "fourier":
        raise ValueError("endpoint_residual is only defined for fourier waveforms")
    grid_points = max(int(grid_points), 1024)
    ts = np.linspace(0.0, w.tau, grid_points)
    values = np.array([eval_waveform(w, t) for t in ts])
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        return 0.0
    return abs(eval_waveform(w, 0.0)) / peak
