"""Concrete physical systems as ready-made model presets.

All published pulse/detuning/decay numbers are collected here; everything is
stored in angular units (rad/us) once it leaves the parameter dataclasses.
Decay destinations that leave a model's coherent space are represented by
explicit sink basis states appended to the basis, so jump bookkeeping stays
norm-accountable; the conditioned/no-decay computations never touch them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DecayChannel, DriveEntry, ModelSpec, basis_state
from .waveform import Waveform, constant, constant_mhz, fourier, mhz

SQRT2 = math.sqrt(2.0)

# Modulated-pulse coefficient tables (MHz-scale cosine series).
SINGLE_QUBIT_COEFFS = (208.05, -92.59, -3.66, -3.35, -2.38, -2.03)
SINGLE_QUBIT_TAU_US = 1.0
CZ_PROBE_COEFFS = (2338.8, -1082.4, 230.9, -176.6, -138.9, -2.3)
CZ_TAU_US = 0.25


@dataclass(frozen=True)
class TwoLevelParams:
    """Driven two-level atom with decay on either level."""

    omega: Waveform
    detuning: Waveform = None
    gamma_ground: float = 0.0
    gamma_excited: float = 0.0
    ground_branches: tuple = None
    excited_branches: tuple = ((0, 1.0),)

    def __post_init__(self):
        if self.gamma_ground < 0 or self.gamma_excited < 0:
            raise ValueError("decay rates must be >= 0")
        if self.detuning is None:
            object.__setattr__(self, "detuning", constant(0.0))


@dataclass(frozen=True)
class RamanParams:
    """Two ground states coupled through one decaying excited state."""

    omega0: Waveform
    omega1: Waveform
    delta_one_photon: Waveform = None
    delta_two_photon: Waveform = None
    gamma: float = 0.0
    branches: tuple = ((0, 0.5), (1, 0.5))

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("decay rate must be >= 0")
        if self.delta_one_photon is None:
            object.__setattr__(self, "delta_one_photon", constant(0.0))
        if self.delta_two_photon is None:
            object.__setattr__(self, "delta_two_photon", constant(0.0))


@dataclass(frozen=True)
class RydbergCZParams:
    """Two-photon ground-Rydberg CZ gate parameters.

    delta_one_photon / delta_two_photon / foerster_coupling /
    foerster_penalty are plain rad/us numbers; the probe and Stokes drives
    are waveforms.  foerster_penalty defaults to exact pair-state resonance.
    """

    omega_probe: Waveform
    omega_stokes: Waveform
    delta_one_photon: float
    delta_two_photon: float
    foerster_coupling: float
    foerster_penalty: float = 0.0
    gamma_intermediate: float = 0.0
    gamma_rydberg: float = 0.0
    gate_time: float = CZ_TAU_US

    def __post_init__(self):
        if self.gamma_intermediate < 0 or self.gamma_rydberg < 0:
            raise ValueError("decay rates must be >= 0")
        if not (self.gate_time > 0):
            raise ValueError("gate_time must be > 0")


def two_level_model(p: TwoLevelParams, initial_state=None, name="two-level") -> ModelSpec:
    """Basis ("g", "e"); coupling omega/2, detuning on |e>."""
    entries = [
        DriveEntry(0, 1, p.omega, 0.5),
        DriveEntry(1, 1, p.detuning, 1.0),
    ]
    channels = []
    if p.gamma_ground > 0:
        channels.append(DecayChannel(0, p.gamma_ground, p.ground_branches))
    if p.gamma_excited > 0:
        channels.append(DecayChannel(1, p.gamma_excited, p.excited_branches))
    if initial_state is None:
        initial_state = basis_state(2, 0)
    return ModelSpec(
        labels=("g", "e"),
        entries=tuple(entries),
        channels=tuple(channels),
        initial_state=initial_state,
        name=name,
    )


def raman_model(p: RamanParams, initial_state=None, name="raman") -> ModelSpec:
    """Basis ("0", "1", "e"); couplings omega0/2 and omega1/2 to |e>."""
    entries = (
        DriveEntry(0, 2, p.omega0, 0.5),
        DriveEntry(1, 2, p.omega1, 0.5),
        DriveEntry(1, 1, p.delta_two_photon, 1.0),
        DriveEntry(2, 2, p.delta_one_photon, 1.0),
    )
    channels = ()
    if p.gamma > 0:
        channels = (DecayChannel(2, p.gamma, p.branches),)
    if initial_state is None:
        initial_state = basis_state(3, 0)
    return ModelSpec(
        labels=("0", "1", "e"),
        entries=entries,
        channels=channels,
        initial_state=initial_state,
        name=name,
    )


def readout_model(omega1: Waveform, delta: float = 0.0, gamma: float = mhz(1.0),
                  initial_state=None, name="readout") -> ModelSpec:
    """State-selective fluorescence configuration: only |1> is driven.

    Defaults to reading the balanced superposition (|0>+|1>)/sqrt(2).
    """
    if initial_state is None:
        initial_state = np.array([1.0, 1.0, 0.0]) / SQRT2
    params = RamanParams(
        omega0=constant(0.0),
        omega1=omega1,
        delta_one_photon=constant(delta),
        gamma=gamma,
    )
    return raman_model(params, initial_state=initial_state, name=name)


def cz_single_body_model(p: RydbergCZParams, which: str = "10") -> ModelSpec:
    """Excitation ladder for one qubit of the gate pair, the other a
    spectator in |0>.  Basis: computational state, intermediate, Rydberg,
    plus three decay sinks (two ground-like for intermediate-state decay, one
    "lost" for Rydberg decay)."""
    if which not in ("10", "01"):
        raise ValueError(f"which must be '10' or '01', got {which!r}")
    comp, mid, ryd = ("10", "e0", "r0") if which == "10" else ("01", "0e", "0r")
    labels = (comp, mid, ryd, "decayed0", "decayed1", "lost")
    entries = (
        DriveEntry(0, 1, p.omega_probe, 0.5),
        DriveEntry(1, 2, p.omega_stokes, 0.5),
        DriveEntry(1, 1, constant(p.delta_one_photon), 1.0),
        DriveEntry(2, 2, constant(p.delta_two_photon), 1.0),
    )
    channels = []
    if p.gamma_intermediate > 0:
        channels.append(DecayChannel(1, p.gamma_intermediate, ((3, 0.5), (4, 0.5))))
    if p.gamma_rydberg > 0:
        channels.append(DecayChannel(2, p.gamma_rydberg, ((5, 1.0),)))
    return ModelSpec(
        labels=labels,
        entries=entries,
        channels=tuple(channels),
        initial_state=basis_state(6, 0),
        name=f"cz-single-{which}",
    )


def cz_two_body_model(p: RydbergCZParams) -> ModelSpec:
    """Symmetric two-atom ladder from |11> to the doubly excited Rydberg pair.

    Basis: |11>, the symmetric singly-intermediate state, the symmetric
    singly-Rydberg state, the mixed Rydberg+intermediate state, |rr>, the
    pair state reached by the exchange coupling, plus decay sinks.  Composite
    decay rates follow the excitation content of each dressed state: the
    mixed state decays through both an intermediate-like and a Rydberg-like
    channel (summing to gamma_intermediate + gamma_rydberg), and the doubly
    excited states at twice the Rydberg rate.
    """
    labels = ("11", "ẽ", "r̃", "R̃", "rr", "qq'")
    labels = labels + ("decayed0", "decayed1", "lost")
    d1, d2 = p.delta_one_photon, p.delta_two_photon
    entries = (
        DriveEntry(0, 1, p.omega_probe, 1.0 / SQRT2),
        DriveEntry(1, 2, p.omega_stokes, 0.5),
        DriveEntry(2, 3, p.omega_probe, 0.5),
        DriveEntry(3, 4, p.omega_stokes, 1.0 / SQRT2),
        DriveEntry(4, 5, constant(p.foerster_coupling), 1.0),
        DriveEntry(1, 1, constant(d1), 1.0),
        DriveEntry(2, 2, constant(d2), 1.0),
        DriveEntry(3, 3, constant(d1 + d2), 1.0),
        DriveEntry(4, 4, constant(2.0 * d2), 1.0),
        DriveEntry(5, 5, constant(2.0 * d2 + p.foerster_penalty), 1.0),
    )
    ground_sinks = ((6, 0.5), (7, 0.5))
    lost_sink = ((8, 1.0),)
    channels = []
    if p.gamma_intermediate > 0:
        channels.append(DecayChannel(1, p.gamma_intermediate, ground_sinks))
        channels.append(DecayChannel(3, p.gamma_intermediate, ground_sinks))
    if p.gamma_rydberg > 0:
        channels.append(DecayChannel(2, p.gamma_rydberg, lost_sink))
        channels.append(DecayChannel(3, p.gamma_rydberg, lost_sink))
        channels.append(DecayChannel(4, 2.0 * p.gamma_rydberg, lost_sink))
        channels.append(DecayChannel(5, 2.0 * p.gamma_rydberg, lost_sink))
    return ModelSpec(
        labels=labels,
        entries=entries,
        channels=tuple(channels),
        initial_state=basis_state(9, 0),
        name="cz-two-body",
    )


# ---------------------------------------------------------------------------
# published parameter sets


def single_qubit_pulse() -> Waveform:
    return fourier(SINGLE_QUBIT_COEFFS, SINGLE_QUBIT_TAU_US)


def cz_probe_pulse() -> Waveform:
    return fourier(CZ_PROBE_COEFFS, CZ_TAU_US)


def raman_pi2_params(gamma=mhz(1.0)) -> RamanParams:
    """Balanced two-photon pi/2 pulse: both legs driven by the shaped pulse,
    one-photon detuning 2*pi x 1 GHz, two-photon resonance."""
    pulse = single_qubit_pulse()
    return RamanParams(
        omega0=pulse,
        omega1=pulse,
        delta_one_photon=constant_mhz(1000.0),
        delta_two_photon=constant(0.0),
        gamma=gamma,
    )


def raman_phase_params(coeffs=SINGLE_QUBIT_COEFFS, tau=SINGLE_QUBIT_TAU_US,
                       gamma=mhz(1.0)) -> RamanParams:
    """Phase-gate configuration: only |1> is driven, phase accumulates via
    the light shift.  Coefficients are caller-supplied; the default reuses
    the shaped single-qubit pulse."""
    return RamanParams(
        omega0=constant(0.0),
        omega1=fourier(coeffs, tau),
        delta_one_photon=constant_mhz(1000.0),
        delta_two_photon=constant(0.0),
        gamma=gamma,
    )


def cz_params(gamma_intermediate=mhz(5.0), gamma_rydberg=mhz(0.01)) -> RydbergCZParams:
    """The published CZ working point: shaped probe, constant Stokes
    2*pi x 350 MHz, one-photon detuning 2*pi x 5 GHz, two-photon detuning
    2*pi x -0.53 MHz, exchange coupling 2*pi x 100 MHz, 0.25 us gate."""
    return RydbergCZParams(
        omega_probe=cz_probe_pulse(),
        omega_stokes=constant_mhz(350.0),
        delta_one_photon=mhz(5000.0),
        delta_two_photon=mhz(-0.53),
        foerster_coupling=mhz(100.0),
        foerster_penalty=0.0,
        gamma_intermediate=gamma_intermediate,
        gamma_rydberg=gamma_rydberg,
        gate_time=CZ_TAU_US,
    )


def raman_pi2_model(gamma=mhz(1.0)) -> ModelSpec:
    return raman_model(raman_pi2_params(gamma=gamma), name="raman-pi2")


def raman_phase_model(coeffs=SINGLE_QUBIT_COEFFS, tau=SINGLE_QUBIT_TAU_US,
                      gamma=mhz(1.0)) -> ModelSpec:
    return raman_model(
        raman_phase_params(coeffs=coeffs, tau=tau, gamma=gamma),
        initial_state=np.array([1.0, 1.0, 0.0]) / SQRT2,
        name="raman-phase",
    )


def default_readout_model(omega1_mhz=2.0, gamma=mhz(1.0)) -> ModelSpec:
    return readout_model(constant_mhz(omega1_mhz), delta=0.0, gamma=gamma)


PRESET_BUILDERS = {
    "two-level": lambda: two_level_model(
        TwoLevelParams(omega=constant_mhz(1.0), gamma_excited=mhz(1.0)),
        name="two-level",
    ),
    "raman-pi2": raman_pi2_model,
    "raman-phase": raman_phase_model,
    "readout": default_readout_model,
    "cz-single-10": lambda: cz_single_body_model(cz_params(), "10"),
    "cz-single-01": lambda: cz_single_body_model(cz_params(), "01"),
    "cz-two-body": lambda: cz_two_body_model(cz_params()),
}

PRESET_DESCRIPTIONS = {
    "two-level": "driven two-level atom with excited-state decay",
    "raman-pi2": "shaped two-photon pi/2 pulse on the 0-1 qubit (Hadamard-like transfer)",
    "raman-phase": "light-shift phase gate on |1> (caller-supplied pulse coefficients)",
    "readout": "state-selective readout drive on |1> from (|0>+|1>)/sqrt(2)",
    "cz-single-10": "single-excitation ladder of the CZ gate, control in |1>",
    "cz-single-01": "single-excitation ladder of the CZ gate, target in |1>",
    "cz-two-body": "symmetric two-atom ladder of the CZ gate from |11>",
}


def preset_model(name: str) -> ModelSpec:
    try:
        builder = PRESET_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESET_BUILDERS)}")
    return builder()


def default_span(model: ModelSpec):
    """Natural pulse window for a preset model (one reference period of its
    first time-dependent drive, else 1 us)."""
    for e in model.entries:
        if e.waveform.kind == "fourier":
            return (0.0, e.waveform.tau)
    return (0.0, 1.0)
