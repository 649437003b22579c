"""Model abstraction and the three right-hand sides.

A model is a basis (labels), a sparse time-dependent Hermitian drive matrix
H(t) (rad/us), decay channels, and an initial state.  From those we build

* unitary_rhs    dC/dt = -i H(t) C                      (norm conserved)
* effective_rhs  dC/dt = -i H(t) C - (gamma/2) C        (linear no-jump
                 evolution; the squared norm decays as the no-decay
                 probability)
* second_rhs     effective_rhs + [sum_m (gamma_m/2)|C_m|^2] C, the nonlinear
                 evolution of the state conditioned on never decaying; this
                 one conserves the norm exactly.

Decay enters only through populations of single basis states; channels carry
optional branch lists that the Monte-Carlo engine uses as jump destinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalDomainError
from .waveform import Waveform, eval_waveform

_BRANCH_WEIGHT_TOL = 1e-12
_STATE_NORM_TOL = 1e-9


@dataclass(frozen=True)
class DecayChannel:
    """One population-decay channel: basis index ``source`` decays at ``rate``.

    ``branches`` optionally lists (target index, weight) jump destinations
    with weights summing to 1; conditioned/no-decay computations never read
    them, the Monte-Carlo engine requires them.
    """

    source: int
    rate: float
    branches: tuple = None

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError(f"decay rate must be >= 0, got {self.rate}")
        if self.branches is not None:
            branches = tuple((int(i), float(w)) for i, w in self.branches)
            if len(branches) == 0:
                raise ValueError("branch list, when given, must be non-empty")
            total = 0.0
            for target, weight in branches:
                if target == self.source:
                    raise ValueError("branch target must differ from the source")
                if weight <= 0.0:
                    raise ValueError("branch weights must be > 0")
                total += weight
            if abs(total - 1.0) > _BRANCH_WEIGHT_TOL:
                raise ValueError(f"branch weights must sum to 1, got {total!r}")
            object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "source", int(self.source))
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True)
class DriveEntry:
    """One sparse entry of the Hermitian drive matrix.

    Contributes scale * w(t) to H[row, col]; for row != col the conjugate is
    added at [col, row] automatically, so each coupling is listed once.
    Diagonal entries must have a real scale.
    """

    row: int
    col: int
    waveform: Waveform
    scale: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "row", int(self.row))
        object.__setattr__(self, "col", int(self.col))
        object.__setattr__(self, "scale", complex(self.scale))
        if self.row == self.col and abs(self.scale.imag) != 0.0:
            raise ValueError("diagonal drive entries must have real scale")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Immutable description of one driven, decaying system."""

    labels: tuple
    entries: tuple
    channels: tuple
    initial_state: np.ndarray
    name: str = "model"

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "labels", labels)
        dim = len(labels)
        if dim == 0:
            raise ValueError("model needs at least one basis state")

        entries = tuple(self.entries)
        seen = set()
        for e in entries:
            if not (0 <= e.row < dim and 0 <= e.col < dim):
                raise ValueError(f"drive entry ({e.row},{e.col}) out of range for dim {dim}")
            if e.row != e.col:
                if (e.col, e.row) in seen:
                    raise ValueError(
                        f"coupling ({e.row},{e.col}) also listed as ({e.col},{e.row}); "
                        "list each off-diagonal coupling once"
                    )
                seen.add((e.row, e.col))
        object.__setattr__(self, "entries", entries)

        channels = tuple(self.channels)
        for ch in channels:
            if not (0 <= ch.source < dim):
                raise ValueError(f"channel source {ch.source} out of range for dim {dim}")
            if ch.branches is not None:
                for target, _ in ch.branches:
                    if not (0 <= target < dim):
                        raise ValueError(f"branch target {target} out of range for dim {dim}")
        object.__setattr__(self, "channels", channels)

        state = state_vector(self.initial_state, dim=dim)
        object.__setattr__(self, "initial_state", state)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        return self.labels.index(label)


def state_vector(amplitudes, dim: int = None) -> np.ndarray:
    """Validate and return a unit-norm complex state vector."""
    state = np.asarray(amplitudes, dtype=np.complex128).reshape(-1).copy()
    if dim is not None and state.shape[0] != dim:
        raise ValueError(f"state has dimension {state.shape[0]}, expected {dim}")
    norm2 = float(np.sum(np.abs(state) ** 2))
    if abs(norm2 - 1.0) > _STATE_NORM_TOL:
        raise ValueError(f"state must be normalized, got |C|^2 = {norm2!r}")
    return state


def basis_state(dim: int, index: int) -> np.ndarray:
    state = np.zeros(dim, dtype=np.complex128)
    state[index] = 1.0
    return state


def hamiltonian(model: ModelSpec, t: float) -> np.ndarray:
    """Assemble the dense Hermitian drive matrix H(t) in rad/us."""
    dim = model.dim
    h = np.zeros((dim, dim), dtype=np.complex128)
    for e in model.entries:
        v = e.scale * eval_waveform(e.waveform, t)
        h[e.row, e.col] += v
        if e.row != e.col:
            h[e.col, e.row] += np.conj(v)
    return h


def decay_diagonal(channels, dim: int) -> np.ndarray:
    """Per-basis-state half-rates: d[i] = sum of gamma/2 over channels at i.

    The anti-Hermitian decay part of the generator is -i*diag(d).  Multiple
    channels on the same source add up.
    """
    d = np.zeros(dim, dtype=np.float64)
    for ch in channels:
        if not (0 <= ch.source < dim):
            raise ValueError(f"channel source {ch.source} out of range for dim {dim}")
        d[ch.source] += 0.5 * ch.rate
    return d


def renorm_scalar(channels, state: np.ndarray) -> float:
    """The norm-restoring rate sum_m (gamma_m/2) |C_{source_m}|^2 in rad/us."""
    state = np.asarray(state)
    acc = 0.0
    for ch in channels:
        if ch.source >= state.shape[0]:
            raise ValueError("channel source out of range for this state")
        acc += 0.5 * ch.rate * float(abs(state[ch.source]) ** 2)
    return acc


def _check_finite(h: np.ndarray, t: float):
    if not np.all(np.isfinite(h.view(np.float64))):
        raise NumericalDomainError(f"drive matrix has non-finite entries at t={t}", t=t)


def unitary_rhs(model: ModelSpec, t: float, state: np.ndarray) -> np.ndarray:
    """dC/dt = -i H(t) C."""
    h = hamiltonian(model, t)
    _check_finite(h, t)
    return -1j * (h @ state)


def effective_rhs(model: ModelSpec, t: float, state: np.ndarray) -> np.ndarray:
    """Linear no-jump evolution: unitary part plus population drain.

    Does not conserve the norm; d/dt |C|^2 = -sum_m gamma_m |C_{source_m}|^2.
    """
    h = hamiltonian(model, t)
    _check_finite(h, t)
    d = decay_diagonal(model.channels, model.dim)
    return -1j * (h @ state) - d * state


def second_rhs(model: ModelSpec, t: float, state: np.ndarray) -> np.ndarray:
    """Nonlinear no-decay-conditioned evolution; conserves the norm.

    The normalization precondition is soft: small drift is self-correcting
    (the norm defect obeys a homogeneous equation and stays at zero if it
    starts there), so this only warns via the caller's tests, never raises.
    """
    return effective_rhs(model, t, state) + renorm_scalar(model.channels, state) * state


RHS_MODES = {"unitary": 0, "effective": 1, "second": 2}


@dataclass(frozen=True)
class PackedModel:
    """Flat array layout of a ModelSpec for the compiled integrator core."""

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    scales: np.ndarray
    wf_kind: np.ndarray
    wf_value: np.ndarray
    wf_coeffs: np.ndarray
    wf_ncoeff: np.ndarray
    wf_tau: np.ndarray
    half_rates: np.ndarray
    channel_sources: np.ndarray
    channel_rates: np.ndarray


def pack_model(model: ModelSpec) -> PackedModel:
    entries = model.entries
    n = len(entries)
    max_ncoeff = max([1] + [len(e.waveform.coeffs) for e in entries])
    rows = np.empty(n, dtype=np.int64)
    cols = np.empty(n, dtype=np.int64)
    scales = np.empty(n, dtype=np.complex128)
    wf_kind = np.empty(n, dtype=np.int64)
    wf_value = np.zeros(n, dtype=np.float64)
    wf_coeffs = np.zeros((n, max_ncoeff), dtype=np.float64)
    wf_ncoeff = np.zeros(n, dtype=np.int64)
    wf_tau = np.ones(n, dtype=np.float64)
    for i, e in enumerate(entries):
        rows[i] = e.row
        cols[i] = e.col
        scales[i] = e.scale
        if e.waveform.kind == "constant":
            wf_kind[i] = 0
            wf_value[i] = e.waveform.value
        else:
            wf_kind[i] = 1
            coeffs = e.waveform.coeffs
            wf_ncoeff[i] = len(coeffs)
            wf_coeffs[i, : len(coeffs)] = coeffs
            wf_tau[i] = e.waveform.tau
    half_rates = decay_diagonal(model.channels, model.dim)
    channel_sources = np.array([ch.source for ch in model.channels], dtype=np.int64)
    channel_rates = np.array([ch.rate for ch in model.channels], dtype=np.float64)
    return PackedModel(
        dim=model.dim,
        rows=rows,
        cols=cols,
        scales=scales,
        wf_kind=wf_kind,
        wf_value=wf_value,
        wf_coeffs=wf_coeffs,
        wf_ncoeff=wf_ncoeff,
        wf_tau=wf_tau,
        half_rates=half_rates,
        channel_sources=channel_sources,
        channel_rates=channel_rates,
    )


_PACK_CACHE: dict = {}


def packed(model: ModelSpec) -> PackedModel:
    """pack_model with an identity-keyed cache (ModelSpec is immutable)."""
    key = id(model)
    hit = _PACK_CACHE.get(key)
    if hit is not None and hit[0] is model:
        return hit[1]
    pm = pack_model(model)
    if len(_PACK_CACHE) > 256:
        _PACK_CACHE.clear()
    _PACK_CACHE[key] = (model, pm)
    return pm
