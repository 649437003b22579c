"""Stochastic wave-function trajectories with jump collapse, detector
emulation, and deterministic seeded ensembles.

Each trajectory walks a fixed decision grid.  Per decision step of size dt it
draws two uniforms (xi, eta): a decay event happens when xi <= p with
p = sum_m gamma_m |C_m|^2 dt (kept <= a small cap by construction, the
engine subdivides otherwise).  On a decay event the detector catches it with
probability 1 - eta0(dt) (trajectory stops), otherwise the state collapses to
the drawn branch target and the walk continues.  Without a decay event the
detector falsely fires with probability eta1(dt) (trajectory stops),
otherwise the state advances by the conditioned no-decay evolution over the
step.

Because the no-decay evolution is deterministic, every trajectory follows
one shared precomputed path until its first random event; only trajectories
that survive a missed decay need private integration.  Per-trajectory
random streams are counter-based (Philox keyed on (master_seed, index)), and
ensemble reduction is compensated and ordered by trajectory index, so
results do not depend on how work is distributed over threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelSpec, basis_state, state_vector
from .errors import EmptyEnsembleError
from .integrate import IntegrationConfig, solve_raw
from .stats import no_decay_probability

JUMP_CAP = 0.01


@dataclass(frozen=True)
class DetectorModel:
    """Per-step detection imperfections.

    eta0(dt): probability an actual decay event goes unnoticed (constant
    ``miss`` fraction).  eta1(dt): probability of a false alarm in a step of
    size dt (``dark_rate`` * dt, clipped to [0, 1]).
    """

    miss: float = 0.0
    dark_rate: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.miss <= 1.0):
            raise ValueError("miss probability must be in [0, 1]")
        if self.dark_rate < 0.0:
            raise ValueError("dark rate must be >= 0")

    def eta0(self, dt: float) -> float:
        return self.miss

    def eta1(self, dt: float) -> float:
        return min(1.0, self.dark_rate * dt)

    @staticmethod
    def perfect() -> "DetectorModel":
        return DetectorModel(0.0, 0.0)

    @staticmethod
    def with_miss(miss: float) -> "DetectorModel":
        return DetectorModel(miss=miss)

    @staticmethod
    def with_dark_rate(rate_per_us: float) -> "DetectorModel":
        return DetectorModel(dark_rate=rate_per_us)


# a detector that never stops anything: all decays missed, no false alarms
_BLIND = DetectorModel(miss=1.0, dark_rate=0.0)

SURVIVED = "survived"
STOPPED_DETECTED = "stopped_detected_decay"
STOPPED_FALSE_ALARM = "stopped_false_alarm"


@dataclass(frozen=True)
class JumpEvent:
    t: float
    channel: int
    branch: int  # -1 when the trajectory stopped before collapsing
    detected: bool


@dataclass(frozen=True)
class TrajectoryOutcome:
    fate: str
    final_state: np.ndarray
    jump_log: tuple
    grid_states: np.ndarray  # states at the requested grid while alive


@dataclass(frozen=True)
class StepResult:
    status: str  # "continue" | stopped fates
    state: np.ndarray
    events: tuple


@dataclass(frozen=True)
class EnsembleStats:
    n_total: int
    n_accepted: int
    grid: np.ndarray
    mean_populations: np.ndarray
    mean_phases: np.ndarray
    std_err_populations: np.ndarray
    std_err_phases: np.ndarray
    conditioning: str

    @property
    def acceptance_fraction(self) -> float:
        return self.n_accepted / self.n_total


# --------------------------------------------------------------------------
# conditioning modes


@dataclass(frozen=True)
class EndPostselect:
    """Accept a trajectory with probability equal to its final population in
    the given basis-index subspace, projecting the final state onto it."""

    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))


def _resolve_conditioning(conditioning):
    """Returns (label, detector, end_postselect_or_None)."""
    if conditioning == "none" or conditioning is None:
        return "none", _BLIND, None
    if conditioning == "ideal_no_decay":
        return "ideal_no_decay", DetectorModel.perfect(), None
    if isinstance(conditioning, DetectorModel):
        return "detector", conditioning, None
    if isinstance(conditioning, EndPostselect):
        return "end_postselect", _BLIND, conditioning
    raise ValueError(
        "conditioning must be 'none', 'ideal_no_decay', a DetectorModel, "
        f"or an EndPostselect, got {conditioning!r}"
    )


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based per-trajectory stream: independent of execution order."""
    return np.random.Generator(
        np.random.Philox(key=np.array([master_seed, index], dtype=np.uint64))
    )


# --------------------------------------------------------------------------
# elementary operations


def collapse_after_jump(state, channel, branch_pick: int) -> np.ndarray:
    """Project a jumped trajectory onto the chosen branch target: the
    decaying amplitude collapses completely onto that basis state."""
    if channel.branches is None:
        raise ValueError(
            f"decay channel on index {channel.source} has no branch targets; "
            "jump simulation requires branches"
        )
    if not (0 <= branch_pick < len(channel.branches)):
        raise ValueError(f"branch_pick {branch_pick} out of range")
    state = np.asarray(state)
    target, _ = channel.branches[branch_pick]
    return basis_state(state.shape[0], target)


def _jump_weights(model: ModelSpec, state) -> np.ndarray:
    return np.array(
        [ch.rate * abs(state[ch.source]) ** 2 for ch in model.channels], dtype=float
    )


def _pick_from_weights(weights, u: float) -> int:
    total = float(np.sum(weights))
    edge = u * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if edge <= acc:
            return i
    return len(weights) - 1


def _require_branches(model: ModelSpec):
    for ch in model.channels:
        if ch.rate > 0.0 and ch.branches is None:
            raise ValueError(
                f"model {model.name!r}: channel on index {ch.source} has no "
                "branches; jump simulation needs explicit decay destinations"
            )


def _advance(model, state, t0, t1, cfg) -> np.ndarray:
    out, _ = solve_raw(model, state, t0, np.array([t1]), mode=2, aug=0, cfg=cfg)
    return out[0]


def step_trajectory(model: ModelSpec, state, t: float, dt: float,
                    detector: DetectorModel, rng: np.random.Generator,
                    cfg: IntegrationConfig = None, jump_cap: float = JUMP_CAP) -> StepResult:
    """One decision step of size dt from (t, state).

    Subdivides internally so every elementary decision carries a decay
    probability <= jump_cap, drawing fresh (xi, eta) per elementary decision.
    """
    _require_branches(model)
    cfg = cfg or IntegrationConfig()
    state = np.asarray(state, dtype=np.complex128).copy()
    events = []
    now = float(t)
    end = float(t) + float(dt)
    while now < end:
        weights = _jump_weights(model, state)
        rate = float(np.sum(weights))
        sub_dt = end - now
        if rate * sub_dt > jump_cap:
            sub_dt = jump_cap / rate
        p = rate * sub_dt
        xi = rng.random()
        eta = rng.random()
        if p > 0.0 and xi <= p:
            channel_idx = _pick_from_weights(weights, rng.random())
            channel = model.channels[channel_idx]
            if eta > detector.eta0(sub_dt):
                events.append(JumpEvent(now + sub_dt, channel_idx, -1, True))
                return StepResult(STOPPED_DETECTED, state, tuple(events))
            branch_idx = _pick_from_weights(
                np.array([w for _, w in channel.branches]), rng.random()
            )
            state = collapse_after_jump(state, channel, branch_idx)
            events.append(JumpEvent(now + sub_dt, channel_idx, branch_idx, False))
        else:
            if eta < detector.eta1(sub_dt):
                return StepResult(STOPPED_FALSE_ALARM, state, tuple(events))
            state = _advance(model, state, now, now + sub_dt, cfg)
        now += sub_dt
    return StepResult("continue", state, tuple(events))


def phase_of(state, index: int, reference_state=None) -> float:
    """arg(C_index), optionally relative to the same component of a reference
    state, wrapped to (-pi, pi].  Amplitudes below 1e-12 have no meaningful
    phase and raise."""
    state = np.asarray(state)
    amp = state[index]
    if abs(amp) < 1e-12:
        raise ValueError(f"phase undefined: |C_{index}| < 1e-12")
    phi = float(np.angle(amp))
    if reference_state is None:
        return phi
    ref = np.asarray(reference_state)[index]
    if abs(ref) < 1e-12:
        raise ValueError(f"reference phase undefined: |C_{index}| < 1e-12")
    return wrap_angle(phi - float(np.angle(ref)))


def wrap_angle(phi):
    """Wrap to (-pi, pi]."""
    return -((-np.asarray(phi) + np.pi) % (2.0 * np.pi) - np.pi)


# --------------------------------------------------------------------------
# the shared decision machinery


@dataclass(frozen=True)
class _Decision:
    """Precomputed per-ensemble data: decision grid, the shared no-jump path
    on it, per-step jump probabilities and detector curves."""

    model: ModelSpec
    grid: np.ndarray
    times: np.ndarray          # decision times, grid is times[grid_index]
    grid_index: np.ndarray
    cache: np.ndarray          # no-jump conditioned states at decision times
    p_step: np.ndarray         # jump probability per decision step (cache)
    eta0: np.ndarray
    eta1: np.ndarray
    detector: DetectorModel
    cfg: IntegrationConfig

    @property
    def n_steps(self) -> int:
        return self.times.shape[0] - 1


def _decision_times(grid: np.ndarray, substeps: int) -> np.ndarray:
    parts = [np.array([grid[0]])]
    for a, b in zip(grid[:-1], grid[1:]):
        seg = a + (b - a) * np.arange(1, substeps + 1) / substeps
        seg[-1] = b
        parts.append(seg)
    return np.concatenate(parts)


def _build_decision(model, grid, detector, cfg, substeps, jump_cap) -> _Decision:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.shape[0] < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must contain at least 2 strictly increasing times")
    n_int = grid.shape[0] - 1
    if substeps is None:
        substeps = max(1, int(math.ceil(256 / n_int)))
    for _ in range(30):
        times = _decision_times(grid, substeps)
        y0 = model.initial_state
        cache, _ = solve_raw(model, y0, times[0], times, mode=2, aug=0, cfg=cfg)
        dts = np.diff(times)
        rates = np.zeros(times.shape[0])
        for ch in model.channels:
            rates += ch.rate * np.abs(cache[:, ch.source]) ** 2
        # the walk uses the step-start rate (first-order rule); refinement is
        # judged on the conservative endpoint maximum
        p_step = rates[:-1] * dts
        p_bound = np.maximum(rates[:-1], rates[1:]) * dts
        if p_bound.size == 0 or float(np.max(p_bound)) <= 0.5 * jump_cap:
            break
        substeps *= 2
    else:
        raise ValueError("could not refine the decision grid under the jump cap")
    grid_index = np.arange(0, times.shape[0], substeps)
    eta0 = np.array([detector.eta0(dt) for dt in dts])
    eta1 = np.array([detector.eta1(dt) for dt in dts])
    return _Decision(
        model=model, grid=grid, times=times, grid_index=grid_index,
        cache=cache, p_step=p_step, eta0=eta0, eta1=eta1,
        detector=detector, cfg=cfg,
    )


def _walk(decision: _Decision, rng: np.random.Generator):
    """Simulate one trajectory on the decision grid.

    Draw layout: step j consumes the pre-drawn pair (xi_j, eta_j); collapse
    channel/branch picks and everything after a cap subdivision draw fresh
    values from the live stream.  Returns (fate, states_at_decision_times,
    jump_log); states rows past a stop are invalid.
    """
    model = decision.model
    n = decision.n_steps
    block = rng.random(2 * n) if n > 0 else np.empty(0)
    xi = block[0::2]
    eta = block[1::2]

    jump = (xi <= decision.p_step) & (decision.p_step > 0.0)
    false_alarm = (~jump) & (eta < decision.eta1)
    event = jump | false_alarm
    if not np.any(event):
        return SURVIVED, decision.cache, ()

    j0 = int(np.argmax(event))
    if false_alarm[j0]:
        return STOPPED_FALSE_ALARM, decision.cache, ()

    # a decay event in step j0, starting from the shared path
    states = decision.cache.copy()
    events = []
    j = j0
    state = decision.cache[j]
    deviated_at = None
    while j < n:
        t_next = decision.times[j + 1]
        dt = t_next - decision.times[j]
        if deviated_at is None:
            p = decision.p_step[j]
            take_jump = bool(jump[j])
            eta_j = eta[j]
            fa = bool(false_alarm[j])
        else:
            weights = _jump_weights(model, state)
            rate = float(np.sum(weights))
            p = rate * dt
            if p > JUMP_CAP:
                # rare: the post-collapse state decays faster than the shared
                # path; fall back to elementary stepping with fresh draws
                res = step_trajectory(model, state, decision.times[j], dt,
                                      decision.detector, rng, decision.cfg)
                events.extend(res.events)
                if res.status != "continue":
                    return res.status, states, tuple(events)
                state = res.state
                states[j + 1] = state
                j += 1
                # private cache is stale after elementary stepping
                if j < n:
                    fresh, _ = solve_raw(model, state, decision.times[j],
                                         decision.times[j + 1 :], mode=2, aug=0,
                                         cfg=decision.cfg)
                    states[j + 1 :] = fresh
                continue
            take_jump = p > 0.0 and xi[j] <= p
            eta_j = eta[j]
            fa = (not take_jump) and (eta_j < decision.eta1[j])
        if take_jump:
            weights = _jump_weights(model, state)
            channel_idx = _pick_from_weights(weights, rng.random())
            channel = model.channels[channel_idx]
            if eta_j > decision.eta0[j]:
                events.append(JumpEvent(t_next, channel_idx, -1, True))
                return STOPPED_DETECTED, states, tuple(events)
            branch_idx = _pick_from_weights(
                np.array([w for _, w in channel.branches]), rng.random()
            )
            state = collapse_after_jump(state, channel, branch_idx)
            events.append(JumpEvent(t_next, channel_idx, branch_idx, False))
            deviated_at = j
            states[j + 1] = state
            if j + 2 <= n:
                fresh, _ = solve_raw(model, state, t_next,
                                     decision.times[j + 2 :], mode=2, aug=0,
                                     cfg=decision.cfg)
                states[j + 2 :] = fresh
        elif fa:
            return STOPPED_FALSE_ALARM, states, tuple(events)
        else:
            state = states[j + 1]
        j += 1
    return SURVIVED, states, tuple(events)


def run_trajectory(model: ModelSpec, master_seed: int, index: int, conditioning,
                   grid, cfg: IntegrationConfig = None, substeps: int = None,
                   jump_cap: float = JUMP_CAP) -> TrajectoryOutcome:
    """Simulate the single trajectory ``index`` of the seeded ensemble."""
    label, detector, postselect = _resolve_conditioning(conditioning)
    cfg = cfg or IntegrationConfig()
    if any(ch.rate > 0 for ch in model.channels):
        _require_branches(model)
    decision = _build_decision(model, grid, detector, cfg, substeps, jump_cap)
    rng = trajectory_rng(master_seed, index)
    fate, states, events = _walk(decision, rng)
    grid_states = states[decision.grid_index].copy()
    if fate == SURVIVED and postselect is not None:
        final = grid_states[-1]
        weight = float(np.sum(np.abs(final[list(postselect.indices)]) ** 2))
        if rng.random() > weight:
            fate = "rejected_postselect"
        else:
            projected = np.zeros_like(final)
            for i in postselect.indices:
                projected[i] = final[i]
            grid_states[-1] = projected / math.sqrt(weight)
    final_state = grid_states[-1] if fate == SURVIVED else None
    return TrajectoryOutcome(
        fate=fate,
        final_state=final_state,
        jump_log=events,
        grid_states=grid_states if fate == SURVIVED else None,
    )


class _Kahan:
    """Compensated elementwise accumulator (works for complex too)."""

    def __init__(self, shape, dtype):
        self.total = np.zeros(shape, dtype=dtype)
        self.comp = np.zeros(shape, dtype=dtype)

    def add(self, x):
        y = x - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t


def _chunk_accumulate(decision: _Decision, postselect, master_seed, indices):
    """Accepted-trajectory partial sums for one fixed slice of indices."""
    n_grid = decision.grid.shape[0]
    dim = decision.model.dim
    sum_pop = _Kahan((n_grid, dim), np.float64)
    sum_pop2 = _Kahan((n_grid, dim), np.float64)
    sum_phasor = _Kahan((n_grid, dim), np.complex128)
    accepted = 0
    for i in indices:
        rng = trajectory_rng(master_seed, i)
        fate, states, _events = _walk(decision, rng)
        if fate != SURVIVED:
            continue
        grid_states = states[decision.grid_index]
        if postselect is not None:
            final = grid_states[-1]
            weight = float(np.sum(np.abs(final[list(postselect.indices)]) ** 2))
            if rng.random() > weight:
                continue
            grid_states = grid_states.copy()
            projected = np.zeros_like(final)
            for k in postselect.indices:
                projected[k] = final[k]
            grid_states[-1] = projected / math.sqrt(weight)
        pops = np.abs(grid_states) ** 2
        phases = np.angle(grid_states)
        accepted += 1
        sum_pop.add(pops)
        sum_pop2.add(pops * pops)
        sum_phasor.add(np.exp(1j * phases))
    return accepted, sum_pop.total, sum_pop2.total, sum_phasor.total


def run_ensemble(model: ModelSpec, n: int, master_seed: int, conditioning,
                 grid, cfg: IntegrationConfig = None, substeps: int = None,
                 jump_cap: float = JUMP_CAP, threads: int = None,
                 chunk_size: int = 1024) -> EnsembleStats:
    """Seeded ensemble of n trajectories reduced over the accepted set.

    Trajectory i always uses the stream keyed on (master_seed, i) and chunks
    are fixed slices of 'chunk_size' indices reduced in order, so the result
    is independent of thread count.
    """
    if n < 1:
        raise ValueError("ensemble size must be >= 1")
    label, detector, postselect = _resolve_conditioning(conditioning)
    cfg = cfg or IntegrationConfig()
    if any(ch.rate > 0 for ch in model.channels):
        _require_branches(model)
    decision = _build_decision(model, grid, detector, cfg, substeps, jump_cap)

    chunks = [range(lo, min(lo + chunk_size, n)) for lo in range(0, n, chunk_size)]
    if threads is None or threads <= 1 or len(chunks) == 1:
        partials = [
            _chunk_accumulate(decision, postselect, master_seed, c) for c in chunks
        ]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(
                pool.map(lambda c: _chunk_accumulate(decision, postselect, master_seed, c), chunks)
            )

    n_grid = decision.grid.shape[0]
    dim = model.dim
    total_pop = _Kahan((n_grid, dim), np.float64)
    total_pop2 = _Kahan((n_grid, dim), np.float64)
    total_phasor = _Kahan((n_grid, dim), np.complex128)
    n_accepted = 0
    for count, s1, s2, sz in partials:
        n_accepted += count
        total_pop.add(s1)
        total_pop2.add(s2)
        total_phasor.add(sz)

    if n_accepted == 0:
        raise EmptyEnsembleError(
            f"no trajectory accepted under conditioning '{label}' "
            f"(n={n}, model {model.name!r})",
            conditioning=label,
        )

    mean_pop = total_pop.total / n_accepted
    var_pop = np.maximum(total_pop2.total / n_accepted - mean_pop**2, 0.0)
    if n_accepted > 1:
        var_pop *= n_accepted / (n_accepted - 1)
    std_err_pop = np.sqrt(var_pop / n_accepted)

    mean_resultant = total_phasor.total / n_accepted
    mean_phase = np.angle(mean_resultant)
    rbar = np.minimum(np.abs(mean_resultant), 1.0)
    circ_std = np.sqrt(np.maximum(-2.0 * np.log(np.maximum(rbar, 1e-300)), 0.0))
    std_err_phase = circ_std / math.sqrt(n_accepted)

    return EnsembleStats(
        n_total=n,
        n_accepted=n_accepted,
        grid=decision.grid,
        mean_populations=mean_pop,
        mean_phases=mean_phase,
        std_err_populations=std_err_pop,
        std_err_phases=std_err_phase,
        conditioning=label,
    )


def acceptance_vs_no_decay_probability(model: ModelSpec, stats: EnsembleStats,
                                       cfg: IntegrationConfig = None):
    """Convenience cross-check: (acceptance fraction, p0 at the horizon,
    binomial sigma) for an ideal-no-decay ensemble."""
    p0 = no_decay_probability(model, model.initial_state,
                              np.array([stats.grid[0], stats.grid[-1]]), cfg)[-1]
    frac = stats.acceptance_fraction
    sigma = math.sqrt(max(p0 * (1 - p0), 1e-300) / stats.n_total)
    return frac, float(p0), sigma
