"""Config-driven command line front end.

Commands:
    second-lab run <config.yaml> [--out DIR] [--threads N] [--seed U64]
                                 [--paper-scale]
    second-lab presets
    second-lab version

A scenario config is a YAML document selecting a model (preset name or
"custom"), a run kind (trajectory | mcwf | p0 | compare | scan | fidelity),
a time grid, integration tolerances and, for stochastic runs, the ensemble
settings.  Frequencies in configs are plain MHz and times are microseconds;
unit-suffixed key names keep the 2*pi convention unambiguous.  Every run
writes three files into the output directory:

    curves.csv   the data (UTF-8, header row, 17-significant-digit floats)
    meta.txt     the fully resolved configuration (valid YAML; feeding it
                 back to `run` reproduces the same outputs) plus notes
    plot.gp      a gnuplot script consuming curves.csv

Exit codes: 0 success, 2 config schema error, 3 integration failure,
4 empty conditioned ensemble, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import importlib.metadata
import importlib.resources
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import models
from .analysis import compare_evolutions, cz_fidelity, gamma_scan
from .dynamics import DecayChannel, DriveEntry, ModelSpec
from .errors import ConfigError, EmptyEnsembleError, IntegrationError, NumericalDomainError
from .integrate import IntegrationConfig, integrate
from .mcwf import DetectorModel, EndPostselect, run_ensemble
from .models import RydbergCZParams
from .stats import decay_statistics
from .waveform import Waveform, constant, fourier, mhz

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_EMPTY_ENSEMBLE = 4
EXIT_IO = 5

RUN_KINDS = ("trajectory", "mcwf", "p0", "compare", "scan", "fidelity")
FIG_CONFIGS = ("fig2", "fig3", "fig4", "fig5", "supp1", "supp2", "supp3")

FIG_DESCRIPTIONS = {
    "fig2": "raman-pi2 compare incl. Monte-Carlo ensemble (figure 2 study)",
    "fig3": "cz-two-body unitary/conditioned comparison (figure 3 study)",
    "fig4": "cz gate-error scan over decay rates (figure 4 study)",
    "fig5": "readout no-decay probability, weak drives (figure 5 study)",
    "supp1": "raman-phase compare incl. Monte-Carlo ensemble (supplement, fig 1 study)",
    "supp2": "readout no-decay probability, strong drives / saturation (supplement, fig 2 study)",
    "supp3": "cz-two-body no-decay probability (supplement, fig 3 study)",
}

META_NOTES = (
    "no-decay probability convention: dp0/dt = -sum_m gamma_m |C_m|^2 p0"
    " (non-increasing; the exponent is negative)",
    "jump convention: a decay event fires when xi <= p with"
    " p = sum_m gamma_m |C_m|^2 dt",
    "gate fidelity convention: f = max over compensation phases of"
    " (|Tr M|^2 + Tr(M^dag M))/20 with"
    " M = diag(1, a01 e^{i phi1}, a10 e^{i phi2}, -a11 e^{i(phi1+phi2)})",
)


def version_string() -> str:
    try:
        return importlib.metadata.version("second-lab")
    except importlib.metadata.PackageNotFoundError:
        return "0.0.0+unknown"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# config loading


def _as_mapping(node, field):
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(field, "expected a mapping")
    return node


def _take(cfg: dict, field: str, default=None, required=False, kind=None, prefix=""):
    name = f"{prefix}{field}"
    if field not in cfg or cfg[field] is None:
        if required:
            raise ConfigError(name, "is required")
        return default
    value = cfg.pop(field)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(name, f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _number(cfg, field, default=None, required=False, prefix=""):
    v = _take(cfg, field, default=default, required=required, prefix=prefix)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{prefix}{field}", "expected a number")
    return float(v)


def _reject_unknown(cfg: dict, prefix=""):
    if cfg:
        key = sorted(cfg)[0]
        raise ConfigError(f"{prefix}{key}", "unknown key")


def waveform_from_config(node, field) -> Waveform:
    node = dict(_as_mapping(node, field))
    kind = _take(node, "kind", required=True, kind=str, prefix=f"{field}.")
    if kind == "constant":
        value = _number(node, "mhz", required=True, prefix=f"{field}.")
        _reject_unknown(node, prefix=f"{field}.")
        return constant(mhz(value))
    if kind == "fourier":
        coeffs = _take(node, "coeffs", required=True, kind=list, prefix=f"{field}.")
        tau = _number(node, "tau_us", default=1.0, prefix=f"{field}.")
        _reject_unknown(node, prefix=f"{field}.")
        try:
            return fourier(coeffs, tau)
        except ValueError as exc:
            raise ConfigError(field, str(exc))
    raise ConfigError(f"{field}.kind", f"must be 'constant' or 'fourier', got {kind!r}")


def waveform_to_config(w: Waveform) -> dict:
    if w.kind == "constant":
        return {"kind": "constant", "mhz": w.value / (2.0 * math.pi)}
    return {"kind": "fourier", "coeffs": list(w.coeffs), "tau_us": w.tau}


def _initial_state(node, dim, field):
    amps = []
    if not isinstance(node, list) or len(node) != dim:
        raise ConfigError(field, f"expected a list of {dim} amplitudes")
    for k, a in enumerate(node):
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            amps.append(complex(a))
        elif isinstance(a, list) and len(a) == 2:
            amps.append(complex(float(a[0]), float(a[1])))
        else:
            raise ConfigError(f"{field}[{k}]", "expected a number or [re, im]")
    state = np.asarray(amps, dtype=np.complex128)
    norm = np.linalg.norm(state)
    if norm == 0:
        raise ConfigError(field, "state must be nonzero")
    return state / norm


def _initial_to_config(state) -> list:
    return [[float(a.real), float(a.imag)] for a in np.asarray(state)]


# ---------------------------------------------------------------------------
# scenario model resolution (returns model(s) + the resolved model mapping)


def _resolve_two_level(m):
    omega = waveform_from_config(m.pop("omega", {"kind": "constant", "mhz": 1.0}), "model.omega")
    detuning = waveform_from_config(m.pop("detuning", {"kind": "constant", "mhz": 0.0}), "model.detuning")
    gg = _number(m, "gamma_ground_mhz", default=0.0, prefix="model.")
    ge = _number(m, "gamma_excited_mhz", default=1.0, prefix="model.")
    params = models.TwoLevelParams(
        omega=omega, detuning=detuning,
        gamma_ground=mhz(gg), gamma_excited=mhz(ge),
        ground_branches=((1, 1.0),) if gg > 0 else None,
    )
    initial = m.pop("initial", None)
    model = models.two_level_model(params)
    if initial is not None:
        state = _initial_state(initial, 2, "model.initial")
        model = models.two_level_model(params, initial_state=state)
    _reject_unknown(m, prefix="model.")
    resolved = {
        "omega": waveform_to_config(omega),
        "detuning": waveform_to_config(detuning),
        "gamma_ground_mhz": gg,
        "gamma_excited_mhz": ge,
        "initial": _initial_to_config(model.initial_state),
    }
    return model, resolved


def _resolve_raman(m, phase_gate: bool):
    coeffs = _take(m, "coeffs", default=list(models.SINGLE_QUBIT_COEFFS), kind=list, prefix="model.")
    tau = _number(m, "tau_us", default=models.SINGLE_QUBIT_TAU_US, prefix="model.")
    d1 = _number(m, "delta_one_photon_mhz", default=1000.0, prefix="model.")
    d2 = _number(m, "delta_two_photon_mhz", default=0.0, prefix="model.")
    gamma = _number(m, "gamma_mhz", default=1.0, prefix="model.")
    pulse = fourier(coeffs, tau)
    params = models.RamanParams(
        omega0=constant(0.0) if phase_gate else pulse,
        omega1=pulse,
        delta_one_photon=constant(mhz(d1)),
        delta_two_photon=constant(mhz(d2)),
        gamma=mhz(gamma),
    )
    if phase_gate:
        default_initial = np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0)
        name = "raman-phase"
    else:
        default_initial = None
        name = "raman-pi2"
    initial = m.pop("initial", None)
    state = (_initial_state(initial, 3, "model.initial") if initial is not None
             else default_initial)
    model = models.raman_model(params, initial_state=state, name=name)
    _reject_unknown(m, prefix="model.")
    resolved = {
        "coeffs": [float(c) for c in coeffs],
        "tau_us": tau,
        "delta_one_photon_mhz": d1,
        "delta_two_photon_mhz": d2,
        "gamma_mhz": gamma,
        "initial": _initial_to_config(model.initial_state),
    }
    return model, resolved


def _resolve_readout(m):
    omega1 = m.pop("omega1_mhz", 2.0)
    if isinstance(omega1, (int, float)) and not isinstance(omega1, bool):
        omegas = [float(omega1)]
        scalar = True
    elif isinstance(omega1, list) and omega1 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in omega1
    ):
        omegas = [float(v) for v in omega1]
        scalar = False
    else:
        raise ConfigError("model.omega1_mhz", "expected a number or list of numbers")
    delta = _number(m, "delta_mhz", default=0.0, prefix="model.")
    gamma = _number(m, "gamma_mhz", default=1.0, prefix="model.")
    initial = m.pop("initial", None)
    state = _initial_state(initial, 3, "model.initial") if initial is not None else None
    built = [
        models.readout_model(
            constant(mhz(om)), delta=mhz(delta), gamma=mhz(gamma),
            initial_state=state, name=f"readout-omega-{om:g}",
        )
        for om in omegas
    ]
    _reject_unknown(m, prefix="model.")
    resolved = {
        "omega1_mhz": omegas[0] if scalar else omegas,
        "delta_mhz": delta,
        "gamma_mhz": gamma,
        "initial": _initial_to_config(built[0].initial_state),
    }
    return built, resolved


def _resolve_cz(m, scenario):
    coeffs = _take(m, "probe_coeffs", default=list(models.CZ_PROBE_COEFFS), kind=list, prefix="model.")
    tau = _number(m, "tau_us", default=models.CZ_TAU_US, prefix="model.")
    stokes = _number(m, "omega_stokes_mhz", default=350.0, prefix="model.")
    d1 = _number(m, "delta_one_photon_mhz", default=5000.0, prefix="model.")
    d2 = _number(m, "delta_two_photon_mhz", default=-0.53, prefix="model.")
    b = _number(m, "foerster_coupling_mhz", default=100.0, prefix="model.")
    dq = _number(m, "foerster_penalty_mhz", default=0.0, prefix="model.")
    ge = _number(m, "gamma_e_mhz", default=5.0, prefix="model.")
    gr = _number(m, "gamma_r_mhz", default=0.01, prefix="model.")
    gate_time = _number(m, "gate_time_us", default=tau, prefix="model.")
    _reject_unknown(m, prefix="model.")
    params = RydbergCZParams(
        omega_probe=fourier(coeffs, tau),
        omega_stokes=models.constant_mhz(stokes),
        delta_one_photon=mhz(d1),
        delta_two_photon=mhz(d2),
        foerster_coupling=mhz(b),
        foerster_penalty=mhz(dq),
        gamma_intermediate=mhz(ge),
        gamma_rydberg=mhz(gr),
        gate_time=gate_time,
    )
    if scenario == "cz-two-body":
        model = models.cz_two_body_model(params)
    else:
        model = models.cz_single_body_model(params, scenario.split("-")[-1])
    resolved = {
        "probe_coeffs": [float(c) for c in coeffs],
        "tau_us": tau,
        "omega_stokes_mhz": stokes,
        "delta_one_photon_mhz": d1,
        "delta_two_photon_mhz": d2,
        "foerster_coupling_mhz": b,
        "foerster_penalty_mhz": dq,
        "gamma_e_mhz": ge,
        "gamma_r_mhz": gr,
        "gate_time_us": gate_time,
    }
    return model, params, resolved


def _resolve_custom(m):
    labels = _take(m, "labels", required=True, kind=list, prefix="model.")
    entries_node = _take(m, "entries", required=True, kind=list, prefix="model.")
    channels_node = _take(m, "channels", default=[], kind=list, prefix="model.")
    initial = _take(m, "initial", required=True, kind=list, prefix="model.")
    _reject_unknown(m, prefix="model.")
    entries = []
    for k, e in enumerate(entries_node):
        e = dict(_as_mapping(e, f"model.entries[{k}]"))
        row = _take(e, "row", required=True, kind=int, prefix=f"model.entries[{k}].")
        col = _take(e, "col", required=True, kind=int, prefix=f"model.entries[{k}].")
        wf = waveform_from_config(
            _take(e, "waveform", required=True, prefix=f"model.entries[{k}]."),
            f"model.entries[{k}].waveform",
        )
        scale = e.pop("scale", 1.0)
        if isinstance(scale, list) and len(scale) == 2:
            scale = complex(float(scale[0]), float(scale[1]))
        elif isinstance(scale, (int, float)) and not isinstance(scale, bool):
            scale = complex(float(scale))
        else:
            raise ConfigError(f"model.entries[{k}].scale", "expected a number or [re, im]")
        _reject_unknown(e, prefix=f"model.entries[{k}].")
        entries.append(DriveEntry(row, col, wf, scale))
    channels = []
    for k, c in enumerate(channels_node):
        c = dict(_as_mapping(c, f"model.channels[{k}]"))
        source = _take(c, "source", required=True, kind=int, prefix=f"model.channels[{k}].")
        rate = _number(c, "rate_mhz", required=True, prefix=f"model.channels[{k}].")
        branches = _take(c, "branches", default=None, kind=list, prefix=f"model.channels[{k}].")
        if branches is not None:
            branches = tuple((int(t), float(w)) for t, w in branches)
        _reject_unknown(c, prefix=f"model.channels[{k}].")
        channels.append(DecayChannel(source, mhz(rate), branches))
    state = _initial_state(initial, len(labels), "model.initial")
    try:
        model = ModelSpec(
            labels=tuple(str(s) for s in labels),
            entries=tuple(entries),
            channels=tuple(channels),
            initial_state=state,
            name="custom",
        )
    except ValueError as exc:
        raise ConfigError("model", str(exc))
    resolved = {
        "labels": [str(s) for s in labels],
        "entries": [
            {
                "row": e.row, "col": e.col,
                "waveform": waveform_to_config(e.waveform),
                "scale": [e.scale.real, e.scale.imag],
            }
            for e in model.entries
        ],
        "channels": [
            {
                "source": c.source,
                "rate_mhz": c.rate / (2.0 * math.pi),
                "branches": [list(b) for b in c.branches] if c.branches else None,
            }
            for c in model.channels
        ],
        "initial": _initial_to_config(model.initial_state),
    }
    return model, resolved


_DEFAULT_SPANS = {"readout": (0.0, 4.0), "two-level": (0.0, 1.0)}


def resolve_scenario(cfg: dict):
    """Validate a raw config mapping and build everything the runners need.
    Returns (plan dict, resolved-config dict)."""
    cfg = dict(_as_mapping(cfg, "<config>"))
    scenario = _take(cfg, "scenario", required=True, kind=str)
    run = _take(cfg, "run", required=True, kind=str)
    if run not in RUN_KINDS:
        raise ConfigError("run", f"must be one of {RUN_KINDS}, got {run!r}")

    model_node = dict(_as_mapping(cfg.pop("model", {}), "model"))
    cz_params = None
    readout_list = None
    if scenario == "two-level":
        model, resolved_model = _resolve_two_level(model_node)
    elif scenario in ("raman-pi2", "raman-phase"):
        model, resolved_model = _resolve_raman(model_node, scenario == "raman-phase")
    elif scenario == "readout":
        readout_list, resolved_model = _resolve_readout(model_node)
        model = readout_list[0]
    elif scenario in ("cz-single-10", "cz-single-01", "cz-two-body"):
        model, cz_params, resolved_model = _resolve_cz(model_node, scenario)
    elif scenario == "custom":
        model, resolved_model = _resolve_custom(model_node)
    else:
        raise ConfigError(
            "scenario",
            f"unknown scenario {scenario!r}; presets: {sorted(models.PRESET_BUILDERS)} or 'custom'",
        )

    span_node = _take(cfg, "span_us", default=None, kind=list)
    if span_node is not None:
        if len(span_node) != 2:
            raise ConfigError("span_us", "expected [t0, t1]")
        span = (float(span_node[0]), float(span_node[1]))
        if not span[1] > span[0]:
            raise ConfigError("span_us", "t1 must exceed t0")
    elif scenario in _DEFAULT_SPANS:
        span = _DEFAULT_SPANS[scenario]
    else:
        span = models.default_span(model)

    grid_node = dict(_as_mapping(cfg.pop("grid", {}), "grid"))
    times = _take(grid_node, "times_us", default=None, kind=list, prefix="grid.")
    count = _take(grid_node, "count", default=None, kind=int, prefix="grid.")
    _reject_unknown(grid_node, prefix="grid.")
    if times is not None and count is not None:
        raise ConfigError("grid", "give either count or times_us, not both")
    if times is not None:
        grid = np.asarray([float(t) for t in times])
        if grid.ndim != 1 or grid.shape[0] < 2 or np.any(np.diff(grid) <= 0):
            raise ConfigError("grid.times_us", "must be >= 2 strictly increasing times")
        resolved_grid = {"times_us": [float(t) for t in grid]}
    else:
        count = 201 if count is None else count
        if count < 2:
            raise ConfigError("grid.count", "must be >= 2")
        grid = np.linspace(span[0], span[1], count)
        resolved_grid = {"count": int(count)}

    integ = dict(_as_mapping(cfg.pop("integration", {}), "integration"))
    rel_tol = _number(integ, "rel_tol", default=1e-10, prefix="integration.")
    abs_tol = _number(integ, "abs_tol", default=1e-12, prefix="integration.")
    max_step = _number(integ, "max_step_us", default=None, prefix="integration.")
    _reject_unknown(integ, prefix="integration.")
    try:
        icfg = IntegrationConfig(
            rel_tol=rel_tol, abs_tol=abs_tol,
            max_step=math.inf if max_step is None else max_step,
        )
    except ValueError as exc:
        raise ConfigError("integration", str(exc))
    resolved_integration = {"rel_tol": rel_tol, "abs_tol": abs_tol}
    if max_step is not None:
        resolved_integration["max_step_us"] = max_step

    ens = dict(_as_mapping(cfg.pop("ensemble", {}), "ensemble"))
    n = _take(ens, "n", default=20000, kind=int, prefix="ensemble.")
    if n < 1:
        raise ConfigError("ensemble.n", "must be >= 1")
    master_seed = _take(ens, "master_seed", default=20250810, kind=int, prefix="ensemble.")
    if master_seed < 0 or master_seed > 2**64 - 1:
        raise ConfigError("ensemble.master_seed", "must fit in an unsigned 64-bit integer")
    conditioning_name = _take(ens, "conditioning", default="ideal_no_decay", kind=str, prefix="ensemble.")
    detector_node = dict(_as_mapping(ens.pop("detector", {}), "ensemble.detector"))
    miss = _number(detector_node, "miss", default=0.0, prefix="ensemble.detector.")
    dark = _number(detector_node, "dark_rate_per_us", default=0.0, prefix="ensemble.detector.")
    _reject_unknown(detector_node, prefix="ensemble.detector.")
    postselect_labels = _take(ens, "postselect_labels", default=None, kind=list, prefix="ensemble.")
    substeps = _take(ens, "substeps", default=None, kind=int, prefix="ensemble.")
    _reject_unknown(ens, prefix="ensemble.")
    if conditioning_name in ("none", "ideal_no_decay"):
        conditioning = conditioning_name
    elif conditioning_name == "detector":
        try:
            conditioning = DetectorModel(miss=miss, dark_rate=dark)
        except ValueError as exc:
            raise ConfigError("ensemble.detector", str(exc))
    elif conditioning_name == "end_postselect":
        if not postselect_labels:
            raise ConfigError("ensemble.postselect_labels", "required for end_postselect")
        try:
            indices = tuple(model.index_of(str(s)) for s in postselect_labels)
        except ValueError:
            raise ConfigError("ensemble.postselect_labels", f"labels must be among {model.labels}")
        conditioning = EndPostselect(indices)
    else:
        raise ConfigError(
            "ensemble.conditioning",
            "must be none | ideal_no_decay | detector | end_postselect",
        )
    resolved_ensemble = {
        "n": int(n),
        "master_seed": int(master_seed),
        "conditioning": conditioning_name,
    }
    if conditioning_name == "detector":
        resolved_ensemble["detector"] = {"miss": miss, "dark_rate_per_us": dark}
    if conditioning_name == "end_postselect":
        resolved_ensemble["postselect_labels"] = [str(s) for s in postselect_labels]
    if substeps is not None:
        resolved_ensemble["substeps"] = int(substeps)

    include_mcwf = _take(cfg, "include_mcwf", default=False, kind=bool)

    scan_node = dict(_as_mapping(cfg.pop("scan", {}), "scan"))
    gamma_e_mhz = _take(scan_node, "gamma_e_mhz", default=[0.0, 2.5, 5.0, 7.5, 10.0],
                        kind=list, prefix="scan.")
    gamma_r_mhz = _take(scan_node, "gamma_r_mhz", default=[0.0, 0.0125, 0.025, 0.0375, 0.05],
                        kind=list, prefix="scan.")
    _reject_unknown(scan_node, prefix="scan.")
    if run == "scan":
        if cz_params is None:
            raise ConfigError("scenario", "run=scan requires a cz-* scenario")
        for field, values in (("scan.gamma_e_mhz", gamma_e_mhz), ("scan.gamma_r_mhz", gamma_r_mhz)):
            if not values or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                raise ConfigError(field, "expected a non-empty list of numbers")
    if run == "fidelity" and cz_params is None:
        raise ConfigError("scenario", "run=fidelity requires a cz-* scenario")

    out_dir = _take(cfg, "out_dir", default="out", kind=str)
    threads = _take(cfg, "threads", default=None, kind=int)
    _reject_unknown(cfg)

    resolved = {
        "scenario": scenario,
        "run": run,
        "span_us": [span[0], span[1]],
        "grid": resolved_grid,
        "integration": resolved_integration,
        "model": resolved_model,
        "out_dir": out_dir,
    }
    if run in ("mcwf",) or (run == "compare" and include_mcwf):
        resolved["ensemble"] = resolved_ensemble
    if run == "compare":
        resolved["include_mcwf"] = include_mcwf
    if run == "scan":
        resolved["scan"] = {
            "gamma_e_mhz": [float(v) for v in gamma_e_mhz],
            "gamma_r_mhz": [float(v) for v in gamma_r_mhz],
        }
    if threads is not None:
        resolved["threads"] = int(threads)

    plan = {
        "scenario": scenario,
        "run": run,
        "model": model,
        "readout_models": readout_list,
        "cz_params": cz_params,
        "span": span,
        "grid": grid,
        "icfg": icfg,
        "n": n,
        "master_seed": master_seed,
        "conditioning": conditioning,
        "substeps": substeps,
        "include_mcwf": include_mcwf,
        "gamma_e_mhz": gamma_e_mhz,
        "gamma_r_mhz": gamma_r_mhz,
        "out_dir": out_dir,
        "threads": threads,
    }
    return plan, resolved


# ---------------------------------------------------------------------------
# output writers


def write_csv(path: Path, columns):
    names = [name for name, _ in columns]
    arrays = [np.asarray(values, dtype=float) for _, values in columns]
    length = arrays[0].shape[0]
    for (name, _), arr in zip(columns, arrays):
        if arr.shape[0] != length:
            raise ValueError(f"column {name} has mismatched length")
    lines = [",".join(names)]
    for i in range(length):
        lines.append(",".join(fmt(arr[i]) for arr in arrays))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_meta(path: Path, resolved: dict, extra_notes=()):
    header = [f"# second-lab v{version_string()}"]
    for note in META_NOTES + tuple(extra_notes):
        header.append(f"# note: {note}")
    body = yaml.safe_dump(resolved, sort_keys=True, allow_unicode=True)
    path.write_text("\n".join(header) + "\n" + body, encoding="utf-8")


def write_plot(path: Path, n_columns: int, run: str, title: str):
    lines = [
        "# gnuplot script generated by second-lab",
        'set datafile separator ","',
        "set key autotitle columnhead outside",
        f'set title "{title}"',
    ]
    if run == "scan":
        lines += [
            'set xlabel "gamma_e (MHz)"',
            'set ylabel "gamma_r (MHz)"',
            'set zlabel "error"',
            'splot "curves.csv" using 1:2:3 with points pt 7',
        ]
    else:
        lines += [
            'set xlabel "t (us)"',
            f'plot for [i=2:{n_columns}] "curves.csv" using 1:i with lines',
        ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sanitize(label: str) -> str:
    out = []
    for ch in label:
        if ch.isalnum():
            out.append(ch)
        elif ch in "+-._":
            out.append(ch)
        else:
            out.append("_")
    return "".join(out) or "state"


# ---------------------------------------------------------------------------
# runners: each returns the CSV columns and extra meta notes


def _per_state_columns(tag, labels, pops, phases):
    cols = []
    for k, lab in enumerate(labels):
        cols.append((f"pop_{tag}_{_sanitize(lab)}", pops[:, k]))
    for k, lab in enumerate(labels):
        cols.append((f"phase_{tag}_{_sanitize(lab)}", phases[:, k]))
    return cols


def run_trajectory_kind(plan):
    model = plan["model"]
    grid = plan["grid"]
    span = plan["span"]
    icfg = plan["icfg"]
    run_cfg = IntegrationConfig(rel_tol=icfg.rel_tol, abs_tol=icfg.abs_tol,
                                max_step=icfg.max_step, sample_grid=tuple(grid))
    tr_s = integrate("second", model, model.initial_state, span, run_cfg)
    tr_u = integrate("unitary", model, model.initial_state, span, run_cfg)
    columns = [("t_us", grid)]
    columns += _per_state_columns("S", model.labels, tr_s.populations(), tr_s.phases())
    columns += _per_state_columns("U", model.labels, tr_u.populations(), tr_u.phases())
    if model.channels:
        stats = decay_statistics(model, model.initial_state, grid, icfg)
        columns.append(("p0", stats.p0))
    return columns, ()


def run_compare_kind(plan):
    model = plan["model"]
    grid = plan["grid"]
    icfg = plan["icfg"]
    ensemble = None
    notes = []
    if plan["include_mcwf"]:
        ensemble = run_ensemble(
            model, plan["n"], plan["master_seed"], plan["conditioning"], grid,
            cfg=icfg, substeps=plan["substeps"], threads=plan["threads"],
        )
        notes.append(
            f"ensemble: n={ensemble.n_total} accepted={ensemble.n_accepted} "
            f"({ensemble.acceptance_fraction:.6f})"
        )
    curves = compare_evolutions(model, model.initial_state, grid, icfg, ensemble=ensemble)
    columns = [("t_us", grid)]
    columns += _per_state_columns("U", model.labels, curves.pop_unitary, curves.phase_unitary)
    columns += _per_state_columns("S", model.labels, curves.pop_second, curves.phase_second)
    for k, lab in enumerate(model.labels):
        columns.append((f"dP_{_sanitize(lab)}", curves.dP[:, k]))
    for k, lab in enumerate(model.labels):
        columns.append((f"dPhi_{_sanitize(lab)}", curves.dPhi[:, k]))
    if ensemble is not None:
        columns += _per_state_columns("M", model.labels, ensemble.mean_populations,
                                      ensemble.mean_phases)
        for k, lab in enumerate(model.labels):
            columns.append((f"dP_M_{_sanitize(lab)}", curves.dP_mcwf[:, k]))
        for k, lab in enumerate(model.labels):
            columns.append((f"dPhi_M_{_sanitize(lab)}", curves.dPhi_mcwf[:, k]))
        for k, lab in enumerate(model.labels):
            columns.append((f"stderr_pop_M_{_sanitize(lab)}", ensemble.std_err_populations[:, k]))
        for k, lab in enumerate(model.labels):
            columns.append((f"stderr_phase_M_{_sanitize(lab)}", ensemble.std_err_phases[:, k]))
    if model.channels:
        stats = decay_statistics(model, model.initial_state, grid, icfg)
        columns.append(("p0", stats.p0))
    return columns, tuple(notes)


def run_mcwf_kind(plan):
    model = plan["model"]
    grid = plan["grid"]
    icfg = plan["icfg"]
    run_cfg = IntegrationConfig(rel_tol=icfg.rel_tol, abs_tol=icfg.abs_tol,
                                max_step=icfg.max_step, sample_grid=tuple(grid))
    ensemble = run_ensemble(
        model, plan["n"], plan["master_seed"], plan["conditioning"], grid,
        cfg=icfg, substeps=plan["substeps"], threads=plan["threads"],
    )
    tr_s = integrate("second", model, model.initial_state, plan["span"], run_cfg)
    columns = [("t_us", grid)]
    columns += _per_state_columns("M", model.labels, ensemble.mean_populations,
                                  ensemble.mean_phases)
    columns += _per_state_columns("S", model.labels, tr_s.populations(), tr_s.phases())
    for k, lab in enumerate(model.labels):
        columns.append((f"stderr_pop_M_{_sanitize(lab)}", ensemble.std_err_populations[:, k]))
    for k, lab in enumerate(model.labels):
        columns.append((f"stderr_phase_M_{_sanitize(lab)}", ensemble.std_err_phases[:, k]))
    if model.channels:
        stats = decay_statistics(model, model.initial_state, grid, icfg)
        columns.append(("p0", stats.p0))
    notes = (
        f"ensemble: n={ensemble.n_total} accepted={ensemble.n_accepted} "
        f"({ensemble.acceptance_fraction:.6f})",
    )
    return columns, notes


def run_p0_kind(plan):
    grid = plan["grid"]
    icfg = plan["icfg"]
    columns = [("t_us", grid)]
    if plan["readout_models"] is not None and len(plan["readout_models"]) > 1:
        for m in plan["readout_models"]:
            stats = decay_statistics(m, m.initial_state, grid, icfg)
            tag = m.name.split("readout-omega-")[-1]
            columns.append((f"p0_omega_{_sanitize(tag)}mhz", stats.p0))
        return columns, ()
    model = plan["model"]
    stats = decay_statistics(model, model.initial_state, grid, icfg)
    sec_pops = np.abs(stats.states) ** 2
    sec_phases = np.angle(stats.states)
    columns += _per_state_columns("S", model.labels, sec_pops, sec_phases)
    columns.append(("p0", stats.p0))
    for k in range(stats.n_channels):
        src = model.channels[k].source
        columns.append(
            (f"first_event_prob_ch{k}_{_sanitize(model.labels[src])}",
             stats.channel_event_prob[:, k])
        )
    return columns, ()


def run_scan_kind(plan):
    icfg = plan["icfg"]
    ge = [mhz(v) for v in plan["gamma_e_mhz"]]
    gr = [mhz(v) for v in plan["gamma_r_mhz"]]
    grid = gamma_scan(plan["cz_params"], ge, gr, cfg=icfg, threads=plan["threads"])
    ge_col, gr_col, err_col, fid_col = [], [], [], []
    for i, ge_v in enumerate(plan["gamma_e_mhz"]):
        for j, gr_v in enumerate(plan["gamma_r_mhz"]):
            ge_col.append(ge_v)
            gr_col.append(gr_v)
            err_col.append(grid.error[i, j])
            fid_col.append(grid.fidelity[i, j])
    columns = [
        ("gamma_e_mhz", np.array(ge_col)),
        ("gamma_r_mhz", np.array(gr_col)),
        ("error", np.array(err_col)),
        ("fidelity", np.array(fid_col)),
    ]
    notes = (f"baseline error(0,0) cell: {fmt(grid.error[0, 0])}"
             if 0.0 in plan["gamma_e_mhz"] and 0.0 in plan["gamma_r_mhz"] else "scan")
    return columns, (notes,)


def run_fidelity_kind(plan):
    icfg = plan["icfg"]
    params = plan["cz_params"]
    single = models.cz_single_body_model(params, "10")
    pair = models.cz_two_body_model(params)
    a_single = integrate("second", single, single.initial_state,
                         (0.0, params.gate_time), icfg).final_state[0]
    a_pair = integrate("second", pair, pair.initial_state,
                       (0.0, params.gate_time), icfg).final_state[0]
    f = cz_fidelity(a_single, a_single, a_pair)
    columns = [
        ("a01_re", [a_single.real]), ("a01_im", [a_single.imag]),
        ("a10_re", [a_single.real]), ("a10_im", [a_single.imag]),
        ("a11_re", [a_pair.real]), ("a11_im", [a_pair.imag]),
        ("fidelity", [f]), ("error", [1.0 - f]),
    ]
    return columns, ()


RUNNERS = {
    "trajectory": run_trajectory_kind,
    "compare": run_compare_kind,
    "mcwf": run_mcwf_kind,
    "p0": run_p0_kind,
    "scan": run_scan_kind,
    "fidelity": run_fidelity_kind,
}


# ---------------------------------------------------------------------------
# commands


def packaged_config_path(name: str):
    return importlib.resources.files("second_lab").joinpath("figs", f"{name}.yaml")


def cmd_run(args) -> int:
    config_path = args.config
    try:
        if Path(config_path).exists():
            text = Path(config_path).read_text(encoding="utf-8")
        elif config_path in FIG_CONFIGS:
            text = packaged_config_path(config_path).read_text(encoding="utf-8")
        else:
            print(f"error: config file not found: {config_path}", file=sys.stderr)
            return EXIT_IO
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        print(f"error: config is not valid YAML: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if raw is None or not isinstance(raw, dict):
        print("error: config field '<config>': expected a mapping", file=sys.stderr)
        return EXIT_CONFIG

    if args.seed is not None:
        raw.setdefault("ensemble", {})
        raw["ensemble"]["master_seed"] = args.seed
    if args.paper_scale:
        raw.setdefault("ensemble", {})
        raw["ensemble"]["n"] = 250000
    if args.out is not None:
        raw["out_dir"] = args.out
    if args.threads is not None:
        raw["threads"] = args.threads

    try:
        plan, resolved = resolve_scenario(raw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        columns, notes = RUNNERS[plan["run"]](plan)
    except EmptyEnsembleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY_ENSEMBLE
    except (IntegrationError, NumericalDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION

    out_dir = Path(plan["out_dir"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(out_dir / "curves.csv", columns)
        write_meta(out_dir / "meta.txt", resolved, extra_notes=notes)
        write_plot(out_dir / "plot.gp", len(columns), plan["run"],
                   f"{plan['scenario']} ({plan['run']})")
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"wrote {out_dir / 'curves.csv'} ({len(columns)} columns)")
    return EXIT_OK


def cmd_presets(_args) -> int:
    print("model presets:")
    for name in sorted(models.PRESET_DESCRIPTIONS):
        print(f"  {name:14s} {models.PRESET_DESCRIPTIONS[name]}")
    print()
    print("shipped figure configs (run with: second-lab run <name>):")
    for name in FIG_CONFIGS:
        print(f"  {name:14s} {FIG_DESCRIPTIONS[name]}")
    return EXIT_OK


def cmd_version(_args) -> int:
    print(f"second-lab {version_string()}")
    return EXIT_OK


def _default_threads():
    env = os.environ.get("SECOND_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return None
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="second-lab",
        description="Qubit dynamics conditioned on no decay: scenario runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config and write CSV outputs")
    p_run.add_argument("config", help="path to a YAML config, or a shipped name (fig2..supp3)")
    p_run.add_argument("--out", help="output directory (overrides out_dir)")
    p_run.add_argument("--threads", type=int, default=_default_threads(),
                       help="worker threads (default: SECOND_LAB_THREADS or 1)")
    p_run.add_argument("--seed", type=int, help="override the ensemble master seed")
    p_run.add_argument("--paper-scale", action="store_true",
                       help="full-size ensembles (n=250000) instead of desk scale")
    p_run.set_defaults(func=cmd_run)

    p_presets = sub.add_parser("presets", help="list model presets and shipped configs")
    p_presets.set_defaults(func=cmd_presets)

    p_version = sub.add_parser("version", help="print the tool version")
    p_version.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
