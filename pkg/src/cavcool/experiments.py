"""Config-driven experiment runner.

Each experiment id regenerates one dataset (a figure's curves or the transition
tables) from a JSON config; outputs are CSV/JSON files plus a manifest with the
resolved config, package version, wall-clock duration, and per-file checksums.
Reruns with the same config and seed are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cavity import (
    CavityParams,
    LaserConfig,
    analytic_predictions,
    cavity_pulse,
    ensemble_average,
    ensemble_window_stats,
    master_equation_evolve,
    master_window_stats,
)
from .dressed import resonant_assignment, resonant_table, transition_table
from .errors import ConfigError
from .hilbert import HilbertSpace
from .toy import (
    PulseSchedule,
    ToyParams,
    cooling_rate,
    initial_state,
    integrate,
    max_fidelity,
    stationary_fidelity,
)

ENV_OUT_DIR = "CAVCOOL_OUT"

# experiment id -> (parameter defaults, names of grid axes usable by `sweep`)
EXPERIMENTS: dict[str, tuple[dict, tuple[str, ...]]] = {
    "toy-timeseries": (
        {"omega": 0.05, "gamma": 0.2, "delta": 1.0, "t_end": 1000.0, "dt": 0.0,
         "initial_level": 1},
        (),
    ),
    "toy-pulsed": (
        {"omega0": 0.05, "gamma": 0.2, "delta": 1.0, "t_end": 600.0, "dt": 0.0,
         "initial_level": 1},
        (),
    ),
    "toy-fidelity-contour": (
        {"omega_axis": [0.01, 0.5, 50], "gamma_axis": [0.01, 0.5, 50], "delta": 1.0},
        ("omega_axis", "gamma_axis"),
    ),
    "toy-coolrate-contour": (
        {"omega_axis": [0.01, 0.5, 50], "gamma_axis": [0.01, 0.5, 50], "delta": 1.0},
        ("omega_axis", "gamma_axis"),
    ),
    "dressed-tables": (
        {"g": 1.0, "omega1": 50.0, "omega2": 1000.0,
         "omega01": 0.03, "omega02": 0.03, "omega1l": 0.03},
        (),
    ),
    "cavity-kappa-sweep": (
        {"c": 25.0, "omega": 0.03, "x_axis": [-0.02, 0.30, 9], "t_end": 4000.0,
         "dt": 0.005, "sample_dt": 1.0, "n_max": 3, "method": "master", "window": 0.25},
        ("x_axis",),
    ),
    "cavity-fidelity-vs-C": (
        {"c_values": [20.0, 25.0, 50.0, 100.0], "omega": 0.03, "kappa_over_gamma": 2.0,
         "t_end": 4000.0, "dt": 0.005, "sample_dt": 1.0, "n_max": 3, "method": "jump",
         "window": 0.25},
        ("c_values",),
    ),
    "cavity-pulsed": (
        {"c": 25.0, "omega0": 0.015, "kappa_over_gamma": 2.0, "t_end": 4000.0,
         "dt": 0.005, "sample_dt": 1.0, "n_max": 3, "method": "master"},
        (),
    ),
    "oracle-check": (
        {"c": 25.0, "omega": 0.03, "kappa_over_gamma": 2.0, "t_end": 2000.0,
         "dt": 0.005, "sample_dt": 1.0, "n_max": 1},
        (),
    ),
}

_TOP_LEVEL_KEYS = {"experiment", "params", "seed", "trajectories", "threads", "out"}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    trajectories: int = 500
    threads: int = 1
    out: str | None = None


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document, rejecting unknown keys by name."""
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a JSON object, got {type(doc).__name__}")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    if "experiment" not in doc:
        raise ConfigError("config is missing the 'experiment' key")
    experiment = doc["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment id {experiment!r}; known: {', '.join(sorted(EXPERIMENTS))}"
        )
    defaults, _ = EXPERIMENTS[experiment]
    overrides = doc.get("params") or {}
    if not isinstance(overrides, dict):
        raise ConfigError("'params' must be an object")
    bad = set(overrides) - set(defaults)
    if bad:
        raise ConfigError(
            f"unknown parameter key(s) for {experiment}: {', '.join(sorted(bad))}"
        )
    params = {**defaults, **overrides}
    seed = int(doc.get("seed", 0))
    trajectories = int(doc.get("trajectories", 500))
    threads = int(doc.get("threads", 1))
    if trajectories < 1:
        raise ConfigError("trajectories must be >= 1")
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return ExperimentConfig(
        experiment=experiment,
        params=params,
        seed=seed,
        trajectories=trajectories,
        threads=threads,
        out=doc.get("out"),
    )


def resolved_config(cfg: ExperimentConfig) -> dict:
    """Full config echo; parse_config(resolved_config(cfg)) == cfg."""
    return {
        "experiment": cfg.experiment,
        "params": dict(cfg.params),
        "seed": cfg.seed,
        "trajectories": cfg.trajectories,
        "threads": cfg.threads,
        "out": cfg.out,
    }


def _axis_values(axis_spec, name: str, minimum_points: int = 1) -> np.ndarray:
    if not (isinstance(axis_spec, (list, tuple)) and len(axis_spec) == 3):
        raise ConfigError(f"{name} must be [min, max, points]")
    lo, hi, n = float(axis_spec[0]), float(axis_spec[1]), int(axis_spec[2])
    if n < minimum_points:
        raise ConfigError(f"{name} needs at least {minimum_points} points, got {n}")
    return np.linspace(lo, hi, n)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_atomic(path: Path, data: bytes) -> str:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return hashlib.sha256(data).hexdigest()


def _csv_bytes(columns: list[tuple[str, np.ndarray]]) -> bytes:
    names = ", ".join(name for name, _ in columns)
    lines = [f"# columns: {names}"]
    length = len(columns[0][1])
    for _, col in columns:
        assert len(col) == length
    for i in range(length):
        lines.append(",".join(_fmt(col[i]) for _, col in columns))
    return ("\n".join(lines) + "\n").encode()


def _child_seed(seed: int, index: int) -> int:
    """Per-grid-point master seed, stable under reordering."""
    return int(np.random.SeedSequence([seed, 0x5EED, index]).generate_state(1, np.uint64)[0])


def _cavity_pair(c: float, x: float) -> tuple[float, float]:
    """(kappa, gamma) with kappa*gamma = 1/c and kappa - gamma = x (units of g)."""
    kappa = 0.5 * (x + np.sqrt(x * x + 4.0 / c))
    return float(kappa), float(kappa - x)


def _toy_dt(params: dict):
    """dt override from config; 0 means the integrator default."""
    dt = params["dt"]
    return None if not dt else float(dt)


# ---------------------------------------------------------------------------
# experiment runners: each returns (outputs, extras)
#   outputs: {filename: ("csv", columns) | ("json", obj) | ("text", str)}


def _run_toy_timeseries(cfg: ExperimentConfig):
    p = cfg.params
    toy = ToyParams(omega=float(p["omega"]), delta=float(p["delta"]), gamma=float(p["gamma"]))
    series = integrate(
        toy, initial_state(int(p["initial_level"])), t_end=float(p["t_end"]),
        dt=_toy_dt(p),
    )
    cols = [("t", series.times)]
    cols += [(name, series.states[:, i]) for i, name in enumerate(("p0", "p1", "p2", "p3"))]
    cols.append(("one_minus_f", 1.0 - series.fidelity))
    extras = {"stationary_fidelity": stationary_fidelity(toy)}
    return {f"{cfg.experiment}.csv": ("csv", cols)}, extras


def _run_toy_pulsed(cfg: ExperimentConfig):
    p = cfg.params
    omega0, gamma, delta = float(p["omega0"]), float(p["gamma"]), float(p["delta"])
    toy = ToyParams(omega=omega0, delta=delta, gamma=gamma)
    sched = PulseSchedule.toy(omega0, gamma)
    level = int(p["initial_level"])
    t_end = float(p["t_end"])
    pulsed = integrate(toy, initial_state(level), t_end=t_end, dt=_toy_dt(p),
                       omega_t=sched.omega_at)
    const = integrate(toy, initial_state(level), t_end=t_end, dt=_toy_dt(p))
    # the constant run may use a coarser grid; interpolate onto the pulsed one
    const_gap = np.interp(pulsed.times, const.times, 1.0 - const.fidelity)
    bound = 1.0 - max_fidelity(delta, gamma)
    cols = [
        ("t", pulsed.times),
        ("omega", sched.omega_at(pulsed.times)),
        ("one_minus_f_pulsed", 1.0 - pulsed.fidelity),
        ("one_minus_f_constant", const_gap),
        ("one_minus_f_floor", np.full_like(pulsed.times, bound)),
    ]
    extras = {
        "gamma_c0": sched.gamma_c0,
        "constant_plateau": 1.0 - stationary_fidelity(toy),
        "zero_drive_floor": bound,
    }
    return {f"{cfg.experiment}.csv": ("csv", cols)}, extras


def _run_toy_contour(cfg: ExperimentConfig):
    p = cfg.params
    omegas = _axis_values(p["omega_axis"], "omega_axis")
    gammas = _axis_values(p["gamma_axis"], "gamma_axis")
    delta = float(p["delta"])
    rows_om, rows_ga, rows_val = [], [], []
    value = stationary_fidelity if cfg.experiment == "toy-fidelity-contour" else cooling_rate
    for om in omegas:
        for ga in gammas:
            rows_om.append(om)
            rows_ga.append(ga)
            rows_val.append(value(ToyParams(omega=float(om), delta=delta, gamma=float(ga))))
    name = "fidelity" if cfg.experiment == "toy-fidelity-contour" else "cooling_rate"
    cols = [("omega", np.array(rows_om)), ("gamma", np.array(rows_ga)),
            (name, np.array(rows_val))]
    return {f"{cfg.experiment}.csv": ("csv", cols)}, {}


def _table_entry_dict(row) -> dict:
    return {
        "ground": row.ground,
        "excited": row.excited,
        "laser": row.laser,
        "rabi_expr": row.rabi_expr,
        "rabi": row.rabi,
        "detuning_expr": row.detuning_expr,
        "detuning": row.detuning,
    }


def _format_table(rows, title: str) -> str:
    head = f"{'ground':>8} {'excited':>12} {'laser':>5} {'rabi':>18} {'detuning':>14}  expression"
    lines = [title, "-" * len(head), head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r.ground:>8} {r.excited:>12} {r.laser:>5} "
            f"{r.rabi_expr + f' = {r.rabi:.6g}':>18} {r.detuning:>14.10g}  {r.detuning_expr}"
        )
    return "\n".join(lines)


def dressed_tables_payload(params: dict) -> dict:
    """JSON document with the generic and resonant transition tables."""
    g = float(params["g"])
    omega1, omega2 = float(params["omega1"]), float(params["omega2"])
    amps = (float(params["omega01"]), float(params["omega02"]), float(params["omega1l"]))
    freqs = resonant_assignment(g, omega1, omega2)
    generic = transition_table(freqs, amps, g, omega1, omega2)
    resonant = resonant_table(amps, g, omega1, omega2)
    return {
        "g": g,
        "omega1": omega1,
        "omega2": omega2,
        "amplitudes": {"omega01": amps[0], "omega02": amps[1], "omega1l": amps[2]},
        "laser_frequencies": {"wL01": freqs[0], "wL02": freqs[1], "wL1": freqs[2]},
        "driven_transitions": [_table_entry_dict(r) for r in generic],
        "resonant_detunings": [_table_entry_dict(r) for r in resonant],
        "delta_min": (np.sqrt(2.0) - 1.0) * g,
    }


def _run_dressed_tables(cfg: ExperimentConfig):
    payload = dressed_tables_payload(cfg.params)
    amps = tuple(payload["amplitudes"].values())
    rows = resonant_table(amps, payload["g"], payload["omega1"], payload["omega2"])
    text = _format_table(rows, "Laser-driven transitions under the resonant assignment (units of g)")
    return {
        f"{cfg.experiment}.json": ("json", payload),
        f"{cfg.experiment}.txt": ("text", text + "\n"),
    }, {"delta_min": payload["delta_min"]}


def _stationary_point(params: CavityParams, cfg: ExperimentConfig, point_seed: int):
    """Stationary-window fidelity for one cavity parameter set."""
    p = cfg.params
    method = str(p["method"])
    t_end, dt, sample_dt = float(p["t_end"]), float(p["dt"]), float(p["sample_dt"])
    window = float(p["window"])
    space = HilbertSpace(params.n_max)
    laser = LaserConfig.resonant(params.g)
    if method == "jump":
        ens = ensemble_average(
            space.basis_state(0, 0, 0), params, laser, t_end=t_end, dt=dt,
            sample_dt=sample_dt, n_traj=cfg.trajectories, master_seed=point_seed,
        )
        return ensemble_window_stats(ens, window)
    if method == "master":
        rho0 = np.zeros((space.dim, space.dim), dtype=complex)
        rho0[0, 0] = 1.0
        res = master_equation_evolve(rho0, params, laser, t_end=t_end, dt=dt,
                                     sample_dt=sample_dt)
        mean, gap = master_window_stats(res, window)
        return mean, 0.0, gap
    raise ConfigError(f"unknown method {method!r}; use 'jump' or 'master'")


def _run_points(points, cfg: ExperimentConfig):
    """Evaluate independent grid points, optionally on a thread pool."""
    results = [None] * len(points)
    if cfg.threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = {
                pool.submit(_stationary_point, params, cfg, seed): i
                for i, (params, seed) in enumerate(points)
            }
            for fut, i in futures.items():
                results[i] = fut.result()
    else:
        for i, (params, seed) in enumerate(points):
            results[i] = _stationary_point(params, cfg, seed)
    return results


def _run_kappa_sweep(cfg: ExperimentConfig):
    p = cfg.params
    xs = _axis_values(p["x_axis"], "x_axis")
    c, omega, n_max = float(p["c"]), float(p["omega"]), int(p["n_max"])
    points = []
    for i, x in enumerate(xs):
        kappa, gamma = _cavity_pair(c, float(x))
        params = CavityParams(
            gamma0=gamma / 2, gamma1=gamma / 2, kappa=kappa,
            omega01=omega, omega02=omega, omega1l=omega, n_max=n_max,
        )
        points.append((params, _child_seed(cfg.seed, i)))
    stats = _run_points(points, cfg)
    cols = [
        ("kappa_minus_gamma", xs),
        ("kappa", np.array([pt[0].kappa for pt in points])),
        ("gamma", np.array([pt[0].gamma for pt in points])),
        ("fidelity", np.array([s[0] for s in stats])),
        ("stderr", np.array([s[1] for s in stats])),
        ("halves_gap", np.array([s[2] for s in stats])),
    ]
    best = int(np.argmax(cols[3][1]))
    return {f"{cfg.experiment}.csv": ("csv", cols)}, {
        "argmax_kappa_minus_gamma": float(xs[best]),
        "method": p["method"],
    }


def _run_fidelity_vs_c(cfg: ExperimentConfig):
    p = cfg.params
    cs = p["c_values"]
    if not (isinstance(cs, (list, tuple)) and len(cs) >= 1):
        raise ConfigError("c_values must be a non-empty list")
    omega, ratio, n_max = float(p["omega"]), float(p["kappa_over_gamma"]), int(p["n_max"])
    points = []
    for i, c in enumerate(cs):
        params = CavityParams.with_cooperativity(float(c), omega=omega,
                                                 kappa_over_gamma=ratio, n_max=n_max)
        points.append((params, _child_seed(cfg.seed, i)))
    stats = _run_points(points, cfg)
    analytic = np.array([analytic_predictions(pt[0])[1] for pt in points])
    cols = [
        ("c", np.array([float(c) for c in cs])),
        ("gamma", np.array([pt[0].gamma for pt in points])),
        ("kappa", np.array([pt[0].kappa for pt in points])),
        ("fidelity", np.array([s[0] for s in stats])),
        ("stderr", np.array([s[1] for s in stats])),
        ("halves_gap", np.array([s[2] for s in stats])),
        ("fidelity_analytic", analytic),
    ]
    return {f"{cfg.experiment}.csv": ("csv", cols)}, {"method": p["method"]}


def _run_cavity_pulsed(cfg: ExperimentConfig):
    p = cfg.params
    c, ratio = float(p["c"]), float(p["kappa_over_gamma"])
    omega0, n_max = float(p["omega0"]), int(p["n_max"])
    t_end, dt, sample_dt = float(p["t_end"]), float(p["dt"]), float(p["sample_dt"])
    params = CavityParams.with_cooperativity(c, omega=omega0, kappa_over_gamma=ratio, n_max=n_max)
    sched = cavity_pulse(params, omega0)
    laser = LaserConfig.resonant(params.g)
    space = HilbertSpace(n_max)
    method = str(p["method"])
    if method == "jump":
        res = ensemble_average(
            space.basis_state(0, 0, 0), params, laser, t_end=t_end, dt=dt,
            sample_dt=sample_dt, n_traj=cfg.trajectories, master_seed=cfg.seed,
            schedule=sched,
        )
        fid, stderr = res.fidelity, res.stderr
    elif method == "master":
        rho0 = np.zeros((space.dim, space.dim), dtype=complex)
        rho0[0, 0] = 1.0
        out = master_equation_evolve(rho0, params, laser, t_end=t_end, dt=dt,
                                     sample_dt=sample_dt, schedule=sched)
        fid, stderr = out.fidelity, np.zeros_like(out.fidelity)
        res = out
    else:
        raise ConfigError(f"unknown method {method!r}; use 'jump' or 'master'")
    cols = [
        ("t", res.times),
        ("omega", sched.omega_at(res.times)),
        ("one_minus_f", 1.0 - fid),
        ("stderr", stderr),
    ]
    return {f"{cfg.experiment}.csv": ("csv", cols)}, {
        "gamma_c0": sched.gamma_c0, "method": method,
    }


def _run_oracle_check(cfg: ExperimentConfig):
    p = cfg.params
    params = CavityParams.with_cooperativity(
        float(p["c"]), omega=float(p["omega"]),
        kappa_over_gamma=float(p["kappa_over_gamma"]), n_max=int(p["n_max"]),
    )
    laser = LaserConfig.resonant(params.g)
    space = HilbertSpace(params.n_max)
    t_end, dt, sample_dt = float(p["t_end"]), float(p["dt"]), float(p["sample_dt"])
    rho0 = np.zeros((space.dim, space.dim), dtype=complex)
    rho0[0, 0] = 1.0
    oracle = master_equation_evolve(rho0, params, laser, t_end=t_end, dt=dt,
                                    sample_dt=sample_dt)
    ens = ensemble_average(
        space.basis_state(0, 0, 0), params, laser, t_end=t_end, dt=dt,
        sample_dt=sample_dt, n_traj=cfg.trajectories, master_seed=cfg.seed,
    )
    diff = np.abs(ens.fidelity - oracle.fidelity)
    allowed = 3.0 * ens.stderr + 1e-6
    cols = [
        ("t", ens.times),
        ("f_master", oracle.fidelity),
        ("f_ensemble", ens.fidelity),
        ("stderr", ens.stderr),
    ]
    extras = {
        "max_abs_difference": float(diff.max()),
        "points_outside_3_sigma": int(np.count_nonzero(diff > allowed)),
        "trace_error": oracle.trace_error,
    }
    return {f"{cfg.experiment}.csv": ("csv", cols)}, extras


_RUNNERS = {
    "toy-timeseries": _run_toy_timeseries,
    "toy-pulsed": _run_toy_pulsed,
    "toy-fidelity-contour": _run_toy_contour,
    "toy-coolrate-contour": _run_toy_contour,
    "dressed-tables": _run_dressed_tables,
    "cavity-kappa-sweep": _run_kappa_sweep,
    "cavity-fidelity-vs-C": _run_fidelity_vs_c,
    "cavity-pulsed": _run_cavity_pulsed,
    "oracle-check": _run_oracle_check,
}


def _check_sweep_axes(cfg: ExperimentConfig) -> None:
    _, axes = EXPERIMENTS[cfg.experiment]
    if not axes:
        raise ConfigError(f"experiment {cfg.experiment!r} has no grid axes to sweep")
    for name in axes:
        axis_spec = cfg.params[name]
        if name.endswith("_axis"):
            _axis_values(axis_spec, name, minimum_points=2)
        elif not (isinstance(axis_spec, (list, tuple)) and len(axis_spec) >= 2):
            raise ConfigError(f"{name} needs at least 2 points for a sweep")


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   sweep: bool = False) -> dict:
    """Execute one experiment; write data files and the manifest; return the manifest."""
    if sweep:
        _check_sweep_axes(cfg)
    out = Path(out_dir if out_dir is not None else cfg.out or os.environ.get(ENV_OUT_DIR, "."))
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    outputs, extras = _RUNNERS[cfg.experiment](cfg)
    checksums = {}
    for filename, (kind, payload) in outputs.items():
        if kind == "csv":
            data = _csv_bytes(payload)
        elif kind == "json":
            data = (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()
        else:
            data = payload.encode()
        checksums[filename] = "sha256:" + _write_atomic(out / filename, data)
    manifest = {
        "experiment": cfg.experiment,
        "version": __version__,
        "config": resolved_config(cfg),
        "duration_seconds": time.perf_counter() - start,
        "outputs": checksums,
        "extras": extras,
    }
    manifest_bytes = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
    _write_atomic(out / f"{cfg.experiment}.manifest.json", manifest_bytes)
    return manifest
