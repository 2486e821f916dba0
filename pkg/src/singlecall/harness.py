"""Experiment configuration, execution and artifact writers (CSV, JSON, SVG)."""

from __future__ import annotations

import csv
import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algorithms import ALGORITHMS, AlgorithmConfig, Trajectory, run, stepsize_arg, stepsize_og
from .analysis import AUDITS, AUDITS_FOR, RateFit, fit_rate, potentials, run_audit
from .core import PROBLEM_FACTORIES, InclusionProblem, build_problem

CSV_COLUMNS = ("t", "residual_natural", "residual_certified", "residual_tangent",
               "grad_calls", "resolvent_calls", "z_norm", "potential")

CONFIG_KEYS = ("problem", "algorithms", "algo", "eta", "max_iters", "eps", "out",
               "output_dir", "seed", "record_every", "audits", "initial_point")


class ConfigError(ValueError):
    """A configuration value is missing or malformed; ``key`` names it."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


# ---------------------------------------------------------------------------
# configuration


def parse_problem_spec(spec: str) -> tuple:
    """``"rotation:L=1,costheta=-0.5"`` -> ``("rotation", {"L": 1.0, "costheta": -0.5})``."""
    if not isinstance(spec, str) or not spec:
        raise ConfigError("problem", "expected a string such as 'antidiagonal:n=100'")
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in PROBLEM_FACTORIES:
        raise ConfigError("problem", f"unknown problem {name!r}; choose from {sorted(PROBLEM_FACTORIES)}")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError("problem", f"parameter {item!r} is not of the form key=value")
        try:
            params[key.strip()] = _number(value)
        except ValueError:
            raise ConfigError("problem", f"parameter {key.strip()!r} has non-numeric value {value!r}") from None
    return name, params


def _number(text: str) -> float:
    """Parse ``"0.5"``, ``"1e-3"`` or a simple fraction such as ``"-1/60"``."""
    num, slash, den = text.partition("/")
    if slash:
        return float(num) / float(den)
    return float(text)


def make_problem(spec) -> InclusionProblem:
    """Build a problem from a spec string or a ``{"name": ..., **params}`` mapping."""
    if isinstance(spec, dict):
        params = dict(spec)
        name = params.pop("name", None)
        if name is None:
            raise ConfigError("problem", "mapping needs a 'name' entry")
    else:
        name, params = parse_problem_spec(spec)
    try:
        return build_problem(name, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError("problem", str(exc)) from None


@dataclass
class ExperimentConfig:
    problem: object
    algorithms: list
    audits: list = field(default_factory=list)
    output_dir: str = "results"
    record_every: int = 1

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("algorithms", "at least one algorithm entry is required")
        if not (isinstance(self.record_every, int) and self.record_every >= 1):
            raise ConfigError("record_every", f"must be a positive integer, got {self.record_every!r}")
        for name in self.audits:
            if name not in AUDITS:
                raise ConfigError("audits", f"unknown audit {name!r}; choose from {sorted(AUDITS)}")


def _resolve_eta(value, algorithm: str, problem: InclusionProblem) -> float:
    if value is None:
        raise ConfigError("eta", "a step size is required")
    if value == "auto":
        rho = problem.regime.effective_rho
        try:
            if algorithm == "og":
                return stepsize_og(problem.L, rho)
            if algorithm == "arg":
                return stepsize_arg(problem.L, rho)
        except ValueError as exc:
            raise ConfigError("eta", str(exc)) from None
        raise ConfigError("eta", f"'auto' is only available for og and arg, not {algorithm}")
    try:
        eta = float(value)
    except (TypeError, ValueError):
        raise ConfigError("eta", f"not a number: {value!r}") from None
    if not (eta > 0 and math.isfinite(eta)):
        raise ConfigError("eta", f"must be positive and finite, got {value!r}")
    return eta


def _as_int(key: str, value, minimum: int) -> int:
    if isinstance(value, bool):
        raise ConfigError(key, f"not an integer: {value!r}")
    try:
        as_float = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"not an integer: {value!r}") from None
    if not as_float.is_integer():
        raise ConfigError(key, f"not an integer: {value!r}")
    out = int(as_float)
    if out < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {value!r}")
    return out


ENTRY_ALIASES = {"algorithm": "algo", "max_iterations": "max_iters", "stop_epsilon": "eps"}
ENTRY_KEYS = ("algo", "eta", "max_iters", "eps", "seed", "initial_point")


def _algorithm_entry(entry: dict, defaults: dict, problem: InclusionProblem) -> AlgorithmConfig:
    entry = {ENTRY_ALIASES.get(k, k): v for k, v in entry.items()}
    unknown = sorted(set(entry) - set(ENTRY_KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unrecognized key in algorithms entry")
    merged = {**defaults, **entry}
    algo = merged.get("algo")
    if algo not in ALGORITHMS:
        raise ConfigError("algo", f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    eta = _resolve_eta(merged.get("eta"), algo, problem)
    max_iters = _as_int("max_iters", merged.get("max_iters", 1000), 0)
    try:
        eps = float(merged.get("eps", 0.0))
    except (TypeError, ValueError):
        raise ConfigError("eps", f"not a number: {merged.get('eps')!r}") from None
    if not eps >= 0:
        raise ConfigError("eps", "must be nonnegative")
    seed = _as_int("seed", merged.get("seed", 0), -(2 ** 63))
    z0 = merged.get("initial_point")
    if z0 is not None:
        z0 = np.asarray(z0, dtype=float)
        if z0.shape != (problem.dim,):
            raise ConfigError("initial_point", f"expected {problem.dim} coordinates, got shape {z0.shape}")
    return AlgorithmConfig(algo, eta, max_iters, eps, z0, seed)


def config_from_mapping(raw: dict) -> ExperimentConfig:
    """Validate a flat mapping (from JSON and/or flags) into an :class:`ExperimentConfig`.

    ``algo`` may be a single name or a comma-separated list; ``algorithms``
    may instead list per-run mappings that override the flat defaults.
    """
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unrecognized key")
    if raw.get("problem") is None:
        raise ConfigError("problem", "a problem is required")
    problem = make_problem(raw["problem"])
    defaults = {k: raw[k] for k in ("eta", "max_iters", "eps", "seed", "initial_point") if k in raw}
    entries = raw.get("algorithms")
    if entries is None:
        algo = raw.get("algo")
        if algo is None:
            raise ConfigError("algo", "an algorithm is required")
        names = algo if isinstance(algo, list) else [a.strip() for a in str(algo).split(",") if a.strip()]
        entries = [{"algo": a} for a in names]
    if not isinstance(entries, list) or not all(isinstance(e, dict) for e in entries):
        raise ConfigError("algorithms", "must be a list of mappings")
    algos = [_algorithm_entry(e, defaults, problem) for e in entries]
    audits = raw.get("audits") or []
    if isinstance(audits, str):
        audits = [a.strip() for a in audits.split(",") if a.strip()]
    record_every = raw.get("record_every", 1)
    record_every = _as_int("record_every", record_every, 1)
    out = raw.get("out", raw.get("output_dir", "results"))
    return ExperimentConfig(raw["problem"], algos, list(audits), str(out), record_every)


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return data


# ---------------------------------------------------------------------------
# results


@dataclass
class RunSummary:
    label: str
    algorithm: str
    eta: float
    iterations_used: int
    gradient_calls: int
    resolvent_calls: int
    final_residual: float
    wall_time_seconds: float
    terminated_by: str
    fitted_slope: Optional[float] = None
    audits: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "algorithm": self.algorithm,
            "eta": self.eta,
            "iterations_used": self.iterations_used,
            "gradient_calls": self.gradient_calls,
            "resolvent_calls": self.resolvent_calls,
            "final_residual": self.final_residual,
            "wall_time_seconds": self.wall_time_seconds,
            "terminated_by": self.terminated_by,
            "fitted_slope": self.fitted_slope,
            "audits": [a.as_dict() for a in self.audits],
            "warnings": list(self.warnings),
        }


def run_label(cfg: AlgorithmConfig) -> str:
    return f"{cfg.algorithm}_eta{cfg.eta:.6g}"


def _slope(traj: Trajectory) -> Optional[float]:
    hi = traj.iterations
    if hi < 20:
        return None
    try:
        fit: RateFit = fit_rate(traj, (max(1, hi // 10), hi))
    except ValueError:
        return None
    return fit.slope


def execute(problem: InclusionProblem, cfg: AlgorithmConfig, audits=()) -> tuple:
    """Run one algorithm and the applicable audits; returns ``(trajectory, summary)``."""
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        traj = run(problem, cfg)
    elapsed = time.perf_counter() - start
    reports = []
    for name in audits:
        if name not in AUDITS_FOR[cfg.algorithm]:
            continue
        if problem.known_solution is None and name not in ("rg_potential", "arg_potential", "arg_initial"):
            continue
        reports.append(run_audit(name, traj))
    summary = RunSummary(
        label=run_label(cfg),
        algorithm=cfg.algorithm,
        eta=cfg.eta,
        iterations_used=traj.iterations,
        gradient_calls=traj.gradient_calls,
        resolvent_calls=traj.resolvent_calls,
        final_residual=float(traj.final_residual),
        wall_time_seconds=elapsed,
        terminated_by=traj.terminated_by,
        fitted_slope=_slope(traj) if traj.terminated_by != "divergence" else None,
        audits=reports,
        warnings=list(traj.warnings),
    )
    return traj, summary


# ---------------------------------------------------------------------------
# serialization


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return "%.17g" % x


def trajectory_rows(traj: Trajectory, record_every: int = 1, with_potential: bool = False) -> list:
    """CSV rows (as strings) for every ``record_every``-th record plus the last one."""
    pot = None
    if with_potential and traj.algorithm in ("rg", "arg"):
        pot = potentials(traj)
    rows = []
    last = len(traj.records) - 1
    for i, r in enumerate(traj.records):
        if i % record_every and i != last:
            continue
        rows.append([
            str(r.t),
            _fmt(r.residuals.natural),
            _fmt(r.residuals.certified),
            _fmt(r.residuals.tangent_exact),
            str(r.grad_calls),
            str(r.resolvent_calls),
            _fmt(np.linalg.norm(r.z)),
            _fmt(pot[i]) if pot is not None else "",
        ])
    return rows


def write_trajectory_csv(traj: Trajectory, path: str, record_every: int = 1,
                         with_potential: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(trajectory_rows(traj, record_every, with_potential))


def read_trajectory_csv(path: str) -> dict:
    """Columns of a trajectory CSV as lists; empty cells become ``None``."""
    cols = {c: [] for c in CSV_COLUMNS}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for c in CSV_COLUMNS:
                v = row[c]
                if v == "":
                    cols[c].append(None)
                elif c in ("t", "grad_calls", "resolvent_calls"):
                    cols[c].append(int(v))
                else:
                    cols[c].append(float(v))
    return cols


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.floating):
        return _json_safe(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_summary_json(path: str, problem: InclusionProblem, summaries: list, extra=None) -> None:
    payload = {"problem": problem.describe(), "runs": [s.as_dict() for s in summaries]}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# plotting

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def loglog_svg(series: dict, title: str = "", width: int = 640, height: int = 420) -> str:
    """Self-contained SVG with one log-log polyline per ``label -> (t, r)``.

    Points with ``t < 1`` or non-positive / non-finite residuals are dropped.
    """
    clean = {}
    for label, (t, r) in series.items():
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        ok = (t >= 1) & np.isfinite(r) & (r > 0)
        if ok.any():
            clean[label] = (np.log10(t[ok]), np.log10(r[ok]))
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{_escape(title)}</text>']
    if clean:
        xs = np.concatenate([v[0] for v in clean.values()])
        ys = np.concatenate([v[1] for v in clean.values()])
        x0, x1 = math.floor(xs.min()), max(math.ceil(xs.max()), math.floor(xs.min()) + 1)
        y0, y1 = math.floor(ys.min()), max(math.ceil(ys.max()), math.floor(ys.min()) + 1)

        def px(x):
            return left + (x - x0) / (x1 - x0) * pw

        def py(y):
            return top + (y1 - y) / (y1 - y0) * ph

        for d in range(x0, x1 + 1):
            out.append(f'<line x1="{px(d):.1f}" y1="{top}" x2="{px(d):.1f}" y2="{top + ph}" stroke="#ddd"/>')
            out.append(f'<text x="{px(d):.1f}" y="{top + ph + 18}" text-anchor="middle">1e{d}</text>')
        for d in range(y0, y1 + 1):
            out.append(f'<line x1="{left}" y1="{py(d):.1f}" x2="{left + pw}" y2="{py(d):.1f}" stroke="#ddd"/>')
            out.append(f'<text x="{left - 6}" y="{py(d) + 4:.1f}" text-anchor="end">1e{d}</text>')
        for i, (label, (lx, ly)) in enumerate(clean.items()):
            color = _COLORS[i % len(_COLORS)]
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(lx, ly))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            ly_ = top + 16 * i + 8
            out.append(f'<line x1="{left + pw + 10}" y1="{ly_}" x2="{left + pw + 30}" y2="{ly_}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{left + pw + 35}" y="{ly_ + 4}">{_escape(label)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">iteration t</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">residual</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_plot(path: str, trajectories: dict, title: str = "") -> None:
    series = {label: (np.array([r.t for r in tr.records]), tr.stop_metrics())
              for label, tr in trajectories.items()}
    with open(path, "w") as fh:
        fh.write(loglog_svg(series, title))


# ---------------------------------------------------------------------------
# driver


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> tuple:
    """Run every algorithm of ``cfg`` in order and write the artifacts.

    Files under ``cfg.output_dir``: ``<label>.csv`` per run, ``summary.json``
    and ``residuals.svg``. Returns ``(problem, trajectories, summaries)``.
    """
    problem = make_problem(cfg.problem)
    trajs, summaries = {}, []
    for acfg in cfg.algorithms:
        traj, summary = execute(problem, acfg, cfg.audits)
        label = summary.label
        k = 2
        while label in trajs:
            label = f"{summary.label}_{k}"
            k += 1
        summary.label = label
        trajs[label] = traj
        summaries.append(summary)
    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        for label, traj in trajs.items():
            write_trajectory_csv(traj, os.path.join(cfg.output_dir, f"{label}.csv"),
                                 cfg.record_every, with_potential=bool(cfg.audits))
        write_summary_json(os.path.join(cfg.output_dir, "summary.json"), problem, summaries)
        write_plot(os.path.join(cfg.output_dir, "residuals.svg"), trajs,
                   title=f"{problem.name} {problem.params}")
    return problem, trajs, summaries
