"""Sweep orchestration: evaluate a Study with each requested engine, write
CSV tables and compare engines against each other.

results.csv holds only deterministic columns so that identical (config,
seed) runs are byte-identical; wall-clock timings go to timing.csv.
"""

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analytic, gamma_approx, montecarlo
from .channel import db_to_linear
from .errors import DomainError, MmwCoopError
from .geometry import frc_mean_count

COORD_COLUMNS = ("rho_m", "p_l", "scheme", "m", "mean_coop", "tau_db")
RESULT_COLUMNS = ("scenario_id",) + COORD_COLUMNS + ("engine", "metric", "value", "stderr", "seed")
TIMING_COLUMNS = ("scenario_id",) + COORD_COLUMNS[:-1] + ("engine", "metric", "n_values", "runtime_s")
METRIC_NAMES = {"rate": "avg_rate_nats", "outage": "outage_prob"}


class EngineFailure(MmwCoopError):
    """An engine raised while evaluating one sweep coordinate."""

    def __init__(self, engine, coords, cause):
        self.engine = engine
        self.coords = coords
        self.cause = cause
        where = ", ".join(f"{k}={v}" for k, v in coords.items() if v is not None)
        super().__init__(f"{engine} failed at {where}: {type(cause).__name__}: {cause}")


class ComparisonError(MmwCoopError):
    """Two result tables cannot be aligned coordinate by coordinate."""


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    coords: dict
    engine: str
    metric: str
    value: float
    stderr: float
    runtime_s: float
    seed: Optional[int]

    def key(self):
        return tuple(self.coords.get(c) for c in COORD_COLUMNS) + (self.metric,)


@dataclass
class RunResult:
    scenario_id: str
    rows: list
    timings: list  # (coords, engine, metric, n_values, runtime_s)
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def _point_coords(study, coords, scen):
    """Effective coordinates of a grid point, filled in from the base config."""
    base_scheme = study.base.get("scheme", {})
    kind = scen.scheme.kind
    rho = coords.get("rho_m", study.base["geometry"].get("rho_m"))
    if rho is None:
        rho = scen.geometry.rho
    mean_coop = None
    if kind == "frc":
        mean_coop = coords.get("mean_coop", base_scheme.get("mean_coop"))
        if mean_coop is None:
            mean_coop = frc_mean_count(scen.geometry, scen.scheme.d_co)
    return {
        "rho_m": float(rho),
        "p_l": float(scen.channel.p_l),
        "scheme": kind,
        "m": scen.scheme.fnc_size if kind != "frc" else None,
        "mean_coop": None if mean_coop is None else float(mean_coop),
        "tau_db": None,
    }


# Engine dispatch ------------------------------------------------------------------


def _analytic(scen, metric, taus, ctrl=None):
    ctx = analytic.LtContext.from_geometry(scen.geometry, scen.channel, scen.pattern, scen.p_tx)
    s = scen.scheme
    if metric == "rate":
        if s.kind == "frc":
            return [(analytic.avg_rate_frc(ctx, s.d_co, scen.noise, ctrl), 0.0)]
        return [(analytic.avg_rate_fnc(ctx, s.fnc_size, scen.noise, ctrl), 0.0)]
    if s.kind == "frc":
        return [(analytic.outage_frc_exact(ctx, s.d_co, scen.noise, t, ctrl), 0.0) for t in taus]
    return [(analytic.outage_fnc_exact(ctx, s.fnc_size, scen.noise, t, ctrl), 0.0) for t in taus]


def _gamma(scen, metric, taus):
    if metric != "outage":
        raise DomainError("gamma-approx only evaluates outage")
    s = scen.scheme
    args = (scen.geometry, scen.channel, scen.pattern, scen.p_tx, scen.noise)
    if s.kind == "frc":
        vals = gamma_approx.outage_frc_approx(*args, s.d_co, taus)
    else:
        vals = gamma_approx.outage_fnc_approx(*args, s.fnc_size, taus)
    return [(float(v), 0.0) for v in np.atleast_1d(vals)]


def _simulation(scen, metric, taus, trials, seed):
    batch = montecarlo.simulate_sinr(scen, trials, seed)
    if metric == "rate":
        return [montecarlo.rate_from_batch(batch)]
    p, se = montecarlo.outage_from_batch(batch, taus)
    return [(float(a), float(b)) for a, b in zip(p, se)]


def evaluate(engine, scen, metric, taus, trials=10_000, seed=0):
    """Values and stderrs of one metric at one grid point (one entry per tau for outage)."""
    if engine == "analytic":
        return _analytic(scen, metric, taus)
    if engine == "gamma-approx":
        return _gamma(scen, metric, taus)
    if engine == "simulation":
        return _simulation(scen, metric, taus, trials, seed)
    raise DomainError(f"unknown engine {engine!r}")


def _task(args):
    index, engine, scen, metric, taus, trials, seed = args
    t0 = time.perf_counter()
    try:
        vals = evaluate(engine, scen, metric, taus, trials, seed)
    except MmwCoopError as exc:
        return index, engine, None, exc, time.perf_counter() - t0
    return index, engine, vals, None, time.perf_counter() - t0


def run_study(study, workers=1):
    """Evaluate every (grid point, engine) pair of a Study.

    Every grid point reuses the study seed, so simulated curves share random
    streams across the sweep. With ``workers > 1`` tasks run in a process
    pool; results are sorted back into grid order either way.
    """
    points = list(study.points())
    taus_db = list(study.tau_db)
    taus = [db_to_linear(t) for t in taus_db]
    tasks = [
        (i, eng, scen, study.metric, taus, study.trials, study.seed)
        for i, (_, scen) in enumerate(points)
        for eng in study.engines
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_task, tasks))
    else:
        outcomes = [_task(t) for t in tasks]
    engine_rank = {e: k for k, e in enumerate(study.engines)}
    outcomes.sort(key=lambda o: (o[0], engine_rank[o[1]]))

    metric = METRIC_NAMES[study.metric]
    rows, timings, failures = [], [], []
    for index, engine, vals, exc, dt in outcomes:
        coords, scen = points[index]
        base = _point_coords(study, coords, scen)
        if exc is not None:
            failures.append(EngineFailure(engine, base, exc))
            continue
        seed = study.seed if engine == "simulation" else None
        timings.append((base, engine, metric, len(vals), dt))
        labels = taus_db if study.metric == "outage" else [None]
        for tau_db, (value, se) in zip(labels, vals):
            row_coords = dict(base, tau_db=None if tau_db is None else float(tau_db))
            rows.append(ResultRow(study.scenario_id, row_coords, engine, metric, float(value), float(se),
                                  dt / len(vals), seed))
    return RunResult(study.scenario_id, rows, timings, failures)


# CSV ---------------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.10g}"


def _write(path, header, records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_fmt(v) for v in rec] for rec in records)
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def results_table(result):
    return [
        [r.scenario_id] + [r.coords.get(c) for c in COORD_COLUMNS] + [r.engine, r.metric, r.value, r.stderr, r.seed]
        for r in result.rows
    ]


def write_results(result, out_dir):
    """Write results.csv and timing.csv into ``out_dir``; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res_path, time_path = out / "results.csv", out / "timing.csv"
    _write(res_path, RESULT_COLUMNS, results_table(result))
    _write(
        time_path,
        TIMING_COLUMNS,
        [[result.scenario_id] + [c.get(k) for k in COORD_COLUMNS[:-1]] + [e, m, n, dt]
         for c, e, m, n, dt in result.timings],
    )
    return res_path, time_path


def _parse_cell(col, text):
    if text == "":
        return None
    if col in ("scenario_id", "scheme", "engine", "metric"):
        return text
    if col in ("m", "seed"):
        return int(text)
    return float(text)


def read_results(path):
    """Load a results.csv back into ResultRow objects."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ComparisonError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            vals = {c: _parse_cell(c, rec[c]) for c in RESULT_COLUMNS}
            coords = {c: vals[c] for c in COORD_COLUMNS}
            rows.append(ResultRow(vals["scenario_id"], coords, vals["engine"], vals["metric"],
                                  vals["value"], vals["stderr"] or 0.0, 0.0, vals["seed"]))
    return rows


# Engine comparison ---------------------------------------------------------------


@dataclass(frozen=True)
class Delta:
    key: tuple
    engine_a: str
    engine_b: str
    value_a: float
    value_b: float
    abs_delta: float
    rel_delta: float
    allowed: float

    @property
    def passed(self):
        return self.abs_delta <= self.allowed


@dataclass
class ComparisonReport:
    deltas: list
    tol_abs: float
    n_sigma: float

    @property
    def max_abs(self):
        return max((d.abs_delta for d in self.deltas), default=0.0)

    @property
    def max_rel(self):
        return max((d.rel_delta for d in self.deltas), default=0.0)

    @property
    def passed(self):
        return all(d.passed for d in self.deltas)

    def format(self):
        lines = []
        for d in self.deltas:
            where = ", ".join(f"{c}={_fmt(v)}" for c, v in zip(COORD_COLUMNS, d.key) if v is not None)
            flag = "ok  " if d.passed else "FAIL"
            lines.append(f"{flag} {d.key[-1]} [{where}] {d.engine_a}={d.value_a:.6g} {d.engine_b}={d.value_b:.6g} "
                         f"|d|={d.abs_delta:.3g} (allowed {d.allowed:.3g})")
        lines.append(f"max |delta| = {self.max_abs:.6g}, max rel = {self.max_rel:.6g} over {len(self.deltas)} pairs: "
                     + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _pair(a, b, tol_abs, n_sigma):
    diff = abs(a.value - b.value)
    scale = max(abs(a.value), abs(b.value))
    rel = diff / scale if scale > 0 else 0.0
    allowed = tol_abs + n_sigma * math.hypot(a.stderr, b.stderr)
    return Delta(a.key(), a.engine, b.engine, a.value, b.value, diff, rel, allowed)


def _group(rows):
    out = {}
    for r in rows:
        out.setdefault(r.key(), []).append(r)
    return out


def compare_engines(rows_a, rows_b=None, tol_abs=0.0, n_sigma=3.0, reference="simulation"):
    """Per-coordinate deltas between engines.

    With one table, every engine is compared with ``reference`` (or with the
    first engine present when the reference is absent). With two tables,
    rows are matched on coordinates and metric: same-named engines pair up
    when both tables carry the same engine set, otherwise each table must
    hold exactly one row per coordinate.

    A pair passes when |delta| <= tol_abs + n_sigma * combined stderr.
    """
    deltas = []
    if rows_b is None:
        for key, group in _group(rows_a).items():
            if len(group) < 2:
                raise ComparisonError(f"coordinate {key} has a single engine; nothing to compare")
            engines = [r.engine for r in group]
            ref = group[engines.index(reference)] if reference in engines else group[0]
            deltas.extend(_pair(ref, r, tol_abs, n_sigma) for r in group if r is not ref)
    else:
        ga, gb = _group(rows_a), _group(rows_b)
        if set(ga) != set(gb):
            only_a = sorted(map(str, set(ga) - set(gb)))[:3]
            only_b = sorted(map(str, set(gb) - set(ga)))[:3]
            raise ComparisonError(f"tables cover different coordinates (first only in A: {only_a}; only in B: {only_b})")
        for key in ga:
            a_rows, b_rows = ga[key], gb[key]
            a_eng = {r.engine: r for r in a_rows}
            b_eng = {r.engine: r for r in b_rows}
            if set(a_eng) == set(b_eng) and len(a_eng) == len(a_rows):
                deltas.extend(_pair(a_eng[e], b_eng[e], tol_abs, n_sigma) for e in a_eng)
            elif len(a_rows) == 1 and len(b_rows) == 1:
                deltas.append(_pair(a_rows[0], b_rows[0], tol_abs, n_sigma))
            else:
                raise ComparisonError(f"cannot pair engines {sorted(a_eng)} with {sorted(b_eng)} at {key}")
    if not deltas:
        raise ComparisonError("no comparable rows")
    return ComparisonReport(deltas, tol_abs, n_sigma)


def format_table(result):
    """Plain-text view of a run for the terminal."""
    swept = [c for c in COORD_COLUMNS if len({r.coords.get(c) for r in result.rows}) > 1] or ["rho_m"]
    header = swept + ["engine", "value", "stderr"]
    lines = ["  ".join(f"{h:>12}" for h in header)]
    for r in result.rows:
        cells = [_fmt(r.coords.get(c)) for c in swept] + [r.engine, f"{r.value:.6g}", f"{r.stderr:.3g}"]
        lines.append("  ".join(f"{c:>12}" for c in cells))
    return "\n".join(lines)

