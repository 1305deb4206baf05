"""Scenario configuration: TOML loading, unit conversion and validation.

dB / dBm / degree values appear only in the file (unit-suffixed keys such
as ``c_l_db``) and are converted once here.
"""

import copy
import itertools
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import AntennaPattern, ChannelParams, NoiseModel, db_to_linear, dbm_to_watts, ula_approximation
from .errors import ConfigError, MmwCoopError
from .geometry import CoopScheme, NetworkGeometry

ENGINES = ("simulation", "analytic", "gamma-approx")
METRICS = ("rate", "outage")
SWEEP_AXES = ("rho_m", "m", "mean_coop", "p_l", "tau_db")

_DEFAULTS = {
    "geometry": {"chi": 1.0, "d_infinity_m": 2000.0},
    "channel": {
        "alpha_l": 2.0,
        "alpha_n": 2.92,
        "c_l_db": -61.4,
        "c_n_db": -72.0,
        "n_l": 3,
        "n_n": 1,
        "p_l": 0.11,
        "d_los_m": 205.0,
    },
    "antenna": {"g_m_db": 15.0, "g_s_db": -3.0, "theta_t_deg": 15.0},
    "noise": {"bandwidth_hz": 1e9, "noise_figure_db": 5.0},
    "power": {"p_tx_dbm": 20.0},
}


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully specified operating point (all quantities linear / SI)."""

    geometry: NetworkGeometry
    channel: ChannelParams
    pattern: AntennaPattern
    noise: NoiseModel
    p_tx_dbm: float
    scheme: CoopScheme
    user: str = "edge"  # "edge" or "general"

    @property
    def p_tx(self):
        return dbm_to_watts(self.p_tx_dbm)


@dataclass
class Study:
    """A parsed config file: base settings plus the sweep to run."""

    scenario_id: str
    base: dict
    metric: str
    axes: dict
    tau_db: list
    engines: list
    trials: int
    seed: int
    description: str = ""
    source: Optional[Path] = None

    def points(self):
        """Scenario grid (excluding the threshold axis), in deterministic order."""
        names = [a for a in ("rho_m", "p_l", "m", "mean_coop") if a in self.axes]
        for combo in itertools.product(*(self.axes[n] for n in names)):
            coords = dict(zip(names, combo))
            yield coords, build_scenario(self.base, coords)


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _num(section, key, problems, where, positive=False):
    val = section.get(key)
    if val is None:
        problems.append(f"{where}.{key} is required")
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        problems.append(f"{where}.{key} must be a finite number (got {val!r})")
        return None
    if positive and val <= 0:
        problems.append(f"{where}.{key} must be positive (got {val})")
        return None
    return float(val)


def _check_physics(raw, problems):
    """Collect every violated physical invariant from a raw (merged) dict."""
    ch = raw.get("channel", {})
    vals = {k: _num(ch, k, problems, "channel") for k in ("alpha_l", "alpha_n", "c_l_db", "c_n_db", "n_l", "n_n", "p_l")}
    d_los = _num(ch, "d_los_m", problems, "channel", positive=True)
    if vals["alpha_l"] is not None and vals["alpha_n"] is not None:
        if not vals["alpha_l"] < vals["alpha_n"]:
            problems.append(f"channel: need alpha_l < alpha_n (got {vals['alpha_l']}, {vals['alpha_n']})")
        if not vals["alpha_n"] > 2:
            problems.append(f"channel: need alpha_n > 2 (got {vals['alpha_n']})")
        if not vals["alpha_l"] >= 2:
            problems.append(f"channel: need alpha_l >= 2 (got {vals['alpha_l']})")
    if vals["c_l_db"] is not None and vals["c_n_db"] is not None and not vals["c_l_db"] > vals["c_n_db"]:
        problems.append(f"channel: need c_l > c_n (got {vals['c_l_db']} dB, {vals['c_n_db']} dB)")
    for k in ("n_l", "n_n"):
        if vals[k] is not None and vals[k] < 1:
            problems.append(f"channel: {k} must be >= 1 (got {vals[k]})")
    if vals["p_l"] is not None and not 0 <= vals["p_l"] <= 1:
        problems.append(f"channel: p_l must lie in [0, 1] (got {vals['p_l']})")

    ant = raw.get("antenna", {})
    if "ula_elements" not in ant:
        g_m = _num(ant, "g_m_db", problems, "antenna")
        g_s = _num(ant, "g_s_db", problems, "antenna")
        th = _num(ant, "theta_t_deg", problems, "antenna")
        if g_m is not None and g_s is not None and not g_m > g_s:
            problems.append(f"antenna: need g_m > g_s (got {g_m} dB, {g_s} dB)")
        if th is not None and not 0 < th < 360:
            problems.append(f"antenna: theta_t_deg must lie in (0, 360) (got {th})")

    noise = raw.get("noise", {})
    _num(noise, "bandwidth_hz", problems, "noise", positive=True)
    _num(noise, "noise_figure_db", problems, "noise")
    _num(raw.get("power", {}), "p_tx_dbm", problems, "power")
    geo = raw.get("geometry", {})
    _num(geo, "chi", problems, "geometry", positive=True)
    _num(geo, "d_infinity_m", problems, "geometry", positive=True)
    return d_los


def build_scenario(base, coords=None):
    """Turn a validated raw dict plus sweep coordinates into a ScenarioConfig."""
    coords = coords or {}
    raw = copy.deepcopy(base)
    if "rho_m" in coords:
        raw["geometry"]["rho_m"] = coords["rho_m"]
    if "p_l" in coords:
        raw["channel"]["p_l"] = coords["p_l"]
    if "m" in coords:
        raw["scheme"]["m"] = coords["m"]
    if "mean_coop" in coords:
        raw["scheme"]["mean_coop"] = coords["mean_coop"]

    g = raw["geometry"]
    if "rho_m" in g:
        geometry = NetworkGeometry.from_rho(float(g["rho_m"]), float(g["chi"]), float(g["d_infinity_m"]))
    else:
        geometry = NetworkGeometry(float(g["lambda_b_per_m2"]), float(g["chi"]), float(g["d_infinity_m"]))

    ch = raw["channel"]
    channel = ChannelParams.from_db(
        float(ch["alpha_l"]), float(ch["alpha_n"]), float(ch["c_l_db"]), float(ch["c_n_db"]),
        float(ch["n_l"]), float(ch["n_n"]), float(ch["p_l"]), float(ch["d_los_m"]),
    )
    ant = raw["antenna"]
    if "ula_elements" in ant:
        pattern = ula_approximation(int(ant["ula_elements"]), normalize=bool(ant.get("ula_normalize", False)))
    else:
        pattern = AntennaPattern(db_to_linear(ant["g_m_db"]), db_to_linear(ant["g_s_db"]), math.radians(ant["theta_t_deg"]))
    noise = NoiseModel(float(raw["noise"]["bandwidth_hz"]), float(raw["noise"]["noise_figure_db"]))

    sc = raw["scheme"]
    kind = sc["kind"]
    if kind == "fnc":
        scheme = CoopScheme.fnc(int(sc["m"]))
    elif kind == "frc":
        d_co = sc.get("d_co_m")
        if d_co is None:
            d_co = geometry.d_co_for_mean(float(sc["mean_coop"]))
        scheme = CoopScheme.frc(float(d_co))
    else:
        scheme = CoopScheme.noncooperative()
    return ScenarioConfig(geometry, channel, pattern, noise, float(raw["power"]["p_tx_dbm"]), scheme, raw.get("user", "edge"))


def parse_study(raw, scenario_id="scenario", source=None, overrides=None):
    """Validate a raw config mapping; raises ConfigError listing every problem."""
    overrides = overrides or {}
    problems = []
    body = _merge(_DEFAULTS, raw)
    for key in ("engines", "trials", "seed"):
        if overrides.get(key) is not None:
            body[key] = overrides[key]

    engines = body.get("engines", ["analytic", "simulation"])
    if isinstance(engines, str):
        engines = [e.strip() for e in engines.split(",") if e.strip()]
    bad = [e for e in engines if e not in ENGINES]
    if bad:
        problems.append(f"unknown engine(s) {bad}; choose from {list(ENGINES)}")
    if not engines:
        problems.append("at least one engine is required")

    trials = body.get("trials", 10_000)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        problems.append(f"trials must be a positive integer (got {trials!r})")
    seed = body.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append(f"seed must be a non-negative integer (got {seed!r})")

    user = body.get("user", "edge")
    if user not in ("edge", "general"):
        problems.append(f"user must be 'edge' or 'general' (got {user!r})")

    sweep = body.get("sweep")
    axes, tau_db, metric = {}, [], "rate"
    if not isinstance(sweep, dict):
        problems.append("a [sweep] table is required")
    else:
        metric = sweep.get("metric", "rate")
        if metric not in METRICS:
            problems.append(f"sweep.metric must be one of {list(METRICS)} (got {metric!r})")
        for key, val in sweep.items():
            if key == "metric":
                continue
            if key not in SWEEP_AXES:
                problems.append(f"unknown sweep axis {key!r}; choose from {list(SWEEP_AXES)}")
                continue
            if not isinstance(val, list) or not val:
                problems.append(f"sweep.{key} must be a non-empty list")
                continue
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in val):
                problems.append(f"sweep.{key} must contain only numbers")
                continue
            axes[key] = list(val)
        tau_db = axes.pop("tau_db", [])
        if metric == "outage" and not tau_db:
            problems.append("outage sweeps need a non-empty sweep.tau_db grid")
        if metric == "rate" and tau_db:
            problems.append("sweep.tau_db only applies to outage sweeps")
        if not axes and not tau_db:
            problems.append("sweep grid is empty")

    g = body["geometry"]
    if "rho_m" not in g and "lambda_b_per_m2" not in g and "rho_m" not in axes:
        problems.append("geometry needs rho_m or lambda_b_per_m2 (or a sweep over rho_m)")
    for key in ("rho_m", "lambda_b_per_m2"):
        if key in g:
            _num(g, key, problems, "geometry", positive=True)
    for rho in axes.get("rho_m", []):
        if rho <= 0:
            problems.append(f"sweep.rho_m values must be positive (got {rho})")

    sc = body.get("scheme")
    if not isinstance(sc, dict) or sc.get("kind") not in ("fnc", "frc", "none"):
        problems.append("[scheme] kind must be 'fnc', 'frc' or 'none'")
    else:
        kind = sc["kind"]
        if kind == "fnc":
            ms = axes.get("m", [sc.get("m")])
            if any(v is None or int(v) != v or v < 1 for v in ms):
                problems.append(f"FNC needs integer m >= 1 (got {ms})")
        elif kind == "frc":
            if "m" in axes:
                problems.append("sweep.m applies to FNC; use sweep.mean_coop for FRC")
            if "d_co_m" not in sc and "mean_coop" not in sc and "mean_coop" not in axes:
                problems.append("FRC needs scheme.d_co_m or scheme.mean_coop")
            for v in axes.get("mean_coop", [sc.get("mean_coop", 1.0)]):
                if v is None or v <= 0:
                    problems.append(f"FRC mean_coop must be positive (got {v})")
        else:
            if "m" in axes or "mean_coop" in axes:
                problems.append("non-cooperative scheme cannot sweep m or mean_coop")
        if kind != "frc" and "mean_coop" in axes:
            problems.append("sweep.mean_coop applies only to FRC")

    if metric == "rate" and "gamma-approx" in engines:
        problems.append("gamma-approx only approximates outage, not rate")
    if user == "general" and any(e != "simulation" for e in engines):
        problems.append("general-user scenarios are supported by the simulation engine only")

    trial_raw = copy.deepcopy(body)
    if "p_l" in axes:
        for v in axes["p_l"]:
            if not 0 <= v <= 1:
                problems.append(f"sweep.p_l values must lie in [0, 1] (got {v})")
        trial_raw["channel"]["p_l"] = axes["p_l"][0]
    _check_physics(trial_raw, problems)

    if not problems:
        # instantiate every grid point so geometric constraints surface now
        study = Study(scenario_id, body, metric, axes, tau_db, list(engines), int(trials), int(seed),
                      body.get("description", ""), source)
        try:
            for coords, scen in study.points():
                if scen.scheme.kind == "frc" and not scen.scheme.d_co > scen.geometry.d_e:
                    problems.append(f"FRC d_co={scen.scheme.d_co:g} must exceed d_e={scen.geometry.d_e:.4g} at {coords}")
        except MmwCoopError as exc:
            problems.append(str(exc))
        if not problems:
            return study
    raise ConfigError(problems)


def load_study(path, overrides=None):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    scenario_id = raw.pop("id", path.stem)
    return parse_study(raw, scenario_id, path, overrides)


def default_scenario(**changes):
    """Baseline scenario (rho = 50 m, FNC with 5 BSs) with ``dataclasses.replace``-style edits."""
    raw = _merge(_DEFAULTS, {"geometry": {"rho_m": 50.0}, "scheme": {"kind": "fnc", "m": 5}})
    scen = build_scenario(raw)
    return replace(scen, **changes) if changes else scen
