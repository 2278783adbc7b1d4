"""Scenario configuration: a single INI-style text file with named sections
and key=value entries.

Sections and defaults:

    [chart]    name=sphere, plus chart parameters (R | r0, T | Lx, Ly)
    [grid]     Nmu=64, Nnu=128
    [physics]  sigma=0.0, rho=1.0, rhs_kind=inviscid,
               advection_convention=euclidean_J
    [run]      dt=1e-3, n_steps=100, diag_every=10, snapshot_times=
    [initial]  preset=random (random | sphere_equilibrium | modes | file)
               with per-preset keys (seed/kmax/amplitude, B0/A1/B1,
               modes=km,kn,amp,phase;..., path=...)
    [output]   directory=

parse -> serialize -> parse is idempotent.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field as dfield

import numpy as np

from . import dynamics, equilibria, geometry, grid as gridmod, operators


class ConfigError(ValueError):
    pass


CHART_PARAM_KEYS = {
    "flat": ("Lx", "Ly"),
    "sphere": ("R",),
    "torus": ("r0", "T"),
    "scaled-flat": ("eps",),
}

_DEFAULTS = {
    "chart": {"name": "sphere", "R": 1.0},
    "grid": {"Nmu": 64, "Nnu": 128},
    "physics": {"sigma": 0.0, "rho": 1.0, "rhs_kind": "inviscid",
                "advection_convention": "euclidean_J"},
    "run": {"dt": 1e-3, "n_steps": 100, "diag_every": 10,
            "snapshot_times": ""},
    "initial": {"preset": "random", "seed": 0, "kmax": 0, "amplitude": 1.0,
                "B0": 1.0, "A1": 0.0, "B1": 0.0, "modes": "", "path": ""},
    "output": {"directory": ""},
}

_INT_KEYS = {"Nmu", "Nnu", "n_steps", "diag_every", "seed", "kmax"}
_STR_KEYS = {"name", "rhs_kind", "advection_convention", "preset", "modes",
             "path", "directory", "snapshot_times"}


@dataclass
class ScenarioConfig:
    chart: dict = dfield(default_factory=dict)
    grid: dict = dfield(default_factory=dict)
    physics: dict = dfield(default_factory=dict)
    run: dict = dfield(default_factory=dict)
    initial: dict = dfield(default_factory=dict)
    output: dict = dfield(default_factory=dict)

    def section(self, name):
        return getattr(self, name)


def _coerce(key, raw):
    if key in _STR_KEYS:
        return raw.strip()
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


def parse_config(text_or_path) -> ScenarioConfig:
    cp = configparser.ConfigParser()
    try:
        if isinstance(text_or_path, str) and "\n" in text_or_path:
            cp.read_string(text_or_path)
        else:
            with open(text_or_path) as fh:
                cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    sc = ScenarioConfig()
    for section, defaults in _DEFAULTS.items():
        vals = dict(defaults)
        if cp.has_section(section):
            for key, raw in cp.items(section):
                # configparser lowercases keys; recover canonical spelling
                canon = _canonical_key(section, key)
                try:
                    vals[canon] = _coerce(canon, raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"[{section}] {canon} = {raw!r}: {exc}") from exc
        setattr(sc, section, vals)
    _validate(sc)
    return sc


_CANON = {}
for _section, _defaults in _DEFAULTS.items():
    for _k in _defaults:
        _CANON[(_section, _k.lower())] = _k
for _keys in CHART_PARAM_KEYS.values():
    for _k in _keys:
        _CANON[("chart", _k.lower())] = _k


def _canonical_key(section, key):
    return _CANON.get((section, key.lower()), key)


def _validate(sc: ScenarioConfig):
    name = sc.chart.get("name")
    if name not in CHART_PARAM_KEYS:
        raise ConfigError(f"unknown chart {name!r}")
    if sc.grid["Nmu"] <= 0 or sc.grid["Nnu"] <= 0:
        raise ConfigError("grid dimensions must be positive")
    preset = sc.initial.get("preset")
    if preset not in ("random", "sphere_equilibrium", "modes", "file"):
        raise ConfigError(f"unknown initial preset {preset!r}")
    if sc.physics["rhs_kind"] not in dynamics.RHS_KINDS:
        raise ConfigError(f"unknown rhs_kind {sc.physics['rhs_kind']!r}")
    if sc.physics["advection_convention"] not in dynamics.ADVECTION_CONVENTIONS:
        raise ConfigError(
            f"unknown advection_convention "
            f"{sc.physics['advection_convention']!r}")


def serialize_config(sc: ScenarioConfig) -> str:
    cp = configparser.ConfigParser()
    for section in _DEFAULTS:
        vals = sc.section(section)
        cp[section] = {}
        for key, val in vals.items():
            if isinstance(val, float):
                cp[section][key] = repr(val)
            else:
                cp[section][key] = str(val)
    out = io.StringIO()
    cp.write(out)
    return out.getvalue()


# -- builders -------------------------------------------------------------------

def build_chart(sc: ScenarioConfig):
    name = sc.chart["name"]
    kwargs = {k: sc.chart[k] for k in CHART_PARAM_KEYS[name] if k in sc.chart}
    return geometry.builtin_chart(name, **kwargs)


def build_grid(sc: ScenarioConfig, chart):
    return gridmod.grid_for_chart(chart, sc.grid["Nmu"], sc.grid["Nnu"])


def build_sim_config(sc: ScenarioConfig) -> dynamics.SimConfig:
    times = tuple(float(t) for t in sc.run["snapshot_times"].replace(
        ";", ",").split(",") if t.strip())
    return dynamics.SimConfig(
        sigma=sc.physics["sigma"], rho=sc.physics["rho"],
        dt=sc.run["dt"], n_steps=sc.run["n_steps"],
        rhs_kind=sc.physics["rhs_kind"],
        advection_convention=sc.physics["advection_convention"],
        diag_every=max(1, sc.run["diag_every"]), snapshot_times=times)


def build_initial(sc: ScenarioConfig, grid, cache):
    ini = sc.initial
    preset = ini["preset"]
    if preset == "random":
        kmax = ini["kmax"] or None
        return dynamics.seeded_initial_condition(
            grid, cache, seed=ini["seed"], kmax=kmax,
            amplitude=ini["amplitude"])
    if preset == "sphere_equilibrium":
        if cache.chart.name != "sphere":
            raise ConfigError("sphere_equilibrium preset needs a sphere chart")
        e = equilibria.sphere_equilibrium(ini["B0"], ini["A1"], ini["B1"],
                                          cache.chart.zeta0, grid)
        return e.omega
    if preset == "modes":
        vals = np.zeros(grid.shape())
        Lmu = grid.mu_range[1] - grid.mu_range[0]
        Lnu = grid.nu_range[1] - grid.nu_range[0]
        for entry in ini["modes"].split(";"):
            entry = entry.strip()
            if not entry:
                continue
            parts = [float(x) for x in entry.split(",")]
            if len(parts) != 4:
                raise ConfigError(f"mode entry {entry!r} is not km,kn,amp,phase")
            km, kn, amp, phase = parts
            vals += amp * np.cos(2 * np.pi * km * (grid.MU - grid.mu_range[0]) / Lmu
                                 + 2 * np.pi * kn * (grid.NU - grid.nu_range[0]) / Lnu
                                 + phase)
        vals -= cache.mean(vals)
        return gridmod.ScalarField(grid, vals)
    if preset == "file":
        meta, values = gridmod.read_snapshot(ini["path"])
        if (meta["Nmu"], meta["Nnu"]) != grid.shape():
            raise ConfigError(
                f"snapshot {ini['path']!r} grid {meta['Nmu']}x{meta['Nnu']} "
                f"does not match configured {grid.shape()}")
        return gridmod.ScalarField(grid, values)
    raise ConfigError(f"unknown preset {preset!r}")


def run_scenario(sc: ScenarioConfig, output_dir=None):
    chart = build_chart(sc)
    grid = build_grid(sc, chart)
    cache = operators.GeometryCache(chart, grid)
    omega0 = build_initial(sc, grid, cache)
    cfg = build_sim_config(sc)
    out = output_dir or sc.output.get("directory") or None
    return dynamics.run(cfg, omega0, cache, output_dir=out,
                        chart_name=chart.name)
