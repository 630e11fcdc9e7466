"""INI run configuration: grid, coefficients, solver settings and initial data."""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .energy import State, ground_state, random_state
from .params import COEFFICIENTS, ModelParams, NormalMode
from .solver import Forcing, SolverConfig, project_initial_data
from .spectral import Grid

PRESETS = ("ground", "perturbed-ground", "random")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InitialSpec:
    preset: str = "perturbed-ground"
    amplitude: float = 0.1
    seed: int = 0
    band: int = 2
    pitch: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")

    def build(self, grid: Grid, n: int) -> State:
        if self.preset == "ground":
            s = ground_state(grid, self.pitch)
        else:
            rng = np.random.default_rng(self.seed)
            s = random_state(grid, rng, band=self.band, amplitude=self.amplitude, pitch=self.pitch,
                             about_ground=self.preset == "perturbed-ground")
        return project_initial_data(s.d, s.layer, s.v, n, grid)


@dataclass(frozen=True)
class RunConfig:
    grid_n: int = 8
    lengths: tuple = (2 * np.pi,) * 3
    params: ModelParams | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    initial: InitialSpec = field(default_factory=InitialSpec)

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_n, self.lengths)

    def with_overrides(self, dt=None, t_end=None, preset=None, seed=None) -> "RunConfig":
        solver = self.solver
        if dt is not None:
            solver = replace(solver, dt=dt)
        if t_end is not None:
            solver = replace(solver, t_end=t_end)
        initial = self.initial
        if preset is not None:
            initial = replace(initial, preset=preset)
        if seed is not None:
            initial = replace(initial, seed=seed)
        return replace(self, solver=solver, initial=initial)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["grid"] = {"n": str(self.grid_n), "lengths": ", ".join(repr(x) for x in self.lengths)}
        params = {}
        for name in COEFFICIENTS:
            params["lambda" if name == "lambda_" else name] = repr(getattr(self.params, name))
        mode = self.params.normal_mode
        params["normal_mode"] = mode.kind
        if mode.is_relaxed:
            params["normal_eps"] = repr(mode.eps)
        cp["params"] = params
        s = self.solver
        cp["solver"] = {
            "dt": repr(s.dt), "t_end": repr(s.t_end), "scheme": s.scheme,
            "n_galerkin": str(s.n_galerkin or self.grid_n), "snapshot_stride": str(s.snapshot_stride),
            "forcing": s.forcing.kind, "forcing_amplitude": repr(s.forcing.amplitude),
        }
        i = self.initial
        cp["initial"] = {
            "preset": i.preset, "amplitude": repr(i.amplitude), "seed": str(i.seed), "band": str(i.band),
            "pitch": ", ".join(repr(x) for x in i.pitch),
        }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()


def _floats(text: str, count: int, key: str) -> tuple:
    try:
        values = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from None
    if len(values) == 1 and count > 1:
        values = values * count
    if len(values) != count:
        raise ConfigError(f"{key}: expected {count} values")
    return values


def _read(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    stripped = text.lstrip()
    if stripped and not stripped.startswith("["):
        text = "[params]\n" + text
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return cp


def _get(section, key, conv, default):
    if key not in section:
        return default
    try:
        return conv(section[key])
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {section[key]!r}") from None


def parse_params(section) -> ModelParams:
    values = {}
    missing = []
    for name in COEFFICIENTS:
        key = "lambda" if name == "lambda_" else name
        raw = section.get(key, section.get(name))
        if raw is None:
            missing.append(key)
            continue
        try:
            values[name] = float(raw)
        except ValueError:
            raise ConfigError(f"{key}: not a number: {raw!r}") from None
    if missing:
        raise ConfigError("missing coefficient(s): " + ", ".join(missing))
    kind = section.get("normal_mode", "gradient").strip().lower()
    try:
        if kind == "relaxed":
            mode = NormalMode.relaxed(float(section.get("normal_eps", "0.1")))
        else:
            mode = NormalMode(kind)
        return ModelParams(**values, normal_mode=mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str) -> RunConfig:
    cp = _read(text)
    if not cp.has_section("params"):
        raise ConfigError("no [params] section")
    params = parse_params(cp["params"])
    grid = cp["grid"] if cp.has_section("grid") else {}
    solver = cp["solver"] if cp.has_section("solver") else {}
    initial = cp["initial"] if cp.has_section("initial") else {}
    n = _get(grid, "n", int, 8)
    lengths = _floats(grid.get("lengths", repr(2 * np.pi)), 3, "lengths")
    try:
        forcing = Forcing(solver.get("forcing", "none").strip(), _get(solver, "forcing_amplitude", float, 0.0))
        scfg = SolverConfig(
            dt=_get(solver, "dt", float, 1e-4),
            t_end=_get(solver, "t_end", float, 0.01),
            scheme=solver.get("scheme", "imex-rk2").strip().lower(),
            n_galerkin=_get(solver, "n_galerkin", int, None),
            forcing=forcing,
            snapshot_stride=_get(solver, "snapshot_stride", int, 10),
        )
        ispec = InitialSpec(
            preset=initial.get("preset", "perturbed-ground").strip(),
            amplitude=_get(initial, "amplitude", float, 0.1),
            seed=_get(initial, "seed", int, 0),
            band=_get(initial, "band", int, 2),
            pitch=_floats(initial.get("pitch", "0 0 1"), 3, "pitch"),
        )
        cfg = RunConfig(n, lengths, params, scfg, ispec)
        cfg.solver.galerkin(cfg.grid)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
