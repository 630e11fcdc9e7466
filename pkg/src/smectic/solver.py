"""Galerkin right-hand sides and IMEX time stepping.

The unknowns are ``(d, psi, v)`` truncated to ``n`` modes per axis.  Each
right-hand side is split as ``-L u + N(u)`` with ``L`` the stiff linear part,
diagonal per mode, and ``N`` everything else (treated explicitly).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyBreakdown, EnergyTerms, State, _dot
from .params import ModelParams, certify
from .spectral import Grid, div, grad, inner_product, leray_project, norm, truncate
from .stress import RateTerms, StressPowerLedger, quadratures, stress_power, viscous_stress_discrete

log = logging.getLogger(__name__)

SCHEMES = ("imex-euler", "imex-rk2")
BLOWUP_NORM = 1e12


class BlowUpError(RuntimeError):
    """A field norm left the finite range allowed by the guard."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


# -- forcing ------------------------------------------------------------------


@dataclass(frozen=True)
class Forcing:
    """Body force; ``shear`` is ``g = A (sin(2 pi x3 / L3), 0, 0)``, already solenoidal."""

    kind: str = "none"
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "shear"):
            raise ValueError(f"unknown forcing {self.kind!r}")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.amplitude != 0

    def field(self, grid: Grid, t: float) -> np.ndarray:
        g = grid.zeros(1)
        if self.active:
            x = grid.coordinates()
            values = np.zeros((3,) + grid.shape)
            values[0] = self.amplitude * np.sin(2 * np.pi * x[2] / grid.lengths[2])
            g = leray_project(grid.from_physical(values), grid)
        return g


def dual_norm_sq(g: np.ndarray, grid: Grid) -> float:
    """Squared H^-1 norm with multiplier ``1/|k|`` (mean mode excluded)."""
    k2 = np.where(grid.k2 == 0, np.inf, grid.k2)
    return grid.volume * float(np.sum(np.abs(g) ** 2 / k2))


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-4
    t_end: float = 0.01
    scheme: str = "imex-rk2"
    n_galerkin: int | None = None
    forcing: Forcing = field(default_factory=Forcing)
    snapshot_stride: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def galerkin(self, grid: Grid) -> int:
        n = self.n_galerkin or max(grid.shape)
        if n > max(grid.shape):
            raise ValueError(f"n_galerkin {n} exceeds grid modes {grid.shape}")
        return n


# -- right-hand sides -------------------------------------------------------


@dataclass(eq=False)
class Tendency:
    """Right-hand side at one state together with the quantities it was built from."""

    state: State
    terms: EnergyTerms
    rates: RateTerms
    d: np.ndarray
    psi: np.ndarray
    v: np.ndarray
    forcing: np.ndarray


def project_initial_data(d0, phi0, v0, n: int, grid: Grid, t: float = 0.0) -> State:
    """Galerkin projection of initial data; ``phi0`` is a ``LayerField``."""
    from .energy import LayerField

    v = truncate(leray_project(v0, grid), n, grid)
    v[:, 0, 0, 0] = 0
    return State(grid, truncate(d0, n, grid), LayerField(phi0.pitch, truncate(phi0.psi, n, grid)), v, t)


def _advect(v, G):
    return np.einsum("k...,ik...->i...", v, G)


def rhs_director(state: State, p: ModelParams, n: int | None = None, terms=None, rates=None) -> np.ndarray:
    """``-(v.grad) d + Wv d - lambda Dv d - 2 kappa1 gamma Dv a - gamma q``."""
    g = state.grid
    terms = terms or EnergyTerms(state, p, n)
    rates = rates or RateTerms(g, state.d, terms.a, state.v)
    adv = g.evaluate(_advect, state.v, grad(state.d, g))
    out = -adv + rates.Wd - p.lambda_ * rates.U - 2 * p.kappa1 * p.gamma * rates.V - p.gamma * terms.q
    return truncate(out, n, g) if n else out


def rhs_layer(state: State, p: ModelParams, n: int | None = None, terms=None) -> np.ndarray:
    """``-v.grad(phi) - lambda_p j``."""
    g = state.grid
    terms = terms or EnergyTerms(state, p, n)
    out = -g.evaluate(_dot, state.v, terms.grad_phi) - p.lambda_p * terms.j
    return truncate(out, n, g) if n else out


def rhs_velocity(state: State, p: ModelParams, forcing: np.ndarray | None = None, n: int | None = None,
                 terms=None, rates=None) -> np.ndarray:
    """Leray projection of ``-(v.grad) v + grad(d)^T q + grad(phi) j + div T^V + g``."""
    g = state.grid
    terms = terms or EnergyTerms(state, p, n)
    rates = rates or RateTerms(g, state.d, terms.a, state.v)
    body = g.evaluate(
        lambda v, Gv, Gd, q, y, j: -_advect(v, Gv) + np.einsum("ik...,i...->k...", Gd, q) + y * j,
        state.v, rates.grad_v, grad(state.d, g), terms.q, terms.grad_phi, terms.j,
    )
    body = body + div(viscous_stress_discrete(state, terms.q, p, rates), g)
    if forcing is not None:
        body = body + forcing
    out = leray_project(body, g)
    out[:, 0, 0, 0] = 0
    return truncate(out, n, g) if n else out


def tendency(state: State, p: ModelParams, n: int | None = None, forcing: Forcing | None = None) -> Tendency:
    terms = EnergyTerms(state, p, n)
    rates = RateTerms(state.grid, state.d, terms.a, state.v)
    gfield = (forcing or Forcing()).field(state.grid, state.t)
    return Tendency(
        state, terms, rates,
        rhs_director(state, p, n, terms, rates),
        rhs_layer(state, p, n, terms),
        rhs_velocity(state, p, gfield, n, terms, rates),
        gfield,
    )


# -- implicit linear part -----------------------------------------------------


class LinearPart:
    """Diagonal stiff operators: Frank elasticity on ``d``, bi-Laplacian on ``psi``, viscosity on ``v``."""

    def __init__(self, grid: Grid, p: ModelParams):
        self.grid = grid
        k2 = grid.k2
        safe = np.where(k2 == 0, 1.0, k2)
        self.khat = grid.k / np.sqrt(safe)
        self.d_par = p.gamma * p.k1 * k2
        self.d_perp = p.gamma * p.k3 * k2
        self.psi = p.lambda_p * p.k5 * k2**2
        self.v = 0.5 * p.alpha4 * k2

    def _split(self, d):
        par = self.khat * np.sum(self.khat * d, axis=0)
        return par, d - par

    def apply(self, d, psi, v):
        par, perp = self._split(d)
        return self.d_par * par + self.d_perp * perp, self.psi * psi, self.v * v

    def solve(self, d, psi, v, h):
        """``(1 + h L)^{-1}`` applied to each unknown."""
        par, perp = self._split(d)
        return (
            par / (1 + h * self.d_par) + perp / (1 + h * self.d_perp),
            psi / (1 + h * self.psi),
            v / (1 + h * self.v),
        )


def _guard(state: State) -> None:
    for name, f in (("d", state.d), ("psi", state.psi), ("v", state.v)):
        value = norm(f, state.grid)
        if not math.isfinite(value) or value > BLOWUP_NORM:
            raise BlowUpError(f"blow-up guard: ||{name}|| = {value:.3g} at t = {state.t:.6g}")


def _explicit(tend: Tendency, lin: LinearPart):
    s = tend.state
    Ld, Lpsi, Lv = lin.apply(s.d, s.psi, s.v)
    return tend.d + Ld, tend.psi + Lpsi, tend.v + Lv


def _advance(state: State, tend: Tendency, config: SolverConfig, p: ModelParams, lin: LinearPart, n: int) -> State:
    dt = config.dt
    Nd, Npsi, Nv = _explicit(tend, lin)
    if config.scheme == "imex-euler":
        d, psi, v = lin.solve(state.d + dt * Nd, state.psi + dt * Npsi, state.v + dt * Nv, dt)
    else:
        h = 0.5 * dt
        d, psi, v = lin.solve(state.d + h * Nd, state.psi + h * Npsi, state.v + h * Nv, h)
        mid = state.with_fields(d=d, psi=psi, v=v, t=state.t + h)
        tm = tendency(mid, p, n, config.forcing)
        d, psi, v = state.d + dt * tm.d, state.psi + dt * tm.psi, state.v + dt * tm.v
    new = state.with_fields(d=d, psi=psi, v=v, t=state.t + dt)
    _guard(new)
    return new


def step(state: State, config: SolverConfig, p: ModelParams) -> State:
    """One IMEX step."""
    n = config.galerkin(state.grid)
    lin = LinearPart(state.grid, p)
    return _advance(state, tendency(state, p, n, config.forcing), config, p, lin, n)


# -- trajectories -------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    """Energy and dissipation rates at one time level."""

    t: float
    energy: EnergyBreakdown
    kinetic: float
    q_sq: float
    j_sq: float
    ledger: StressPowerLedger
    quadratures: tuple
    forcing_power: float
    forcing_dual_sq: float

    @property
    def total(self) -> float:
        return self.kinetic + self.energy.total

    def dissipation_rate(self, p: ModelParams) -> float:
        return p.gamma * self.q_sq + p.lambda_p * self.j_sq + self.ledger.quad


@dataclass
class Trajectory:
    params: ModelParams
    config: SolverConfig
    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def final(self) -> State:
        return self.snapshots[-1]

    def column(self, fn) -> np.ndarray:
        return np.array([fn(r) for r in self.records])

    def cumulative(self, fn) -> np.ndarray:
        """Running trapezoid integral of ``fn(record)`` over time."""
        y = self.column(fn)
        t = self.times
        out = np.zeros_like(y)
        if len(y) > 1:
            out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
        return out


def record(tend: Tendency, p: ModelParams) -> StepRecord:
    s, g = tend.state, tend.state.grid
    q, j = tend.terms.q, tend.terms.j
    return StepRecord(
        t=s.t,
        energy=tend.terms.breakdown,
        kinetic=0.5 * inner_product(s.v, s.v, g),
        q_sq=inner_product(q, q, g),
        j_sq=inner_product(j, j, g),
        ledger=stress_power(s, q, p, tend.rates),
        quadratures=quadratures(tend.rates),
        forcing_power=inner_product(tend.forcing, s.v, g),
        forcing_dual_sq=dual_norm_sq(tend.forcing, g),
    )


def run(initial: State, config: SolverConfig, p: ModelParams, callback=None) -> Trajectory:
    """Integrate to ``t_end``, recording every step and snapshotting every ``snapshot_stride`` steps.

    ``callback(index, state, record)`` is called after each recorded level.
    On a guard trip the partial trajectory is attached to the raised :class:`BlowUpError`.
    """
    if not certify(p).present:
        warnings.warn("coefficients are not certified dissipative", RuntimeWarning, stacklevel=2)
    n = config.galerkin(initial.grid)
    lin = LinearPart(initial.grid, p)
    traj = Trajectory(p, config)
    state = initial
    steps = config.n_steps
    for i in range(steps + 1):
        tend = tendency(state, p, n, config.forcing)
        rec = record(tend, p)
        traj.records.append(rec)
        if i % config.snapshot_stride == 0 or i == steps:
            traj.snapshots.append(state)
        if callback is not None:
            callback(i, state, rec)
        if i == steps:
            break
        try:
            state = _advance(state, tend, config, p, lin, n)
        except BlowUpError as exc:
            exc.trajectory = traj
            raise
    log.debug("run finished: %d steps, t = %g", steps, state.t)
    return traj
