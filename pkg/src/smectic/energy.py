"""Free energy, layer normal, variational derivatives and elastic stress.

The discrete free energy is assembled from L2 projections of the pointwise
nonlinearities (``S = P(|grad phi|^2) + P(d.a) - 2`` and so on) and every
derivative below is the exact gradient of that discrete functional.  For
band-limited data whose products stay resolved the discrete and continuous
energies coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .params import ModelParams, NormalMode
from .spectral import (
    Grid,
    bilaplacian,
    constant,
    curl,
    div,
    grad,
    inner_product,
    laplacian,
    leray_project,
    norm,
    prolong,
    random_field,
    truncate,
)


@dataclass(frozen=True)
class LayerField:
    """Layer function ``phi(x) = pitch . x + psi(x)`` with periodic ``psi``."""

    pitch: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pitch", np.asarray(self.pitch, dtype=float).reshape(3))

    def gradient(self, grid: Grid) -> np.ndarray:
        g = grad(self.psi, grid)
        g[:, 0, 0, 0] += self.pitch
        return g


@dataclass(frozen=True, eq=False)
class State:
    grid: Grid
    d: np.ndarray
    layer: LayerField
    v: np.ndarray
    t: float = 0.0

    @property
    def psi(self) -> np.ndarray:
        return self.layer.psi

    @property
    def pitch(self) -> np.ndarray:
        return self.layer.pitch

    def replace(self, **changes) -> "State":
        return replace(self, **changes)

    def with_fields(self, d=None, psi=None, v=None, t=None) -> "State":
        return State(
            self.grid,
            self.d if d is None else d,
            self.layer if psi is None else LayerField(self.pitch, psi),
            self.v if v is None else v,
            self.t if t is None else t,
        )

    def max_norm(self) -> float:
        return max(norm(self.d, self.grid), norm(self.psi, self.grid), norm(self.v, self.grid))


# -- state construction -------------------------------------------------


def ground_state(grid: Grid, pitch=(0.0, 0.0, 1.0)) -> State:
    """``d = e3``, ``phi = x3``: every energy term and both derivatives vanish."""
    pitch = np.asarray(pitch, dtype=float)
    d = constant(pitch / np.linalg.norm(pitch), grid) if np.any(pitch) else constant((0, 0, 1), grid)
    return State(grid, d, LayerField(pitch, grid.zeros()), grid.zeros(1))


def random_state(grid: Grid, rng: np.random.Generator, band: int = 2, amplitude: float = 0.3,
                 psi_amplitude: float | None = None, v_amplitude: float | None = None,
                 pitch=(0.0, 0.0, 1.0), about_ground: bool = True) -> State:
    """Band-limited random perturbation of the ground state (``about_ground``) or of zero."""
    base = ground_state(grid, pitch) if about_ground else State(
        grid, grid.zeros(1), LayerField(pitch, grid.zeros()), grid.zeros(1))
    psi_amplitude = amplitude if psi_amplitude is None else psi_amplitude
    v_amplitude = amplitude if v_amplitude is None else v_amplitude
    d = base.d + random_field(grid, rng, 1, band, amplitude)
    psi = random_field(grid, rng, 0, band, psi_amplitude)
    v = leray_project(random_field(grid, rng, 1, band, v_amplitude), grid)
    return State(grid, d, LayerField(base.pitch, psi), v)


def random_solenoidal(grid: Grid, rng: np.random.Generator, band: int = 2, amplitude: float = 1.0) -> np.ndarray:
    return leray_project(random_field(grid, rng, 1, band, amplitude), grid)


def resolved_size(grid: Grid, band: int | None = None) -> int:
    """Modes per axis at which no intermediate of the energy, its derivatives or stress is truncated."""
    band = max(grid.shape) // 2 - 1 if band is None else band
    return 8 * band + 2


def refine(state: State, n: int) -> State:
    """The same band-limited state represented on an ``n``-mode grid."""
    fine = Grid(n, state.grid.lengths)
    up = lambda f: prolong(f, state.grid, fine)  # noqa: E731
    return State(fine, up(state.d), LayerField(state.pitch, up(state.psi)), up(state.v), state.t)


# -- layer normal ---------------------------------------------------------


def _rho(y: np.ndarray, eps: float) -> np.ndarray:
    return 1.0 / np.sqrt(np.sum(y * y, axis=0) + eps**2)


def relaxed_normal_values(y: np.ndarray, eps: float) -> np.ndarray:
    """Pointwise ``y rho_eps(y)`` with ``rho_eps(y) = 1/sqrt(|y|^2 + eps^2)``."""
    return y * _rho(y, eps)


def relaxed_normal_adjoint(y: np.ndarray, X: np.ndarray, eps: float) -> np.ndarray:
    """Pointwise ``(rho I + y (x) rho')^T X`` with ``rho'(y) = -y (|y|^2+eps^2)^{-3/2}``."""
    r = _rho(y, eps)
    return r * X - y * (r**3 * np.sum(y * X, axis=0))


def layer_normal(layer: LayerField, mode: NormalMode, grid: Grid) -> np.ndarray:
    y = layer.gradient(grid)
    if not mode.is_relaxed:
        return y
    return grid.evaluate(lambda g: relaxed_normal_values(g, mode.eps), y)


# -- energy ---------------------------------------------------------------

ENERGY_TERMS = ("splay", "bend", "layer_bend", "coupling_B0", "coupling_B1", "penalty_d", "penalty_grad_phi")


@dataclass(frozen=True)
class EnergyBreakdown:
    splay: float
    bend: float
    layer_bend: float
    coupling_B0: float
    coupling_B1: float
    penalty_d: float
    penalty_grad_phi: float

    @property
    def total(self) -> float:
        return float(sum(getattr(self, name) for name in ENERGY_TERMS))

    def as_dict(self) -> dict:
        out = {name: getattr(self, name) for name in ENERGY_TERMS}
        out["total"] = self.total
        return out


def _dot(a, b):
    return np.einsum("i...,i...->...", a, b)


@dataclass(eq=False)
class EnergyTerms:
    """Intermediate quantities shared by the energy and its derivatives at one state."""

    state: State
    p: ModelParams
    n: int | None = None

    @property
    def grid(self) -> Grid:
        return self.state.grid

    def project(self, f: np.ndarray) -> np.ndarray:
        return f if self.n is None else truncate(f, self.n, self.grid)

    @cached_property
    def grad_phi(self) -> np.ndarray:
        return self.state.layer.gradient(self.grid)

    @cached_property
    def a(self) -> np.ndarray:
        return layer_normal(self.state.layer, self.p.normal_mode, self.grid)

    @cached_property
    def grad_phi_sq(self) -> np.ndarray:
        return self.grid.evaluate(lambda y: _dot(y, y), self.grad_phi)

    @cached_property
    def S(self) -> np.ndarray:
        """``|grad phi|^2 + d.a - 2`` (projected)."""
        da = self.grid.evaluate(_dot, self.state.d, self.a)
        return self.grad_phi_sq + da - constant(2.0, self.grid)

    @cached_property
    def cross(self) -> np.ndarray:
        return self.grid.evaluate(lambda d, a: np.cross(d, a, axis=0), self.state.d, self.a)

    @cached_property
    def pen_d(self) -> np.ndarray:
        return self.grid.evaluate(lambda d: _dot(d, d), self.state.d) - constant(1.0, self.grid)

    @cached_property
    def pen_phi(self) -> np.ndarray:
        return self.grad_phi_sq - constant(1.0, self.grid)

    @cached_property
    def div_d(self) -> np.ndarray:
        return div(self.state.d, self.grid)

    @cached_property
    def curl_d(self) -> np.ndarray:
        return curl(self.state.d, self.grid)

    @cached_property
    def lap_psi(self) -> np.ndarray:
        return laplacian(self.state.psi, self.grid)

    @cached_property
    def breakdown(self) -> EnergyBreakdown:
        g, p = self.grid, self.p

        def sq(f):
            return inner_product(f, f, g)

        return EnergyBreakdown(
            splay=0.5 * p.k1 * sq(self.div_d),
            bend=0.5 * p.k3 * sq(self.curl_d),
            layer_bend=0.5 * p.k5 * sq(self.lap_psi),
            coupling_B0=0.5 * p.B0 * sq(self.S),
            coupling_B1=0.5 * p.B1 * sq(self.cross),
            penalty_d=sq(self.pen_d) / (4 * p.eps1),
            penalty_grad_phi=sq(self.pen_phi) / (4 * p.eps2),
        )

    # -- derivatives ----------------------------------------------------

    @cached_property
    def q_linear(self) -> np.ndarray:
        """``-k1 grad(div d) + k3 curl curl d``."""
        g, p = self.grid, self.p
        return -p.k1 * grad(self.div_d, g) + p.k3 * curl(self.curl_d, g)

    @cached_property
    def q(self) -> np.ndarray:
        p = self.p
        d = self.state.d
        nonlinear = self.grid.evaluate(
            lambda S, a, c, pen, dd: p.B0 * S * a + p.B1 * np.cross(a, c, axis=0) + pen * dd / p.eps1,
            self.S, self.a, self.cross, self.pen_d, d,
        )
        return self.project(self.q_linear + nonlinear)

    @cached_property
    def dF_da(self) -> np.ndarray:
        """Partial derivative of the energy density with respect to the normal slot."""
        p = self.p
        return self.grid.evaluate(
            lambda S, d, c: p.B0 * S * d + p.B1 * np.cross(c, d, axis=0),
            self.S, self.state.d, self.cross,
        )

    @cached_property
    def flux(self) -> np.ndarray:
        """Derivative of the energy density with respect to ``grad phi`` (no ``k5`` part)."""
        p = self.p
        explicit = self.grid.evaluate(
            lambda S, y, pen: 2 * p.B0 * S * y + pen * y / p.eps2,
            self.S, self.grad_phi, self.pen_phi,
        )
        mode = p.normal_mode
        if mode.is_relaxed:
            chain = self.grid.evaluate(
                lambda y, X: relaxed_normal_adjoint(y, X, mode.eps), self.grad_phi, self.dF_da
            )
        else:
            chain = self.dF_da
        return explicit + chain

    @cached_property
    def dF_db(self) -> np.ndarray:
        """Variational derivative with respect to ``b = grad phi``."""
        return self.flux - self.p.k5 * grad(self.lap_psi, self.grid)

    @cached_property
    def j(self) -> np.ndarray:
        g = self.grid
        return self.project(self.p.k5 * bilaplacian(self.state.psi, g) - div(self.flux, g))

    @cached_property
    def elastic_stress(self) -> np.ndarray:
        g, p = self.grid, self.p
        grad_d = grad(self.state.d, g)
        dF_dgrad_d = p.k1 * np.eye(3)[:, :, None, None, None] * self.div_d + p.k3 * (
            grad_d - np.swapaxes(grad_d, 0, 1)
        )
        hess = grad(grad(self.state.psi, g), g)
        return g.evaluate(
            lambda G, A, y, b, H, lap: np.einsum("ik...,il...->kl...", G, A)
            + np.einsum("k...,l...->kl...", y, b)
            + p.k5 * lap * H,
            grad_d, dF_dgrad_d, self.grad_phi, self.dF_db, hess, self.lap_psi,
        )


def free_energy(state: State, p: ModelParams) -> EnergyBreakdown:
    return EnergyTerms(state, p).breakdown


def variational_q(state: State, p: ModelParams) -> np.ndarray:
    return EnergyTerms(state, p).q


def variational_j(state: State, p: ModelParams) -> np.ndarray:
    return EnergyTerms(state, p).j


def elastic_stress(state: State, p: ModelParams) -> np.ndarray:
    return EnergyTerms(state, p).elastic_stress


def energy_density(state: State, p: ModelParams, shape=None) -> np.ndarray:
    """Pointwise energy density on a physical grid, straight from the formula.

    Used as an independent quadrature check of :func:`free_energy`.
    """
    g = state.grid
    shape = shape or g.pad_shape(4)
    phys = lambda f: g.to_physical(f, shape)  # noqa: E731
    d = phys(state.d)
    y = phys(state.layer.gradient(g))
    div_d = phys(div(state.d, g))
    curl_d = phys(curl(state.d, g))
    lap = phys(laplacian(state.psi, g))
    mode = p.normal_mode
    a = relaxed_normal_values(y, mode.eps) if mode.is_relaxed else y
    dy = _dot(y, y)
    W = (
        0.5 * p.k1 * div_d**2
        + 0.5 * p.k3 * _dot(curl_d, curl_d)
        + 0.5 * p.k5 * lap**2
        + 0.5 * p.B0 * (dy + _dot(d, a) - 2) ** 2
        + 0.5 * p.B1 * _dot(np.cross(d, a, axis=0), np.cross(d, a, axis=0))
    )
    return W + (_dot(d, d) - 1) ** 2 / (4 * p.eps1) + (dy - 1) ** 2 / (4 * p.eps2)
