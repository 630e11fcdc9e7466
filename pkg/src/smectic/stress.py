"""Viscous stress, material derivative and the stress-power ledger.

Contractions below follow one convention throughout: ``(grad v)_ij = d_j v_i``,
``Dv`` and ``Wv`` are its symmetric and skew parts, ``(A d)_i = A_ij d_j`` and
``T : grad v = T_kl d_l v_k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .energy import State, layer_normal
from .params import ModelParams
from .spectral import Grid, grad, inner_product, skw, sym

LEDGER_QUAD = ("alpha1", "alpha4", "c5", "tau1", "c2", "kappa2")
LEDGER_CROSS = ("lambda", "skew", "kappa1")
LEDGER_INDEF = ("kappa3", "kappa4", "kappa5", "kappa6")


def _mv(A, x):
    return np.einsum("ij...,j...->i...", A, x)


def _qf(x, A, y):
    return np.einsum("i...,ij...,j...->...", x, A, y)


def _outer(x, y):
    return np.einsum("i...,j...->ij...", x, y)


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, 0, 1))


def _skw(A):
    return 0.5 * (A - np.swapaxes(A, 0, 1))


@dataclass(eq=False)
class RateTerms:
    """Projected rate-of-strain products shared by the stress and its ledger.

    ``X = P(d.Dv d)``, ``Y = P(a.Dv a)``, ``Z = P(d.Dv a)``, ``U = P(Dv d)``, ``V = P(Dv a)``.
    """

    grid: Grid
    d: np.ndarray
    a: np.ndarray
    v: np.ndarray

    @cached_property
    def grad_v(self) -> np.ndarray:
        return grad(self.v, self.grid)

    @cached_property
    def Dv(self) -> np.ndarray:
        return sym(self.grad_v)

    @cached_property
    def Wv(self) -> np.ndarray:
        return skw(self.grad_v)

    @cached_property
    def X(self) -> np.ndarray:
        return self.grid.evaluate(lambda d, D: _qf(d, D, d), self.d, self.Dv, degree=3)

    @cached_property
    def Y(self) -> np.ndarray:
        return self.grid.evaluate(lambda a, D: _qf(a, D, a), self.a, self.Dv, degree=3)

    @cached_property
    def Z(self) -> np.ndarray:
        return self.grid.evaluate(lambda d, D, a: _qf(d, D, a), self.d, self.Dv, self.a, degree=3)

    @cached_property
    def U(self) -> np.ndarray:
        return self.grid.evaluate(_mv, self.Dv, self.d)

    @cached_property
    def V(self) -> np.ndarray:
        return self.grid.evaluate(_mv, self.Dv, self.a)

    @cached_property
    def Wd(self) -> np.ndarray:
        return self.grid.evaluate(_mv, self.Wv, self.d)


def rate_terms(state: State, p: ModelParams, a: np.ndarray | None = None) -> RateTerms:
    if a is None:
        a = layer_normal(state.layer, p.normal_mode, state.grid)
    return RateTerms(state.grid, state.d, a, state.v)


def material_derivative(state: State, dt_d: np.ndarray) -> np.ndarray:
    """``d_t d + (v.grad) d - Wv d`` with dealiased products."""
    g = state.grid
    grad_d = grad(state.d, g)
    Wv = skw(grad(state.v, g))
    return dt_d + g.evaluate(
        lambda v, G, W, d: np.einsum("k...,ik...->i...", v, G) - _mv(W, d),
        state.v, grad_d, Wv, state.d,
    )


def viscous_stress_discrete(state: State, q: np.ndarray, p: ModelParams,
                            rates: RateTerms | None = None) -> np.ndarray:
    """Viscous stress with the director time derivative eliminated through ``q``."""
    r = rates or rate_terms(state, p)
    lam, gam, k1 = p.lambda_, p.gamma, p.kappa1
    shift = p.kappa6 - lam * k1

    def assemble(d, a, qq, D, X, Y, Z, U, V):
        dd, aa, da = _outer(d, d), _outer(a, a), _sym(_outer(d, a))
        return (
            p.alpha1 * X * dd
            + p.c5 * _sym(_outer(d, U))
            + 2 * shift * (_sym(_outer(V, d)) + _sym(_outer(U, a)))
            - lam * _sym(_outer(qq, d))
            + _skw(_outer(qq, d))
            + p.alpha4 * D
            + p.tau1 * Y * aa
            + p.c2 * _sym(_outer(a, V))
            - 2 * k1 * gam * _sym(_outer(a, qq))
            + 2 * p.kappa2 * Z * da
            + p.kappa3 * (X * aa + Y * dd)
            + 2 * p.kappa4 * (Z * dd + X * da)
            + 2 * p.kappa5 * (Z * aa + Y * da)
        )

    return r.grid.evaluate(assemble, r.d, r.a, q, r.Dv, r.X, r.Y, r.Z, r.U, r.V, degree=3)


def viscous_stress_original(state: State, d_ring: np.ndarray, p: ModelParams,
                            rates: RateTerms | None = None) -> np.ndarray:
    """Viscous stress written with the material derivative ``d_ring`` of the director."""
    r = rates or rate_terms(state, p)
    lam, gam, k1 = p.lambda_, p.gamma, p.kappa1

    def assemble(d, a, dr, D, X, Y, Z, U, V):
        dd, aa, da = _outer(d, d), _outer(a, a), _sym(_outer(d, a))
        return (
            p.alpha1 * X * dd
            + (lam / gam) * _sym(_outer(d, dr))
            + (1 / gam) * _skw(_outer(d, dr))
            + p.alpha4 * D
            + 2 * p.alpha5 * _sym(_outer(d, U))
            + (lam / gam) * _outer(d, U)
            + p.tau1 * Y * aa
            + 2 * p.tau2 * _sym(_outer(a, V))
            + 2 * k1 * (_sym(_outer(a, dr)) + _skw(_outer(d, V)))
            + 2 * p.kappa2 * Z * da
            + p.kappa3 * (X * aa + Y * dd)
            + 2 * p.kappa4 * (Z * dd + X * da)
            + 2 * p.kappa5 * (Z * aa + Y * da)
            + 2 * p.kappa6 * (_sym(_outer(d, V)) + _sym(_outer(a, U)))
        )

    return r.grid.evaluate(assemble, r.d, r.a, d_ring, r.Dv, r.X, r.Y, r.Z, r.U, r.V, degree=3)


def director_ring_from_q(state: State, q: np.ndarray, p: ModelParams,
                         rates: RateTerms | None = None) -> np.ndarray:
    """Material derivative implied by the director equation: ``-lambda Dv d - 2 kappa1 gamma Dv a - gamma q``."""
    r = rates or rate_terms(state, p)
    return -p.lambda_ * r.U - 2 * p.kappa1 * p.gamma * r.V - p.gamma * q


@dataclass(frozen=True)
class StressPowerLedger:
    quad_terms: dict
    q_cross: dict
    sign_indefinite: dict

    @property
    def quad(self) -> float:
        return float(sum(self.quad_terms.values()))

    @property
    def cross(self) -> float:
        return float(sum(self.q_cross.values()))

    @property
    def indefinite(self) -> float:
        return float(sum(self.sign_indefinite.values()))

    @property
    def total(self) -> float:
        return self.quad + self.cross + self.indefinite

    @property
    def scale(self) -> float:
        values = [*self.quad_terms.values(), *self.q_cross.values(), *self.sign_indefinite.values()]
        return max(abs(x) for x in values)

    def as_dict(self) -> dict:
        out = {f"quad_{k}": v for k, v in self.quad_terms.items()}
        out.update({f"cross_{k}": v for k, v in self.q_cross.items()})
        out.update({f"indef_{k}": v for k, v in self.sign_indefinite.items()})
        return out


def stress_power(state: State, q: np.ndarray, p: ModelParams,
                 rates: RateTerms | None = None) -> StressPowerLedger:
    """Each entry of the viscous power computed from its own inner product."""
    r = rates or rate_terms(state, p)
    g = r.grid

    def ip(f, h):
        return inner_product(f, h, g)

    quad = {
        "alpha1": p.alpha1 * ip(r.X, r.X),
        "alpha4": p.alpha4 * ip(r.Dv, r.Dv),
        "c5": p.c5 * ip(r.U, r.U),
        "tau1": p.tau1 * ip(r.Y, r.Y),
        "c2": p.c2 * ip(r.V, r.V),
        "kappa2": 2 * p.kappa2 * ip(r.Z, r.Z),
    }
    cross = {
        "lambda": -p.lambda_ * ip(r.U, q),
        "skew": ip(q, r.Wd),
        "kappa1": -2 * p.kappa1 * p.gamma * ip(r.V, q),
    }
    indef = {
        "kappa3": 2 * p.kappa3 * ip(r.X, r.Y),
        "kappa4": 4 * p.kappa4 * ip(r.Z, r.X),
        "kappa5": 4 * p.kappa5 * ip(r.Z, r.Y),
        "kappa6": 4 * (p.kappa6 - p.kappa1 * p.lambda_) * ip(r.U, r.V),
    }
    return StressPowerLedger(quad, cross, indef)


def quadratures(rates: RateTerms) -> tuple[float, ...]:
    """Squared norms paired with beta1..beta6: ``||Dv||^2, ||X||^2, ||U||^2, ||Y||^2, ||V||^2, ||Z||^2``."""
    g = rates.grid
    return tuple(inner_product(f, f, g) for f in (rates.Dv, rates.X, rates.U, rates.Y, rates.V, rates.Z))
