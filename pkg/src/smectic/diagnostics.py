"""Residual audits of the energy identities, coercivity and the a priori norms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyTerms, State, _dot, free_energy
from .params import DissipativityCertificate, ModelParams
from .solver import Trajectory
from .spectral import Grid, div, grad, inner_product, laplacian, bilaplacian, norm
from .stress import RateTerms, stress_power

SOLENOIDAL_TOL = 1e-10


@dataclass(frozen=True)
class ResidualReport:
    name: str
    value: float
    scale: float
    t: float = 0.0

    @property
    def relative(self) -> float:
        if self.scale > 0:
            return self.value / self.scale
        return 0.0 if self.value == 0 else float("inf")

    def passes(self, tol: float) -> bool:
        return self.relative <= tol

    def row(self) -> dict:
        return {"t": self.t, "name": self.name, "value": self.value, "scale": self.scale, "relative": self.relative}


def _report(name, terms, t=0.0, residual=None) -> ResidualReport:
    terms = [float(x) for x in terms]
    value = abs(sum(terms)) if residual is None else abs(residual)
    return ResidualReport(name, value, max((abs(x) for x in terms), default=0.0), t)


def is_solenoidal(v: np.ndarray, grid: Grid, tol: float = SOLENOIDAL_TOL) -> bool:
    scale = max(norm(grad(v, grid), grid), 1.0)
    return norm(div(v, grid), grid) <= tol * scale


# -- pointwise identities ---------------------------------------------------


def cancellation_residual(state: State, p: ModelParams, terms: EnergyTerms | None = None) -> ResidualReport:
    """``(T^E : grad v) - (grad(d)^T q + grad(phi) j, v)``."""
    g = state.grid
    if not is_solenoidal(state.v, g):
        raise ValueError("cancellation identity needs a solenoidal velocity")
    terms = terms or EnergyTerms(state, p)
    power = inner_product(terms.elastic_stress, grad(state.v, g), g)
    force = g.evaluate(
        lambda G, q, y, j: np.einsum("ik...,i...->k...", G, q) + y * j,
        grad(state.d, g), terms.q, terms.grad_phi, terms.j,
    )
    work = inner_product(force, state.v, g)
    return _report("cancellation", [power, -work], state.t)


def advection_neutrality_residual(state: State, p: ModelParams, terms: EnergyTerms | None = None) -> ResidualReport:
    """``((v.grad) d, q) + ((v.grad) phi, j) - (grad(d)^T q + grad(phi) j, v)``."""
    g = state.grid
    terms = terms or EnergyTerms(state, p)
    grad_d = grad(state.d, g)
    adv_d = g.evaluate(lambda v, G: np.einsum("k...,ik...->i...", v, G), state.v, grad_d)
    adv_phi = g.evaluate(_dot, state.v, terms.grad_phi)
    force_d = g.evaluate(lambda G, q: np.einsum("ik...,i...->k...", G, q), grad_d, terms.q)
    force_phi = g.evaluate(lambda y, j: y * j, terms.grad_phi, terms.j)
    parts = [
        inner_product(adv_d, terms.q, g),
        inner_product(adv_phi, terms.j, g),
        -inner_product(force_d, state.v, g),
        -inner_product(force_phi, state.v, g),
    ]
    return _report("advection_neutrality", parts, state.t)


def q_cross_residual(state: State, p: ModelParams, terms: EnergyTerms | None = None) -> ResidualReport:
    """Viscous q-coupled power plus the matching director-equation terms."""
    g = state.grid
    terms = terms or EnergyTerms(state, p)
    rates = RateTerms(g, state.d, terms.a, state.v)
    ledger = stress_power(state, terms.q, p, rates)
    q = terms.q
    director = [
        p.lambda_ * inner_product(rates.U, q, g),
        2 * p.kappa1 * p.gamma * inner_product(rates.V, q, g),
        -inner_product(rates.Wd, q, g),
    ]
    return _report("q_cross", [*ledger.q_cross.values(), *director], state.t)


def stress_power_residual(state: State, p: ModelParams, terms: EnergyTerms | None = None) -> ResidualReport:
    from .stress import viscous_stress_discrete

    g = state.grid
    terms = terms or EnergyTerms(state, p)
    rates = RateTerms(g, state.d, terms.a, state.v)
    ledger = stress_power(state, terms.q, p, rates)
    power = inner_product(viscous_stress_discrete(state, terms.q, p, rates), rates.grad_v, g)
    return ResidualReport("stress_power", abs(power - ledger.total), max(ledger.scale, abs(power)), state.t)


# -- coercivity -------------------------------------------------------------


@dataclass(frozen=True)
class CoercivityResult:
    energy: float
    bound: float

    @property
    def margin(self) -> float:
        return self.energy - self.bound

    @property
    def scale(self) -> float:
        return max(abs(self.energy), abs(self.bound))

    def passes(self, rtol: float = 1e-12) -> bool:
        return self.margin >= -rtol * self.scale


def coercivity_check(state: State, p: ModelParams) -> CoercivityResult:
    """``F >= min(k1, k3, k5) (||grad d||^2 + ||lap psi||^2) / 2`` on the torus."""
    g = state.grid
    grad_d = grad(state.d, g)
    lap = laplacian(state.psi, g)
    bound = p.k_min * 0.5 * (inner_product(grad_d, grad_d, g) + inner_product(lap, lap, g))
    return CoercivityResult(free_energy(state, p).total, bound)


# -- trajectory audits --------------------------------------------------------


def _centered(t, y):
    return (y[2:] - y[:-2]) / (t[2:] - t[:-2])


def chain_rule_residual(snapshots: list[State], p: ModelParams) -> ResidualReport:
    """Compare centred ``dF/dt`` with ``(d_t d, q) + (d_t psi, j)`` at the middle snapshot."""
    if len(snapshots) < 3:
        raise ValueError("chain rule check needs at least 3 snapshots")
    s0, s1, s2 = snapshots[-3:]
    g = s1.grid
    h = s2.t - s0.t
    dF = (free_energy(s2, p).total - free_energy(s0, p).total) / h
    terms = EnergyTerms(s1, p)
    rate = inner_product((s2.d - s0.d) / h, terms.q, g) + inner_product((s2.psi - s0.psi) / h, terms.j, g)
    return ResidualReport("chain_rule", abs(dF - rate), max(abs(dF), abs(rate)), s1.t)


def energy_identity_residual(traj: Trajectory) -> list[ResidualReport]:
    """``R(t)``: energy change plus dissipated, minus forcing work, plus indefinite viscous power."""
    p = traj.params
    t = traj.times
    E = traj.column(lambda r: r.total)
    diss = traj.cumulative(lambda r: r.dissipation_rate(p))
    work = traj.cumulative(lambda r: r.forcing_power)
    indef = traj.cumulative(lambda r: r.ledger.indefinite)
    R = (E - E[0]) + diss - work + indef
    scale = np.maximum.reduce([np.abs(E), np.abs(diss), np.abs(work), np.abs(indef)])
    scale = np.maximum(scale, abs(E[0]))
    return [ResidualReport("energy_law", abs(r), s, float(ti)) for r, s, ti in zip(R, scale, t)]


def energy_law_max(traj: Trajectory) -> float:
    return max(r.value for r in energy_identity_residual(traj))


@dataclass(frozen=True)
class InequalityPoint:
    t: float
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def energy_inequality_check(traj: Trajectory, cert: DissipativityCertificate, tol: float = 0.0) -> list[InequalityPoint]:
    """Absorbed inequality with the certificate's betas and constant ``1/alpha4`` on the forcing."""
    if not cert.present:
        raise ValueError("energy inequality needs a dissipativity certificate")
    p = traj.params
    betas = cert.betas
    E = traj.column(lambda r: r.total)
    diss = traj.cumulative(
        lambda r: p.gamma * r.q_sq + p.lambda_p * r.j_sq + sum(b * x for b, x in zip(betas, r.quadratures))
    )
    force = traj.cumulative(lambda r: r.forcing_dual_sq) / p.alpha4
    return [InequalityPoint(float(t), float(e + dd), float(E[0] + f + tol))
            for t, e, dd, f in zip(traj.times, E, diss, force)]


# -- norm ledger --------------------------------------------------------------

LEDGER_NORMS = ("v", "grad_d", "lap_psi", "lap_d", "bilap_psi", "Dv", "d_Dv_d", "a_Dv_a", "Dv_d", "Dv_a", "d_Dv_a")

# exponent theta of the strong norm in each interpolation ratio (weak norm gets 1 - theta)
INTERPOLATION = {
    "grad_d_L16/5": 9 / 16,
    "d_L48/5": 0.1875,
    "hess_phi_L24/7": 15 / 96,
    "grad_phi_L12": 1 / 16,
}


def lp_norm(values: np.ndarray, grid: Grid, power: float) -> float:
    """``L^p`` norm of grid values (vector/tensor: Euclidean magnitude pointwise)."""
    mag = np.abs(values) if values.ndim == 3 else np.sqrt(np.sum(values.reshape(-1, *values.shape[-3:]) ** 2, axis=0))
    return float((np.mean(mag**power) * grid.volume) ** (1 / power))


@dataclass
class NormLedger:
    times: list = field(default_factory=list)
    norms: dict = field(default_factory=lambda: {k: [] for k in LEDGER_NORMS})
    interpolation: dict = field(default_factory=lambda: {k: [] for k in INTERPOLATION})
    velocity_lp: dict = field(default_factory=dict)
    integrals: dict = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        return np.asarray(self.norms[name])

    def rows(self):
        for i, t in enumerate(self.times):
            row = {"t": t}
            row.update({k: v[i] for k, v in self.norms.items()})
            row.update({f"ratio_{k}": v[i] for k, v in self.interpolation.items()})
            yield row


def snapshot_norms(state: State, p: ModelParams) -> dict:
    g = state.grid
    terms = EnergyTerms(state, p)
    r = RateTerms(g, state.d, terms.a, state.v)
    fields = {
        "v": state.v,
        "grad_d": grad(state.d, g),
        "lap_psi": laplacian(state.psi, g),
        "lap_d": laplacian(state.d, g),
        "bilap_psi": bilaplacian(state.psi, g),
        "Dv": r.Dv,
        "d_Dv_d": r.X,
        "a_Dv_a": r.Y,
        "Dv_d": r.U,
        "Dv_a": r.V,
        "d_Dv_a": r.Z,
    }
    return {k: norm(f, g) for k, f in fields.items()}


def _ratio(num, strong, weak, theta):
    den = strong**theta * weak ** (1 - theta)
    return num / den if den > 0 else 0.0


def interpolation_ratios(state: State) -> dict:
    """Report-only ratios of the interpolation norms against their strong/weak factors."""
    g = state.grid
    shape = g.pad_shape(2)
    phys = lambda f: g.to_physical(f, shape)  # noqa: E731
    grad_d = grad(state.d, g)
    hess = grad(grad(state.psi, g), g)
    gphi = state.layer.gradient(g)
    return {
        "grad_d_L16/5": _ratio(lp_norm(phys(grad_d), g, 16 / 5), norm(laplacian(state.d, g), g), norm(grad_d, g), 9 / 16),
        "d_L48/5": _ratio(lp_norm(phys(state.d), g, 48 / 5), norm(laplacian(state.d, g), g) + norm(state.d, g),
                          norm(grad_d, g) + norm(state.d, g), 0.1875),
        "hess_phi_L24/7": _ratio(lp_norm(phys(hess), g, 24 / 7), norm(bilaplacian(state.psi, g), g),
                                 norm(hess, g), 15 / 96),
        "grad_phi_L12": _ratio(lp_norm(phys(gphi), g, 12), norm(bilaplacian(state.psi, g), g) + norm(gphi, g),
                               norm(laplacian(state.psi, g), g) + norm(gphi, g), 1 / 16),
    }


def velocity_space_time_norms(snapshots: list[State], pairs=((2, 6), (4, 3))) -> dict:
    """``||v||_{L^r(0,T; L^p)}`` by the trapezoid rule over the snapshots."""
    out = {}
    if not snapshots:
        return out
    g = snapshots[0].grid
    t = np.array([s.t for s in snapshots])
    for r, pw in pairs:
        vals = np.array([lp_norm(g.to_physical(s.v, g.pad_shape(2)), g, pw) ** r for s in snapshots])
        integral = np.trapezoid(vals, t) if len(t) > 1 else 0.0
        out[f"v_L{r}_L{pw}"] = float(integral ** (1 / r))
    return out


def norm_ledger(traj: Trajectory, cert: DissipativityCertificate | None = None) -> NormLedger:
    p = traj.params
    ledger = NormLedger()
    for s in traj.snapshots:
        ledger.times.append(s.t)
        for k, v in snapshot_norms(s, p).items():
            ledger.norms[k].append(v)
        for k, v in interpolation_ratios(s).items():
            ledger.interpolation[k].append(v)
    ledger.velocity_lp = velocity_space_time_norms(traj.snapshots)
    last = -1
    ledger.integrals = {
        "gamma_q2": float(traj.cumulative(lambda r: p.gamma * r.q_sq)[last]),
        "lambda_p_j2": float(traj.cumulative(lambda r: p.lambda_p * r.j_sq)[last]),
    }
    for i, name in enumerate(("Dv", "d_Dv_d", "Dv_d", "a_Dv_a", "Dv_a", "d_Dv_a")):
        ledger.integrals[f"int_{name}_sq"] = float(traj.cumulative(lambda r, i=i: r.quadratures[i])[last])
    return ledger


@dataclass(frozen=True)
class BoundCheck:
    name: str
    value: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.value <= self.bound * (1 + 1e-12) + 1e-14


def a_priori_bounds(traj: Trajectory, cert: DissipativityCertificate, slack: float = 0.0) -> list[BoundCheck]:
    """Bounds implied by the initial energy (g = 0): only those with an explicit constant.

    ``slack`` absorbs the time-discretization error of the discrete energy.
    """
    p = traj.params
    E0 = traj.records[0].total + slack
    kmin = p.k_min
    out = []
    for s in traj.snapshots:
        g = s.grid
        grad_d = grad(s.d, g)
        lap = laplacian(s.psi, g)
        out.append(BoundCheck(f"v@{s.t:.6g}", 0.5 * inner_product(s.v, s.v, g), E0))
        out.append(BoundCheck(f"grad_d@{s.t:.6g}", inner_product(grad_d, grad_d, g), 2 * E0 / kmin))
        out.append(BoundCheck(f"lap_psi@{s.t:.6g}", inner_product(lap, lap, g), 2 * E0 / kmin))
    betas = cert.betas if cert.present else None
    out.append(BoundCheck("int_gamma_q2", float(traj.cumulative(lambda r: p.gamma * r.q_sq)[-1]), E0))
    out.append(BoundCheck("int_lambda_p_j2", float(traj.cumulative(lambda r: p.lambda_p * r.j_sq)[-1]), E0))
    if betas:
        for i, b in enumerate(betas):
            out.append(BoundCheck(f"int_beta{i + 1}", b * float(traj.cumulative(lambda r, i=i: r.quadratures[i])[-1]), E0))
    return out
