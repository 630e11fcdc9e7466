"""Model coefficients and the dissipativity certificate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

COEFFICIENTS = (
    "lambda_", "kappa1", "kappa2", "kappa3", "kappa4", "kappa5", "kappa6",
    "gamma", "lambda_p", "alpha1", "alpha4", "alpha5", "tau1", "tau2",
    "k1", "k3", "k5", "B0", "B1", "eps1", "eps2",
)

_STRICTLY_POSITIVE = ("gamma", "lambda_p", "eps1", "eps2", "k1", "k3", "k5", "B0", "B1")


@dataclass(frozen=True)
class NormalMode:
    """Layer normal: ``a = grad(phi)`` or the relaxed ``grad(phi) / sqrt(|grad(phi)|^2 + eps^2)``."""

    kind: str = "gradient"
    eps: float | None = None

    def __post_init__(self):
        if self.kind not in ("gradient", "relaxed"):
            raise ValueError(f"unknown normal mode {self.kind!r}")
        if self.kind == "relaxed" and not (self.eps is not None and self.eps > 0):
            raise ValueError("relaxed normal needs eps > 0")

    @classmethod
    def relaxed(cls, eps: float) -> "NormalMode":
        return cls("relaxed", float(eps))

    @property
    def is_relaxed(self) -> bool:
        return self.kind == "relaxed"

    def __str__(self):
        return "gradient" if self.kind == "gradient" else f"relaxed(eps={self.eps:g})"


@dataclass(frozen=True)
class ModelParams:
    lambda_: float
    kappa1: float
    kappa2: float
    kappa3: float
    kappa4: float
    kappa5: float
    kappa6: float
    gamma: float
    lambda_p: float
    alpha1: float
    alpha4: float
    alpha5: float
    tau1: float
    tau2: float
    k1: float
    k3: float
    k5: float
    B0: float
    B1: float
    eps1: float
    eps2: float
    normal_mode: NormalMode = field(default_factory=NormalMode)

    def __post_init__(self):
        for name in _STRICTLY_POSITIVE:
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")

    @property
    def c5(self) -> float:
        """Combined director viscosity ``2 alpha5 + lambda/gamma - lambda^2/gamma``."""
        return 2 * self.alpha5 + self.lambda_ / self.gamma - self.lambda_**2 / self.gamma

    @property
    def c2(self) -> float:
        """Combined normal viscosity ``2 tau2 - 4 kappa1^2 gamma``."""
        return 2 * self.tau2 - 4 * self.kappa1**2 * self.gamma

    @property
    def k_min(self) -> float:
        return min(self.k1, self.k3, self.k5)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "normal_mode"}
        out["normal_mode"] = str(self.normal_mode)
        return out


def default_params(**changes) -> ModelParams:
    """Certified O(1) coefficient set used by the desk-scale runs."""
    base = dict(
        lambda_=0.5, kappa1=0.1, kappa2=1.0, kappa3=0.1, kappa4=0.1, kappa5=0.1, kappa6=0.15,
        gamma=1.0, lambda_p=1.0, alpha1=1.0, alpha4=1.0, alpha5=0.5, tau1=1.0, tau2=1.0,
        k1=1.0, k3=1.0, k5=1.0, B0=1.0, B1=1.0, eps1=1.0, eps2=1.0,
    )
    base.update(changes)
    return ModelParams(**base)


# -- dissipativity --------------------------------------------------------


def validate_positivity(p: ModelParams) -> list[tuple[str, float, bool]]:
    """Strict positivity of the viscous and permeation coefficients."""
    rows = [
        ("lambda_p", p.lambda_p),
        ("gamma", p.gamma),
        ("alpha1", p.alpha1),
        ("alpha4", p.alpha4),
        ("2alpha5+lambda/gamma-lambda^2/gamma", p.c5),
        ("tau1", p.tau1),
        ("tau2-2kappa1^2gamma", p.tau2 - 2 * p.kappa1**2 * p.gamma),
        ("kappa2", p.kappa2),
    ]
    return [(name, value, bool(value > 0)) for name, value in rows]


def validate_smallness(p: ModelParams) -> list[tuple[str, float, float, bool]]:
    """Strict smallness of the coupling viscosities against the diagonal ones."""
    rows = [
        ("4kappa3^2<alpha1*tau1", 4 * p.kappa3**2, p.alpha1 * p.tau1),
        ("8kappa4^2<alpha1*kappa2", 8 * p.kappa4**2, p.alpha1 * p.kappa2),
        ("8kappa5^2<kappa2*tau1", 8 * p.kappa5**2, p.kappa2 * p.tau1),
        (
            "4(kappa6-kappa1*lambda)^2<(2tau2-4kappa1^2gamma)(2alpha5+lambda/gamma-lambda^2/gamma)",
            4 * (p.kappa6 - p.kappa1 * p.lambda_) ** 2,
            p.c2 * p.c5,
        ),
    ]
    return [(name, lhs, rhs, bool(lhs < rhs)) for name, lhs, rhs in rows]


@dataclass(frozen=True)
class DissipativityCertificate:
    positivity: list
    smallness: list
    zeta: float | None
    betas: tuple[float, ...] | None
    ratios: tuple[float, ...]

    @property
    def positivity_ok(self) -> list[bool]:
        return [row[-1] for row in self.positivity]

    @property
    def smallness_ok(self) -> list[bool]:
        return [row[-1] for row in self.smallness]

    @property
    def present(self) -> bool:
        return self.zeta is not None

    def failing(self) -> list[str]:
        return [row[0] for row in self.positivity + self.smallness if not row[-1]]

    def report(self) -> str:
        lines = ["positivity:"]
        for name, value, ok in self.positivity:
            lines.append(f"  {'ok  ' if ok else 'FAIL'} {name} = {value:.6g}")
        lines.append("smallness:")
        for name, lhs, rhs, ok in self.smallness:
            lines.append(f"  {'ok  ' if ok else 'FAIL'} {name}: {lhs:.6g} < {rhs:.6g}")
        if self.present:
            lines.append(f"certified: zeta = {self.zeta:.6g}")
            lines.append("betas: " + ", ".join(f"beta{i + 1}={b:.6g}" for i, b in enumerate(self.betas)))
        else:
            lines.append("NOT certified: " + ", ".join(self.failing()))
        return "\n".join(lines)

    def key_values(self) -> dict:
        out = {"certified": self.present, "zeta": self.zeta}
        for name, value, ok in self.positivity:
            out[f"positivity[{name}]"] = ok
        for name, lhs, rhs, ok in self.smallness:
            out[f"smallness[{name}]"] = ok
        for i, b in enumerate(self.betas or ()):
            out[f"beta{i + 1}"] = b
        return out


def _ratio(num: float, den_sq: float) -> float:
    # den_sq <= 0 means the matching positivity condition already failed
    if den_sq <= 0:
        return math.inf
    return abs(num) / math.sqrt(den_sq)


def zeta_ratios(p: ModelParams) -> tuple[float, float, float, float]:
    """The four coupling-to-dissipation ratios whose maximum is the margin zeta."""
    return (
        _ratio(2 * p.kappa3, p.alpha1 * p.tau1),
        _ratio(4 * p.kappa4, p.alpha1 * 2 * p.kappa2),
        _ratio(4 * p.kappa5, 2 * p.kappa2 * p.tau1),
        _ratio(4 * (p.kappa6 - p.kappa1 * p.lambda_), 4 * p.c2 * p.c5),
    )


def certify(p: ModelParams) -> DissipativityCertificate:
    positivity = validate_positivity(p)
    smallness = validate_smallness(p)
    ratios = zeta_ratios(p)
    zeta = max(ratios)
    ok = all(r[-1] for r in positivity) and all(r[-1] for r in smallness) and zeta < 1
    if not ok:
        return DissipativityCertificate(positivity, smallness, None, None, ratios)
    s = 1 - zeta
    betas = (
        p.alpha4 / 2,
        s * p.alpha1,
        s * p.c5,
        s * p.tau1,
        s * p.c2,
        s * 2 * p.kappa2,
    )
    return DissipativityCertificate(positivity, smallness, zeta, betas, ratios)
