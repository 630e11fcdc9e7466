"""Independent reference computations used by the tests."""

import numpy as np

from smectic.params import default_params


def _psd(a, b, c):
    return np.linalg.eigvalsh(np.array([[a, b], [b, c]])).min() >= -1e-15


def zeta_feasible(p, zeta):
    """Pairwise Young absorption of the four cross terms with budget ``zeta``.

    X, Y, Z enter two cross terms each and get half the budget per term; U, V
    enter one and get all of it.
    """
    shift = p.kappa6 - p.kappa1 * p.lambda_
    return (
        _psd(zeta * p.alpha1 / 2, p.kappa3, zeta * p.tau1 / 2)
        and _psd(zeta * p.alpha1 / 2, 2 * p.kappa4, zeta * p.kappa2)
        and _psd(zeta * p.kappa2, 2 * p.kappa5, zeta * p.tau1 / 2)
        and _psd(zeta * p.c5, 2 * shift, zeta * p.c2)
    )


def positivity_by_hand(p):
    values = [p.lambda_p, p.gamma, p.alpha1, p.alpha4, p.c5, p.tau1, p.tau2 - 2 * p.kappa1**2 * p.gamma, p.kappa2]
    return all(v > 0 for v in values)


def brute_force_zeta(p, step=1e-4):
    """Smallest grid value of zeta in [0, 1) making every absorption feasible, else None."""
    if not positivity_by_hand(p):
        return None
    grid = np.arange(0.0, 1.0, step)
    ok = np.array([zeta_feasible(p, z) for z in grid[::100]])
    # coarse pass then refine inside the first feasible bracket
    if not ok.any():
        return None
    first = int(np.argmax(ok)) * 100
    lo = max(first - 100, 0)
    for z in grid[lo:first + 1]:
        if zeta_feasible(p, z):
            return float(z)
    return float(grid[first])


def random_certified_params(rng):
    """Random coefficient set inside the dissipative region."""
    gamma = rng.uniform(0.5, 2.0)
    lam = rng.uniform(-1.0, 1.5)
    kappa1 = rng.uniform(-0.3, 0.3)
    alpha1, tau1, kappa2 = rng.uniform(0.5, 2.0, 3)
    alpha5 = (lam**2 - lam) / (2 * gamma) + rng.uniform(0.15, 0.75)
    tau2 = 2 * kappa1**2 * gamma + rng.uniform(0.2, 1.5)
    p = default_params(lambda_=lam, kappa1=kappa1, gamma=gamma, alpha1=alpha1, tau1=tau1, kappa2=kappa2,
                       alpha5=alpha5, tau2=tau2, alpha4=rng.uniform(0.5, 2.0))
    target = rng.uniform(0.05, 0.95, 4)
    kappa3 = target[0] * np.sqrt(p.alpha1 * p.tau1) / 2 * rng.choice([-1, 1])
    kappa4 = target[1] * np.sqrt(p.alpha1 * 2 * p.kappa2) / 4 * rng.choice([-1, 1])
    kappa5 = target[2] * np.sqrt(2 * p.kappa2 * p.tau1) / 4 * rng.choice([-1, 1])
    shift = target[3] * np.sqrt(p.c2 * p.c5) / 2 * rng.choice([-1, 1])
    return p.replace(kappa3=kappa3, kappa4=kappa4, kappa5=kappa5, kappa6=p.kappa1 * p.lambda_ + shift)


def break_one_condition(p, which, severity):
    """Copy of certified ``p`` failing exactly the named condition."""
    if which == "alpha4":
        return p.replace(alpha4=-severity * p.alpha4)
    if which == "kappa3":
        return p.replace(kappa3=(1 + severity) * np.sqrt(p.alpha1 * p.tau1) / 2)
    if which == "kappa4":
        return p.replace(kappa4=(1 + severity) * np.sqrt(p.alpha1 * p.kappa2 / 8))
    if which == "kappa5":
        return p.replace(kappa5=(1 + severity) * np.sqrt(p.kappa2 * p.tau1 / 8))
    if which == "kappa6":
        return p.replace(kappa6=p.kappa1 * p.lambda_ + (1 + severity) * np.sqrt(p.c2 * p.c5) / 2)
    raise ValueError(which)


BREAKABLE = ("alpha4", "kappa3", "kappa4", "kappa5", "kappa6")


def fd_slope(F, h_values):
    """Central differences at each step, their errors' observed order and Richardson extrapolation."""
    values = np.array([(F(h) - F(-h)) / (2 * h) for h in h_values])
    extrapolated = values[-1] + (values[-1] - values[-2]) / 3
    return values, extrapolated


def observed_order(errors, ratio=2.0):
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(ratio)
