import math

import numpy as np
import pytest

from oracles import BREAKABLE, break_one_condition, brute_force_zeta, random_certified_params
from smectic.params import (
    NormalMode,
    certify,
    default_params,
    validate_positivity,
    validate_smallness,
    zeta_ratios,
)

ZERO_COUPLING = dict(lambda_=0.0, kappa1=0.0, kappa2=1.0, kappa3=0.0, kappa4=0.0, kappa5=0.0, kappa6=0.0,
                     gamma=1.0, lambda_p=1.0, alpha1=1.0, alpha4=1.0, alpha5=1.0, tau1=1.0, tau2=1.0)


def base(**changes):
    return default_params(**{**ZERO_COUPLING, **changes})


@pytest.mark.parametrize("name", ["gamma", "lambda_p", "eps1", "eps2", "k1", "k3", "k5", "B0", "B1"])
def test_strictly_positive_fields_rejected(name):
    with pytest.raises(ValueError):
        default_params(**{name: 0.0})


def test_normal_mode_validation():
    with pytest.raises(ValueError):
        NormalMode("stewart")
    with pytest.raises(ValueError):
        NormalMode.relaxed(0.0)
    assert str(NormalMode.relaxed(0.1)) == "relaxed(eps=0.1)"


def test_positivity_zero_coupling_passes():
    rows = validate_positivity(base())
    assert all(ok for _, _, ok in rows)
    assert dict((n, v) for n, v, _ in rows)["2alpha5+lambda/gamma-lambda^2/gamma"] == 2.0


def test_positivity_tau2_condition_fails():
    rows = {n: (v, ok) for n, v, ok in validate_positivity(base(tau2=0.1, kappa1=1.0))}
    value, ok = rows["tau2-2kappa1^2gamma"]
    assert math.isclose(value, -1.9) and not ok


def test_positivity_boundary_is_failure():
    rows = {n: (v, ok) for n, v, ok in validate_positivity(base(lambda_=1.0, gamma=0.5, alpha5=0.0))}
    value, ok = rows["2alpha5+lambda/gamma-lambda^2/gamma"]
    assert value == 0.0 and not ok


def test_smallness_examples():
    rows = validate_smallness(base(kappa3=0.6))
    assert rows[0][1] == pytest.approx(1.44) and not rows[0][3]
    assert all(r[3] and r[1] == 0 for r in validate_smallness(base()))
    rows = validate_smallness(base(kappa2=2.0, kappa4=0.5))
    assert rows[1][1] == rows[1][2] == 2.0 and not rows[1][3]


def test_certify_examples():
    cert = certify(base(kappa3=0.25))
    assert cert.present and cert.zeta == pytest.approx(0.5)
    cert = certify(base())
    assert cert.zeta == 0
    p = base()
    assert cert.betas == pytest.approx((p.alpha4 / 2, p.alpha1, p.c5, p.tau1, p.c2, 2 * p.kappa2))
    assert not certify(base(kappa3=0.5)).present


def test_certify_agrees_with_scan_on_examples():
    assert brute_force_zeta(base(kappa3=0.25)) == pytest.approx(0.5, abs=1e-4)
    assert brute_force_zeta(base(kappa3=0.5)) is None


def test_zeta_scales_linearly():
    p = default_params()
    shift = p.kappa6 - p.kappa1 * p.lambda_
    for s in (0.1, 0.5, 0.9):
        q = p.replace(kappa3=s * p.kappa3, kappa4=s * p.kappa4, kappa5=s * p.kappa5,
                      kappa6=p.kappa1 * p.lambda_ + s * shift)
        assert certify(q).zeta == pytest.approx(s * certify(p).zeta, rel=1e-12)


def test_certificate_cross_consistency(rng):
    for _ in range(30):
        p = random_certified_params(rng)
        if rng.random() < 0.5:
            p = break_one_condition(p, BREAKABLE[rng.integers(len(BREAKABLE))], rng.uniform(0, 1))
        cert = certify(p)
        ok = all(cert.positivity_ok) and all(cert.smallness_ok)
        assert cert.present == ok
        if cert.present:
            assert all(b > 0 for b in cert.betas)


@pytest.mark.parametrize("which", BREAKABLE)
def test_breaking_one_condition_names_it(rng, which):
    p = break_one_condition(random_certified_params(rng), which, 0.2)
    cert = certify(p)
    assert not cert.present and len(cert.failing()) == 1


def test_ratios_infinite_when_denominator_fails():
    p = base(alpha5=0.0, lambda_=1.0, gamma=0.5)
    assert zeta_ratios(p)[3] == math.inf
    assert not certify(p).present


def test_report_and_key_values():
    cert = certify(default_params())
    text = cert.report()
    assert "certified: zeta" in text and "beta6" in text
    kv = cert.key_values()
    assert kv["certified"] is True and kv["beta1"] == 0.5
    bad = certify(default_params(kappa3=0.6))
    assert "NOT certified: 4kappa3^2<alpha1*tau1" in bad.report()


def test_as_dict_echo():
    d = default_params(normal_mode=NormalMode.relaxed(0.1)).as_dict()
    assert d["normal_mode"] == "relaxed(eps=0.1)" and d["lambda_"] == 0.5 and len(d) == 22


def test_brute_force_matches_random(rng):
    for _ in range(5):
        p = random_certified_params(rng)
        assert p.c5 > 0 and p.c2 > 0 and certify(p).present
        z = brute_force_zeta(p)
        assert z - 1e-4 < certify(p).zeta <= z + 1e-12
    assert np.isfinite(certify(default_params()).zeta)
