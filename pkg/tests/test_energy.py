import numpy as np
import pytest

from oracles import fd_slope
from smectic.diagnostics import coercivity_check
from smectic.energy import (
    EnergyTerms,
    LayerField,
    State,
    elastic_stress,
    energy_density,
    free_energy,
    ground_state,
    layer_normal,
    random_state,
    variational_j,
    variational_q,
)
from smectic.params import NormalMode
from smectic.spectral import Grid, constant, grad, inner_product, norm, random_field

RELAXED = NormalMode.relaxed(0.1)


def zero_state(grid):
    return State(grid, grid.zeros(1), LayerField((0, 0, 0), grid.zeros()), grid.zeros(1))


def test_layer_gradient_adds_pitch(grid, rng):
    psi = random_field(grid, rng, 0)
    layer = LayerField((0.0, 0.0, 2.0), psi)
    g = layer.gradient(grid)
    expected = grad(psi, grid)
    expected[2, 0, 0, 0] += 2.0
    assert np.array_equal(g, expected)


def test_layer_normal_examples(grid):
    layer = LayerField((0, 0, 1), grid.zeros())
    a = layer_normal(layer, NormalMode(), grid)
    assert np.allclose(grid.to_physical(a)[2], 1.0) and np.allclose(grid.to_physical(a)[:2], 0.0)
    a = layer_normal(layer, NormalMode.relaxed(1.0), grid)
    assert np.allclose(grid.to_physical(a)[2], 1 / np.sqrt(2), atol=1e-14)


def test_relaxed_normal_below_one(grid, rng):
    from smectic.energy import relaxed_normal_values

    s = random_state(grid, rng, amplitude=1.0)
    y = grid.to_physical(s.layer.gradient(grid), grid.pad_shape(2))
    assert np.sqrt(np.sum(relaxed_normal_values(y, 0.1) ** 2, axis=0)).max() < 1


def test_relaxed_normal_converges_to_direction(grid, rng):
    s = random_state(grid, rng, amplitude=0.05)
    y = grid.to_physical(s.layer.gradient(grid))
    assert np.sqrt(np.sum(y**2, axis=0)).min() >= 0.5
    from smectic.energy import relaxed_normal_values

    unit = y / np.sqrt(np.sum(y**2, axis=0))
    errors = [np.abs(relaxed_normal_values(y, eps) - unit).max() for eps in (1e-1, 1e-2, 1e-3)]
    assert errors[0] > errors[1] > errors[2] and errors[2] < 1e-5


def test_ground_state_energy_and_derivatives_vanish(grid, params):
    s = ground_state(grid)
    assert free_energy(s, params).total == pytest.approx(0, abs=1e-14)
    assert norm(variational_q(s, params), grid) < 1e-13
    assert norm(variational_j(s, params), grid) < 1e-13
    assert np.abs(elastic_stress(s, params)).max() < 1e-13


def test_zero_state_energy(grid, params):
    e = free_energy(zero_state(grid), params)
    expected = grid.volume * (2 * params.B0 + 1 / (4 * params.eps1) + 1 / (4 * params.eps2))
    assert e.total == pytest.approx(expected, rel=1e-13)
    assert np.abs(elastic_stress(zero_state(grid), params)).max() < 1e-13


def test_q_vanishes_for_unit_director_without_layers(grid, params):
    s = State(grid, constant((0, 0, 1), grid), LayerField((0, 0, 0), grid.zeros()), grid.zeros(1))
    assert norm(variational_q(s, params), grid) < 1e-13


def test_energy_matches_quadrature(grid, rng, params):
    for _ in range(3):
        s = random_state(grid, rng, band=2, amplitude=0.3)
        W = energy_density(s, params)
        assert free_energy(s, params).total == pytest.approx(W.mean() * grid.volume, rel=1e-9)


def test_breakdown_parts_nonnegative(grid, rng, params):
    for _ in range(5):
        e = free_energy(random_state(grid, rng, amplitude=0.5, about_ground=False), params)
        assert all(v >= 0 for v in e.as_dict().values())
        assert e.total == pytest.approx(sum(v for k, v in e.as_dict().items() if k != "total"))


def test_j_linearization_about_zero(params):
    params = params.replace(B0=0.5)
    grid = Grid(16)
    delta = 1e-5
    x = grid.coordinates()
    psi = grid.from_physical(delta * np.sin(x[0] + 2 * x[1]))
    s = State(grid, grid.zeros(1), LayerField((0, 0, 0), psi), grid.zeros(1))
    k2 = 5.0
    # penalty and coupling both see |grad phi|^2 - 1 < 0 here, hence the negative second-order terms
    factor = params.k5 * k2**2 - k2 / params.eps2 - 4 * params.B0 * k2
    j = variational_j(s, params)
    assert factor != 0
    assert norm(j - factor * psi, grid) <= 1e-8 * norm(factor * psi, grid)


@pytest.mark.parametrize("mode", [NormalMode(), RELAXED], ids=str)
def test_directional_derivatives(grid, rng, params, mode):
    p = params.replace(normal_mode=mode)
    s = random_state(grid, rng, band=2, amplitude=0.2)
    terms = EnergyTerms(s, p)
    xi = random_field(grid, rng, 1)
    zeta = random_field(grid, rng, 0)
    h = [1e-3, 5e-4, 2.5e-4]
    _, dq = fd_slope(lambda t: free_energy(s.with_fields(d=s.d + t * xi), p).total, h)
    _, dj = fd_slope(lambda t: free_energy(s.with_fields(psi=s.psi + t * zeta), p).total, h)
    assert dq == pytest.approx(inner_product(terms.q, xi, grid), rel=1e-6)
    assert dj == pytest.approx(inner_product(terms.j, zeta, grid), rel=1e-6)


def test_cancellation_identity(grid, rng, params):
    from smectic.diagnostics import cancellation_residual

    s = random_state(grid, rng, band=2, amplitude=0.3)
    assert cancellation_residual(s, params).relative <= 1e-8


def test_coercivity_examples(grid, params):
    assert coercivity_check(ground_state(grid), params).margin == pytest.approx(0, abs=1e-14)
    x = grid.coordinates()
    d = grid.from_physical(np.array([np.cos(x[2]), np.sin(x[2]), 0 * x[2]]))
    s = State(grid, d, LayerField((0, 0, 1), grid.zeros()), grid.zeros(1))
    result = coercivity_check(s, params)
    assert result.passes() and result.margin > 0
