import numpy as np
import pytest

from oracles import observed_order
from smectic.energy import EnergyTerms, LayerField, State, free_energy, ground_state, random_state
from smectic.params import default_params
from smectic.spectral import Grid, div, grad, laplacian, leray_project, norm, random_field, truncate
from smectic.solver import (
    BlowUpError,
    Forcing,
    SolverConfig,
    project_initial_data,
    rhs_director,
    rhs_layer,
    rhs_velocity,
    run,
    step,
)


def bare_state(grid, v=None, psi=None):
    return State(grid, grid.zeros(1), LayerField((0, 0, 0), grid.zeros() if psi is None else psi),
                 grid.zeros(1) if v is None else v)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt=0)
    with pytest.raises(ValueError):
        SolverConfig(t_end=-1)
    with pytest.raises(ValueError):
        SolverConfig(scheme="rk4")
    with pytest.raises(ValueError):
        SolverConfig(n_galerkin=32).galerkin(Grid(16))
    with pytest.raises(ValueError):
        Forcing("gravity")


def test_project_initial_data(grid, rng):
    v0 = random_field(grid, rng, 1, band=7)
    s = project_initial_data(random_field(grid, rng, 1), LayerField((0, 0, 1), random_field(grid, rng, 0)), v0, 8, grid)
    assert norm(div(s.v, grid), grid) < 1e-13 * norm(s.v, grid)
    assert norm(s.v, grid) <= norm(v0, grid)
    low = random_state(grid, rng, band=2)
    same = project_initial_data(low.d, low.layer, low.v, 8, grid)
    assert np.allclose(same.d, low.d) and np.allclose(same.psi, low.psi) and np.allclose(same.v, low.v)


def test_ground_state_is_steady(small_grid, params):
    s = ground_state(small_grid)
    for f in (rhs_director(s, params), rhs_layer(s, params), rhs_velocity(s, params)):
        assert np.abs(f).max() < 1e-13
    after = step(s, SolverConfig(dt=1e-3), params)
    assert max(np.abs(after.d - s.d).max(), np.abs(after.psi).max(), np.abs(after.v).max()) < 1e-12


def test_gradient_flow_without_flow(small_grid, rng, params):
    s = random_state(small_grid, rng).with_fields(v=small_grid.zeros(1))
    terms = EnergyTerms(s, params)
    assert np.allclose(rhs_director(s, params), -params.gamma * terms.q, atol=1e-13)
    dpsi = rhs_layer(s, params)
    assert np.allclose(dpsi, -params.lambda_p * terms.j, atol=1e-12)
    s = random_state(small_grid, rng, amplitude=0.05).with_fields(v=small_grid.zeros(1))
    after = step(s, SolverConfig(dt=1e-4, scheme="imex-euler"), params)
    assert free_energy(after, params).total <= free_energy(s, params).total


def test_layer_rhs_mean(small_grid, rng, params):
    s = random_state(small_grid, rng)
    dpsi = rhs_layer(s, params)
    j = EnergyTerms(s, params).j
    assert dpsi[0, 0, 0].real == pytest.approx(-params.lambda_p * j[0, 0, 0].real, abs=1e-12)


def test_velocity_rhs_forcing_only(small_grid, params):
    s = ground_state(small_grid)
    forcing = Forcing("shear", 0.7)
    g = forcing.field(small_grid, 0.0)
    assert np.allclose(rhs_velocity(s, params, g), leray_project(g, small_grid), atol=1e-13)


def test_velocity_rhs_reduces_to_navier_stokes(rng):
    grid = Grid(8)
    p = default_params(kappa1=0, kappa3=0, kappa4=0, kappa5=0, kappa6=0)
    x = grid.coordinates()
    v = grid.from_physical(np.array([np.sin(x[1]), 0 * x[1], np.cos(x[0])]))
    s = bare_state(grid, v)
    adv = grid.evaluate(lambda v, G: np.einsum("k...,ik...->i...", v, G), v, grad(v, grid))
    expected = leray_project(-adv + 0.5 * p.alpha4 * laplacian(v, grid), grid)
    expected[:, 0, 0, 0] = 0
    assert np.allclose(rhs_velocity(s, p), expected, atol=1e-13)


def linear_params():
    # B0, B1 -> 0 and eps -> infinity switch off every nonlinearity on this state
    return default_params(B0=1e-300, B1=1e-300, eps1=1e300, eps2=1e300)


def test_linear_decay_first_order():
    grid = Grid(8)
    p = linear_params()
    x = grid.coordinates()
    psi0 = grid.from_physical(0.1 * np.sin(x[0] + x[1]))
    rate = p.lambda_p * p.k5 * 4.0
    errors = []
    for dt in (4e-3, 2e-3, 1e-3):
        traj = run(bare_state(grid, psi=psi0), SolverConfig(dt=dt, t_end=0.08, scheme="imex-euler"), p)
        errors.append(norm(traj.final.psi - psi0 * np.exp(-rate * 0.08), grid))
    assert np.all(np.abs(observed_order(errors) - 1) < 0.1)


@pytest.mark.parametrize("scheme,order", [("imex-euler", 1), ("imex-rk2", 2)])
def test_self_convergence_in_dt(small_grid, params, scheme, order):
    s0 = random_state(small_grid, np.random.default_rng(5), amplitude=0.1)
    finals = []
    for dt in (4e-4, 2e-4, 1e-4, 5e-5):
        finals.append(run(s0, SolverConfig(dt=dt, t_end=0.004, scheme=scheme, snapshot_stride=1000), params).final)
    errs = [norm(a.d - b.d, small_grid) + norm(a.psi - b.psi, small_grid) + norm(a.v - b.v, small_grid)
            for a, b in zip(finals[:-1], finals[1:])]
    assert np.all(np.abs(observed_order(errs) - order) < 0.3)


def test_run_invariants(small_grid, rng, params):
    s0 = random_state(small_grid, rng, amplitude=0.1)
    traj = run(s0, SolverConfig(dt=2e-4, t_end=0.002, snapshot_stride=3), params)
    assert np.all(np.diff(traj.times) > 0)
    assert [s.t for s in traj.snapshots] == pytest.approx([0, 6e-4, 1.2e-3, 1.8e-3, 2e-3])
    for s in traj.snapshots:
        assert norm(div(s.v, small_grid), small_grid) < 1e-13
        for f in (s.d, s.psi, s.v):
            back = small_grid.from_physical(small_grid.to_physical(f))
            assert np.allclose(back, f, atol=1e-14)


def test_zero_length_run(small_grid, params):
    traj = run(ground_state(small_grid), SolverConfig(t_end=0), params)
    assert len(traj.snapshots) == 1 and len(traj.records) == 1


def test_blow_up_guard(small_grid, rng):
    p = default_params(eps1=1e-3)
    s0 = random_state(small_grid, rng, amplitude=0.5)
    with pytest.raises(BlowUpError) as info:
        run(s0, SolverConfig(dt=0.05, t_end=5.0), p)
    assert info.value.trajectory is not None and len(info.value.trajectory.records) >= 1


def test_uncertified_run_warns(small_grid):
    with pytest.warns(RuntimeWarning):
        run(ground_state(small_grid), SolverConfig(t_end=0), default_params(kappa3=0.9))


def test_galerkin_truncation_respected(grid, rng, params):
    s0 = random_state(grid, rng, band=3, amplitude=0.05)
    s0 = project_initial_data(s0.d, s0.layer, s0.v, 4, grid)
    traj = run(s0, SolverConfig(dt=1e-4, t_end=3e-4, n_galerkin=4), params)
    for f in (traj.final.d, traj.final.psi, traj.final.v):
        assert np.array_equal(truncate(f, 4, grid), f)
