import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stefan_control.assembly import assemble_system, discrete_symbol
from stefan_control.model import (ControlRegion, DomainConfig, GridSpec, InvalidInputError,
                                  State, preset_initial_data, state_norm)
from stefan_control.stepper import CNPropagator
from stefan_control.synthesis import (DyadicSchedule, decay_rate_check, dft_modes,
                                      eigen_datum, eventually_decreasing, inverse_modes,
                                      low_mode_basis, lr_synthesize, mode_invariance_check,
                                      project_low, replay_defect, write_synthesis_report)
from stefan_control.spectral import spectrum

GRID = GridSpec(nx=12, nt=1, horizon=1.0)
SIGMA = 10.0


def h_inner(a: State, b: State, sigma=SIGMA, dx=GRID.dx):
    da = (np.roll(a.h, -1) - a.h) / dx
    db = (np.roll(b.h, -1) - b.h) / dx
    return dx**2 * np.sum(a.y * b.y) + dx * np.sum(a.h * b.h) + sigma * dx * np.sum(da * db)


states = st.integers(0, 2**31 - 1).map(
    lambda s: State.from_flat(np.random.default_rng(s).standard_normal(GRID.size), GRID))


@given(states)
def test_dft_round_trip_and_parseval(z):
    dec = dft_modes(z)
    back = inverse_modes(dec)
    assert np.linalg.norm(back.flat() - z.flat()) <= 1e-12 * np.linalg.norm(z.flat())
    energy = np.sum(dec.weights[:, None] * np.abs(dec.y_hat) ** 2) + np.sum(dec.weights * np.abs(dec.h_hat) ** 2)
    assert energy == pytest.approx(np.sum(z.y**2) + np.sum(z.h**2), rel=1e-12)
    full_y, _ = dec.full_spectrum()
    np.testing.assert_allclose(full_y[1:], np.conj(full_y[1:][::-1]), atol=1e-12)


def test_single_mode_preset_has_one_mode():
    dom = DomainConfig(sigma=SIGMA)
    assert dft_modes(preset_initial_data("single_mode(3)", GRID, dom)).active(1e-12) == [3]


@given(states, st.integers(0, 8))
def test_projection_is_orthogonal(z, mu):
    pz = project_low(z, mu)
    np.testing.assert_allclose(project_low(pz, mu).flat(), pz.flat(), atol=1e-12)
    w = State.from_flat(np.roll(z.flat(), 5), GRID)
    assert h_inner(pz, w) == pytest.approx(h_inner(z, project_low(w, mu)), rel=1e-10, abs=1e-10)
    assert state_norm(pz, SIGMA, GRID.dx) <= state_norm(z, SIGMA, GRID.dx) * (1 + 1e-12)


@given(states)
def test_high_threshold_is_identity(z):
    np.testing.assert_allclose(project_low(z, GRID.nx / 2).flat(), z.flat(), atol=1e-12)


def test_low_mode_basis_orthonormal():
    for mu in (0, 2, 6):
        W = low_mode_basis(GRID, mu)
        np.testing.assert_allclose(W @ W.T, np.eye(W.shape[0]), atol=1e-12)
        z = np.random.default_rng(mu).standard_normal(GRID.size)
        np.testing.assert_allclose(W.T @ (W @ z), project_low(State.from_flat(z, GRID), mu).flat(),
                                   atol=1e-12)


@pytest.mark.parametrize("p,sigma", [(0, 10.0), (5, 10.0), (2, 0.0)])
def test_mode_preserved_by_operator(p, sigma):
    dom = DomainConfig(sigma=sigma)
    A = assemble_system(GRID, dom).matrix
    i = np.arange(GRID.n1)
    wave = np.cos(2 * np.pi * p * i / GRID.n1)
    r = np.random.default_rng(p)
    z = State(np.outer(wave, r.standard_normal(GRID.nx)), wave * r.standard_normal())
    assert dft_modes(State.from_flat(A @ z.flat(), GRID)).active(1e-12) == [p]


def test_invariance_report():
    rep = mode_invariance_check(GRID, DomainConfig(sigma=SIGMA), seed=3)
    assert rep.passed, rep


@pytest.mark.parametrize("sigma", [0.5, 2.0, 10.0])
@pytest.mark.parametrize("mu", [0, 2, 4])
def test_projected_decay_bound(sigma, mu):
    dom = DomainConfig(sigma=sigma, horizon=0.2)
    grid = GridSpec.from_domain(dom, 12, 400)
    prop = CNPropagator(assemble_system(grid, dom), grid.dt)
    z = State.from_flat(np.random.default_rng(mu).standard_normal(grid.size), grid)
    low = project_low(z, mu)
    z0 = State(z.y - low.y, z.h - low.h)
    norms = np.array([state_norm(State.from_flat(s, grid), sigma, grid.dx)
                      for s in prop.run(z0.flat(), grid.nt)])
    # frequency of the first excluded mode, measured by the discrete symbol
    rate = 0.9 * min(sigma / 2, 1) * discrete_symbol(mu + 1, grid)
    assert np.all(norms <= np.exp(-rate * grid.times) * norms[0] * (1 + 1e-12))


@pytest.mark.parametrize("sigma,bound", [(10.0, -16 * 0.9), (0.5, -3.6)])
def test_decay_rate_examples(sigma, bound):
    rep = decay_rate_check(4, sigma)
    assert rep.rate <= bound
    assert rep.passed


@pytest.mark.parametrize("n,sigma", [(1, 10.0), (4, 0.5), (10, 2.0)])
def test_decay_rate_on_eigen_datum(n, sigma):
    rep = decay_rate_check(n, sigma, datum=eigen_datum(n, sigma, 200))
    assert rep.rate == pytest.approx(spectrum(n, sigma, 1).eigenvalues[0], rel=0.05)


@given(st.floats(0.01, 10), st.floats(0.1, 5), st.integers(1, 12), st.integers(1, 4))
def test_schedule_invariants(T, beta, J, q):
    s = DyadicSchedule(T, beta, J, q)
    assert sum(s.lengths()) < T
    mu = s.thresholds()
    assert all(b > a for a, b in zip(mu, mu[1:]))
    # every interval is a whole number of steps; a free tail of length T/2^J remains
    for j, Tj in enumerate(s.lengths(), start=1):
        assert 2 * s.half_steps(j) * s.dt == pytest.approx(Tj, rel=1e-12)
    assert s.nt - s.starts()[-1] == 2 * q


def test_schedule_validation():
    with pytest.raises(InvalidInputError):
        DyadicSchedule(1.0, 0.0, 3)


RECT = ControlRegion.rectangle(0.5, 1.5, -0.5, 0.2)
LR_DOMAIN = DomainConfig(sigma=10.0, horizon=0.5)


def test_lr_zero_datum():
    z0 = np.zeros(GridSpec.from_domain(LR_DOMAIN, 12, 1).size)
    sol = lr_synthesize(z0, 12, LR_DOMAIN, RECT, J=3)
    assert sol.control_norm == 0 and not sol.control.u.any()


def test_lr_requires_rectangle_and_gap():
    z0 = np.ones(GridSpec.from_domain(LR_DOMAIN, 12, 1).size)
    with pytest.raises(InvalidInputError):
        lr_synthesize(z0, 12, LR_DOMAIN, ControlRegion(), J=2)
    with pytest.raises(InvalidInputError):
        lr_synthesize(z0, 12, DomainConfig(sigma=0.0, horizon=0.5), RECT, J=2)


@pytest.fixture(scope="module")
def lr_solution():
    grid = GridSpec.from_domain(LR_DOMAIN, 12, 1)
    z0 = preset_initial_data("fig_hum", grid, LR_DOMAIN)
    return lr_synthesize(z0, 12, LR_DOMAIN, RECT, beta=1.0, J=6)


def test_lr_fig_hum(lr_solution, tmp_path):
    sol = lr_solution
    assert sol.extras["final_relative"] <= 1e-4
    norms = [r.control_norm for r in sol.extras["records"]]
    assert eventually_decreasing(norms)
    assert all(r.mid_low_residual <= 1e-8 for r in sol.extras["records"])
    assert replay_defect(sol, LR_DOMAIN) <= 1e-9
    write_synthesis_report(sol, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# schema synthesis v1" and len(lines) == 2 + 6


def test_lr_depth_search():
    grid = GridSpec.from_domain(LR_DOMAIN, 8, 1)
    z0 = preset_initial_data("fig_hum", grid, LR_DOMAIN)
    sol = lr_synthesize(z0, 8, LR_DOMAIN, RECT, J=None, tol=1e-3)
    assert sol.extras["final_relative"] <= 1e-3
    assert 1 <= sol.iterations <= 12


def test_eventually_decreasing():
    assert eventually_decreasing([1, 5, 3, 2, 1])
    assert not eventually_decreasing([1, 2, 3])
