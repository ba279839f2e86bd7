import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from stefan_control.assembly import assemble_control_injection, assemble_system
from stefan_control.model import (ControlRegion, DomainConfig, GridSpec, State, discrete_energy,
                                  preset_initial_data)
from stefan_control.stepper import (CNPropagator, cn_step, duality_gap, simulate,
                                    simulate_adjoint)


def setup(nx=8, nt=50, sigma=10.0, horizon=0.1):
    dom = DomainConfig(sigma=sigma, horizon=horizon)
    grid = GridSpec.from_domain(dom, nx, nt)
    A = assemble_system(grid, dom)
    B = assemble_control_injection(grid, ControlRegion())
    return dom, grid, A, B


def test_zero_stays_zero():
    dom, grid, A, B = setup()
    z = cn_step(A, B, np.zeros(grid.size), np.zeros(B.ncols), np.zeros(B.ncols), grid.dt)
    assert not z.any()


def test_zero_operator_is_identity(rng):
    z = rng.standard_normal(7)
    assert np.array_equal(cn_step(sp.csr_matrix((7, 7)), None, z, None, None, 0.3), z)


def test_scalar_cn_ratio():
    z1 = cn_step(sp.csr_matrix([[-1.0]]), None, np.array([1.0]), None, None, 0.1)
    assert z1[0] == pytest.approx(0.95 / 1.05, rel=1e-15)
    assert z1[0] == pytest.approx(0.9047619047619, abs=1e-13)


def test_trajectory_invariants(grid12, domain10, tmp_path):
    A = assemble_system(grid12, domain10)
    z0 = preset_initial_data("fig_hum", grid12, domain10)
    traj = simulate(A, None, z0, None, grid12, domain10)
    np.testing.assert_array_equal(traj.states[0], z0.flat())
    for k in (0, 17, grid12.nt):
        assert traj.energies[k] == discrete_energy(traj.state(k), domain10.sigma, grid12.dx)
    traj.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "# schema trajectory v1"
    assert lines[1] == "t,energy,y_norm,h_norm"
    assert len(lines) == grid12.nt + 3


def test_energy_non_increasing_fig_hum(grid12, domain10):
    A = assemble_system(grid12, domain10)
    z0 = preset_initial_data("fig_hum", grid12, domain10)
    e = simulate(A, None, z0, None, grid12, domain10).energies
    assert np.all(np.diff(e) <= 1e-10 * e[:-1])
    fine = GridSpec.from_domain(domain10, 12, 800)
    e_fine = simulate(A, None, z0, None, fine, domain10).energies
    np.testing.assert_allclose(e[-1], e_fine[-1], rtol=1e-2)


def test_richardson_second_order():
    dom, _, A, _ = setup(nx=8, nt=1, horizon=0.05)
    z0 = preset_initial_data("fig_hum", GridSpec.from_domain(dom, 8, 1), dom).flat()
    ref = CNPropagator(A, 0.05 / 1600).run(z0, 1600)[-1]
    errs = [np.linalg.norm(CNPropagator(A, 0.05 / nt).run(z0, nt)[-1] - ref) for nt in (100, 200, 400)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


@pytest.mark.parametrize("dt", [1e-5, 1e-4, 1e-3, 1e-2, 1e-1])
def test_stability_probe(dt):
    dom, grid, A, _ = setup(nx=8)
    z0 = preset_initial_data("fig_hum", grid, dom)
    zs = CNPropagator(A, dt).run(z0.flat(), 40)
    e = [discrete_energy(State.from_flat(z, grid), dom.sigma, grid.dx) for z in zs]
    assert max(e) <= e[0] * (1 + 1e-8)


@given(st.integers(0, 2**31 - 1))
def test_superposition(seed):
    dom, grid, A, B = setup(nx=4, nt=10)
    r = np.random.default_rng(seed)
    prop = CNPropagator(A, grid.dt, B)
    z0, z1 = r.standard_normal((2, grid.size))
    u, v = r.standard_normal((2, grid.nt + 1, B.ncols))
    lhs = prop.run(z0 + 2 * z1, grid.nt, u - v)[-1]
    rhs = prop.run(z0, grid.nt, u)[-1] + 2 * prop.run(z1, grid.nt, np.zeros_like(u))[-1] \
        - prop.run(np.zeros(grid.size), grid.nt, v)[-1]
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(lhs).max())


def test_adjoint_zero():
    dom, grid, A, B = setup()
    traj = simulate_adjoint(A, np.zeros(grid.size), grid)
    assert not traj.states.any()


@given(st.integers(0, 2**31 - 1))
def test_duality(seed):
    dom, grid, A, B = setup(nx=8, nt=50)
    r = np.random.default_rng(seed)
    prop = CNPropagator(A, grid.dt, B)
    gap = duality_gap(prop, r.standard_normal(grid.size), r.standard_normal((grid.nt + 1, B.ncols)),
                      r.standard_normal(grid.size), grid.nt)
    assert gap <= 1e-10


def test_symmetric_toy_adjoint_is_time_reversal(rng):
    M = rng.standard_normal((6, 6))
    A = sp.csr_matrix(-(M @ M.T) - np.eye(6))
    grid = GridSpec(nx=2, nt=12, horizon=0.3)
    prop = CNPropagator(A, grid.dt)
    z0 = rng.standard_normal(6)
    fwd = prop.run(z0, 12)
    back = prop.run_adjoint(z0, 12)
    np.testing.assert_allclose(back[::-1], fwd, rtol=1e-12, atol=1e-14)
