import numpy as np
import pytest

from imethod_lab.initial_data import gaussian, planewave, random_bandlimited
from imethod_lab.solver import (
    SolverConfig, SolverDivergence, Trajectory, duhamel_split, energy, energy_I, evolve,
    free_flow, m_factor, mass, read_checkpoint, rescale, resume, strang_step,
)
from imethod_lab.spectral import Field, inverse_transform, lebesgue_norm, make_grid, transform


def planewave_exact(g, mode, amp, t):
    xi = g.dxi * mode
    x = g.coordinates()[0]
    return amp * np.exp(1j * (xi * x - (xi**2 + abs(amp) ** 2) * t))


@pytest.mark.parametrize("dealias", [True, False])
def test_planewave_closed_form(dealias):
    g = make_grid(1, 16, 2 * np.pi)
    u0 = planewave(g, 3, 0.8)
    traj = evolve(u0, SolverConfig(g, 1e-2, 0.5, record_stride=10, dealias=dealias))
    err = np.max(np.abs(traj.states[-1].values - planewave_exact(g, 3, 0.8, 0.5)))
    assert err < 1e-11


def test_free_flow_is_isometry_and_group():
    g = make_grid(2, 8, 3.0)
    sp = transform(random_bandlimited(g, 5.0, seed=2))
    a = free_flow(free_flow(sp, 0.3), 0.4)
    b = free_flow(sp, 0.7)
    assert np.allclose(a.coeffs, b.coeffs, atol=1e-13)
    assert np.linalg.norm(b.coeffs) == pytest.approx(np.linalg.norm(sp.coeffs), rel=1e-14)


@pytest.mark.parametrize("dealias", [True, False])
def test_mass_conserved(dealias):
    g = make_grid(1, 32, 2 * np.pi)
    u0 = gaussian(g, 1.5, 0.4)
    traj = evolve(u0, SolverConfig(g, 2e-3, 0.2, record_stride=25, dealias=dealias))
    m0 = mass(u0)
    assert all(abs(mass(u) - m0) <= 1e-12 * m0 for u in traj.states)


def test_energy_drift_second_order():
    g = make_grid(1, 32, 2 * np.pi)
    u0 = gaussian(g, 1.0, 0.5)
    drifts = []
    for dt in (4e-3, 2e-3):
        traj = evolve(u0, SolverConfig(g, dt, 0.2, record_stride=1000))
        drifts.append(abs(energy(traj.states[-1]) - energy(u0)))
    assert 3.0 <= drifts[0] / drifts[1] <= 5.0


def test_zero_length_run_and_recording():
    g = make_grid(1, 16, 2 * np.pi)
    u0 = gaussian(g)
    traj = evolve(u0, SolverConfig(g, 0.1, 0.0))
    assert traj.times == (0.0,)
    traj = evolve(u0, SolverConfig(g, 0.1, 0.5, record_stride=2))
    assert np.allclose(traj.times, [0.0, 0.2, 0.4, 0.5])


@pytest.mark.parametrize("kw", [dict(dt=0.0, t_end=1.0), dict(dt=0.3, t_end=1.0),
                                dict(dt=0.1, t_end=-1.0), dict(dt=0.1, t_end=1.0, record_stride=0)])
def test_solver_config_validation(kw):
    g = make_grid(1, 16, 2 * np.pi)
    with pytest.raises(ValueError):
        SolverConfig(g, **kw)


def test_grid_mismatch_rejected():
    g = make_grid(1, 16, 2 * np.pi)
    with pytest.raises(ValueError):
        evolve(gaussian(make_grid(1, 8, 2 * np.pi)), SolverConfig(g, 0.1, 0.1))


def test_overflow_guard_raises():
    g = make_grid(1, 16, 2 * np.pi)
    u0 = Field(g, np.full(g.shape, 10.0 + 0j))
    with pytest.raises(SolverDivergence):
        evolve(u0, SolverConfig(g, 0.1, 0.2, overflow_guard=1.0))


def test_duhamel_split():
    g = make_grid(1, 32, 2 * np.pi)
    u0 = gaussian(g, 1.0, 0.5)
    traj = evolve(u0, SolverConfig(g, 1e-2, 0.2, record_stride=5))
    dec = duhamel_split(traj)
    assert np.all(dec.nonlinear.states[0].values == 0)
    for ul, unl, u in zip(dec.linear.states, dec.nonlinear.states, traj.states):
        assert np.allclose(ul.values + unl.values, u.values, atol=1e-14)
    assert lebesgue_norm(dec.nonlinear.states[-1], 2) > 0
    with pytest.raises(ValueError):
        duhamel_split(traj, t0=0.1)


def test_duhamel_linear_data_has_no_nonlinear_part():
    g = make_grid(1, 16, 2 * np.pi)
    u0 = Field(g, np.zeros(g.shape))
    traj = evolve(u0, SolverConfig(g, 0.1, 0.3))
    assert all(np.all(v.values == 0) for v in duhamel_split(traj).nonlinear.states)


def test_rescale_scaling_laws():
    g = make_grid(1, 32, 2 * np.pi)
    u = gaussian(g, 1.0, 0.5)
    lam = 2.0
    v = rescale(u, lam)
    assert v.grid.length == pytest.approx(lam * g.length)
    # u^lam(x) = lam^-1 u(x/lam): pointwise on the stretched grid
    assert np.allclose(v.values, u.values / lam, atol=1e-13)
    # in d=1: |u^lam|_2^2 = lam^-1 |u|_2^2 and the kinetic energy scales like lam^-3
    assert mass(v) == pytest.approx(mass(u) / lam, rel=1e-12)
    with pytest.raises(ValueError):
        rescale(u, 0.0)


def test_energy_I_equals_energy_for_large_N():
    g = make_grid(1, 16, 2 * np.pi)
    u = gaussian(g, 1.0, 0.5)
    assert energy_I(u, 100.0, 0.7) == pytest.approx(energy(u), rel=1e-14)
    assert energy_I(u, 1.0, 0.7) < energy(u)


def test_m_factor():
    g = make_grid(1, 16, 2 * np.pi)
    u = gaussian(g, 0.1, 0.5)
    traj = evolve(u, SolverConfig(g, 0.1, 0.2))
    assert m_factor(traj, 2) == 1.0
    big = Trajectory(traj.times, tuple(Field(g, 100 * s.values) for s in traj.states))
    assert m_factor(big, 2) > 1.0
    assert m_factor(big, float("inf")) == 1.0


def test_checkpoint_resume_matches_single_run(tmp_path):
    g = make_grid(1, 16, 2 * np.pi)
    u0 = gaussian(g, 1.0, 0.5)
    full = evolve(u0, SolverConfig(g, 0.01, 0.2, record_stride=5))
    path = tmp_path / "run.bin"
    evolve(u0, SolverConfig(g, 0.01, 0.1, record_stride=5), checkpoint=path)
    # simulate a crash in the middle of a write
    with open(path, "ab") as fh:
        fh.write(b"\x00" * 37)
    partial = read_checkpoint(path)
    assert np.allclose(partial.times, [0.0, 0.05, 0.1])
    res = resume(path, SolverConfig(g, 0.01, 0.2, record_stride=5))
    assert np.allclose(res.times, full.times)
    assert np.array_equal(res.states[-1].values, full.states[-1].values)


def test_strang_step_dealias_keeps_band():
    g = make_grid(1, 16, 2 * np.pi)
    u = random_bandlimited(g, 3.0, 1.0, seed=1)
    v = strang_step(u, 0.01)
    sp = transform(v)
    assert np.all(np.isfinite(sp.coeffs))
    assert mass(v) == pytest.approx(mass(u), rel=1e-13)
