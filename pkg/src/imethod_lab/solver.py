"""Split-step integrator for the defocusing cubic NLS  i u_t + Lap u = |u|^2 u.

Written as u_t = i Lap u - i |u|^2 u.  One Strang step is half a free flow (exact Fourier
phase), a nonlinear substep, and another half free flow.

Nonlinear substep
  dealias=False: exact pointwise phase u -> exp(-i dt |u|^2) u on the collocation grid.
  dealias=True:  the Galerkin-truncated flow v' = -i P(|v|^2 v), with the cubic product
                 formed on a 2x zero-padded grid (alias-free on retained modes) and
                 integrated by 2-stage Gauss-Legendre collocation.  That scheme keeps
                 |v|_{L^2} exactly and is exact to roundoff on single-mode data.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .spectral import (
    Field,
    Grid,
    Spectrum,
    apply_multiplier,
    gradient,
    i_operator,
    inverse_transform,
    lebesgue_norm,
    resize_spectrum,
    spacetime_norm,
    transform,
    field_to_bytes,
    field_from_bytes,
)

log = logging.getLogger(__name__)

_GL_SQ3 = np.sqrt(3.0) / 6.0
_GL_A = ((0.25, 0.25 - _GL_SQ3), (0.25 + _GL_SQ3, 0.25))


class SolverDivergence(RuntimeError):
    """Raised when the sup norm passes the overflow guard (an under-resolved run)."""


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    dt: float
    t_end: float
    record_stride: int = 1
    dealias: bool = True
    overflow_guard: float = 1e6
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        n = round(self.t_end / self.dt)
        if abs(n * self.dt - self.t_end) > 1e-12 * max(1.0, self.t_end):
            raise ValueError(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class Trajectory:
    times: tuple
    states: tuple

    def __post_init__(self):
        if len(self.times) != len(self.states) or not self.states:
            raise ValueError("trajectory needs matching, non-empty times and states")
        g = self.states[0].grid
        if any(u.grid != g for u in self.states):
            raise ValueError("all states must share one grid")
        if np.any(np.diff(np.asarray(self.times, dtype=float)) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def grid(self) -> Grid:
        return self.states[0].grid

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class DecompositionResult:
    linear: Trajectory
    nonlinear: Trajectory
    origin_time: float


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------


def free_phase(grid: Grid, t: float) -> np.ndarray:
    r2 = sum(k**2 for k in grid.wavevectors())
    return np.exp(-1j * t * r2)


def free_flow(sp: Spectrum, t: float) -> Spectrum:
    """e^{i t Lap} on a spectrum."""
    return Spectrum(sp.grid, sp.coeffs * free_phase(sp.grid, t))


def cubic_galerkin(sp: Spectrum) -> Spectrum:
    """P(|v|^2 v): cubic product on a 2x padded grid, truncated back to the lattice."""
    g = sp.grid
    fine = inverse_transform(resize_spectrum(sp, 2 * g.modes)).values
    w = transform(Field(g.with_modes(2 * g.modes), np.abs(fine) ** 2 * fine))
    return resize_spectrum(w, g.modes)


def _nonlinear_exact_phase(u: np.ndarray, dt: float) -> np.ndarray:
    return np.exp(-1j * dt * np.abs(u) ** 2) * u


def _nonlinear_galerkin(sp: Spectrum, dt: float, tol: float = 1e-15, maxiter: int = 100) -> Spectrum:
    g = sp.grid
    v = sp.coeffs

    def rhs(c):
        return -1j * cubic_galerkin(Spectrum(g, c)).coeffs

    k1 = rhs(v)
    k2 = k1.copy()
    scale = max(np.abs(v).max(), 1e-300)
    for _ in range(maxiter):
        n1 = rhs(v + dt * (_GL_A[0][0] * k1 + _GL_A[0][1] * k2))
        n2 = rhs(v + dt * (_GL_A[1][0] * k1 + _GL_A[1][1] * k2))
        delta = dt * max(np.abs(n1 - k1).max(), np.abs(n2 - k2).max())
        k1, k2 = n1, n2
        if delta <= tol * scale:
            break
    else:
        raise SolverDivergence(
            f"nonlinear collocation did not converge (dt*|u|^2 too large? dt={dt})")
    return Spectrum(g, v + 0.5 * dt * (k1 + k2))


def _step_spectrum(sp: Spectrum, dt: float, dealias: bool, half: np.ndarray) -> Spectrum:
    g = sp.grid
    sp = Spectrum(g, sp.coeffs * half)
    if dealias:
        sp = _nonlinear_galerkin(sp, dt)
    else:
        u = inverse_transform(sp).values
        sp = transform(Field(g, _nonlinear_exact_phase(u, dt)))
    return Spectrum(g, sp.coeffs * half)


def strang_step(f: Field, dt: float, dealias: bool = True) -> Field:
    half = free_phase(f.grid, 0.5 * dt)
    return inverse_transform(_step_spectrum(transform(f), dt, dealias, half))


def _iter_steps(u0: Field, cfg: SolverConfig, start_step: int = 0) -> Iterator[tuple[int, Field]]:
    u = u0
    g = u0.grid
    half = free_phase(g, 0.5 * cfg.dt)
    for n in range(start_step + 1, cfg.steps + 1):
        # each step starts from the physical field so a resumed run is bit-identical
        with np.errstate(over="ignore", invalid="ignore"):
            sp = _step_spectrum(transform(u), cfg.dt, cfg.dealias, half)
            u = inverse_transform(sp)
            sup = np.abs(u.values).max()
        record = n % cfg.record_stride == 0 or n == cfg.steps
        if not np.isfinite(sup) or sup > cfg.overflow_guard:
            raise SolverDivergence(
                f"|u|_inf = {sup:.3e} exceeds guard {cfg.overflow_guard:.1e} at step {n} "
                f"(t = {cfg.t0 + n * cfg.dt:.6g}); refine dt or the grid")
        if record:
            yield n, u


def evolve(u0: Field, cfg: SolverConfig, checkpoint: str | os.PathLike | None = None) -> Trajectory:
    """Integrate from ``cfg.t0`` to ``cfg.t0 + cfg.t_end``.

    Records the initial state, every ``record_stride``-th step and the final state.  With
    ``checkpoint`` each recorded state is also appended to that file.
    """
    if u0.grid != cfg.grid:
        raise ValueError("initial field is not on the configured grid")
    times = [cfg.t0]
    states = [u0]
    if checkpoint is not None:
        write_checkpoint(checkpoint, Trajectory((cfg.t0,), (u0,)))
    for n, u in _iter_steps(u0, cfg):
        t = cfg.t0 + n * cfg.dt
        times.append(t)
        states.append(u)
        if checkpoint is not None:
            append_checkpoint(checkpoint, t, u)
    return Trajectory(tuple(times), tuple(states))


def resume(checkpoint: str | os.PathLike, cfg: SolverConfig) -> Trajectory:
    """Continue a checkpointed run up to ``cfg.t0 + cfg.t_end``.

    The last complete record is taken as the restart point; its time must sit on the
    step lattice of ``cfg``.
    """
    done = read_checkpoint(checkpoint)
    t_last = done.times[-1]
    n_done = round((t_last - cfg.t0) / cfg.dt)
    if abs(cfg.t0 + n_done * cfg.dt - t_last) > 1e-9 * max(1.0, abs(t_last)):
        raise ValueError("checkpoint time is not on the step lattice of this config")
    times = list(done.times)
    states = list(done.states)
    # rewrite so a torn trailing record is dropped before appending
    write_checkpoint(checkpoint, done)
    for n, u in _iter_steps(done.states[-1], cfg, start_step=n_done):
        t = cfg.t0 + n * cfg.dt
        times.append(t)
        states.append(u)
        append_checkpoint(checkpoint, t, u)
    return Trajectory(tuple(times), tuple(states))


# ---------------------------------------------------------------------------
# conserved quantities
# ---------------------------------------------------------------------------


def mass(f: Field) -> float:
    return lebesgue_norm(f, 2) ** 2


def _quartic_integral(sp: Spectrum) -> float:
    """int |v|^4 computed alias-free on a 2x padded grid."""
    g = sp.grid
    fine_grid = g.with_modes(2 * g.modes)
    v = inverse_transform(resize_spectrum(sp, 2 * g.modes)).values
    return float(np.sum((np.abs(v) ** 4).ravel()) * fine_grid.cell_volume)


def _kinetic(sp: Spectrum) -> float:
    g = sp.grid
    r2 = sum(k**2 for k in g.wavevectors())
    return float(np.sum((r2 * np.abs(sp.coeffs) ** 2).ravel()) * g.dxi**g.dim)


def energy_of_spectrum(sp: Spectrum) -> float:
    return 0.5 * _kinetic(sp) + 0.25 * _quartic_integral(sp)


def energy(f: Field) -> float:
    """1/2 |grad u|^2 + 1/4 |u|^4, gradient spectral and quartic term dealiased."""
    return energy_of_spectrum(transform(f))


def energy_I(f: Field, N: float, s: float, transition: str = "power") -> float:
    return energy_of_spectrum(apply_multiplier(transform(f), i_operator(N, s, transition)))


# ---------------------------------------------------------------------------
# Duhamel split, scaling, M(J, u, q)
# ---------------------------------------------------------------------------


def duhamel_split(traj: Trajectory, t0: float | None = None) -> DecompositionResult:
    """u = u^l + u^nl with u^l(t) = e^{i (t - t0) Lap} u(t0)."""
    first = traj.times[0]
    if t0 is None:
        t0 = first
    if t0 != first:
        raise ValueError(f"t0={t0} must equal the trajectory's first time {first}")
    base = transform(traj.states[0])
    lin, nonlin = [], []
    for t, u in zip(traj.times, traj.states):
        if t == t0:
            ul = traj.states[0]
            unl = Field(u.grid, np.zeros(u.grid.shape, dtype=complex))
        else:
            ul = inverse_transform(free_flow(base, t - t0))
            unl = Field(u.grid, u.values - ul.values)
        lin.append(ul)
        nonlin.append(unl)
    return DecompositionResult(Trajectory(traj.times, tuple(lin)),
                               Trajectory(traj.times, tuple(nonlin)), t0)


def rescale(f: Field, lam: float) -> Field:
    """u^(lam)(x) = lam^{-1} u(x / lam) on a box of length lam * L (same mode count)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    g = f.grid
    new = Grid(g.dim, g.modes, g.length * lam)
    sp = transform(f)
    return inverse_transform(Spectrum(new, sp.coeffs * lam ** (g.dim - 1)))


def m_factor(traj: Trajectory, q: float) -> float:
    """M(J, u, q) = max{1, |u|_{L^4_{t,x}}^4}^{1/q}."""
    if not q > 0:
        raise ValueError("q must be positive")
    if np.isinf(q):
        return 1.0
    l4 = spacetime_norm(traj, 4, 4) ** 4
    return max(1.0, l4) ** (1.0 / q)


# ---------------------------------------------------------------------------
# checkpoints: repeated [time float64 LE][Field record]
# ---------------------------------------------------------------------------


def _record(t: float, u: Field) -> bytes:
    return np.float64(t).astype("<f8").tobytes() + field_to_bytes(u)


def write_checkpoint(path, traj: Trajectory) -> None:
    with open(path, "wb") as fh:
        for t, u in zip(traj.times, traj.states):
            fh.write(_record(t, u))


def append_checkpoint(path, t: float, u: Field) -> None:
    with open(path, "ab") as fh:
        fh.write(_record(t, u))


def read_checkpoint(path) -> Trajectory:
    """Read every complete record; a torn trailing record is ignored."""
    with open(path, "rb") as fh:
        buf = fh.read()
    times, states = [], []
    off = 0
    while off + 8 <= len(buf):
        t = float(np.frombuffer(buf[off:off + 8], dtype="<f8")[0])
        try:
            u, end = field_from_bytes(buf, off + 8)
        except ValueError:
            break
        times.append(t)
        states.append(u)
        off = end
    if not states:
        raise ValueError(f"no complete records in checkpoint {path}")
    return Trajectory(tuple(times), tuple(states))
