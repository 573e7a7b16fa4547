"""Initial-data families used by the experiments and the tests."""
from __future__ import annotations

import numpy as np

from .spectral import Field, Grid, Spectrum, inverse_transform


def gaussian(grid: Grid, amplitude: float = 1.0, width: float = 0.5) -> Field:
    """A exp(-|x - c|^2 / width^2), centered in the box."""
    c = 0.5 * grid.length
    r2 = sum((x - c) ** 2 for x in grid.coordinates())
    return Field(grid, amplitude * np.exp(-r2 / width**2))


def planewave(grid: Grid, mode, amplitude: float = 1.0) -> Field:
    """amplitude * exp(i xi0 . x) with xi0 = 2 pi mode / L (integer lattice mode)."""
    mode = np.atleast_1d(np.asarray(mode, dtype=int))
    if mode.size == 1 and grid.dim > 1:
        mode = np.concatenate([mode, np.zeros(grid.dim - 1, dtype=int)])
    if mode.size != grid.dim:
        raise ValueError("mode must have one integer per dimension")
    if np.any(mode < -grid.modes // 2) or np.any(mode >= grid.modes // 2):
        raise ValueError("mode lies outside the frequency lattice")
    phase = sum(grid.dxi * k * x for k, x in zip(mode, grid.coordinates()))
    return Field(grid, amplitude * np.exp(1j * phase))


def random_bandlimited(grid: Grid, cutoff: float, amplitude: float = 1.0,
                       seed: int | np.random.Generator = 0, low_cutoff: float = 0.0) -> Field:
    """Gaussian random coefficients on low_cutoff <= |xi| <= cutoff, scaled to RMS = amplitude."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    r = grid.xi_magnitude()
    mask = (r <= cutoff) & (r >= low_cutoff)
    c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * mask
    u = inverse_transform(Spectrum(grid, c)).values
    rms = np.sqrt(np.mean(np.abs(u) ** 2))
    if rms == 0:
        return Field(grid, u)
    return Field(grid, u * (amplitude / rms))


def random_field(grid: Grid, rng: np.random.Generator, amplitude: float = 1.0) -> Field:
    """Complex white noise on the grid."""
    v = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return Field(grid, amplitude * v)
