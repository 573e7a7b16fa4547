"""Periodic-box Fourier analysis: grids, unitary transforms, radial multipliers and norms.

Conventions
-----------
The box is ``[0, L)^d`` sampled with ``M`` points per axis.  Frequencies live on the
lattice ``2*pi*k/L`` with integer ``k`` in ``[-M/2, M/2)``.  Coefficients are the
samples of the continuum unitary Fourier transform of the trigonometric interpolant,

    u_hat(xi) = (2 pi)^{-d/2} h^d sum_x u(x) exp(-i xi.x),      h = L / M,

so that ``sum |u|^2 h^d == sum |u_hat|^2 dxi^d`` with ``dxi = 2 pi / L``.  Spectra are
stored in numpy FFT ordering; :meth:`Grid.centered` style helpers give ascending order.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


def worker_count() -> int:
    """Worker count for chunked lattice loops, read from ``IMETHOD_LAB_WORKERS``."""
    try:
        return max(1, int(os.environ.get("IMETHOD_LAB_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    dim: int
    modes: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if int(self.modes) != self.modes or self.modes < 4 or self.modes % 2:
            raise ValueError(f"modes_per_dim must be an even integer >= 4, got {self.modes}")
        if not self.length > 0:
            raise ValueError(f"box_length must be positive, got {self.length}")

    @property
    def shape(self) -> tuple:
        return (self.modes,) * self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.modes

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def dxi(self) -> float:
        return TWO_PI / self.length

    @property
    def volume(self) -> float:
        return self.length**self.dim

    def integer_modes(self) -> np.ndarray:
        """Integer lattice coordinates per axis, FFT ordering (``-M/2`` at index ``M/2``)."""
        return np.fft.fftfreq(self.modes, d=1.0 / self.modes).round().astype(np.int64)

    def frequencies(self) -> np.ndarray:
        """1-D frequency values ``2 pi k / L`` in FFT ordering."""
        return self.dxi * self.integer_modes()

    def wavevectors(self) -> list[np.ndarray]:
        """Per-axis frequency arrays broadcast to the full lattice shape."""
        k1 = self.frequencies()
        return list(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    def xi_magnitude(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.wavevectors()))

    def coordinates(self) -> list[np.ndarray]:
        x1 = np.arange(self.modes) * self.spacing
        return list(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    def with_modes(self, modes: int) -> "Grid":
        return Grid(self.dim, modes, self.length)


def make_grid(dim: int, modes_per_dim: int, box_length: float) -> Grid:
    return Grid(int(dim), int(modes_per_dim), float(box_length))


@dataclass(frozen=True)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class Spectrum:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"spectrum shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    def centered(self) -> np.ndarray:
        """Coefficients in ascending-frequency order, index ``k + M/2`` per axis."""
        return np.fft.fftshift(self.coeffs)


def _forward_scale(grid: Grid) -> float:
    return grid.cell_volume / TWO_PI ** (grid.dim / 2)


def transform(f: Field) -> Spectrum:
    return Spectrum(f.grid, np.fft.fftn(f.values) * _forward_scale(f.grid))


def inverse_transform(sp: Spectrum) -> Field:
    return Field(sp.grid, np.fft.ifftn(sp.coeffs) / _forward_scale(sp.grid))


def resize_spectrum(sp: Spectrum, modes: int) -> Spectrum:
    """Zero-pad or truncate to ``modes`` per axis on the same box (same ``dxi``).

    Lattice points with integer coordinates outside ``[-modes/2, modes/2)`` are dropped.
    """
    g = sp.grid
    new = g.with_modes(modes)
    src = sp.centered()
    out = np.zeros(new.shape, dtype=np.complex128)
    lo = min(g.modes, modes) // 2
    # integer range kept: [-lo, lo) when shrinking or growing (both even)
    src_sl = tuple(slice(g.modes // 2 - lo, g.modes // 2 + lo) for _ in range(g.dim))
    dst_sl = tuple(slice(modes // 2 - lo, modes // 2 + lo) for _ in range(g.dim))
    out[dst_sl] = src[src_sl]
    return Spectrum(new, np.fft.ifftshift(out))


def spectrum_from_centered(grid: Grid, centered: np.ndarray) -> Spectrum:
    return Spectrum(grid, np.fft.ifftshift(centered))


# ---------------------------------------------------------------------------
# Radial multipliers
# ---------------------------------------------------------------------------

# phi(r) = 1 on r <= 1, 0 on r >= 2, and on t = r - 1 in (0, 1)
#     phi = 1 - (10 t^3 - 15 t^4 + 6 t^5)
# (quintic smoothstep: C^2 at both ends, monotone).
LP_BUMP_COEFFS = (0.0, 0.0, 0.0, 10.0, -15.0, 6.0)


def lp_bump(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    t = np.clip(r - 1.0, 0.0, 1.0)
    step = t**3 * (LP_BUMP_COEFFS[3] + t * (LP_BUMP_COEFFS[4] + t * LP_BUMP_COEFFS[5]))
    return 1.0 - step


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 + t * (-15.0 + 6.0 * t))


MULTIPLIER_KINDS = ("I", "lp_below", "lp_above", "lp_band", "derivative")


@dataclass(frozen=True)
class MultiplierSpec:
    """Radial Fourier symbol.

    kinds: ``I`` (parameters N, s), ``lp_below``/``lp_above``/``lp_band`` (N),
    ``derivative`` (order, sign: +1 gives ``|xi|^order``, -1 gives ``|xi|^-order``).

    ``transition`` selects the I-symbol on ``(N, 2N]``: ``"power"`` uses the power law
    already from ``N`` on; ``"smooth"`` blends 1 into the power law with a C^2 step.
    """

    kind: str
    N: float = 1.0
    s: float = 0.5
    order: float = 1.0
    sign: int = 1
    transition: str = "power"

    def __post_init__(self):
        if self.kind not in MULTIPLIER_KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if self.kind != "derivative" and not self.N > 0:
            raise ValueError("N must be positive")
        if self.kind == "I" and not 0.5 <= self.s <= 1.0:
            raise ValueError(f"I-operator needs s in [1/2, 1], got {self.s}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.transition not in ("power", "smooth"):
            raise ValueError(f"unknown transition {self.transition!r}")


def i_operator(N: float, s: float, transition: str = "power") -> MultiplierSpec:
    return MultiplierSpec("I", N=N, s=s, transition=transition)


def i_symbol(r, N: float, s: float, transition: str = "power") -> np.ndarray:
    """m_N(|xi|) evaluated on magnitudes ``r``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        power = np.where(r > N, (N / np.where(r > 0, r, 1.0)) ** (1.0 - s), 1.0)
    if transition == "power":
        return power
    chi = _smoothstep((r - N) / N)
    return 1.0 - chi * (1.0 - power)


def evaluate_radial(spec: MultiplierSpec, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    k = spec.kind
    if k == "I":
        return i_symbol(r, spec.N, spec.s, spec.transition)
    if k == "lp_below":
        return lp_bump(r / spec.N)
    if k == "lp_above":
        return 1.0 - lp_bump(r / spec.N)
    if k == "lp_band":
        return lp_bump(r / spec.N) - lp_bump(2.0 * r / spec.N)
    # derivative
    if spec.sign > 0:
        return r**spec.order
    if np.any(r == 0):
        raise ZeroDivisionError("negative-order derivative symbol is singular at xi = 0")
    return r ** (-spec.order)


def evaluate_multiplier(spec: MultiplierSpec, xi) -> np.ndarray | float:
    """Symbol value at frequency vector(s) ``xi`` (last axis = components) or scalar."""
    xi = np.asarray(xi, dtype=float)
    r = np.abs(xi) if xi.ndim == 0 else np.linalg.norm(xi, axis=-1)
    out = evaluate_radial(spec, r)
    return float(out) if np.ndim(out) == 0 else out


def symbol_on_grid(spec: MultiplierSpec, grid: Grid, drop_zero: bool = False) -> np.ndarray:
    r = grid.xi_magnitude()
    if drop_zero and spec.kind == "derivative" and spec.sign < 0:
        out = np.zeros_like(r)
        nz = r > 0
        out[nz] = evaluate_radial(spec, r[nz])
        return out
    return evaluate_radial(spec, r)


def apply_multiplier(sp: Spectrum, spec: MultiplierSpec, drop_zero: bool = False) -> Spectrum:
    """Coefficient-wise product with the symbol.

    ``drop_zero`` lets a negative-order derivative act on the zero mode by zeroing it.
    """
    return Spectrum(sp.grid, sp.coeffs * symbol_on_grid(spec, sp.grid, drop_zero))


def gradient(sp: Spectrum) -> list[Spectrum]:
    return [Spectrum(sp.grid, 1j * k * sp.coeffs) for k in sp.grid.wavevectors()]


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def lebesgue_norm(f: Field | np.ndarray, p: float, grid: Grid | None = None) -> float:
    """Discrete L^p norm with cell-volume weights.  ``f`` may be a stack of components
    (first axis) for vector fields, in which case the pointwise Euclidean norm is used."""
    if isinstance(f, Field):
        grid, vals = f.grid, np.abs(f.values)
    else:
        vals = np.asarray(f)
        vals = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0)) if vals.ndim == grid.dim + 1 else np.abs(vals)
    if p < 1:
        raise ValueError("p must be >= 1")
    if np.isinf(p):
        return float(vals.max())
    return float((np.sum(vals.ravel() ** p) * grid.cell_volume) ** (1.0 / p))


def l2_norm_spectral(sp: Spectrum) -> float:
    return float(np.sqrt(np.sum(np.abs(sp.coeffs.ravel()) ** 2) * sp.grid.dxi**sp.grid.dim))


def sobolev_seminorm(sp: Spectrum, order: float) -> float:
    r = sp.grid.xi_magnitude()
    w = np.abs(sp.coeffs) ** 2 * r ** (2 * order)
    return float(np.sqrt(np.sum(w.ravel()) * sp.grid.dxi**sp.grid.dim))


def time_norm(times: Sequence[float], values: Sequence[float], q: float) -> float:
    """L^q in time of a sampled nonnegative function: trapezoid of ``values**q``."""
    v = np.asarray(values, dtype=float)
    t = np.asarray(times, dtype=float)
    if v.size == 0:
        raise ValueError("empty trajectory")
    if np.isinf(q):
        return float(v.max())
    if v.size == 1:
        return 0.0
    return float(np.trapezoid(v**q, t) ** (1.0 / q))


def spacetime_norm(traj, q: float, r: float) -> float:
    """L_t^q L_x^r over a trajectory (anything with ``times`` and ``states``)."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    t = np.asarray(traj.times, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("trajectory times must be strictly increasing")
    return time_norm(t, [lebesgue_norm(u, r) for u in traj.states], q)


def grad_i_components(sp: Spectrum, N: float, s: float, transition: str = "power") -> np.ndarray:
    """Physical-space components of nabla I u, stacked on the first axis."""
    v = apply_multiplier(sp, i_operator(N, s, transition))
    return np.stack([inverse_transform(g).values for g in gradient(v)])


# ---------------------------------------------------------------------------
# Admissible pairs and Z_I
# ---------------------------------------------------------------------------

INF = float("inf")


def _as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, (float, np.floating)) and np.isfinite(x):
        return Fraction(float(x)).limit_denominator(10**6)
    raise TypeError


def is_admissible(q, r) -> bool:
    """2/q == 3(1/2 - 1/r), exact for rational input (``q`` may be ``inf``)."""
    if r < 1 or q < 2:
        return False
    if r > 6:
        return False
    inv_q = Fraction(0) if q == INF else None
    try:
        if inv_q is None:
            inv_q = 1 / _as_fraction(q)
        inv_r = Fraction(0) if r == INF else 1 / _as_fraction(r)
    except TypeError:
        return bool(np.isclose(2.0 / q, 3.0 * (0.5 - 1.0 / r), rtol=0, atol=1e-12))
    return 2 * inv_q == 3 * (Fraction(1, 2) - inv_r)


@dataclass(frozen=True)
class AdmissiblePair:
    q: object
    r: object

    def __post_init__(self):
        if not is_admissible(self.q, self.r):
            raise ValueError(f"({self.q}, {self.r}) is not an admissible pair")

    def as_floats(self) -> tuple[float, float]:
        return float(self.q), float(self.r)


DEFAULT_PAIRS = (
    AdmissiblePair(INF, 2),
    AdmissiblePair(2, 6),
    AdmissiblePair(4, 3),
    AdmissiblePair(8, Fraction(12, 5)),
)


def z_norm(traj, N: float, s: float, pairs: Iterable = DEFAULT_PAIRS,
           transition: str = "power") -> float:
    pairs = [p if isinstance(p, AdmissiblePair) else AdmissiblePair(*p) for p in pairs]
    if not pairs:
        raise ValueError("z_norm needs at least one admissible pair")
    grid = traj.states[0].grid
    mags = {}
    t = np.asarray(traj.times, dtype=float)
    grads = [grad_i_components(transform(u), N, s, transition) for u in traj.states]
    best = 0.0
    for p in pairs:
        q, r = p.as_floats()
        if r not in mags:
            mags[r] = [lebesgue_norm(g, r, grid) for g in grads]
        best = max(best, time_norm(t, mags[r], q))
    return best


# ---------------------------------------------------------------------------
# Binary serialization: little-endian header (dim, M as int64; L as float64) then
# interleaved re/im float64 in row-major lattice order.  Spectra are written in
# ascending-frequency order.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<qqd")


def _pack(grid: Grid, arr: np.ndarray) -> bytes:
    body = np.ascontiguousarray(arr, dtype="<c16").view("<f8").tobytes()
    return _HEADER.pack(grid.dim, grid.modes, grid.length) + body


def _unpack(buf: bytes, offset: int = 0) -> tuple[Grid, np.ndarray, int]:
    if len(buf) - offset < _HEADER.size:
        raise ValueError("truncated header")
    dim, modes, length = _HEADER.unpack_from(buf, offset)
    grid = Grid(int(dim), int(modes), float(length))
    n = modes**dim
    start = offset + _HEADER.size
    end = start + 16 * n
    if len(buf) < end:
        raise ValueError("truncated record")
    arr = np.frombuffer(buf[start:end], dtype="<f8").view("<c16").reshape(grid.shape)
    return grid, arr.astype(np.complex128), end


def field_to_bytes(f: Field) -> bytes:
    return _pack(f.grid, f.values)


def field_from_bytes(buf: bytes, offset: int = 0) -> tuple[Field, int]:
    grid, arr, end = _unpack(buf, offset)
    return Field(grid, arr), end


def spectrum_to_bytes(sp: Spectrum) -> bytes:
    return _pack(sp.grid, sp.centered())


def spectrum_from_bytes(buf: bytes, offset: int = 0) -> tuple[Spectrum, int]:
    grid, arr, end = _unpack(buf, offset)
    return spectrum_from_centered(grid, arr), end
