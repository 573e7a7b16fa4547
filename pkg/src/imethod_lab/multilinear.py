"""Multilinear functionals on the frequency hyperplane and the resonance-corrected energy.

Lattice functionals
-------------------
For spectra u_1..u_k (k even) on one box, slots alternate u, conj(u):

    Lambda_k(M; u_1..u_k) = Re sum M(xi_1..xi_k) u1^(xi_1) conj(u2^(-xi_2)) u3^(xi_3) ...

over lattice tuples with xi_1 + ... + xi_k = 0.  Slot j ranges over the lattice modes
n_j of u_j, with xi_j = +dxi n_j for odd j and -dxi n_j for even j.  The sum carries the
weight dxi^{d(k-1)} (2 pi)^{-d(k/2-1)}, which normalizes the hyperplane measure so that
the sum of prod u_j^ equals int prod u_j dx.  With it Lambda_2(sigma_2; u) is exactly
1/2 |nabla I u|^2 and Lambda_4(1/4 prod m_j; u) is exactly 1/4 |I u|_{L^4}^4.

Slot 1 may live on a larger lattice than the others (same dxi); that is how the cubic
product |u|^2 u enters Lambda_6(X(M); u) at the cost of one Lambda_4 sum.

Sign conventions for u_t = i Lap u - i |u|^2 u:
    d/dt Lambda_2(sigma_2) = Lambda_4(D),  D = (i/4) sum_j (-1)^{j-1} m_j^2 |xi_j|^2
    d/dt Lambda_4(M)       = Lambda_4(-i alpha_4 M) + Lambda_6(SEXTIC_SIGN * 4i X(M))
for G_4-symmetric real M.  D is the literal group average of -2i X(sigma_2).
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spectral import (
    TWO_PI,
    Field,
    Grid,
    Spectrum,
    i_symbol,
    inverse_transform,
    resize_spectrum,
    transform,
    worker_count,
)

SEXTIC_SIGN = -1
# tuples per vectorized block in lattice sums; fixed so results do not depend on workers
CHUNK_TUPLES = 1 << 17


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolK:
    """A k-ary frequency symbol.  ``fn`` takes k arrays of shape (n, d) and returns (n,)."""

    arity: int
    fn: Callable
    name: str = "symbol"
    params: dict = field(default_factory=dict)

    def __call__(self, *xis):
        if len(xis) != self.arity:
            raise ValueError(f"{self.name} expects {self.arity} frequencies, got {len(xis)}")
        return self.fn(*xis)

    def scaled(self, c: complex, name: str | None = None) -> "SymbolK":
        return SymbolK(self.arity, lambda *x: c * self.fn(*x), name or f"{c}*{self.name}", self.params)


@dataclass(frozen=True)
class ResonanceSpec:
    N: float
    s: float
    theta0: float | None = None
    transition: str = "power"

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError("N must be positive")
        if not 0.5 < self.s < 1.0:
            raise ValueError("s must lie in (1/2, 1)")
        if self.theta0 is None:
            object.__setattr__(self, "theta0", float(self.N) ** (-7.0 / 8.0))
        if not 0 < self.theta0 <= 1:
            raise ValueError("theta0 must lie in (0, 1]")

    def m(self, r):
        return i_symbol(r, self.N, self.s, self.transition)


@dataclass(frozen=True)
class FrequencyTuple:
    """A point of Sigma_k, stored as an array of shape (k, d)."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        if xi.shape[0] not in (2, 4, 6):
            raise ValueError("k must be 2, 4 or 6")
        scale = max(1.0, float(np.abs(xi).max()))
        if np.abs(xi.sum(axis=0)).max() > 1e-12 * scale:
            raise ValueError("frequencies do not sum to zero (tuple off Sigma_k)")
        object.__setattr__(self, "xi", xi)

    @property
    def k(self) -> int:
        return self.xi.shape[0]

    def __getitem__(self, j):
        """1-based access, matching xi_1 .. xi_k."""
        return self.xi[j - 1]

    def pair(self, a: int, b: int) -> np.ndarray:
        return self[a] + self[b]

    def slots(self) -> list[np.ndarray]:
        return [self.xi[j][None, :] for j in range(self.k)]


def _norm(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def alpha4_arrays(x1, x2, x3, x4):
    return 2.0 * np.sum((x1 + x2) * (x1 + x4), axis=-1)


def alternating_square_sum(x1, x2, x3, x4, weights=None):
    sq = [np.sum(x * x, axis=-1) for x in (x1, x2, x3, x4)]
    if weights is not None:
        sq = [w * q for w, q in zip(weights, sq)]
    return sq[0] - sq[1] + sq[2] - sq[3]


def cos_angle_arrays(x1, x2, x3, x4):
    """cos of the angle between xi_12 and xi_14; 0 when either vector vanishes."""
    a = x1 + x2
    b = x1 + x4
    na, nb = _norm(a), _norm(b)
    den = na * nb
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(den > 0, np.sum(a * b, axis=-1) / np.where(den > 0, den, 1.0), 0.0)
    return c


def regions(x1, x2, x3, x4, spec: ResonanceSpec):
    """Boolean masks (omega1, omega2, omega_res)."""
    rmax = np.maximum.reduce([_norm(x) for x in (x1, x2, x3, x4)])
    om1 = rmax <= spec.N
    om2 = np.abs(cos_angle_arrays(x1, x2, x3, x4)) >= spec.theta0
    res = (rmax > spec.N) & ~om2
    return om1, om2, res


def _m2r2(x, spec: ResonanceSpec):
    r = _norm(x)
    return spec.m(r) ** 2 * r * r


def main_symbol4(x1, x2, x3, x4, spec: ResonanceSpec):
    """D = [-2iX(sigma_2)]_sym = (i/4) sum (-1)^{j-1} m_j^2 |xi_j|^2."""
    return 0.25j * (_m2r2(x1, spec) - _m2r2(x2, spec) + _m2r2(x3, spec) - _m2r2(x4, spec))


def sigma2_arrays(x1, x2, N, s, transition="power"):
    r = _norm(x1)
    return 0.5 * r * r * i_symbol(r, N, s, transition) ** 2


def sigma4_arrays(x1, x2, x3, x4, N, s, transition="power"):
    out = 0.25
    for x in (x1, x2, x3, x4):
        out = out * i_symbol(_norm(x), N, s, transition)
    return out


def sigma4_tilde_arrays(x1, x2, x3, x4, spec: ResonanceSpec):
    """sigma~_4 = D / (i alpha_4) on Omega_nr, 0 elsewhere; exactly 1/4 on Omega_1."""
    om1, om2, _ = regions(x1, x2, x3, x4, spec)
    alt = _m2r2(x1, spec) - _m2r2(x2, spec) + _m2r2(x3, spec) - _m2r2(x4, spec)
    a4 = alpha4_arrays(x1, x2, x3, x4)
    use = om2 & ~om1
    with np.errstate(invalid="ignore", divide="ignore"):
        quot = np.where(use, alt / (4.0 * np.where(use, a4, 1.0)), 0.0)
    return np.where(om1, 0.25, quot)


def increment_forms(x1, x2, x3, x4, spec: ResonanceSpec):
    """Both representations of the quartic increment symbol.

    Returns ``(D - i sigma~_4 alpha_4, D * 1_res)``.  The free-flow phase symbol of this
    equation is -alpha_4, hence the minus sign.
    """
    d = main_symbol4(x1, x2, x3, x4, spec)
    lhs = d - 1j * sigma4_tilde_arrays(x1, x2, x3, x4, spec) * alpha4_arrays(x1, x2, x3, x4)
    _, _, res = regions(x1, x2, x3, x4, spec)
    return lhs, np.where(res, d, 0.0)


# scalar wrappers on FrequencyTuple -------------------------------------------------


def _four(t: FrequencyTuple):
    if t.k != 4:
        raise ValueError("expected a tuple in Sigma_4")
    return t.slots()


def alpha4(t: FrequencyTuple) -> float:
    return float(alpha4_arrays(*_four(t))[0])


def sigma2(xi, N: float, s: float, transition: str = "power") -> float:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))[None, :]
    return float(sigma2_arrays(xi, -xi, N, s, transition)[0])


def sigma4(t: FrequencyTuple, N: float, s: float, transition: str = "power") -> float:
    return float(np.asarray(sigma4_arrays(*_four(t), N, s, transition)).ravel()[0])


def sigma4_tilde(t: FrequencyTuple, spec: ResonanceSpec) -> complex:
    return complex(sigma4_tilde_arrays(*_four(t), spec)[0])


def resonant_indicator(t: FrequencyTuple, spec: ResonanceSpec) -> int:
    return int(regions(*_four(t), spec)[2][0])


def increment_symbol4(t: FrequencyTuple, spec: ResonanceSpec) -> complex:
    return complex(increment_forms(*_four(t), spec)[1][0])


def increment_symbol4_check(t: FrequencyTuple, spec: ResonanceSpec) -> tuple[complex, complex]:
    lhs, rhs = increment_forms(*_four(t), spec)
    return complex(lhs[0]), complex(rhs[0])


# SymbolK factories ------------------------------------------------------------------


def sigma2_symbol(N, s, transition="power") -> SymbolK:
    return SymbolK(2, lambda a, b: sigma2_arrays(a, b, N, s, transition), "sigma2", {"N": N, "s": s})


def sigma4_symbol(N, s, transition="power") -> SymbolK:
    def fn(a, b, c, d):
        return np.broadcast_to(sigma4_arrays(a, b, c, d, N, s, transition), a.shape[:-1])
    return SymbolK(4, fn, "sigma4", {"N": N, "s": s})


def sigma4_tilde_symbol(spec: ResonanceSpec) -> SymbolK:
    return SymbolK(4, lambda a, b, c, d: sigma4_tilde_arrays(a, b, c, d, spec), "sigma4_tilde",
                   {"N": spec.N, "s": spec.s, "theta0": spec.theta0})


def increment_symbol(spec: ResonanceSpec) -> SymbolK:
    return SymbolK(4, lambda a, b, c, d: increment_forms(a, b, c, d, spec)[1], "increment4",
                   {"N": spec.N, "s": spec.s, "theta0": spec.theta0})


def extend(sym: SymbolK) -> SymbolK:
    """X(M)(xi_1..xi_{k+2}) = M(xi_1 + xi_2 + xi_3, xi_4, ..., xi_{k+2})."""
    return SymbolK(sym.arity + 2, lambda a, b, c, *rest: sym.fn(a + b + c, *rest),
                   f"X({sym.name})", sym.params)


def group_elements(k: int) -> list[tuple[tuple[int, ...], bool]]:
    """G_k as (slot permutation, conjugate) pairs: S(odd) x S(even), times {id, h}."""
    if k % 2 or k < 2:
        raise ValueError("symmetrization needs an even arity")
    odd = list(range(0, k, 2))
    even = list(range(1, k, 2))
    swap = [j + 1 if j % 2 == 0 else j - 1 for j in range(k)]
    out = []
    for pa in itertools.permutations(odd):
        for pb in itertools.permutations(even):
            perm = [0] * k
            for src, dst in zip(odd, pa):
                perm[src] = dst
            for src, dst in zip(even, pb):
                perm[src] = dst
            out.append((tuple(perm), False))
            out.append((tuple(perm[swap[j]] for j in range(k)), True))
    return out


def symmetrize(sym: SymbolK, k: int | None = None) -> SymbolK:
    """[M]_sym: average of g M over g in G_k."""
    k = sym.arity if k is None else k
    if k != sym.arity:
        raise ValueError("arity mismatch")
    elems = group_elements(k)

    def fn(*xis):
        acc = 0.0
        for perm, conj in elems:
            v = np.asarray(sym.fn(*[xis[p] for p in perm]), dtype=complex)
            acc = acc + (np.conj(v) if conj else v)
        return acc / len(elems)

    return SymbolK(k, fn, f"[{sym.name}]_sym", sym.params)


# ---------------------------------------------------------------------------
# lattice sums
# ---------------------------------------------------------------------------


def _slot_support(sp: Spectrum, floor: float):
    """Integer modes and coefficients of a spectrum where |coefficient| > floor."""
    c = sp.centered()
    half = sp.grid.modes // 2
    idx = np.nonzero(np.abs(c) > floor)
    modes = np.stack(idx, axis=-1).astype(np.int64) - half
    return modes, c[idx]


def hyperplane_weight(grid: Grid, k: int) -> float:
    d = grid.dim
    return grid.dxi ** (d * (k - 1)) * TWO_PI ** (-d * (k // 2 - 1))


def _check_grids(spectra: Sequence[Spectrum]):
    g = spectra[-1].grid
    for sp in spectra:
        if sp.grid.dim != g.dim or sp.grid.length != g.length:
            raise ValueError("all spectra must share one box and dimension")
    for sp in spectra[1:]:
        if sp.grid != g:
            raise ValueError("slots 2..k must share one grid")
    return g


def lattice_sum(sym: SymbolK, spectra: Sequence[Spectrum], floor: float = 0.0,
                workers: int | None = None) -> complex:
    """Complex sum before taking the real part (see module docstring).

    Slots 3..k are enumerated jointly, slot 2 is the outer (chunked) loop and slot 1 is
    determined by the hyperplane constraint and looked up in its (possibly larger) lattice.
    Chunk partials are reduced with numpy's pairwise summation in a fixed order.
    """
    k = len(spectra)
    if k != sym.arity or k % 2:
        raise ValueError(f"arity mismatch: symbol {sym.arity}, {k} spectra")
    g = _check_grids(spectra)
    d = g.dim
    dxi = g.dxi

    # slots 3..k: combined offsets (contribution to n_1) and products
    offs = np.zeros((1, d), dtype=np.int64)
    prod = np.ones(1, dtype=complex)
    tails = []
    for j in range(2, k):
        modes, vals = _slot_support(spectra[j], floor)
        sign = -1 if j % 2 == 0 else 1  # 0-based j even -> odd slot (u), contributes -n
        if j % 2 == 1:
            vals = np.conj(vals)
        offs = (offs[:, None, :] + sign * modes[None, :, :]).reshape(-1, d)
        prod = (prod[:, None] * vals[None, :]).ravel()
        tails.append(modes)
    # index arrays for each tail slot in the combined enumeration
    sizes = [len(m) for m in tails]
    tail_idx = np.indices(sizes).reshape(len(sizes), -1) if sizes else np.zeros((0, 1), dtype=np.int64)

    m2, v2 = _slot_support(spectra[1], floor)
    v2 = np.conj(v2)
    c1 = spectra[0].centered()
    half1 = spectra[0].grid.modes // 2
    n_tail = len(prod)
    if n_tail == 0 or len(m2) == 0:
        return 0j
    rows = max(1, CHUNK_TUPLES // n_tail)

    def block(start):
        sl = slice(start, start + rows)
        n1 = m2[sl][:, None, :] + offs[None, :, :]  # (r, n_tail, d)
        pos = n1 + half1
        valid = np.all((pos >= 0) & (pos < 2 * half1), axis=-1)
        ii, tt = np.nonzero(valid)
        if ii.size == 0:
            return 0j
        p = pos[ii, tt]
        a1 = c1[tuple(p.T)]
        xis = [dxi * n1[ii, tt], -dxi * m2[sl][ii]]
        for j, modes in enumerate(tails):
            sign = 1 if j % 2 == 0 else -1
            xis.append(sign * dxi * modes[tail_idx[j][tt]])
        vals = np.asarray(sym.fn(*xis))
        terms = vals * a1 * v2[sl][ii] * prod[tt]
        return complex(np.sum(terms))

    starts = list(range(0, len(m2), rows))
    nw = worker_count() if workers is None else workers
    if nw > 1 and len(starts) > 1:
        with ThreadPoolExecutor(nw) as ex:
            partials = list(ex.map(block, starts))
    else:
        partials = [block(st) for st in starts]
    return complex(np.sum(np.array(partials, dtype=complex))) * hyperplane_weight(g, k)


def lambda_k(sym: SymbolK, spectra: Sequence[Spectrum], floor: float = 0.0) -> float:
    return lattice_sum(sym, spectra, floor).real


def lambda2(sym: SymbolK, sp: Spectrum) -> float:
    if sym.arity != 2:
        raise ValueError("lambda2 needs a 2-ary symbol")
    return lattice_sum(sym, [sp, sp]).real


def lambda4(sym: SymbolK, spectra: Sequence[Spectrum] | Spectrum, floor: float = 0.0) -> float:
    if isinstance(spectra, Spectrum):
        spectra = [spectra] * 4
    if sym.arity != 4 or len(spectra) != 4:
        raise ValueError("lambda4 needs a 4-ary symbol and four spectra")
    return lattice_sum(sym, spectra, floor).real


def cubic_exact(sp: Spectrum) -> Spectrum:
    """Spectrum of |u|^2 u on the 3x lattice, where it is represented without aliasing."""
    g = sp.grid
    big = g.with_modes(3 * g.modes)
    u = inverse_transform(resize_spectrum(sp, big.modes)).values
    return transform(Field(big, np.abs(u) ** 2 * u))


def lambda6_extended(sym: SymbolK, sp: Spectrum, galerkin: bool = False, floor: float = 0.0) -> float:
    """Lambda_6(X(M); u) via the cubic collapse of the first three slots.

    ``galerkin`` keeps only the retained modes of |u|^2 u, which is the sextic term that
    appears in the time derivative of the dealiased (Galerkin) dynamics.
    """
    if sym.arity != 4:
        raise ValueError("lambda6_extended takes a 4-ary symbol")
    w = cubic_exact(sp)
    if galerkin:
        w = resize_spectrum(w, sp.grid.modes)
    return lattice_sum(sym, [w, sp, sp, sp], floor).real


def lambda6_bruteforce(sym: SymbolK, sp: Spectrum) -> float:
    """Direct five-fold lattice sum of Lambda_6(X(M); u)."""
    return lattice_sum(extend(sym), [sp] * 6).real


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------


def modified_energy(sp: Spectrum, spec: ResonanceSpec, floor: float = 0.0) -> float:
    """E~(u) = Lambda_2(sigma_2; u) + Lambda_4(sigma~_4; u)."""
    return (lambda2(sigma2_symbol(spec.N, spec.s, spec.transition), sp)
            + lambda4(sigma4_tilde_symbol(spec), sp, floor))


def multilinear_energy(sp: Spectrum, N: float, s: float, transition: str = "power") -> float:
    """Lambda_2(sigma_2; u) + Lambda_4(sigma_4; u)."""
    return (lambda2(sigma2_symbol(N, s, transition), sp)
            + lambda4(sigma4_symbol(N, s, transition), sp))


def energy_identity_gap(sp: Spectrum, N: float, s: float, transition: str = "power") -> float:
    from .solver import energy_of_spectrum
    from .spectral import apply_multiplier, i_operator

    e_i = energy_of_spectrum(apply_multiplier(sp, i_operator(N, s, transition)))
    return abs(e_i - multilinear_energy(sp, N, s, transition))


def increment_integrands(traj, spec: ResonanceSpec, sextic_sign: int = SEXTIC_SIGN):
    """Per recorded time: (Lambda_4 increment term, Lambda_6 term) of dE~/dt."""
    quart = increment_symbol(spec)
    sext = sigma4_tilde_symbol(spec).scaled(sextic_sign * 4j, "4iX(sigma4_tilde)")
    q_series, s_series = [], []
    for u in traj.states:
        sp = transform(u)
        q_series.append(lambda4(quart, sp))
        s_series.append(lambda6_extended(sext, sp, galerkin=True))
    return np.asarray(q_series), np.asarray(s_series)


def increment_residual(traj, spec: ResonanceSpec, sextic_sign: int = SEXTIC_SIGN) -> float:
    """E~(u(T)) - E~(u(0)) minus the trapezoid integral of the two integrands."""
    q, s6 = increment_integrands(traj, spec, sextic_sign)
    t = np.asarray(traj.times, dtype=float)
    e0 = modified_energy(transform(traj.states[0]), spec)
    e1 = modified_energy(transform(traj.states[-1]), spec)
    return (e1 - e0) - float(np.trapezoid(q + s6, t))
