"""Exact rational bookkeeping for the exponents of the almost-conservation argument.

Epsilon losses are carried as a slack flag: ``N^{a+}`` means "a plus an arbitrarily small
positive amount".  Comparisons involving slack are strict.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

TAGS = ("1", "M2", "M1")


@dataclass(frozen=True, order=True)
class Exponent:
    value: Fraction
    slack: int = 0  # +1 for "a+", -1 for "a-", 0 exact

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))
        if self.slack not in (-1, 0, 1):
            raise ValueError("slack must be -1, 0 or 1")

    def __add__(self, other: "Exponent | Fraction | int") -> "Exponent":
        if isinstance(other, Exponent):
            if self.slack and other.slack and self.slack != other.slack:
                raise ValueError("cannot add opposite epsilon losses")
            return Exponent(self.value + other.value, self.slack or other.slack)
        return Exponent(self.value + Fraction(other), self.slack)

    __radd__ = __add__

    def __neg__(self) -> "Exponent":
        return Exponent(-self.value, -self.slack)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Exponent) else -Fraction(other))

    def scale(self, c) -> "Exponent":
        c = Fraction(c)
        sl = self.slack if c > 0 else -self.slack if c < 0 else 0
        return Exponent(self.value * c, sl)

    def at_most(self, other: "Exponent") -> bool:
        """N^self <= N^other for all large N; a+ <= b requires a < b."""
        if self.value != other.value:
            return self.value < other.value
        return self.slack <= other.slack and not (self.slack > 0 and other.slack == 0)

    def __str__(self):
        s = str(self.value)
        return s + ("+" if self.slack > 0 else "-" if self.slack < 0 else "")


def _f(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class Monomial:
    """theta0^{theta_power} * tag * N^{n_exp}, with an optional epsilon slack."""

    tag: str
    theta_power: int
    n_exp: Fraction
    source: str
    slack: int = 1

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        object.__setattr__(self, "n_exp", _f(self.n_exp))

    def exponent(self, theta0_exp) -> Exponent:
        return Exponent(self.n_exp + self.theta_power * _f(theta0_exp), self.slack)

    def label(self) -> str:
        th = {0: "", 1: "theta0*", -1: "theta0^-1*"}[self.theta_power]
        tg = "" if self.tag == "1" else self.tag + "*"
        return f"{th}{tg}N^{self.n_exp}"


# Reviewed transcription of the monomials bounding the quartic and sextic increments.
# Sextic increment bound (five terms of the max, plus the M_1 term of the same list):
MONOMIALS_SEXTIC = (
    Monomial("1", 1, Fraction(-1, 2), "sextic: theta0/N^{1/2-}"),
    Monomial("1", 0, Fraction(-3, 2), "sextic: N^{-3/2+}"),
    Monomial("M2", 0, Fraction(-5, 2), "sextic: M2 N^{-5/2+}"),
    Monomial("M1", 0, Fraction(-13, 4), "sextic: M1 N^{-13/4+}"),
    Monomial("M2", 1, Fraction(-7, 4), "sextic: theta0 M2 N^{-7/4+}"),
    Monomial("M1", 1, Fraction(-9, 4), "sextic: theta0 M1 N^{-9/4+}"),
)
# Quartic (resonant) increment bound:
MONOMIALS_QUARTIC = (
    Monomial("1", -1, Fraction(-2), "quartic: theta0^-1 N^{-2+}"),
    Monomial("M2", -1, Fraction(-3), "quartic: theta0^-1 M2 N^{-3+}"),
    Monomial("M1", -1, Fraction(-4), "quartic: theta0^-1 M1 N^{-4+}"),
)
ALL_MONOMIALS = MONOMIALS_SEXTIC + MONOMIALS_QUARTIC


@dataclass
class Budget:
    theta0_exp: Fraction
    exponents: dict  # tag -> Exponent (max over the tag)
    binding: dict  # tag -> list of Monomial attaining the max

    def combined(self) -> Fraction:
        """Exponent of the tag-1 bound after normalizing M2 by N^{-1} and M1 by N^{-2}."""
        return max(self.exponents["1"].value, self.exponents["M2"].value + 1,
                   self.exponents["M1"].value + 2)


def budget_from(monomials: Iterable[Monomial], theta0_exp) -> Budget:
    t = _f(theta0_exp)
    exps: dict = {}
    bind: dict = {}
    for m in monomials:
        e = m.exponent(t)
        cur = exps.get(m.tag)
        if cur is None or e.value > cur.value:
            exps[m.tag] = e
            bind[m.tag] = [m]
        elif e.value == cur.value:
            bind[m.tag].append(m)
    return Budget(t, exps, bind)


def theorem51_budget(theta0_exp=Fraction(-7, 8)) -> Budget:
    """Max per tag of all increment monomials with theta0 = N^theta0_exp."""
    t = _f(theta0_exp)
    if t > 0:
        raise ValueError("theta0_exp must be <= 0")
    return budget_from(ALL_MONOMIALS, t)


def pointwise_gap_exponent(theta0_exp=Fraction(-7, 8)) -> Fraction:
    """Exponent of N^{-1} theta0^{-1} for the fixed-time gap."""
    return Fraction(-1) - _f(theta0_exp)


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

INF = "inf"


def _inv(x) -> Fraction:
    if x == INF or x == float("inf"):
        return Fraction(0)
    return 1 / _f(x)


def theta_of_q(q) -> Fraction:
    """theta from 1/q = 1/4 - theta/4 (q >= 4)."""
    th = 1 - 4 * _inv(q)
    if not 0 <= th <= 1:
        raise ValueError(f"q = {q} gives theta = {th} outside [0, 1]")
    return th


def r_of_theta(theta) -> Fraction:
    """r from 1/r = 1/3 + theta/6."""
    return 1 / (Fraction(1, 3) + _f(theta) / 6)


def smoothing_exponent(theta) -> Fraction:
    return Fraction(-3, 4) - _f(theta) / 4


def pair_between(p0, p1, a) -> tuple:
    """(q, r) with 1/q = (1-a)/q0 + a/q1 and 1/r = (1-a)/r0 + a/r1; INF for 1/q = 0."""
    a = _f(a)
    if not 0 <= a <= 1:
        raise ValueError("interpolation weight must lie in [0, 1]")
    out = []
    for x0, x1 in zip(p0, p1):
        inv = (1 - a) * _inv(x0) + a * _inv(x1)
        out.append(INF if inv == 0 else 1 / inv)
    return tuple(out)


def interpolation_solve(target: str, **kw):
    """Dispatch: ``theta_of_q`` (q=...) returns (theta, r, smoothing exponent);
    ``pair_between`` (p0=..., p1=..., a=...) returns the interpolated pair."""
    if target == "theta_of_q":
        th = theta_of_q(kw["q"])
        return th, r_of_theta(th), smoothing_exponent(th)
    if target == "pair_between":
        return pair_between(kw["p0"], kw["p1"], kw.get("a", Fraction(1, 2)))
    raise ValueError(f"unknown target {target!r}")


# ---------------------------------------------------------------------------
# global threshold
# ---------------------------------------------------------------------------

L4_EXP = Fraction(3, 8)
SUBINTERVAL_EXP = Fraction(27, 50)
GROWTH_EXP = Fraction(24, 25)
N_POWER = Fraction(2)


def lambda_exponent(s) -> Fraction:
    """Scaling exponent (1 - s)/(s - 1/2) relating lambda to N."""
    s = _f(s)
    if s == Fraction(1, 2):
        raise ZeroDivisionError("(1 - s)/(s - 1/2) has a pole at s = 1/2")
    return (1 - s) / (s - Fraction(1, 2))


def gwp_threshold(c=GROWTH_EXP, b=N_POWER) -> Fraction:
    """Smallest s > 1/2 with lambda_exponent(s) * c <= b, i.e. s = (c + b/2)/(b + c)."""
    c, b = _f(c), _f(b)
    s = (c + b / 2) / (b + c)
    assert lambda_exponent(s) * c == b
    return s


def section6_consistency() -> dict:
    """The two arithmetic facts behind the global iteration."""
    per = 4 * L4_EXP - SUBINTERVAL_EXP
    thr = gwp_threshold()
    return {
        "l4_budget": 4 * L4_EXP,
        "subinterval_exponent": SUBINTERVAL_EXP,
        "growth_exponent": per,
        "growth_matches": per == GROWTH_EXP,
        "threshold": thr,
        "threshold_closes": lambda_exponent(thr) * GROWTH_EXP == N_POWER,
        "note": "only the displayed arithmetic is checked; the chained inequality is not",
    }


def exponent_table() -> list[tuple[str, Fraction]]:
    """(quantity, exact value) rows for the CLI."""
    b = theorem51_budget()
    th, _, e4 = interpolation_solve("theta_of_q", q=4)
    thi, _, einf = interpolation_solve("theta_of_q", q=INF)
    q, r = pair_between((INF, 2), (2, 6), Fraction(1, 2))
    rows = [
        ("gwp_threshold", gwp_threshold()),
        ("theta0_exponent", Fraction(-7, 8)),
        ("budget_tag1", b.exponents["1"].value),
        ("budget_tagM2", b.exponents["M2"].value),
        ("budget_tagM1", b.exponents["M1"].value),
        ("pointwise_gap", pointwise_gap_exponent()),
        ("theta_q4", th),
        ("smoothing_q4", e4),
        ("theta_qinf", thi),
        ("smoothing_qinf", einf),
        ("midpoint_q", q),
        ("midpoint_r", r),
        ("growth_exponent", section6_consistency()["growth_exponent"]),
    ]
    return rows
