"""Line-oriented experiment configuration: ``key = value`` with ``#`` comments."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Any

EXPERIMENTS = ("simulate", "decompose", "energy", "sweep-gap", "sweep-conservation",
               "smoothing", "check-symbols", "check-geometry", "strichartz", "exponents")
DATA_KINDS = {
    "gaussian": ("amplitude", "width"),
    "planewave": ("mode", "amplitude"),
    "random_bandlimited": ("cutoff", "amplitude"),
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | str | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _number(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    if t.endswith("pi"):
        coef = t[:-2].rstrip("*").strip() or "1"
        return float(Fraction(coef)) * math.pi
    if "/" in t:
        return float(Fraction(t))
    return float(t)


def _int(text: str) -> int:
    v = _number(text)
    if not float(v).is_integer():
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _floats(text: str) -> tuple:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(_number(p) for p in parts)


def _fraction(text: str) -> Fraction:
    return Fraction(text.strip())


def _str(text: str) -> str:
    return text.strip().strip('"').strip("'")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = ""
    dim: int = 1
    modes: int = 32
    box_length: float = 2 * math.pi
    dt: float = 1e-3
    t_end: float = 0.1
    record_stride: int = 1
    dealias: bool = True
    N: float = 8.0
    s: float = 0.7
    theta0_exponent: Fraction = Fraction(-7, 8)
    transition: str = "power"
    seed: int = 0
    data: str = "gaussian"
    amplitude: float = 1.0
    width: float = 0.5
    mode: int = 1
    cutoff: float = 0.0  # 0 means "use N"
    N_list: tuple = (2.0, 4.0, 8.0, 16.0)
    Nj_list: tuple = (2.0, 4.0, 8.0, 16.0)
    pair: tuple = (math.inf, 2.0)
    n_samples: int = 100_000
    sample_dim: int = 3

    @property
    def data_cutoff(self) -> float:
        return self.cutoff if self.cutoff > 0 else self.N

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                v = str(v)
            elif isinstance(v, tuple):
                v = [("inf" if math.isinf(x) else x) for x in v]
            elif isinstance(v, float) and math.isinf(v):
                v = "inf"
            out[f.name] = v
        return out


_PARSERS = {
    "experiment": _str, "dim": _int, "modes": _int, "box_length": _number, "dt": _number,
    "t_end": _number, "record_stride": _int, "dealias": _bool, "N": _number, "s": _number,
    "theta0_exponent": _fraction, "transition": _str, "seed": _int, "data": _str,
    "amplitude": _number, "width": _number, "mode": _int, "cutoff": _number,
    "N_list": _floats, "Nj_list": _floats, "pair": _floats, "n_samples": _int,
    "sample_dim": _int,
}

_CALL = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$")


def _split_data(value: str, line) -> tuple[str, dict]:
    """``gaussian`` or ``gaussian(amplitude=1, width=0.5)`` or positional arguments."""
    m = _CALL.match(value)
    if not m:
        return _str(value), {}
    kind, args = m.group(1), m.group(2).strip()
    if kind not in DATA_KINDS:
        raise ConfigError(f"unknown data kind {kind!r}; expected one of {sorted(DATA_KINDS)}", line)
    params = {}
    if args:
        for pos, item in enumerate(a.strip() for a in args.split(",")):
            if "=" in item:
                k, v = (x.strip() for x in item.split("=", 1))
            else:
                if pos >= len(DATA_KINDS[kind]):
                    raise ConfigError(f"too many arguments for {kind}", line)
                k, v = DATA_KINDS[kind][pos], item
            if k not in DATA_KINDS[kind]:
                raise ConfigError(f"{kind} takes no parameter {k!r}", line)
            params[k] = v
    return kind, params


def parse_config(text: str, overrides: list[str] | tuple = ()) -> ExperimentConfig:
    """Parse and validate; ``overrides`` are extra ``key=value`` strings applied last."""
    values: dict[str, Any] = {}
    lines: dict[str, int | str] = {}
    entries = [(i, raw) for i, raw in enumerate(text.splitlines(), start=1)]
    entries += [(f"override {j + 1}", o) for j, o in enumerate(overrides)]
    for ln, raw in entries:
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", ln)
        key, value = (x.strip() for x in body.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", ln)
        items = [(key, value)]
        if key == "data":
            kind, params = _split_data(value, ln)
            items = [("data", kind)] + list(params.items())
        for k, v in items:
            try:
                values[k] = _PARSERS[k](v)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"bad value for {k!r}: {exc}", ln) from None
            lines[k] = ln
    cfg = replace(ExperimentConfig(), **values)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: ExperimentConfig, lines: dict):
    def fail(key, msg):
        raise ConfigError(msg, lines.get(key))

    if cfg.experiment not in EXPERIMENTS:
        fail("experiment", f"experiment must be one of {', '.join(EXPERIMENTS)}"
             if cfg.experiment else "missing required key 'experiment'")
    if cfg.dim not in (1, 2, 3):
        fail("dim", "dim must be 1, 2 or 3")
    if cfg.modes % 2:
        fail("modes", f"modes must be even (got {cfg.modes}): the lattice is [-M/2, M/2)")
    if cfg.modes < 4:
        fail("modes", "modes must be at least 4")
    if not cfg.box_length > 0:
        fail("box_length", "box_length must be positive")
    if not cfg.dt > 0:
        fail("dt", "dt must be positive")
    if cfg.t_end < 0:
        fail("t_end", "t_end must be nonnegative")
    steps = round(cfg.t_end / cfg.dt)
    if abs(steps * cfg.dt - cfg.t_end) > 1e-12 * max(1.0, cfg.t_end):
        fail("t_end" if "t_end" in lines else "dt", "t_end must be a whole number of dt steps")
    if cfg.record_stride < 1:
        fail("record_stride", "record_stride must be at least 1")
    if not cfg.N > 0:
        fail("N", "N must be positive")
    if not 0.5 < cfg.s < 1:
        fail("s", "s must lie in (1/2, 1)")
    if not cfg.theta0_exponent < 0:
        fail("theta0_exponent", "theta0_exponent must be negative")
    if cfg.transition not in ("power", "smooth"):
        fail("transition", "transition must be 'power' or 'smooth'")
    if cfg.data not in DATA_KINDS:
        fail("data", f"data must be one of {', '.join(DATA_KINDS)}")
    if cfg.data == "gaussian" and not cfg.width > 0:
        fail("width", "width must be positive")
    if cfg.data == "planewave" and not -cfg.modes // 2 <= cfg.mode < cfg.modes // 2:
        fail("mode", "mode lies outside the frequency lattice")
    if cfg.cutoff < 0:
        fail("cutoff", "cutoff must be nonnegative")
    for key in ("N_list", "Nj_list"):
        vals = getattr(cfg, key)
        if any(not (v > 0 and math.log2(v).is_integer()) for v in vals):
            fail(key, f"{key} entries must be dyadic")
        if cfg.experiment in (("sweep-gap", "sweep-conservation") if key == "N_list"
                              else ("smoothing",)) and len(vals) < 4:
            fail(key, f"{key} needs at least 4 entries")
    if cfg.experiment == "smoothing" and max(cfg.Nj_list) > cfg.N:
        fail("Nj_list", "Nj_list entries must not exceed N")
    if len(cfg.pair) != 2:
        fail("pair", "pair must have two entries q, r")
    from .spectral import is_admissible
    if not is_admissible(*cfg.pair):
        fail("pair", f"pair {cfg.pair} is not admissible (2/q = 3(1/2 - 1/r))")
    if cfg.n_samples < 1:
        fail("n_samples", "n_samples must be positive")
    if cfg.experiment in ("check-symbols", "check-geometry") and cfg.n_samples < 1000:
        fail("n_samples", "bound checks need n_samples >= 1000")
    if cfg.sample_dim not in (2, 3):
        fail("sample_dim", "sample_dim must be 2 or 3")
