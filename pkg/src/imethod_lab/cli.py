"""Command-line driver: ``imethod-lab <config> [--override key=value ...] [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 numeric or diagnostic failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config
from .estimates import (BoundReport, SweepReport, check_geometry_5_19, check_lemma_5_4,
                        check_lemma_5_9, conservation_sweep, pointwise_gap_sweep,
                        smoothing_profile, strichartz_ratio)
from .exponents import exponent_table
from .initial_data import gaussian, planewave, random_bandlimited
from .multilinear import ResonanceSpec, modified_energy, multilinear_energy
from .solver import (SolverConfig, SolverDivergence, duhamel_split, energy, energy_I, evolve,
                     mass, write_checkpoint)
from .spectral import (Field, apply_multiplier, gradient, i_operator, inverse_transform,
                       l2_norm_spectral, lebesgue_norm, make_grid, transform)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def fmt(x) -> str:
    """Deterministic text for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def write_csv(path: Path, header, rows, trailer: dict | None = None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    if trailer:
        buf.write("#" + ",".join(f"{k}={fmt(v)}" for k, v in trailer.items()) + "\n")
    path.write_bytes(buf.getvalue().encode("utf-8"))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def build_grid(cfg: ExperimentConfig):
    return make_grid(cfg.dim, cfg.modes, cfg.box_length)


def build_data(cfg: ExperimentConfig) -> Field:
    g = build_grid(cfg)
    if cfg.data == "gaussian":
        return gaussian(g, cfg.amplitude, cfg.width)
    if cfg.data == "planewave":
        return planewave(g, cfg.mode, cfg.amplitude)
    return random_bandlimited(g, cfg.data_cutoff, cfg.amplitude, cfg.seed)


def solver_config(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(build_grid(cfg), cfg.dt, cfg.t_end, cfg.record_stride, cfg.dealias)


def resonance(cfg: ExperimentConfig, N: float | None = None) -> ResonanceSpec:
    N = cfg.N if N is None else N
    return ResonanceSpec(N, cfg.s, float(N) ** float(cfg.theta0_exponent), cfg.transition)


def _sweep_rows(rep: SweepReport, extra_cols=()):
    rows = []
    for i, (p, v) in enumerate(zip(rep.params, rep.values)):
        rows.append([p, v] + [rep.extra[c][i] for c in extra_cols])
    return rows


def _bound_rows(reports):
    return [[r.quantity, r.n_samples, r.sup_ratio, r.sup_extended, r.saturated] for r in reports]


BOUND_HEADER = ["quantity", "n_samples", "sup_ratio", "sup_extended", "saturated"]


def exp_simulate(cfg, out: Path) -> list[str]:
    traj = evolve(build_data(cfg), solver_config(cfg))
    rows = [[t, mass(u), energy(u), energy_I(u, cfg.N, cfg.s, cfg.transition)]
            for t, u in zip(traj.times, traj.states)]
    write_csv(out / "simulate.csv", ["t", "mass", "energy", "energy_I"], rows)
    write_checkpoint(out / "trajectory.bin", traj)
    return ["simulate.csv", "trajectory.bin"]


def exp_decompose(cfg, out: Path) -> list[str]:
    traj = evolve(build_data(cfg), solver_config(cfg))
    dec = duhamel_split(traj)
    ispec = i_operator(cfg.N, cfg.s, cfg.transition)
    rows = []
    for t, ul, unl in zip(traj.times, dec.linear.states, dec.nonlinear.states):
        sp = apply_multiplier(transform(unl), ispec)
        grad = np.stack([inverse_transform(g).values for g in gradient(sp)])
        rows.append([t, lebesgue_norm(ul, 2), lebesgue_norm(unl, 2),
                     lebesgue_norm(grad, 2, unl.grid)])
    write_csv(out / "decompose.csv", ["t", "l2_linear", "l2_nonlinear", "grad_I_nonlinear_l2"], rows)
    return ["decompose.csv"]


def exp_energy(cfg, out: Path) -> list[str]:
    u0 = build_data(cfg)
    sp = transform(u0)
    rows = []
    for N in cfg.N_list:
        ei = energy_I(u0, N, cfg.s, cfg.transition)
        ml = multilinear_energy(sp, N, cfg.s, cfg.transition)
        et = modified_energy(sp, resonance(cfg, N))
        rows.append([N, ei, ml, et, ei - et, abs(ei - ml)])
    write_csv(out / "energy.csv",
              ["N", "energy_I", "lambda2_plus_lambda4", "modified_energy", "gap", "identity_residual"],
              rows)
    return ["energy.csv"]


def exp_sweep_gap(cfg, out: Path) -> list[str]:
    rep = pointwise_gap_sweep(build_data(cfg), cfg.s, cfg.N_list, cfg.transition,
                              float(cfg.theta0_exponent))
    write_csv(out / "sweep_gap.csv", ["N", "gap"], _sweep_rows(rep),
              {"slope": rep.slope, "residual": rep.residual})
    return ["sweep_gap.csv"]


def exp_sweep_conservation(cfg, out: Path) -> list[str]:
    rep = conservation_sweep(build_data(cfg), cfg.s, cfg.N_list, solver_config(cfg),
                             cfg.transition, float(cfg.theta0_exponent))
    write_csv(out / "sweep_conservation.csv", ["N", "sup_tilde_increment", "sup_EI_increment"],
              _sweep_rows(rep, ["sup_EI_increment"]),
              {"slope": rep.slope, "residual": rep.residual,
               "slope_EI": rep.extra["slope_EI"], "residual_EI": rep.extra["residual_EI"]})
    return ["sweep_conservation.csv"]


def exp_smoothing(cfg, out: Path) -> list[str]:
    traj = evolve(build_data(cfg), solver_config(cfg))
    rep = smoothing_profile(traj, cfg.N, cfg.s, cfg.Nj_list, cfg.pair, cfg.transition)
    write_csv(out / "smoothing.csv", ["N_j", "norm"], _sweep_rows(rep),
              {"slope": rep.slope, "residual": rep.residual})
    return ["smoothing.csv"]


def exp_check_symbols(cfg, out: Path) -> list[str]:
    spec = resonance(cfg)
    reps = [check_lemma_5_4(spec, cfg.n_samples, cfg.seed, cfg.sample_dim),
            check_lemma_5_9(spec, cfg.n_samples, cfg.seed, cfg.sample_dim)]
    write_csv(out / "bounds.csv", BOUND_HEADER, _bound_rows(reps))
    return ["bounds.csv"]


def exp_check_geometry(cfg, out: Path) -> list[str]:
    reps = check_geometry_5_19(resonance(cfg), cfg.n_samples, cfg.seed, cfg.sample_dim)
    write_csv(out / "geometry.csv", BOUND_HEADER, _bound_rows(reps))
    return ["geometry.csv"]


def exp_strichartz(cfg, out: Path) -> list[str]:
    t_end = cfg.t_end if cfg.t_end > 0 else 1.0
    rep = strichartz_ratio(cfg.n_samples, cfg.pair, build_grid(cfg), t_end, cfg.seed)
    write_csv(out / "strichartz.csv", BOUND_HEADER, _bound_rows([rep]))
    return ["strichartz.csv"]


def exp_exponents(cfg, out: Path) -> list[str]:
    rows = [[name, val, f"{float(val):.15g}"] for name, val in exponent_table()]
    write_csv(out / "exponents.csv", ["quantity", "exact", "decimal"], rows)
    return ["exponents.csv"]


EXPERIMENT_RUNNERS = {
    "simulate": exp_simulate,
    "decompose": exp_decompose,
    "energy": exp_energy,
    "sweep-gap": exp_sweep_gap,
    "sweep-conservation": exp_sweep_conservation,
    "smoothing": exp_smoothing,
    "check-symbols": exp_check_symbols,
    "check-geometry": exp_check_geometry,
    "strichartz": exp_strichartz,
    "exponents": exp_exponents,
}

# (csv, x column, y columns, log-log)
_PLOTS = {
    "simulate.csv": (1, [2, 3, 4], False),
    "decompose.csv": (1, [2, 3, 4], False),
    "sweep_gap.csv": (1, [2], True),
    "sweep_conservation.csv": (1, [2, 3], True),
    "smoothing.csv": (1, [2], True),
}


def plot_script(artifacts: list[str]) -> str:
    lines = ["# gnuplot script; run with: gnuplot plot.gp", "set datafile separator ','",
             "set key autotitle columnhead", "set terminal pngcairo size 800,600"]
    for name in artifacts:
        if name not in _PLOTS:
            continue
        x, ys, loglog = _PLOTS[name]
        stem = name[:-4]
        lines.append(f"set output '{stem}.png'")
        lines.append("set logscale xy" if loglog else "unset logscale")
        series = ", ".join(f"'{name}' using {x}:{y} with linespoints" for y in ys)
        lines.append(f"plot {series}")
    return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig, out_dir: str | Path = ".") -> list[str]:
    """Run one experiment; returns the artifact names written under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    arts = EXPERIMENT_RUNNERS[cfg.experiment](cfg, out)
    (out / "plot.gp").write_text(plot_script(arts))
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.echo(),
        "seed": cfg.seed,
        "artifacts": arts + ["plot.gp"],
        "versions": {"imethod_lab": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "wall_time_s": time.perf_counter() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return arts


def _error(kind: str, exc: BaseException, code: int) -> int:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload["line"] = exc.line
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="imethod-lab", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="path to a key = value configuration file")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="override a configuration key (repeatable)")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, args.override)
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except (OSError, UnicodeDecodeError) as exc:
        return _error("config", exc, EXIT_CONFIG)
    try:
        run(cfg, args.out)
    except (SolverDivergence, ValueError, ArithmeticError, FloatingPointError) as exc:
        return _error("numeric", exc, EXIT_NUMERIC)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
