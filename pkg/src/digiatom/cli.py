"""Command line front end: ``digiatom run|validate|oracle``.

Exit codes: 0 success, 1 invalid sequence (validate), 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .constants import LatticeConfig, TimingParams, gradient_from_frequency
from .paths import (
    closed_form_acceleration_phase,
    closed_form_diamond_phase,
    closed_form_hold_phase,
    compute_paths,
    gradient_equivalent_acceleration,
    sequence_phase,
    spacetime_area,
)
from .potentials import LinearGradient
from .scenario import ConfigError, NumericalError, load_scenario, resolve_config_path, run_scenario
from .sequence import DSLSyntaxError, Geometry, GeometrySpec, build_geometry, parse_sequence, validate_sequence

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
CONFIG_SUFFIXES = (".ini", ".cfg", ".conf")


def _cmd_run(args) -> int:
    analysis = run_scenario(args.config, args.out_dir, args.seed, args.threads)
    if "gradU_hat_hz_per_site" in analysis:
        print(f"gradU_hat = {analysis['gradU_hat_hz_per_site']:.6g} Hz/site "
              f"({analysis['gradU_hat_J_per_m']:.6g} J/m)")
    for n, e in sorted(analysis.get("per_n", {}).items(), key=lambda kv: int(kv[0])):
        print(f"n={n}: slope={e['slope']:.6g} +- {e['slope_sigma']:.3g}, ratio={e['slope_ratio']:.4f}")
    if "per_shift_factor_hat" in analysis:
        print(f"per-shift contrast factor = {analysis['per_shift_factor_hat']:.5f} "
              f"+- {analysis['per_shift_factor_sigma']:.2g}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    path = Path(args.target)
    text = path.read_text(encoding="utf-8") if path.is_file() else None
    if text is None or path.suffix.lower() in CONFIG_SUFFIXES or text.lstrip().startswith("["):
        sc = load_scenario(resolve_config_path(args.target))
        print(f"{sc.name}: {len(sc.points)} valid sequences")
        return EXIT_OK
    try:
        seq = parse_sequence(text)
    except DSLSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    violations = validate_sequence(seq)
    for v in violations:
        print(f"violation: {v}")
    if violations:
        return EXIT_INVALID
    print(f"ok: {len(seq)} blocks, {seq.n_shifts} shifts, {seq.total_duration * 1e6:.6g} us")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    lat = LatticeConfig()
    timing = TimingParams(args.tau_s_us / 1e6, args.tau_pi_us / 1e6)
    G = gradient_from_frequency(args.gradient_hz, lat.d)
    n = args.n
    t_hold = args.t_hold_us / 1e6
    t_acc = args.t_acc_us / 1e6
    a = args.accel_g * lat.g0
    rows = [
        ("gradU_J_per_m", G),
        ("accel_equiv_g", gradient_equivalent_acceleration(G, lat.mass, lat.g0)),
        ("diamond_phase_rad", closed_form_diamond_phase(n, G, timing, lat.d)),
        ("hold_phase_rad", closed_form_hold_phase(n, G, t_hold, lat.d)),
        ("accel_phase_rad", closed_form_acceleration_phase(n, lat.mass, a, t_acc, lat.d)),
    ]
    kind = Geometry(args.geometry)
    spec = GeometrySpec(kind, n, t_hold=t_hold, accel=a, t_acc=t_acc if kind is Geometry.ACCEL else 0.0)
    seq = build_geometry(spec, timing)
    rows.append(("integrated_phase_rad", sequence_phase(seq, LinearGradient(G), lat)))
    rows.append(("spacetime_area_m_s", spacetime_area(compute_paths(seq, lat))))
    for key, val in rows:
        print(f"{key} = {val:.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="digiatom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config (path or bundled name)")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override [measurement] seed")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--out-dir", default=None)
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a scenario config or a DSL sequence file")
    val.add_argument("target")
    val.set_defaults(func=_cmd_validate)

    orc = sub.add_parser("oracle", help="print closed-form phases for one geometry")
    orc.add_argument("--geometry", choices=[g.value for g in Geometry], default="single")
    orc.add_argument("--n", type=int, required=True)
    orc.add_argument("--gradient-hz", type=float, default=324.5, help="gradient as Hz per lattice site")
    orc.add_argument("--t-hold-us", type=float, default=0.0)
    orc.add_argument("--accel-g", type=float, default=0.0)
    orc.add_argument("--t-acc-us", type=float, default=20.0)
    orc.add_argument("--tau-s-us", type=float, default=18.0)
    orc.add_argument("--tau-pi-us", type=float, default=12.0)
    orc.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
