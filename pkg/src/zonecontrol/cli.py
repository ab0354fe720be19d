"""Command-line front end.

Every command reads a potential (``--input`` JSON or ``--comb``), writes its
artifacts into ``--out`` and echoes the resolved configuration in each file:
as ``# config: {...}`` header lines in CSV, as a ``"config"`` key in JSON.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bands as bands_mod
from . import channels, smart, transform
from .errors import NumericalError, ValidationError
from .potential import PeriodicPotential, make_dirac_comb
from .propagator import propagate_trace

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _float_list(x):
    return [float(v) for v in x]


def _write_json(path: Path, config: dict, result) -> None:
    path.write_text(json.dumps({"config": config, "result": result}, indent=2, sort_keys=True) + "\n")


def _header(config: dict) -> list[str]:
    return ["config: " + json.dumps(config, sort_keys=True)]


def _write_csv(path: Path, config: dict, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in _header(config):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _bands_result(bs) -> dict:
    return {
        "bands": [list(b) for b in bs.bands],
        "gaps": [list(g) for g in bs.gaps],
        "edges": [{"energy": e.energy, "kind": e.kind} for e in bs.edges],
        "notes": list(bs.notes),
    }


def _load_potential(args) -> PeriodicPotential:
    if args.input:
        try:
            text = Path(args.input).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read {args.input}: {exc}") from exc
        try:
            return PeriodicPotential.from_json(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON in {args.input}: {exc}") from exc
    return make_dirac_comb(args.period, args.comb)


def _config(args, potential=None) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    if potential is not None:
        cfg["potential"] = potential.to_dict()
    return cfg


def _energy_grid(args):
    if args.e_min is not None and args.e_max is not None and not args.e_min < args.e_max:
        raise ValidationError("need --e-min < --e-max")
    return args.e_min, args.e_max


# -- commands ------------------------------------------------------------------------


def cmd_bands(args, out: Path) -> None:
    p = _load_potential(args)
    cfg = _config(args, p)
    e_min, e_max = _energy_grid(args)
    e_min = p.spectrum_floor() if e_min is None else e_min
    step = (e_max - e_min) / (args.grid - 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bs = bands_mod.scan_bands(p, e_min, e_max, step)
    res = _bands_result(bs)
    res["warnings"] = [str(w.message) for w in caught]
    _write_json(out / "bands.json", cfg, res)
    grid = np.linspace(e_min, e_max, args.grid)
    bands_mod.write_discriminant_csv(p, grid, out / "discriminant.csv", _header(cfg))


def cmd_smart(args, out: Path) -> None:
    p = _load_potential(args)
    cfg = _config(args, p)
    grow, decay = smart.smart_pair(p, args.energy)
    rows, res = [], {}
    for name, s in (("growing", grow), ("decaying", decay)):
        knots = smart.trace_knots(s, args.periods)
        for x in knots:
            rows.append((name, int(math.floor(x / p.period + 1e-12)), float(x)))
        res[name] = {
            "multiplier": s.multiplier,
            "initial_state": list(s.init),
            "knot_lattice": _float_list(s.knot_lattice),
            "growth_exponent": s.growth_exponent,
            "max_knot_deviation": smart.knot_period_check(s, args.periods),
        }
    res["discriminant"] = float(bands_mod.discriminant(p, args.energy))
    _write_json(out / "smart.json", cfg, res)
    _write_csv(out / "knots.csv", cfg, ["solution", "period_index", "knot_x"], rows)


def cmd_beats(args, out: Path) -> None:
    p = _load_potential(args)
    cfg = _config(args, p)
    bp = smart.beat_profile(p, args.energy, args.periods)
    res = {
        "beat_length": bp.beat_length if math.isfinite(bp.beat_length) else "inf",
        "predicted_beat_length": (bp.predicted_beat_length
                                  if math.isfinite(bp.predicted_beat_length) else "inf"),
        "envelope_maxima": _float_list(bp.envelope_maxima),
    }
    _write_json(out / "beats.json", cfg, res)
    _write_csv(out / "amplitudes.csv", cfg, ["period_index", "log_max_abs_psi"],
               [(j, float(a)) for j, a in enumerate(bp.amplitudes)])


def cmd_eps_sweep(args, out: Path) -> None:
    p = _load_potential(args)
    cfg = _config(args, p)
    sw = smart.epsilon_sweep(p, args.level, args.samples)
    sw.to_csv(out / "eps_sweep.csv", _header(cfg))
    _write_json(out / "eps_sweep.json", cfg, {
        "level": sw.level, "e_lo": sw.e_lo, "e_hi": sw.e_hi,
        "eps_at_lo": sw.eps_at_lo, "eps_at_hi": sw.eps_at_hi,
    })


def _transform_outputs(args, out: Path, cfg: dict, result) -> None:
    (out / "potential.json").write_text(result.to_json(indent=2, sort_keys=True) + "\n")
    diag = json.loads(result.diagnostics_json())
    diag["state_energies"] = _float_list(result.state_energies)
    _write_json(out / "diagnostics.json", cfg, diag)
    _write_csv(out / "transformed.csv", cfg,
               ["x", "delta_v"] + [f"psi_{i + 1}" for i in range(len(result.state_fns))],
               zip(result.xs, result.delta_v, *result.transformed_states))
    e_min, e_max = _energy_grid(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        q = transform.periodized(result, args.strength)
        e_min = q.spectrum_floor() if e_min is None else e_min
        bs = bands_mod.scan_bands(q, e_min, e_max, (e_max - e_min) / (args.grid - 1))
    res = _bands_result(bs)
    res["warnings"] = [str(w.message) for w in caught]
    _write_json(out / "bands.json", cfg, res)


def cmd_susy(args, out: Path) -> None:
    p = _load_potential(args)
    cfg = _config(args, p)
    result = transform.susy_shift(p, args.level, args.shift, grid=args.overlay_grid,
                                  find_usable_range=True)
    _transform_outputs(args, out, cfg, result)


def cmd_swf(args, out: Path) -> None:
    p = _load_potential(args)
    cfg = _config(args, p)
    result = transform.swf_transform(p, args.level, args.ratio, grid=args.overlay_grid)
    _transform_outputs(args, out, cfg, result)


def cmd_delta_edge(args, out: Path) -> None:
    p = _load_potential(args)
    cfg = _config(args, p)
    try:
        placement = float(args.placement)
    except ValueError:
        placement = args.placement
    es = transform.delta_edge_shift(p, placement, args.strength, e_max=args.e_max)
    _write_json(out / "delta_edge.json", cfg, {
        "position": es.position,
        "strength": es.strength,
        "shifts": [{"before": a, "after": b, "shift": d} for a, b, d in es.shifts],
        "bands_before": _bands_result(es.reference),
        "bands_after": _bands_result(es.bands),
    })


def cmd_transmission(args, out: Path) -> None:
    p = _load_potential(args)
    cfg = _config(args, p)
    e_min = args.e_min if args.e_min is not None else 1e-3
    if not 0 < e_min < args.e_max:
        raise ValidationError("transmission needs 0 < --e-min < --e-max")
    E = np.linspace(e_min, args.e_max, args.grid)
    T = bands_mod.transmission(p, E, args.periods)
    _write_csv(out / "transmission.csv", cfg, ["E", "T"], zip(E, T))


def cmd_channels(args, out: Path) -> None:
    if args.input:
        try:
            system = channels.TwoChannelSystem.from_dict(json.loads(Path(args.input).read_text()))
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read scenario: {exc}") from exc
    else:
        system = channels.TwoChannelSystem(0.0, args.eps2, coupling=args.strength,
                                           coupling_kind="delta" if args.model == 3 else "constant")
    cfg = _config(args)
    cfg["system"] = system.to_dict()
    if args.model == 1:
        bp, bm = channels.coupled_bands(system, e_max=args.e_max)
        res = {"plus": _bands_result(bp), "minus": _bands_result(bm)}
    elif args.model == 2:
        states = [channels.equal_knot_state(system, branch=b) for b in (0, 1)]
        res = {"weight_ratios": list(channels.weight_ratio(system.eps2 - system.eps1,
                                                           system.coupling)),
               "states": [{"energy": s.energy, "ratio": s.ratio, "kinetic": s.kinetic,
                           "residual": channels.coupled_residual(system, s)} for s in states]}
    else:
        lo = system.eps1 - abs(system.coupling) - 1.0
        st = channels.solve_delta_coupled(system, (lo, args.e_max))
        res = {"energy": st.energy, "amplitudes": _float_list(st.amplitudes),
               "kinetic": list(st.kinetic),
               "decoupled_levels": list(channels.decoupled_levels(system))}
    _write_json(out / "channels.json", cfg, res)


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zonecontrol",
                                     description="Band spectra and zone control for 1D periodic potentials.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--input", help="potential JSON (channels: scenario JSON)")
        sp.add_argument("--comb", type=float, default=4.0,
                        help="Dirac comb strength used when --input is absent")
        sp.add_argument("--period", type=float, default=math.pi)
        sp.add_argument("--out", default=".", help="output directory")
        return sp

    sp = add("bands", cmd_bands, "band and gap table plus discriminant CSV")
    sp.add_argument("--e-min", type=float)
    sp.add_argument("--e-max", type=float, default=50.0)
    sp.add_argument("--grid", type=int, default=4000, help="energy grid points")

    sp = add("smart", cmd_smart, "Floquet solutions at a gap energy")
    sp.add_argument("--energy", type=float, required=True)
    sp.add_argument("--periods", type=int, default=10)

    sp = add("beats", cmd_beats, "beat envelope at a band energy")
    sp.add_argument("--energy", type=float, required=True)
    sp.add_argument("--periods", type=int, default=200)

    sp = add("eps-sweep", cmd_eps_sweep, "Dirichlet level on a sliding window")
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--samples", type=int, default=64)

    for name, func, extra in (("susy", cmd_susy, "--shift"), ("swf", cmd_swf, "--ratio")):
        sp = add(name, func, "SUSY level shift" if name == "susy" else "spectral weight change")
        sp.add_argument("--level", type=int, default=1)
        if extra == "--shift":
            sp.add_argument("--shift", type=float, required=True)
        else:
            sp.add_argument("--ratio", type=float, required=True)
        sp.add_argument("--overlay-grid", type=int, default=transform.DEFAULT_GRID)
        sp.add_argument("--strength", type=float, default=None,
                        help="comb spike added at the period boundary before rescanning")
        sp.add_argument("--e-min", type=float)
        sp.add_argument("--e-max", type=float, default=40.0)
        sp.add_argument("--grid", type=int, default=2000, help="energy grid points for the rescan")

    sp = add("delta-edge", cmd_delta_edge, "spike at a barrier or well midpoint")
    sp.add_argument("--placement", default="mid-well",
                    help="mid-barrier, mid-well, or a position within the period")
    sp.add_argument("--strength", type=float, default=0.5)
    sp.add_argument("--e-max", type=float, default=40.0)

    sp = add("transmission", cmd_transmission, "transmission through truncated periods")
    sp.add_argument("--periods", type=int, default=8)
    sp.add_argument("--e-min", type=float)
    sp.add_argument("--e-max", type=float, default=20.0)
    sp.add_argument("--grid", type=int, default=4000)

    sp = add("channels", cmd_channels, "two-channel models")
    sp.add_argument("--model", type=int, choices=(1, 2, 3), default=3)
    sp.add_argument("--eps2", type=float, default=0.5)
    sp.add_argument("--strength", type=float, default=0.5, help="coupling V12")
    sp.add_argument("--e-max", type=float, default=5.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "grid", 3) < 3:
            raise ValidationError("--grid must be at least 3")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        args.func(args, out)
    except ValidationError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
