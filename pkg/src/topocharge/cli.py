"""Command-line interface: densities, correlation curves, sum rules, and
Monte Carlo simulation runs.

Every command that writes files also writes a JSON manifest holding the
resolved parameters (seed included), the tool version, and the output file
names; data CSVs reference their manifest in a leading comment line.  A
manifest can be replayed with ``topocharge replay MANIFEST`` and reproduces
the data files byte for byte.

Exit codes: 0 success, 2 usage error, 3 numerical failure (the failing
sub-operation is named on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .correlations import model_by_name
from .errors import ConditioningError, ContractViolation, NumericalFailureError
from .kinds import parse_kind
from .sampler import SimulationConfig, empirical_screening, run_simulation
from .scheme import R_MIN, scheme_g

_USAGE_ERROR = 2
_NUMERICAL_ERROR = 3


def _fmt(x) -> str:
    return repr(float(x))


def _manifest(command: str, params: dict, outputs: list) -> dict:
    return {
        "command": command,
        "params": params,
        "outputs": outputs,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def _write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cell(x) -> str:
    if isinstance(x, (bool, int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return _fmt(x)
    return str(x)


def _write_csv(path: Path, manifest_name: str, header, rows) -> None:
    lines = [f"# manifest: {manifest_name}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _resolve_kind_model(args, allow_vector3: bool):
    kind = parse_kind(args.kind)
    model = model_by_name(args.model)
    if kind.tag == "vector" and kind.n == 3:
        if not allow_vector3:
            raise ContractViolation("vector3 is supported by analytic commands only")
        if model.kind == "ring":
            raise ContractViolation(
                "the ring model is a 2-D shell spectrum; vector3 needs --model gauss"
            )
    return kind, model


# ---------------------------------------------------------------------------
# commands


def cmd_densities(args) -> int:
    model = model_by_name(args.model)
    kinds = [parse_kind(n) for n in ("vector2", "critical", "umbilic")]
    dens = {k.name: analytic.density(k, model) for k in kinds}
    vols = {n: analytic.hypervolume_constant(n) for n in (1, 2, 3)}
    if args.json:
        print(json.dumps({
            "model": model.kind,
            "densities": dens,
            "hypervolume_constants": {str(n): v for n, v in vols.items()},
        }, indent=2, sort_keys=True))
    else:
        print(f"model: {model.kind}")
        for name, d in dens.items():
            print(f"  density {name:8s} {d:.10f}")
        for n, v in vols.items():
            print(f"  hypervolume constant n={n}  {v:.12f}")
    return 0


def cmd_curve(args) -> int:
    kind, model = _resolve_kind_model(args, allow_vector3=True)
    if not (0 < args.rmin < args.rmax) or args.points < 2:
        raise ContractViolation("need 0 < rmin < rmax and at least 2 points")
    rgrid = np.linspace(args.rmin, args.rmax, args.points)
    curve = analytic.charge_correlation_curve(kind, model, rgrid)
    header = ["r", "g", "h"]
    cols = [curve.r, curve.g, curve.h]
    if args.with_scheme:
        gs = []
        skipped = 0
        for r in rgrid:
            if r <= R_MIN:
                gs.append(math.nan)
                skipped += 1
            else:
                gs.append(scheme_g(kind, model, float(r)))
        if skipped:
            print(
                f"warning: matrix route undefined at {skipped} radii <= {R_MIN}; "
                "rows carry nan", file=sys.stderr,
            )
        header.append("g_scheme")
        cols.append(np.array(gs))
    header.append("Q")
    cols.append(curve.cumulative)

    out = Path(args.out or f"curve_{kind.name}_{model.kind}")
    csv_path = out.with_suffix(".csv")
    man_path = out.with_suffix(".manifest.json")
    params = {
        "kind": kind.name, "model": model.kind, "n": kind.n,
        "rmin": args.rmin, "rmax": args.rmax, "points": args.points,
        "with_scheme": bool(args.with_scheme),
    }
    _write_csv(csv_path, man_path.name, header, zip(*cols))
    _write_manifest(man_path, _manifest("curve", params, [csv_path.name]))
    print(f"wrote {csv_path} ({args.points} rows)")
    if args.with_scheme:
        g = np.asarray(curve.g)
        gs = np.asarray(cols[3])
        ok = np.isfinite(gs)
        scale = np.max(np.abs(g[ok]))
        dev = np.max(np.abs(gs[ok] - g[ok]) / np.maximum(np.abs(g[ok]), 1e-4 * scale))
        print(f"max relative deviation analytic vs scheme: {dev:.3e}")
    return 0


def cmd_sumrule(args) -> int:
    kind, model = _resolve_kind_model(args, allow_vector3=True)
    if args.rmax < 50:
        raise ContractViolation("sum-rule verdicts need --rmax >= 50")
    report = analytic.second_moment(kind, model, r_max=args.rmax)
    payload = {
        "kind": kind.name,
        "model": model.kind,
        "first_moment_closed_form": report.first_moment_closed,
        "first_moment_quadrature": report.first_moment_quadrature,
        "second_moment_verdict": report.verdict,
        "log_fit": {
            "slope": report.log_slope,
            "slope_stderr": report.log_slope_stderr,
        },
        "converged_value": report.converged_value,
        "rmax": args.rmax,
    }
    out = Path(args.out or f"sumrule_{kind.name}_{model.kind}")
    man_path = out.with_suffix(".manifest.json")
    json_path = out.with_suffix(".json")
    params = {"kind": kind.name, "model": model.kind, "n": kind.n, "rmax": args.rmax}
    json_path.write_text(json.dumps({"manifest": man_path.name, **payload}, indent=2, sort_keys=True) + "\n")
    _write_manifest(man_path, _manifest("sumrule", params, [json_path.name]))
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"first moment (closed form):  {report.first_moment_closed:+.12f}")
        print(f"first moment (quadrature):   {report.first_moment_quadrature:+.8f}")
        print(f"second moment verdict:       {report.verdict}")
        print(f"log-R fit slope:             {report.log_slope:+.4f} "
              f"+- {report.log_slope_stderr:.4f}")
    return 0


def cmd_simulate(args) -> int:
    kind, model = _resolve_kind_model(args, allow_vector3=False)
    config = SimulationConfig(
        kind=kind, model=model, realizations=args.realizations, seed=args.seed,
        window=args.window, margin=args.margin, waves=args.waves,
        bin_width=args.binwidth,
    )
    config.validate()
    result = run_simulation(config)
    hist = result.histogram
    out = Path(args.out or f"simulation_{kind.name}_{model.kind}")
    man_path = out.parent / (out.name + ".manifest.json")
    hist_path = out.parent / (out.name + "_hist.csv")
    q_path = out.parent / (out.name + "_q.csv")
    outputs = [hist_path.name, q_path.name]

    g = hist.g_values()
    ge = hist.g_stderr()
    _write_csv(
        hist_path, man_path.name,
        ["r_lo", "r_hi", "sum_qq", "pairs", "g_emp", "stderr"],
        zip(hist.edges[:-1], hist.edges[1:], hist.sum_qq, hist.pair_count, g, ge),
    )
    radii, q, qe = empirical_screening(hist)
    _write_csv(q_path, man_path.name, ["R", "Q", "stderr"], zip(radii, q, qe))

    if args.dump_detections:
        det_path = out.parent / (out.name + "_detections.csv")
        rows = []
        for det in result.detections:
            for (x, y), c, res in zip(det.positions, det.charges, det.residuals):
                rows.append((kind.name, x, y, int(c), res))
        _write_csv(det_path, man_path.name, ["kind", "x", "y", "charge", "residual"], rows)
        outputs.append(det_path.name)

    params = {
        "kind": kind.name, "model": model.kind, "n": kind.n,
        "realizations": args.realizations, "seed": args.seed,
        "window": args.window, "margin": args.margin, "waves": args.waves,
        "binwidth": args.binwidth, "dump_detections": bool(args.dump_detections),
    }
    _write_manifest(man_path, _manifest("simulate", params, outputs))

    d_emp = hist.density
    d_ana = analytic.density(kind, model)
    box = (args.window, args.window)
    counts = np.array(
        [d.in_box((0, 0), box).sum() for d in result.detections], dtype=float
    )
    se = counts.std(ddof=1) / math.sqrt(len(counts)) / (args.window**2)
    z = (d_emp - d_ana) / se if se > 0 else math.inf
    cand = max(result.candidate_total, 1)
    print(f"wrote {hist_path} and {q_path}")
    print(f"density: empirical {d_emp:.6f} vs analytic {d_ana:.6f} (z = {z:+.2f})")
    print(f"dropped candidates: {result.dropped_nonconverged} of {cand} "
          f"({100.0 * result.dropped_nonconverged / cand:.4f}%), "
          f"winding mismatches {result.dropped_winding_mismatch}")
    i8 = int(np.argmin(np.abs(radii - min(8.0, radii[-1]))))
    print(f"cumulative charge Q({radii[i8]:.1f}) = {q[i8]:+.4f} +- {qe[i8]:.4f}")
    return 0


def cmd_replay(args) -> int:
    path = Path(args.manifest)
    manifest = json.loads(path.read_text())
    command = manifest["command"]
    params = manifest["params"]
    argv = [command]
    flags = {
        "kind": "--kind", "model": "--model", "rmin": "--rmin", "rmax": "--rmax",
        "points": "--points", "seed": "--seed", "realizations": "--realizations",
        "window": "--window", "margin": "--margin", "waves": "--waves",
        "binwidth": "--binwidth",
    }
    for key, flag in flags.items():
        if key in params:
            argv += [flag, str(params[key])]
    if params.get("with_scheme"):
        argv.append("--with-scheme")
    if params.get("dump_detections"):
        argv.append("--dump-detections")
    stem = path.name.removesuffix(".manifest.json")
    argv += ["--out", str(path.parent / stem)]
    return main(argv)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topocharge",
        description="Topological charge correlations of singularities in "
        "isotropic Gaussian random fields",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_kind_model(p):
        p.add_argument("--kind", required=True,
                       choices=["vector2", "vector3", "critical", "umbilic"])
        p.add_argument("--model", required=True, choices=["ring", "gauss"])

    p = sub.add_parser("densities", help="closed-form singularity densities")
    p.add_argument("--model", required=True, choices=["ring", "gauss"])
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_densities)

    p = sub.add_parser("curve", help="tabulate g(r), h(r), and Q(R)")
    add_kind_model(p)
    p.add_argument("--rmin", type=float, default=0.25)
    p.add_argument("--rmax", type=float, default=12.0)
    p.add_argument("--points", type=int, default=120)
    p.add_argument("--with-scheme", action="store_true",
                   help="add the matrix/Wick-route column and deviation summary")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("sumrule", help="screening and second-moment sum rules")
    add_kind_model(p)
    p.add_argument("--rmax", type=float, default=200.0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sumrule)

    p = sub.add_parser("simulate", help="Monte Carlo pair correlation run")
    add_kind_model(p)
    p.add_argument("--realizations", type=int, default=200)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--window", type=float, default=40.0)
    p.add_argument("--margin", type=float, default=8.0)
    p.add_argument("--waves", type=int, default=256)
    p.add_argument("--binwidth", type=float, default=0.1)
    p.add_argument("--dump-detections", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ContractViolation as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except ConditioningError as exc:
        print(f"numerical failure in matrix reduction: {exc}", file=sys.stderr)
        return _NUMERICAL_ERROR
    except NumericalFailureError as exc:
        print(f"numerical failure in {exc.operation}: {exc}", file=sys.stderr)
        return _NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
