"""Command-line experiments with reproducible CSV/JSON outputs.

Subcommands: shrinker, spectrum, flow, modes, entropy-table. Each success
prints exactly one JSON record to stdout; data files land under the output
directory with fixed names (trace.csv, meta.json, snapshots/NNNN.json,
spectrum.json, profile.json, segment.csv, modes.csv, residuals.json).
Identical invocations produce byte-identical files: floats are formatted at
17 significant digits in JSON and 12 in CSV, and nothing carries timestamps.

Exit codes: 2 for domain errors (inadmissible alpha/k, mismatched trace),
3 for numerical failures, 4 for bad configuration or missing inputs.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, entropy, flow, geometry, modes, shrinker, spectral
from ._fmt import json_dumps
from .errors import (AcsflowError, AlphaMismatch, BadConfig, BadDomain,
                     OutOfRange)

EXIT_DOMAIN = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadConfig(f"cannot read config file {path}: {exc}")
    if not isinstance(cfg, dict):
        raise BadConfig("config file must hold a JSON object")
    return cfg


def _merge(args, parser, config):
    """Apply config-file values underneath explicitly passed flags."""
    for key, value in config.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None and hasattr(args, attr):
            setattr(args, attr, value)
    return args


def _ensure_outdir(path):
    if path is None:
        return None
    os.makedirs(path, exist_ok=True)
    os.makedirs(os.path.join(path, "snapshots"), exist_ok=True)
    return path


def _write(path, name, text):
    with open(os.path.join(path, name), "w") as fh:
        fh.write(text)


def _write_json(path, name, obj):
    _write(path, name, json_dumps(obj, indent=2) + "\n")


def _parse_alpha(value):
    try:
        a = float(value)
    except (TypeError, ValueError):
        raise BadConfig(f"alpha must be a number, got {value!r}")
    return a


def _fold_tag(k):
    return "circle" if k == "circle" else f"k{int(k)}"


def _profile_grid_n(k, n):
    """Largest multiple of 2k not exceeding n (reflection seams on nodes)."""
    if k == "circle":
        return n
    per = 2 * int(k)
    return max(per * 8, per * (n // per))


# -- shrinker ------------------------------------------------------------------

def cmd_shrinker(args):
    alpha = _parse_alpha(args.alpha)
    k = args.k if args.k == "circle" else int(args.k)
    n = _profile_grid_n(k, int(args.n))
    profile = shrinker.assemble_profile(alpha, k, n)
    record = shrinker.profile_to_json_dict(profile)
    record["n"] = n
    record.pop("h")
    out = _ensure_outdir(args.out)
    if out:
        _write_json(out, "profile.json", shrinker.profile_to_json_dict(profile))
        if k != "circle":
            seg = shrinker.segment_for_ratio(alpha, profile.r_k)
            _write(out, "segment.csv", shrinker.segment_to_csv(seg))
        _write_json(out, "meta.json", {
            "command": "shrinker", "version": __version__,
            "alpha": alpha, "k": profile.k, "n": n,
            "residual": profile.residual,
        })
        if args.gnuplot:
            _write(out, "plot.gp", _GNUPLOT_PROFILE)
    print(json_dumps(record))
    return 0


# -- spectrum ------------------------------------------------------------------

def _profile_for_tag(alpha, tag, n):
    if tag == "circle":
        return shrinker.assemble_profile(alpha, "circle", n)
    if not tag.startswith("k"):
        raise BadConfig(f"profile must be 'circle' or 'k<int>', got {tag!r}")
    try:
        k = int(tag[1:])
    except ValueError:
        raise BadConfig(f"profile must be 'circle' or 'k<int>', got {tag!r}")
    return shrinker.assemble_profile(alpha, k, _profile_grid_n(k, n))


def cmd_spectrum(args):
    alpha = _parse_alpha(args.alpha)
    profile = _profile_for_tag(alpha, args.profile, int(args.n))
    dec = spectral.decompose(profile.h, alpha, j_max=int(args.jmax))
    record = {
        "alpha": alpha,
        "profile": _fold_tag(profile.k),
        "morse_index": dec.morse_index,
        "kernel_dim": dec.kernel_dim,
        "lambda_min": float(dec.eigenvalues[0]),
    }
    out = _ensure_outdir(args.out)
    if out:
        _write_json(out, "spectrum.json",
                    spectral.spectrum_to_json_dict(dec, _fold_tag(profile.k)))
        _write_json(out, "meta.json", {
            "command": "spectrum", "version": __version__,
            "alpha": alpha, "profile": _fold_tag(profile.k),
            "n": profile.h.grid.n, "jmax": int(args.jmax),
        })
        if args.gnuplot:
            _write(out, "plot.gp", _GNUPLOT_SPECTRUM)
    print(json_dumps(record))
    return 0


# -- flow ----------------------------------------------------------------------

_MODE_NAMES = {"unnorm": "unnormalized", "tau": "normalized_tau",
               "area": "normalized_area"}


def _initial_from_spec(spec, n):
    grid = geometry.AngularGrid(n)
    if spec == "circle":
        return geometry.circle_support(grid)
    if spec.startswith("file:"):
        path = spec[5:]
        try:
            with open(path) as fh:
                return geometry.support_from_json(json.load(fh))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise BadConfig(f"cannot read initial support from {path}: {exc}")
    if spec.startswith("perturb:"):
        try:
            m_str, eps_str = spec[8:].split(",")
            m, eps = int(m_str), float(eps_str)
        except ValueError:
            raise BadConfig(f"expected perturb:<m>,<eps>, got {spec!r}")
        th = grid.nodes
        return geometry.SupportFunction(grid, 1.0 + eps * np.cos(m * th))
    if spec.startswith("seed:"):
        try:
            k_str, eps_str = spec[5:].split(",")
            k, eps = int(k_str), float(eps_str)
        except ValueError:
            raise BadConfig(f"expected seed:<k>,<eps>, got {spec!r}")
        return modes.quasi_steady_seed(grid, k, eps)
    raise BadConfig(f"unknown --init {spec!r}")


def cmd_flow(args):
    alpha = _parse_alpha(args.alpha)
    if args.mode not in _MODE_NAMES:
        raise BadConfig(f"--mode must be one of {sorted(_MODE_NAMES)}, got {args.mode!r}")
    mode = _MODE_NAMES[args.mode]
    n = int(args.n)
    initial = _initial_from_spec(args.init, n)
    sample_dt = args.sample_dt
    sample_every = int(args.sample_every) if args.sample_every is not None else 1
    if sample_dt is None and mode != "unnormalized":
        sample_dt = 0.01
    config = flow.FlowConfig(
        alpha=alpha, mode=mode, initial=initial, t_end=float(args.t_end),
        dt=float(args.dt), sample_every=sample_every,
        sample_dt=None if sample_dt is None else float(sample_dt),
        stop_min_radius=float(args.stop_min_radius),
        rtol=float(args.rtol),
        max_dt=None if args.max_dt is None else float(args.max_dt),
        log_entropy=bool(args.entropy))
    trace = flow.run(config)
    record = {
        "alpha": alpha, "mode": mode, "terminal_reason": trace.terminal_reason,
        "rows": len(trace), "accepted_steps": trace.n_steps,
        "t_final": float(trace.times[-1]),
        "area_final": float(trace.area[-1]),
        "length_final": float(trace.length[-1]),
        "iso_ratio_final": float(trace.iso_ratio[-1]),
    }
    out = _ensure_outdir(args.outdir)
    if out:
        _write(out, "trace.csv", flow.trace_to_csv(trace))
        if trace.snapshots is not None:
            for i in range(len(trace)):
                _write_json(out, os.path.join("snapshots", f"{i:04d}.json"),
                            geometry.support_to_json(trace.snapshot(i)))
        _write_json(out, "meta.json", {
            "command": "flow", "version": __version__,
            "alpha": alpha, "mode": mode, "n": n, "init": args.init,
            "t_end": float(args.t_end),
            "sample_dt": config.sample_dt, "sample_every": sample_every,
            "stop_min_radius": config.stop_min_radius,
            "rtol": config.rtol, "log_entropy": config.log_entropy,
            "terminal_reason": trace.terminal_reason,
            "rows": len(trace), "accepted_steps": trace.n_steps,
        })
        if args.gnuplot:
            _write(out, "plot.gp", _GNUPLOT_TRACE)
    print(json_dumps(record))
    return 0


# -- modes ---------------------------------------------------------------------

def _trace_from_dir(path):
    meta_path = os.path.join(path, "meta.json")
    trace_path = os.path.join(path, "trace.csv")
    snap_dir = os.path.join(path, "snapshots")
    if not (os.path.isdir(path) and os.path.isfile(meta_path)
            and os.path.isfile(trace_path) and os.path.isdir(snap_dir)):
        raise BadConfig(f"{path!r} is not a flow output directory")
    with open(meta_path) as fh:
        meta = json.load(fh)
    rows = []
    with open(trace_path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            rows.append([float(x) if x else math.nan for x in parts])
    arr = np.array(rows)
    cols = {name: arr[:, i] for i, name in enumerate(header)}
    snaps = []
    for i in range(len(rows)):
        with open(os.path.join(snap_dir, f"{i:04d}.json")) as fh:
            snaps.append(geometry.support_from_json(json.load(fh)).values)
    snaps = np.array(snaps)
    grid = geometry.AngularGrid(int(meta["n"]))
    return flow.FlowTrace(
        alpha=float(meta["alpha"]), mode=meta["mode"], grid=grid,
        times=cols["time"], area=cols["area"], length=cols["length"],
        iso_ratio=cols["iso_ratio"], min_curvature=cols["min_curv"],
        max_curvature=cols["max_curv"], entropy=cols["entropy"],
        snapshots=snaps, terminal_reason=meta["terminal_reason"],
        n_steps=int(meta["accepted_steps"]), sample_dt=meta.get("sample_dt"))


def cmd_modes(args):
    k = int(args.k)
    trace = _trace_from_dir(args.trace)
    m_max = max(int(args.mmax), 2 * k)
    mtrace = modes.track_modes(trace, k, m_max=m_max)
    rec = {
        "k": k, "alpha": mtrace.alpha,
        "cstar": modes.cstar(k),
        "rows": len(mtrace.tau),
    }
    reports = {}
    try:
        linear = modes.residual_linear_modes(mtrace)
        neutral = modes.residual_neutral_modes(mtrace)
        reports["linear"] = linear.to_json_dict()
        reports["neutral"] = neutral.to_json_dict()
        rec["residual_rho"] = neutral.residual("rho")
    except AcsflowError as exc:
        reports["error"] = str(exc)
    try:
        meas = modes.measure_cstar(mtrace)
        qs = modes.quasi_steady_check(mtrace)
        rec["measured_rho_rate"] = meas.measured
        rec["rel_error"] = meas.rel_error
        reports["quasi_steady"] = {"a0_max_dev": qs.a0_max_dev,
                                   "q_max_dev": qs.q_max_dev}
    except AcsflowError as exc:
        rec["measured_rho_rate"] = None
        reports.setdefault("error", str(exc))
    out = _ensure_outdir(args.out) if args.out else None
    target = out or args.trace
    _write(target, "modes.csv", modes.mode_trace_to_csv(mtrace))
    _write_json(target, "residuals.json", {
        "k": k, "alpha": mtrace.alpha, "cstar": modes.cstar(k),
        "measured_rho_rate": rec.get("measured_rho_rate"),
        "reports": reports,
    })
    if args.gnuplot:
        _write(target, "plot.gp", _GNUPLOT_MODES)
    print(json_dumps(rec))
    return 0


# -- entropy table --------------------------------------------------------------

def cmd_entropy_table(args):
    alpha = _parse_alpha(args.alpha)
    rows = shrinker.entropy_ordering(alpha)
    record = {"alpha": alpha,
              "rows": [[tag if tag == "circle" else int(tag), float(val)]
                       for tag, val in rows]}
    out = _ensure_outdir(args.out)
    if out:
        _write_json(out, "entropy_table.json", record)
        _write_json(out, "meta.json", {
            "command": "entropy-table", "version": __version__, "alpha": alpha,
        })
        if args.gnuplot:
            _write(out, "plot.gp", _GNUPLOT_TABLE)
    print(json_dumps(record))
    return 0


# -- gnuplot stubs ---------------------------------------------------------------

_GNUPLOT_TRACE = """# gnuplot stub: flow diagnostics
set datafile separator ','
set key autotitle columnhead
set logscale y
plot 'trace.csv' using 1:2 with lines title 'area', \\
     'trace.csv' using 1:3 with lines title 'length'
pause -1
"""

_GNUPLOT_PROFILE = """# gnuplot stub: profile support function
set datafile separator ','
set polar
plot 'segment.csv' using 1:2 with lines title 'U(theta)'
pause -1
"""

_GNUPLOT_SPECTRUM = """# gnuplot stub: spectrum (edit to taste)
# eigenvalues live in spectrum.json; convert to a column file to plot
print 'see spectrum.json'
"""

_GNUPLOT_MODES = """# gnuplot stub: neutral-mode energy
set datafile separator ','
set key autotitle columnhead
set logscale y
plot 'modes.csv' using 1:(column('rho')) with lines title 'rho'
pause -1
"""

_GNUPLOT_TABLE = """# gnuplot stub: entropy table
print 'see entropy_table.json'
"""


# -- main ------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="acsflow",
        description="Numerical experiments for the alpha-curve shortening flow")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shrinker", help="construct a contracting profile")
    p.add_argument("--alpha", required=True)
    p.add_argument("--k", required=True, help="integer >= 3 or 'circle'")
    p.add_argument("--n", default=None, help="grid size (default 512)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--config", default=None)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_shrinker, _defaults={"n": 512})

    p = sub.add_parser("spectrum", help="eigendecomposition at a profile")
    p.add_argument("--alpha", required=True)
    p.add_argument("--profile", required=True, help="'circle' or 'k<int>'")
    p.add_argument("--jmax", default=None)
    p.add_argument("--n", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_spectrum, _defaults={"jmax": 40, "n": 512})

    p = sub.add_parser("flow", help="time-integrate the flow")
    p.add_argument("--alpha", required=True)
    p.add_argument("--mode", required=True, help="unnorm | tau | area")
    p.add_argument("--init", default=None,
                   help="circle | file:<path> | perturb:<m>,<eps> | seed:<k>,<eps>")
    p.add_argument("--t-end", dest="t_end", required=True)
    p.add_argument("--entropy", action="store_true", help="log entropy per sample")
    p.add_argument("--outdir", default=None)
    p.add_argument("--n", default=None)
    p.add_argument("--dt", default=None)
    p.add_argument("--sample-dt", dest="sample_dt", default=None)
    p.add_argument("--sample-every", dest="sample_every", default=None)
    p.add_argument("--stop-min-radius", dest="stop_min_radius", default=None)
    p.add_argument("--rtol", default=None)
    p.add_argument("--max-dt", dest="max_dt", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_flow,
                   _defaults={"init": "circle", "n": 256, "dt": 1e-4,
                              "stop_min_radius": 1e-3, "rtol": 1e-8})

    p = sub.add_parser("modes", help="mode diagnostics of a stored trace")
    p.add_argument("--trace", required=True, help="flow output directory")
    p.add_argument("--k", required=True)
    p.add_argument("--mmax", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_modes, _defaults={"mmax": 8})

    p = sub.add_parser("entropy-table", help="profile entropies in order")
    p.add_argument("--alpha", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_entropy_table, _defaults={})

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(getattr(args, "config", None))
        _merge(args, parser, config)
        for key, value in args._defaults.items():
            if getattr(args, key, None) is None:
                setattr(args, key, value)
        return args.func(args)
    except (OutOfRange, AlphaMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (BadConfig, BadDomain) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AcsflowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
