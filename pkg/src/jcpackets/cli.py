"""Command line interface: ``jcpackets {simulate,reduced,classify,protocol,spectrum}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 synthesis infeasible.  Failures print one JSON record on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, classifier, protocol as proto, variational as var
from .config import INITIAL_KINDS, RunConfig, load_config
from .errors import ConfigError, JCError, NumericalError, SynthesisError
from .model import SystemParams, make_initial_state
from .solver import evolve

log = logging.getLogger("jcpackets")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_SYNTHESIS = 0, 2, 3, 4


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(float(v)) for v in row) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed_state", None):
        cfg.initial = args.seed_state
    if getattr(args, "dt", None) is not None:
        cfg.dt = args.dt
    if getattr(args, "nmax", None) is not None:
        cfg.nmax = args.nmax
    if getattr(args, "t_end", None) is not None:
        cfg.t_end = args.t_end
    if getattr(args, "delta", None) is not None:
        cfg.params = SystemParams(cfg.params.g, args.delta)
    if getattr(args, "g", None) is not None:
        cfg.params = SystemParams(args.g, cfg.params.delta)
    return cfg.validate()


# --- simulate -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _config(args)
    if cfg.protocol is None:
        raise ConfigError("simulate needs a [drive] section")
    params = cfg.params
    n_max = cfg.nmax or proto.suggest_nmax(cfg.protocol, params, cfg.t_end, cfg.initial)
    log.info("n_max = %d", n_max)
    snaps = sorted(set(cfg.wigner_times) | set(cfg.packet_times))
    traj = evolve(make_initial_state(cfg.initial, n_max), params, cfg.protocol, cfg.t_end,
                  dt=cfg.dt, sample_stride=cfg.sample_stride, snapshot_times=snaps,
                  keep_states=cfg.lds_measure, method=cfg.method, norm_tol=cfg.norm_tol,
                  tail_threshold=cfg.tail_threshold)
    out = _out_dir(args)
    traj.write_observables(out / "observables.csv")
    traj.write_pn(out / "pn.csv")
    (out / "protocol.txt").write_text(cfg.protocol.to_text())
    if cfg.lds_measure:
        traj.write_lds_measure(out / "lds_measure.csv")
    for t in cfg.wigner_times:
        grid = analysis.wigner(traj.snapshots[t], cfg.wigner_half_width, cfg.wigner_points, time=t)
        grid.to_csv(out / f"wigner_t{_fmt(t)}.csv")
    if cfg.packet_times:
        with open(out / "packets.jsonl", "w") as fh:
            for t in cfg.packet_times:
                st = traj.snapshots[t]
                pn = np.abs(st.amps_g) ** 2 + np.abs(st.amps_x) ** 2
                packets, _ = analysis.detect_packets(pn)
                fh.write(analysis.packets_to_jsonl(packets, t))
    if cfg.spectrum:
        if traj.times.size < 2:
            _write_rows(out / "spectrum.csv", "freq,magnitude", [])
        else:
            analysis.spectrum(traj.mean_n, traj.times, cfg.window).to_csv(out / "spectrum.csv")
    meta = {"g": params.g, "delta": params.delta, "n_max": n_max, "dt": traj.dt,
            "initial": cfg.initial, "t_end": cfg.t_end, "sample_stride": cfg.sample_stride,
            "samples": int(traj.times.size)}
    (out / "run.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


# --- reduced --------------------------------------------------------------------

def cmd_reduced(args) -> int:
    cfg = _config(args)
    red = dict(cfg.reduced)
    for key in ("branch", "f", "z0"):
        val = getattr(args, key, None)
        if val is not None:
            red[key] = val
    out = _out_dir(args)
    if "f" not in red and cfg.protocol is not None:
        tree = proto.replay(cfg.protocol, cfg.params, cfg.t_end, cfg.initial)
        leaves = set(tree.leaves)
        with open(out / "tree.jsonl", "w") as fh:
            for i, node in enumerate(tree.nodes):
                st = node.state
                fh.write(json.dumps({"label": list(node.label), "branch": st.branch,
                                     "weight": st.weight, "re_z": st.z.real, "im_z": st.z.imag,
                                     "time": st.time, "leaf": i in leaves}) + "\n")
        return EXIT_OK
    if "f" not in red:
        raise ConfigError("reduced needs f (flag, [reduced] f, or a [drive] protocol)")
    t_end = red.get("t_end", cfg.t_end)
    traj = var.evolve_branch(complex(red.get("z0", 0j)), int(red.get("branch", 1)),
                             float(red["f"]), cfg.params, t_end, dt=red.get("dt", cfg.dt))
    traj.to_csv(out / "trajectory.csv")
    return EXIT_OK


# --- classify -------------------------------------------------------------------

def _range(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise ConfigError(f"expected lo:hi:n, got {text!r}") from None


def cmd_classify(args) -> int:
    params = SystemParams(args.g if args.g is not None else 1.0, 0.0)
    if args.grid:
        fs, ds = _range(args.f_range), _range(args.delta_range)
        rows = []
        for f in fs:
            for d in ds:
                c = classifier.classify(f, d, params)
                rows.append(f"{_fmt(f)},{_fmt(d)},{c.label}," + ",".join(map(_fmt, c.boundary_distances)))
        text = "f,delta,class,d_ab,d_bc,d_cd\n" + "".join(r + "\n" for r in rows)
        Path(args.grid).write_text(text)
        return EXIT_OK
    if args.f is None or args.delta is None:
        raise ConfigError("classify needs --f and --delta (or --grid)")
    print(classifier.classify(args.f, args.delta, params).label)
    return EXIT_OK


# --- protocol -------------------------------------------------------------------

def cmd_protocol(args) -> int:
    cfg = _config(args)
    if args.action == "synth":
        syn = dict(cfg.synth)
        if args.strategy:
            syn["strategy"] = args.strategy
        if args.n_packets is not None:
            syn["n_packets"] = args.n_packets
        if args.weights:
            syn["weights"] = args.weights
        if args.f_levels:
            syn["f_levels"] = args.f_levels
        missing = {"strategy", "n_packets", "f_levels"} - set(syn)
        if missing:
            raise ConfigError(f"synthesis needs {', '.join(sorted(missing))}")
        n = syn["n_packets"]
        weights = syn.get("weights") or [1.0 / max(n - 1, 1)] * max(n - 1, 1)
        result = proto.synthesize(syn["strategy"], n, weights, syn["f_levels"], cfg.params,
                                  guard_radius=syn.get("guard_radius", proto.GUARD_RADIUS),
                                  min_delay=syn.get("min_delay", 0.0), dt=syn.get("dt"))
        out = _out_dir(args) / args.output
        out.write_text(result.to_text())
        return EXIT_OK
    # validate
    if cfg.protocol is None:
        raise ConfigError("validate needs a [drive] section")
    kwargs = {}
    if args.mode == "exact":
        kwargs = dict(n_max=cfg.nmax, dt=cfg.dt, norm_tol=cfg.norm_tol,
                      tail_threshold=cfg.tail_threshold, method=cfg.method)
    times = args.times or cfg.packet_times or (cfg.t_end,)
    report = proto.validate_protocol(cfg.protocol, cfg.params, args.mode, times, cfg.initial,
                                     **kwargs)
    for t, count, det in zip(report.times, report.packet_counts, report.details):
        if args.mode == "exact":
            det = [{"center": p.center, "mass": p.mass, "lo": p.lo, "hi": p.hi} for p in det]
        else:
            det = [{**d, "label": list(d["label"]), "z": [d["z"].real, d["z"].imag]} for d in det]
        print(json.dumps({"time": t, "count": count, "packets": det}))
    for w in report.warnings:
        print(json.dumps({"warning": w}), file=sys.stderr)
    return EXIT_OK


# --- spectrum -------------------------------------------------------------------

def cmd_spectrum(args) -> int:
    out = _out_dir(args)
    for name in args.files:
        path = Path(name)
        data = np.genfromtxt(path, delimiter=",", names=True)
        if args.column not in (data.dtype.names or ()):
            raise ConfigError(f"{path}: no column {args.column!r}")
        t, x = np.atleast_1d(data["t"]), np.atleast_1d(data[args.column])
        if t.size < 2:
            raise ConfigError(f"{path}: need at least two samples")
        spec = analysis.spectrum(x, t, args.window)
        spec.to_csv(out / f"{path.stem}_spectrum.csv")
        if args.expected:
            rep = analysis.peak_report(spec, args.expected)
            print(json.dumps({"file": str(path), "ratio": rep.ratio,
                              "low_confidence": rep.low_confidence,
                              "peaks": [vars(m) for m in rep.matches]}))
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style run configuration")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--dt", type=float)
    common.add_argument("--nmax", type=int)
    common.add_argument("--seed-state", choices=INITIAL_KINDS)
    common.add_argument("--t-end", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--g", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="jcpackets", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="exact evolution in the Fock basis")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reduced", parents=[common], help="variational branch trajectories")
    p.add_argument("--branch", type=int, choices=(1, 2))
    p.add_argument("--f", type=float)
    p.add_argument("--z0", type=complex)
    p.set_defaults(func=cmd_reduced)

    p = sub.add_parser("classify", help="dynamical class of (f, delta)")
    p.add_argument("--f", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--grid", metavar="CSV", help="write a class grid to CSV")
    p.add_argument("--f-range", default="0.5:20:40", help="lo:hi:n")
    p.add_argument("--delta-range", default="0.005:0.5:40", help="lo:hi:n")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("protocol", parents=[common], help="synthesize or validate step protocols")
    p.add_argument("action", choices=("synth", "validate"))
    p.add_argument("--strategy", choices=("direct-split", "class-D-return"))
    p.add_argument("--n-packets", type=int)
    p.add_argument("--weights", type=_floats)
    p.add_argument("--f-levels", type=_floats)
    p.add_argument("--output", default="protocol.txt", help="protocol file name inside --out")
    p.add_argument("--mode", choices=("reduced", "exact"), default="reduced")
    p.add_argument("--times", type=_floats)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("spectrum", parents=[common], help="spectrum of an observables CSV")
    p.add_argument("files", nargs="+")
    p.add_argument("--column", default="mean_n")
    p.add_argument("--window", choices=("rect", "hann"), default="rect")
    p.add_argument("--expected", type=_floats, help="frequencies to report peaks near")
    p.set_defaults(func=cmd_spectrum)
    return ap


def _error_record(exc: Exception) -> str:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "time", None) is not None:
        rec["time"] = exc.time
    return json.dumps(rec)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        err, code = exc, EXIT_CONFIG
    except SynthesisError as exc:
        err, code = exc, EXIT_SYNTHESIS
    except (NumericalError, JCError, ArithmeticError) as exc:
        err, code = exc, EXIT_NUMERICAL
    print(_error_record(err), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
