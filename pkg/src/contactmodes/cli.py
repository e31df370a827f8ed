"""Command-line front end.

Subcommands mirror the pipeline stages: ``sample`` draws tree batches
from a trace, ``analyse`` runs joint diagonalisation + mode discovery +
graph reports on a batch, ``sir`` runs the epidemic experiment,
``synth`` emits synthetic traces with ground-truth labels, and
``repro`` chains all four on the bundled switching experiment.  Every
run directory gets a ``config.json`` echo and a ``manifest.json``
listing the artefacts and the config hash; the manifest timestamp is
the only non-reproducible byte in a run.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
non-convergence (partial outputs are kept and flagged in the manifest).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import (
    fiedler_dendrogram,
    shortest_path_graph,
    threshold_graph,
    write_dot,
    write_newick,
    zero_diagonal,
)
from .epidemic import SirParams, default_params, sir_experiment, write_curves_csv, write_ranking_json
from .errors import ConvergenceError, DataError
from .generators import (
    default_switching_schedule,
    gen_switching,
    read_schedule,
    write_labels,
    write_schedule,
)
from .jointdiag import joint_diagonalise
from .modes import kde_density, per_mode_reconstruction, select_modes, write_report
from .network import (
    aggregate_static,
    ingest_trace,
    read_label_map,
    write_label_map,
    write_trace,
)
from .sampling import read_batch, sample_batch, write_batch


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_json(path: Path, payload) -> bytes:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    data = text.encode("utf-8")
    path.write_bytes(data)
    return data


def _config_payload(args: argparse.Namespace) -> dict:
    # the output directory is deliberately left out so that the same
    # experiment written to two places hashes identically
    skip = {"func", "out"}
    payload = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    payload["version"] = __version__
    return payload


def _write_manifest(
    out: Path,
    config_bytes: bytes,
    artefacts,
    status: str = "ok",
    with_timestamp: bool = True,
) -> None:
    payload = {
        "artefacts": sorted(str(Path(a).relative_to(out)) for a in artefacts),
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "status": status,
        "version": __version__,
    }
    if with_timestamp:
        payload["created_at"] = datetime.now(timezone.utc).isoformat()
    _write_json(out / "manifest.json", payload)


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_net(args: argparse.Namespace):
    label_map = read_label_map(args.label_map) if getattr(args, "label_map", None) else None
    return ingest_trace(
        args.trace,
        fmt=args.format,
        granularity=args.granularity,
        label_map=label_map,
    )


# --------------------------------------------------------------------------
# core pipeline stages (shared between the subcommands and `repro`)


def _stage_sample(source, m, seed, horizon, out: Path) -> list:
    batch = sample_batch(source, m, seed, horizon=horizon)
    path = out / "batch.txt"
    write_batch(batch, path)
    return [path]


def _stage_analyse(batch, out: Path, opts: dict) -> tuple:
    """Run JD + modes + graph reports; returns (artefacts, status)."""
    artefacts = []
    jd = joint_diagonalise(batch, tol=opts["jd_tol"], max_sweeps=opts["max_sweeps"])
    jd_path = out / "jd.json"
    jd.write_json(jd_path)
    artefacts.append(jd_path)

    grid, density = kde_density(jd.deviations)
    kde_path = out / "kde.csv"
    with open(kde_path, "w", encoding="utf-8") as fh:
        fh.write("delta,density\n")
        for g, d in zip(grid, density):
            fh.write(f"{float(g)!r},{float(d)!r}\n")
    artefacts.append(kde_path)

    if not jd.converged:
        return artefacts, "convergence-failure"

    values = jd.deviations
    if opts["log_delta"]:
        guard = 1e-12 * (float(values.max(initial=0.0)) + 1.0)
        values = np.log(values + guard)
    model = select_modes(values, k_max=opts["k_max"], seed=opts["seed"], n_restarts=opts["restarts"])
    report = per_mode_reconstruction(
        model,
        batch,
        bin_width=opts["bin_width"],
        overall=jd,
        tol=opts["jd_tol"],
        max_sweeps=opts["max_sweeps"],
    )
    artefacts.extend(write_report(report, out))

    transform = "neglog" if opts["neglog"] else "reciprocal"
    graphs = [("overall", report.overall_matrix)] + [
        (f"mode_{m.index}", m.matrix) for m in report.modes
    ]
    for name, matrix in graphs:
        thr = zero_diagonal(threshold_graph(matrix, opts["threshold"]))
        dot_path = out / f"{name}_threshold.dot"
        write_dot(thr, dot_path)
        artefacts.append(dot_path)
        spg = shortest_path_graph(matrix, epsilon=opts["epsilon"], transform=transform)
        spg_path = out / f"{name}_paths.dot"
        write_dot(spg, spg_path)
        artefacts.append(spg_path)
        if batch.n_nodes >= 2:
            dendro = fiedler_dendrogram(thr, min_size=opts["min_size"])
            nwk_path = out / f"{name}.newick"
            write_newick(dendro, nwk_path)
            artefacts.append(nwk_path)
    return artefacts, "ok"


def _stage_sir(net, params: SirParams, opts: dict, out: Path) -> list:
    curves = sir_experiment(
        net,
        params,
        runs_per_node=opts["runs"],
        bootstrap_resamples=opts["bootstrap"],
        seed=opts["seed"],
        ci=opts["ci"],
        per_step_contacts=opts["per_step_contacts"],
    )
    curves_path = out / "curves.csv"
    write_curves_csv(curves, curves_path)
    ranking_path = out / "ranking.json"
    write_ranking_json(curves, net.n_nodes, ranking_path)
    return [curves_path, ranking_path]


def _stage_synth(schedule, seed, tail_exponent, min_gap, out: Path) -> tuple:
    result = gen_switching(schedule, seed=seed, tail_exponent=tail_exponent, min_gap=min_gap)
    trace_path = out / "trace.csv"
    write_trace(result.network, trace_path)
    labels_path = out / "labels.csv"
    write_labels(result.labels, labels_path)
    map_path = out / "label_map.json"
    write_label_map(result.network, map_path)
    sched_path = out / "schedule.json"
    write_schedule(schedule, sched_path)
    return result, [trace_path, labels_path, map_path, sched_path]


# --------------------------------------------------------------------------
# subcommand handlers


def _cmd_sample(args) -> int:
    out = _prepare_out(args.out)
    cfg = _write_json(out / "config.json", _config_payload(args))
    net = _load_net(args)
    source = aggregate_static(net, net.t_min, net.t_max) if args.static else net
    artefacts = _stage_sample(source, args.m, args.seed, args.horizon, out)
    _write_manifest(out, cfg, artefacts + [out / "config.json"])
    print(f"wrote {len(artefacts)} artefact(s) to {out}")
    return 0


def _analyse_batch(args):
    if args.batch:
        return read_batch(args.batch)
    if args.trace:
        net = _load_net(args)
    elif args.schedule or args.default_schedule:
        schedule = read_schedule(args.schedule) if args.schedule else default_switching_schedule()
        net = gen_switching(schedule, seed=args.seed).network
    else:
        raise UsageError("analyse needs --batch, --trace or a schedule")
    return sample_batch(net, args.m, args.seed, horizon=args.horizon)


def _cmd_analyse(args) -> int:
    out = _prepare_out(args.out)
    cfg = _write_json(out / "config.json", _config_payload(args))
    batch = _analyse_batch(args)
    opts = vars(args)
    try:
        artefacts, status = _stage_analyse(batch, out, opts)
    except ConvergenceError as exc:
        _write_manifest(out, cfg, [out / "config.json"], status="convergence-failure")
        print(f"error: {exc}", file=sys.stderr)
        return 3
    _write_manifest(out, cfg, artefacts + [out / "config.json"], status=status)
    if status != "ok":
        print("error: joint diagonalisation did not converge", file=sys.stderr)
        return 3
    print(f"wrote {len(artefacts)} artefact(s) to {out}")
    return 0


def _cmd_sir(args) -> int:
    out = _prepare_out(args.out)
    cfg = _write_json(out / "config.json", _config_payload(args))
    net = _load_net(args)
    params = default_params(
        net,
        p_transmit=args.p,
        recovery_mean=args.recovery_mean,
        start_step=args.start_step,
        horizon=args.horizon,
    )
    artefacts = _stage_sir(net, params, vars(args), out)
    _write_manifest(out, cfg, artefacts + [out / "config.json"])
    print(f"wrote {len(artefacts)} artefact(s) to {out}")
    return 0


def _cmd_synth(args) -> int:
    out = _prepare_out(args.out)
    cfg = _write_json(out / "config.json", _config_payload(args))
    schedule = read_schedule(args.schedule) if args.schedule else default_switching_schedule(
        n_nodes=args.n_nodes, segment_steps=args.segment_steps
    )
    _, artefacts = _stage_synth(schedule, args.seed, args.tail_exponent, args.min_gap, out)
    _write_manifest(out, cfg, artefacts + [out / "config.json"])
    print(f"wrote {len(artefacts)} artefact(s) to {out}")
    return 0


def _cmd_repro(args) -> int:
    out = _prepare_out(args.out)
    cfg = _write_json(out / "config.json", _config_payload(args))
    artefacts = [out / "config.json"]

    schedule = default_switching_schedule(n_nodes=args.n_nodes, segment_steps=args.segment_steps)
    synth_out = _prepare_out(out / "synth")
    result, synth_art = _stage_synth(schedule, args.seed, args.tail_exponent, args.min_gap, synth_out)
    artefacts.extend(synth_art)

    sample_out = _prepare_out(out / "sample")
    batch = sample_batch(result.network, args.m, args.seed)
    batch_path = sample_out / "batch.txt"
    write_batch(batch, batch_path)
    artefacts.append(batch_path)

    analyse_out = _prepare_out(out / "analyse")
    opts = {
        "jd_tol": args.jd_tol,
        "max_sweeps": args.max_sweeps,
        "log_delta": False,
        "k_max": args.k_max,
        "seed": args.seed,
        "restarts": args.restarts,
        "bin_width": float(args.segment_steps),
        "threshold": args.threshold,
        "epsilon": 0.0,
        "neglog": False,
        "min_size": 1,
    }
    try:
        analyse_art, status = _stage_analyse(batch, analyse_out, opts)
    except ConvergenceError as exc:
        _write_manifest(out, cfg, artefacts, status="convergence-failure")
        print(f"error: {exc}", file=sys.stderr)
        return 3
    artefacts.extend(analyse_art)
    if status != "ok":
        _write_manifest(out, cfg, artefacts, status=status)
        print("error: joint diagonalisation did not converge", file=sys.stderr)
        return 3

    sir_out = _prepare_out(out / "sir")
    params = SirParams(
        p_transmit=args.p,
        recovery_mean=args.recovery_mean,
        start_step=args.start_step,
        horizon=args.horizon,
    )
    sir_opts = {
        "runs": args.runs,
        "bootstrap": args.bootstrap,
        "seed": args.seed,
        "ci": 0.95,
        "per_step_contacts": False,
    }
    artefacts.extend(_stage_sir(result.network, params, sir_opts, sir_out))

    _write_manifest(out, cfg, artefacts)
    print(f"wrote {len(artefacts)} artefact(s) to {out}")
    return 0


# --------------------------------------------------------------------------
# parser


def _add_trace_options(p, required: bool = True) -> None:
    p.add_argument("--trace", required=required, help="contact trace file")
    p.add_argument("--format", choices=("csv", "ws4"), default="csv", help="trace format")
    p.add_argument("--granularity", type=float, default=1.0, help="seconds per time step")
    p.add_argument("--label-map", default=None, help="pinned label map JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contactmodes", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a tree batch from a trace")
    _add_trace_options(p)
    p.add_argument("--m", type=int, default=10000, help="number of tree samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=None, help="flooding horizon in seconds")
    p.add_argument("--static", action="store_true", help="aggregate the trace and BFS-sample instead of flooding")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("analyse", help="joint diagonalisation, modes and graph reports")
    p.add_argument("--batch", default=None, help="batch file from `sample`")
    _add_trace_options(p, required=False)
    p.add_argument("--schedule", default=None, help="generator schedule JSON (inline synthesis)")
    p.add_argument("--default-schedule", action="store_true", help="use the bundled 4-segment schedule")
    p.add_argument("--m", type=int, default=10000, help="samples when generating inline")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jd-tol", type=float, default=1e-9)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--bin-width", type=float, default=None)
    p.add_argument("--threshold", type=float, default=0.1, help="presentation-graph weight threshold")
    p.add_argument("--epsilon", type=float, default=0.0, help="shortest-path weight floor")
    p.add_argument("--min-size", type=int, default=1, help="dendrogram minimum block size")
    p.add_argument("--log-delta", action="store_true", help="fit modes on log deviations")
    p.add_argument("--neglog", action="store_true", help="use -log(w) path lengths instead of 1/w")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_analyse)

    p = sub.add_parser("sir", help="SIR epidemic experiment over a trace")
    _add_trace_options(p)
    p.add_argument("--p", type=float, default=0.5, help="per-contact transmission probability")
    p.add_argument("--recovery-mean", type=float, default=80.0, help="mean infectious duration in steps")
    p.add_argument("--start-step", type=int, default=250)
    p.add_argument("--horizon", type=int, default=None, help="steps to simulate (default: to trace end)")
    p.add_argument("--runs", type=int, default=30, help="runs per seed node")
    p.add_argument("--bootstrap", type=int, default=200, help="bootstrap resamples")
    p.add_argument("--ci", type=float, default=0.95)
    p.add_argument("--per-step-contacts", action="store_true", help="one transmission trial per step of a long contact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sir)

    p = sub.add_parser("synth", help="generate a synthetic switching trace")
    p.add_argument("--schedule", default=None, help="schedule JSON (default: bundled 4-segment)")
    p.add_argument("--n-nodes", type=int, default=50)
    p.add_argument("--segment-steps", type=int, default=700)
    p.add_argument("--tail-exponent", type=float, default=1.5)
    p.add_argument("--min-gap", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("repro", help="run the bundled switching experiment end to end")
    p.add_argument("--n-nodes", type=int, default=30)
    p.add_argument("--segment-steps", type=int, default=150)
    p.add_argument("--m", type=int, default=400)
    p.add_argument("--tail-exponent", type=float, default=1.5)
    p.add_argument("--min-gap", type=float, default=1.0)
    p.add_argument("--jd-tol", type=float, default=1e-6)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--k-max", type=int, default=6)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--recovery-mean", type=float, default=80.0)
    p.add_argument("--start-step", type=int, default=50)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--bootstrap", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_repro)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
