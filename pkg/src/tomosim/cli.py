"""Command-line surface: simulate | analyze | replay.

Runs simulation campaigns fanned out over worker processes, aggregates
and fits convergence curves, and replays recorded count streams. All
outputs are flat delimiter-separated text files; floats carry 17
significant digits so every file round-trips bit-exactly.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    ConvergenceCurve,
    average_curves,
    efficiency_ratio,
    fit_power_law,
    gill_massar_bound,
)
from .estimation import MleOptions
from .protocols import DEFAULT_DELTA, PROTOCOLS
from .quantum import DensityMatrix, random_bures_mixed, random_pure_haar
from .simulator import (
    Schedule,
    SourceModel,
    TomographyTrace,
    read_records,
    replay_counts,
    run_tomography,
)

OUTPUT_ENV_VAR = "TOMOSIM_OUT"

_TRACE_COLUMNS = ("protocol", "run_id", "seed", "iteration", "n_emit",
                  "n_det", "d_bures_sq", "fidelity", "loglik")


def _fmt(x: float) -> str:
    x = float(x)
    if x == 0.0:
        return "0"  # canonicalize -0.0 so parse/write cycles are byte-stable
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# Trace files


@dataclass
class TraceFile:
    """Parsed form of one per-run trace file."""

    protocol: str
    run_id: int
    seed: int
    iteration: np.ndarray
    n_emit: np.ndarray
    n_det: np.ndarray
    d_bures_sq: np.ndarray
    fidelity: np.ndarray
    loglik: np.ndarray

    @classmethod
    def from_trace(cls, trace: TomographyTrace, run_id: int, seed: int) -> "TraceFile":
        e = trace.entries
        return cls(
            protocol=trace.protocol,
            run_id=run_id,
            seed=seed,
            iteration=np.array([x.iteration for x in e], dtype=int),
            n_emit=np.array([x.n_emit for x in e]),
            n_det=np.array([x.n_det for x in e], dtype=int),
            d_bures_sq=np.array([x.d_bures_sq for x in e]),
            fidelity=np.array([x.fidelity for x in e]),
            loglik=np.array([x.loglik for x in e]),
        )

    def curve_points(self) -> tuple[np.ndarray, np.ndarray]:
        return self.n_emit, self.d_bures_sq


def write_trace_file(path, tf: TraceFile) -> None:
    lines = [",".join(_TRACE_COLUMNS)]
    for i in range(len(tf.iteration)):
        lines.append(",".join([
            tf.protocol, str(tf.run_id), str(tf.seed), str(int(tf.iteration[i])),
            _fmt(tf.n_emit[i]), str(int(tf.n_det[i])), _fmt(tf.d_bures_sq[i]),
            _fmt(tf.fidelity[i]), _fmt(tf.loglik[i]),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_file(path) -> TraceFile:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != ",".join(_TRACE_COLUMNS):
        raise ValueError(f"{path}: not a trace file")
    rows = [ln.split(",") for ln in lines[1:]]
    if not rows or any(len(r) != len(_TRACE_COLUMNS) for r in rows):
        raise ValueError(f"{path}: malformed trace rows")
    return TraceFile(
        protocol=rows[0][0],
        run_id=int(rows[0][1]),
        seed=int(rows[0][2]),
        iteration=np.array([int(r[3]) for r in rows], dtype=int),
        n_emit=np.array([float(r[4]) for r in rows]),
        n_det=np.array([int(r[5]) for r in rows], dtype=int),
        d_bures_sq=np.array([float(r[6]) for r in rows]),
        fidelity=np.array([float(r[7]) for r in rows]),
        loglik=np.array([float(r[8]) for r in rows]),
    )


# ---------------------------------------------------------------------------
# Curve files


def write_curve_file(path, curve: ConvergenceCurve, meta: dict) -> None:
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append("n,mean,std_of_mean")
    for i in range(curve.n.size):
        lines.append(",".join(
            [_fmt(curve.n[i]), _fmt(curve.mean[i]), _fmt(curve.std_of_mean[i])]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve_file(path) -> tuple[ConvergenceCurve, dict]:
    meta: dict[str, str] = {}
    rows = []
    header_seen = False
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if not ln:
            continue
        if ln.startswith("#"):
            key, _, value = ln[1:].strip().partition("=")
            meta[key] = value
        elif ln == "n,mean,std_of_mean":
            header_seen = True
        else:
            rows.append([float(x) for x in ln.split(",")])
    if not header_seen or not rows:
        raise ValueError(f"{path}: not a curve file")
    arr = np.array(rows)
    return ConvergenceCurve(arr[:, 0], arr[:, 1], arr[:, 2],
                            runs=int(meta.get("runs", "0"))), meta


# ---------------------------------------------------------------------------
# Campaigns


@dataclass
class CampaignConfig:
    protocols: tuple[str, ...]
    states: str = "pure"          # pure | bures | path to a state file
    runs: int = 50
    seed: int = 0
    schedule: Schedule = field(default_factory=Schedule)
    source: SourceModel = field(default_factory=lambda: SourceModel(1000.0))
    mle: MleOptions = field(default_factory=MleOptions)
    delta: float = DEFAULT_DELTA
    random_v: bool = False
    out_dir: Path = Path("results")

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise ValueError(f"unknown protocol {p!r}; expected one of {PROTOCOLS}")
        if self.states not in ("pure", "bures") and not Path(self.states).exists():
            raise ValueError(f"state file {self.states!r} does not exist")


def read_state_file(path) -> DensityMatrix:
    """Explicit true state: first line D, second line 2D^2 reals (re/im interleaved)."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) != 2:
        raise ValueError(f"{path}: expected two lines (dimension, entries)")
    dim = int(lines[0])
    reals = np.array([float(x) for x in lines[1].split(",")])
    if reals.size != 2 * dim * dim:
        raise ValueError(f"{path}: expected {2 * dim * dim} entry values")
    return DensityMatrix((reals[0::2] + 1j * reals[1::2]).reshape(dim, dim))


def write_state_file(path, rho: DensityMatrix) -> None:
    flat = rho.matrix.reshape(-1)
    entries = []
    for z in flat:
        entries.append(_fmt(z.real))
        entries.append(_fmt(z.imag))
    Path(path).write_text(f"{rho.dim}\n" + ",".join(entries) + "\n")


def _true_state(cfg: CampaignConfig, run_idx: int) -> DensityMatrix:
    """Per-run true state; runs share states across protocols."""
    if cfg.states in ("pure", "bures"):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0, run_idx)))
        if cfg.states == "pure":
            return random_pure_haar(2, rng)
        return random_bures_mixed(2, rng)
    return read_state_file(cfg.states)


def _run_one(cfg: CampaignConfig, protocol: str, run_idx: int) -> TraceFile:
    rho_true = _true_state(cfg, run_idx)
    # One substream per (master seed, run index), shared by all protocols:
    # paired noise across protocols tightens ratio comparisons.
    run_seed = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1, run_idx))
    trace = run_tomography(
        protocol, rho_true, cfg.source, cfg.schedule, run_seed,
        mle_options=cfg.mle, delta=cfg.delta, random_v=cfg.random_v,
    )
    return TraceFile.from_trace(trace, run_id=run_idx, seed=cfg.seed)


def run_campaign(cfg: CampaignConfig, workers: int | None = None,
                 on_trace=None) -> dict[str, list[TraceFile]]:
    """Execute all (protocol, run) jobs, optionally in parallel.

    ``on_trace(protocol, trace_file)`` is invoked as each run completes.
    Results are deterministic for a fixed config regardless of worker count.
    """
    jobs = [(p, r) for p in cfg.protocols for r in range(cfg.runs)]
    workers = workers if workers is not None else (os.cpu_count() or 1)
    results: dict[str, list[TraceFile]] = {p: [None] * cfg.runs for p in cfg.protocols}

    if workers <= 1 or len(jobs) == 1:
        for p, r in jobs:
            tf = _run_one(cfg, p, r)
            results[p][r] = tf
            if on_trace:
                on_trace(p, tf)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_one, cfg, p, r): (p, r) for p, r in jobs}
            for fut in as_completed(futures):
                p, r = futures[fut]
                tf = fut.result()
                results[p][r] = tf
                if on_trace:
                    on_trace(p, tf)
    return results


def cmd_simulate(cfg: CampaignConfig, workers: int | None = None,
                 per_decade: int = 10) -> int:
    """Run campaigns and write per-run trace files plus aggregated curves."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def flush(protocol: str, tf: TraceFile) -> None:
        write_trace_file(out / f"trace_{protocol}_{tf.run_id:03d}.csv", tf)

    results = run_campaign(cfg, workers=workers, on_trace=flush)
    for protocol, traces in results.items():
        if any(t is None for t in traces):
            print(f"simulate: runs missing for {protocol}", file=sys.stderr)
            return 1
        if len(traces) >= 2:
            curve = average_curves(traces, per_decade=per_decade)
            meta = {
                "protocol": protocol,
                "states": cfg.states,
                "runs": str(cfg.runs),
                "seed": str(cfg.seed),
                "n_max": str(cfg.schedule.n_max),
                "random_v": str(int(cfg.random_v)),
            }
            write_curve_file(out / f"curve_{protocol}.csv", curve, meta)
    return 0


# ---------------------------------------------------------------------------
# Analyze


def _collect_trace_files(inputs) -> list[TraceFile]:
    paths: list[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("trace_*.csv")))
        else:
            paths.append(p)
    if not paths:
        raise ValueError("no trace files found among inputs")
    return [read_trace_file(p) for p in paths]


def cmd_analyze(inputs, window: tuple[float, float] | None,
                comparisons, out_dir, per_decade: int = 10) -> int:
    """Fit grouped traces, emit pairwise ratios and plot-ready columns."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traces = _collect_trace_files(inputs)

    by_protocol: dict[str, list[TraceFile]] = {}
    for tf in traces:
        by_protocol.setdefault(tf.protocol, []).append(tf)

    report: list[str] = []
    fits = {}
    for protocol, group in sorted(by_protocol.items()):
        if len(group) < 2:
            raise ValueError(f"protocol {protocol!r} has {len(group)} trace(s); need >= 2")
        curve = average_curves(group, per_decade=per_decade)
        win = window or (100.0, float(curve.n[-1]))
        fit = fit_power_law(curve, win)
        fits[protocol] = fit
        report += [
            f"fit.{protocol}.alpha = {_fmt(fit.alpha)}",
            f"fit.{protocol}.alpha_err = {_fmt(fit.alpha_err)}",
            f"fit.{protocol}.beta = {_fmt(fit.beta)}",
            f"fit.{protocol}.beta_err = {_fmt(fit.beta_err)}",
            f"fit.{protocol}.window = {_fmt(fit.window[0])}:{_fmt(fit.window[1])}",
            f"fit.{protocol}.runs = {len(group)}",
        ]
        plot_lines = ["n,mean,std_of_mean,bound_mixed,bound_pure"]
        for i in range(curve.n.size):
            plot_lines.append(",".join([
                _fmt(curve.n[i]), _fmt(curve.mean[i]), _fmt(curve.std_of_mean[i]),
                _fmt(gill_massar_bound(curve.n[i], "mixed-qubit")),
                _fmt(gill_massar_bound(curve.n[i], "pure-qubit")),
            ]))
        (out / f"plot_{protocol}.csv").write_text("\n".join(plot_lines) + "\n")

    for comp in comparisons or []:
        subject, _, reference = comp.partition(":")
        if subject not in fits or reference not in fits:
            raise ValueError(f"comparison {comp!r} references unknown protocol")
        f_s, f_r = fits[subject], fits[reference]
        win = window or (100.0, min(f_s.window[1], f_r.window[1]))
        ratio = efficiency_ratio(f_r, f_s, win[0], win[1])
        report.append(f"ratio.{subject}_vs_{reference} = {_fmt(ratio)}")

    (out / "report.txt").write_text("\n".join(report) + "\n")
    print("\n".join(report))
    return 0


# ---------------------------------------------------------------------------
# Replay


def cmd_replay(record_files, n0: float | None, out_dir,
               window: tuple[float, float] | None = None,
               points_per_decade: int = 10, clip_fraction: float = 0.25) -> int:
    """Self-referenced replay of recorded count streams.

    Each stream is re-estimated on growing prefixes; distances are taken
    to the assessment at N0. Points with N > N0 * clip_fraction are
    clipped away (the curve plunges to zero at N0 by construction).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    clipped: list[TraceFile] = []
    for i, path in enumerate(record_files):
        grouped, _, intensity = read_records(path)
        trace = replay_counts(grouped, intensity, n0,
                              points_per_decade=points_per_decade)
        tf = TraceFile.from_trace(trace, run_id=i, seed=-1)
        write_trace_file(out / f"replay_{i:03d}.csv", tf)
        n0_actual = float(tf.n_emit[-1])
        keep = tf.n_emit <= clip_fraction * n0_actual
        if not np.any(keep):
            raise ValueError(f"{path}: no points survive clipping at N0/4")
        clipped.append(TraceFile(
            protocol="replay", run_id=i, seed=-1,
            iteration=tf.iteration[keep], n_emit=tf.n_emit[keep],
            n_det=tf.n_det[keep], d_bures_sq=tf.d_bures_sq[keep],
            fidelity=tf.fidelity[keep], loglik=tf.loglik[keep],
        ))

    report = [f"replay.files = {len(clipped)}"]
    if len(clipped) >= 2:
        curve = average_curves(clipped, per_decade=points_per_decade)
        meta = {"protocol": "replay", "runs": str(len(clipped)), "n0": _fmt(n0 or -1)}
        write_curve_file(out / "replay_curve.csv", curve, meta)
        win = window or (float(curve.n[0]), float(curve.n[-1]))
        fit = fit_power_law(curve, win)
        report += [
            f"replay.alpha = {_fmt(fit.alpha)}",
            f"replay.beta = {_fmt(fit.beta)}",
            f"replay.beta_err = {_fmt(fit.beta_err)}",
        ]
    (out / "replay_report.txt").write_text("\n".join(report) + "\n")
    print("\n".join(report))
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _parse_count(text: str) -> int:
    """Accept scientific notation for counts (1e6 -> 1000000)."""
    return int(round(float(text)))


def _parse_window(text: str) -> tuple[float, float]:
    n1, _, n2 = text.partition(":")
    return float(n1), float(n2)


def _default_out() -> str:
    return os.environ.get(OUTPUT_ENV_VAR, "results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomosim",
        description="Adaptive quantum-state-tomography simulator and analyzer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run tomography campaigns")
    sim.add_argument("--protocol", default="rankp-nc",
                     help=f"comma-separated subset of {','.join(PROTOCOLS)}")
    sim.add_argument("--states", default="pure",
                     help="pure | bures | path to an explicit state file")
    sim.add_argument("--runs", type=int, default=50)
    sim.add_argument("--n-max", type=_parse_count, default=10 ** 6)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=_default_out())
    sim.add_argument("--growth", type=float, default=1.25)
    sim.add_argument("--initial-budget", type=_parse_count, default=100)
    sim.add_argument("--mle-tol", type=float, default=1e-10)
    sim.add_argument("--mle-max-iter", type=int, default=1000)
    sim.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                     help="estimator regularization before the transformation")
    sim.add_argument("--random-v", action="store_true",
                     help="left-multiply the transformation by a Haar-random unitary")
    sim.add_argument("--efficiency", type=float, default=1000.0, metavar="I",
                     help="source intensity (expected emissions per exposition unit)")
    sim.add_argument("--det-efficiency", type=float, default=1.0,
                     help="detector efficiency in (0, 1]")
    sim.add_argument("--workers", type=int, default=None)

    ana = sub.add_parser("analyze", help="fit traces and compute efficiency ratios")
    ana.add_argument("inputs", nargs="+", help="trace files or directories")
    ana.add_argument("--fit-window", type=_parse_window, default=None,
                     metavar="N1:N2")
    ana.add_argument("--compare", action="append", default=[],
                     metavar="SUBJECT:REFERENCE",
                     help="emit the mean accuracy ratio subject/reference")
    ana.add_argument("--out", default=_default_out())

    rep = sub.add_parser("replay", help="replay recorded count streams")
    rep.add_argument("records", nargs="+", help="record-stream files")
    rep.add_argument("--n0", type=float, default=None,
                     help="reference copy count for the final assessment")
    rep.add_argument("--fit-window", type=_parse_window, default=None,
                     metavar="N1:N2")
    rep.add_argument("--points-per-decade", type=int, default=10)
    rep.add_argument("--out", default=_default_out())
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = CampaignConfig(
                protocols=tuple(p.strip() for p in args.protocol.split(",") if p.strip()),
                states=args.states,
                runs=args.runs,
                seed=args.seed,
                schedule=Schedule(initial_budget=args.initial_budget,
                                  growth=args.growth, n_max=args.n_max),
                source=SourceModel(intensity=args.efficiency,
                                   efficiency=args.det_efficiency),
                mle=MleOptions(max_iter=args.mle_max_iter, tol=args.mle_tol),
                delta=args.delta,
                random_v=args.random_v,
                out_dir=Path(args.out),
            )
            return cmd_simulate(cfg, workers=args.workers)
        if args.command == "analyze":
            return cmd_analyze(args.inputs, args.fit_window, args.compare, args.out)
        if args.command == "replay":
            return cmd_replay(args.records, args.n0, args.out,
                              window=args.fit_window,
                              points_per_decade=args.points_per_decade)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"tomosim: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
