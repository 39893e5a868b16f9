"""Command-line entry point: ``uddstore <subcommand> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment as ex
from .config import ExperimentConfig, load_config, parse_quantity
from .errors import DomainError, OverlapError, QuadratureError, SequenceSyntaxError, SingularFitError
from .protocols import prepare_initial, spinlock_purify
from .sequence import TAU_CPMG, TAU_PI, block_duration, format_sequence_spec, parse_sequence_spec, times_for

log = logging.getLogger("uddstore")


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.noise = replace(cfg.noise, master_seed=args.seed)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.format is not None:
        cfg.out_format = args.format
    return cfg


def _emit_traces(cfg: ExperimentConfig, traces, stem: str) -> Path:
    out = Path(cfg.out_dir)
    if cfg.out_format == "plotdata":
        return ex.emit_plotdata(traces, out / f"{stem}.json")
    return ex.emit_csv(traces, out / f"{stem}.csv")


def cmd_times(args) -> int:
    if args.period is not None:
        total = parse_quantity(args.period, "time")
    else:
        total = block_duration(args.order, parse_quantity(args.tau_cpmg, "time"), parse_quantity(args.tau_pi, "time"))
    tv = times_for(args.scheme, args.order, total)
    print(f"# {args.scheme.upper()}-{args.order} T={total!r} s")
    for t in tv.instants:
        print(repr(t))
    return 0


def cmd_compile(args) -> int:
    spec = parse_sequence_spec(args.sequence)
    tl = spec.timeline()
    print(f"# {format_sequence_spec(spec)}")
    print(f"# block {tl.block_duration!r} s, repeats {tl.repeats}, total {tl.total_duration!r} s")
    print("kind,duration_s,phase_rad")
    for seg in tl.segments:
        phase = repr(seg.pulse.phase) if seg.pulse is not None else ""
        print(f"{seg.kind},{seg.duration!r},{phase}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.state:
        cfg.state = args.state
        cfg.__post_init__()
    if args.sequence:
        cfg.sequences = [parse_sequence_spec(args.sequence)]
        cfg.include_control = False
    else:
        cfg.sequences = []
        cfg.include_control = True
    traces = ex.run_scan(cfg, threads=args.threads)
    path = _emit_traces(cfg, traces, "simulate")
    print(path)
    return 0


def cmd_scan(args) -> int:
    cfg = _load(args)
    traces = ex.run_scan(cfg, threads=args.threads)
    path = _emit_traces(cfg, traces, "scan")
    lines = ["sequence,count_above_threshold"]
    for tr in traces:
        lines.append(f"{tr.sequence},{ex.count_above_threshold(tr, cfg.threshold) if tr.ok else 'nan'}")
    ex.write_text(Path(cfg.out_dir) / "counts.csv", "\n".join(lines) + "\n")
    print(path)
    return 0


def cmd_filter(args) -> int:
    cfg = _load(args)
    if not cfg.filter.baths:
        raise DomainError("config has no [[filter.bath]] entries")
    rows, ranking = ex.run_filter_comparison(cfg)
    path = ex.write_text(Path(cfg.out_dir) / "filter.csv", ex.filter_rows_to_csv(rows))
    for (bath, total), order in ranking.items():
        print(f"{bath} T={total!r} s: {' > '.join(order)}")
    print(path)
    return 0


def cmd_spinlock(args) -> int:
    cfg = _load(args)
    trace, _ = spinlock_purify(prepare_initial(cfg.preparation), cfg.spinlock, cfg.spinlock_grid)
    path = _emit_traces(cfg, [trace], "spinlock")
    print(path)
    return 0


def cmd_fit(args) -> int:
    out_dir = Path(args.out or ".")
    try:
        text = Path(args.csv).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {args.csv}: {exc}") from exc
    fits = []
    for tr in ex.parse_csv(text):
        if not tr.ok:
            continue
        try:
            fits.append((tr.sequence, ex.fit_exponential(tr.times, tr.correlations)))
        except (SingularFitError, DomainError) as exc:
            log.warning("%s: %s", tr.sequence, exc)
    path = ex.write_text(out_dir / "fit.csv", ex.fits_to_csv(fits))
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "plotdata"))
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="uddstore", description="Decoupled singlet-storage simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("times", parents=[common], help="print pulse instants")
    s.add_argument("--scheme", choices=("udd", "cpmg"), default="udd")
    s.add_argument("--order", type=int, required=True)
    s.add_argument("--period", help="block length with unit; default from --tau-cpmg/--tau-pi")
    s.add_argument("--tau-cpmg", default=f"{TAU_CPMG * 1e3:g}ms")
    s.add_argument("--tau-pi", default=f"{TAU_PI * 1e6:g}us")
    s.set_defaults(func=cmd_times)

    s = sub.add_parser("compile", parents=[common], help="validate a sequence and print its timeline")
    s.add_argument("sequence", help='e.g. "udd order=7 tau_cpmg=2ms tau_pi=27.2us repeats=1"')
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", parents=[common], help="single sequence (or free evolution) run")
    s.add_argument("--sequence", help="sequence line; omit for free evolution")
    s.add_argument("--state")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("scan", parents=[common], help="all configured sequences over the duration grid")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("filter", parents=[common], help="filter-function bath comparison")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("spinlock", parents=[common], help="spin-lock purification trace")
    s.set_defaults(func=cmd_spinlock)

    s = sub.add_parser("fit", parents=[common], help="exponential fits of a correlation CSV")
    s.add_argument("csv")
    s.set_defaults(func=cmd_fit)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DomainError, SequenceSyntaxError, OverlapError, QuadratureError, OSError) as exc:
        print(f"uddstore {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
