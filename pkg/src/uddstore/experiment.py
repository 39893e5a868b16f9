"""Scans over decoupling orders, threshold counts, exponential fits and file output."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import spinops as so
from .bathfn import SpectralDensity, chi
from .config import ExperimentConfig
from .dynamics import MoleculeParams, NoiseModel, run_timeline
from .errors import DomainError, OverlapError, QuadratureError, SingularFitError
from .protocols import BELL_TARGETS, prepare_bell, singlet_readout
from .sequence import SequenceSpec, Timeline, free_timeline, times_for
from .trace import CorrelationTrace

log = logging.getLogger(__name__)

CSV_HEADER = ("state", "sequence", "time_s", "correlation", "std_error")
FIT_HEADER = ("sequence", "amplitude", "tau_s", "residual")


def initial_state(label: str, mol: MoleculeParams) -> tuple[np.ndarray, np.ndarray]:
    """(density matrix, target ket) for a state label.

    Canonical labels (``S0``, ``++``, ...) give the pure projector; ``bell:psi_plus``
    style labels run the singlet-to-Bell transform for ``mol``.
    """
    if label.startswith("bell:"):
        kind = label.split(":", 1)[1]
        return prepare_bell(kind, mol), so.get_state(BELL_TARGETS[kind])
    psi = so.get_state(label)
    return so.projector(psi), psi


def _block_samples(grid: Sequence[float], block: float) -> tuple[list[int], list[float]]:
    """Whole-block counts nearest to each grid time, duplicates dropped."""
    counts = []
    for t in grid:
        n = int(round(t / block))
        if not counts or n > counts[-1]:
            counts.append(n)
    return counts, [n * block for n in counts]


def _trace_from_result(label: str, seq: str, result, psi, n: int) -> CorrelationTrace:
    """Trace over the first ``n`` samples (the run may append its end time)."""
    corr = [so.correlation(rho, psi) for rho in result.states[:n]]
    errs = []
    members = result.member_states
    m = members.shape[0]
    for k in range(len(corr)):
        if m < 2:
            errs.append(0.0)
            continue
        vals = np.array([so.correlation(members[i, k], psi) for i in range(m)])
        errs.append(float(np.std(vals, ddof=1) / math.sqrt(m)))
    return CorrelationTrace(label, seq, [float(t) for t in result.times[:n]], corr, errs)


def run_sequence(rho0: np.ndarray, psi: np.ndarray, timeline: Timeline, sample_at: Sequence[float],
                 cfg: ExperimentConfig, threads: int = 1, state_label: str = "") -> CorrelationTrace:
    result = run_timeline(rho0, timeline, cfg.noise, sample_at, cfg.molecule, threads=threads,
                          keep_members=True)
    return _trace_from_result(state_label or cfg.state, timeline.label, result, psi, len(sample_at))


def run_scan(cfg: ExperimentConfig, threads: int = 1) -> list[CorrelationTrace]:
    """Correlation traces for the no-decoupling control and every configured sequence.

    Durations are rounded to whole decoupling blocks, so each sequence reports
    its own realized times. Sequences whose pulses overlap come back as
    traces with a failure status and no points.
    """
    rho0, psi = initial_state(cfg.state, cfg.molecule)
    traces = []
    t_max = max(cfg.grid)
    if cfg.include_control:
        tl = free_timeline(t_max, "none")
        traces.append(run_sequence(rho0, psi, tl, cfg.grid, cfg, threads))
    for spec in cfg.sequences:
        try:
            block = spec.block_duration
            counts, sample_at = _block_samples(cfg.grid, block)
            tl = spec.timeline(repeats=max(1, counts[-1]))
            traces.append(run_sequence(rho0, psi, tl, sample_at, cfg, threads))
        except OverlapError as exc:
            log.warning("%s skipped: %s", spec.label, exc)
            traces.append(CorrelationTrace(cfg.state, spec.label, status=f"overlap: {exc}"))
    return traces


def readout_decay(cfg: ExperimentConfig, spec: SequenceSpec | None, threads: int = 1) -> list[tuple[float, float]]:
    """Singlet-order readout amplitude versus decoupling time (``None`` = no pulses)."""
    rho0, _ = initial_state(cfg.state, cfg.molecule)
    if spec is None:
        tl, sample_at = free_timeline(max(cfg.grid), "none"), list(cfg.grid)
    else:
        counts, sample_at = _block_samples(cfg.grid, spec.block_duration)
        tl = spec.timeline(repeats=max(1, counts[-1]))
    res = run_timeline(rho0, tl, cfg.noise, sample_at, cfg.molecule, threads=threads)
    return [(float(t), singlet_readout(so.deviation(r), cfg.molecule).amplitude)
            for t, r in zip(res.times, res.states)]


def count_above_threshold(trace: CorrelationTrace, threshold: float = 0.9) -> int:
    """Number of points with correlation strictly above ``threshold``."""
    if not 0 < threshold < 1:
        raise DomainError("threshold must lie in (0, 1)")
    return sum(c > threshold for c in trace.correlations)


@dataclass(frozen=True)
class FitResult:
    amplitude: float
    tau: float
    residual: float
    covariance: np.ndarray  # over (amplitude, tau)


def fit_exponential(t: Sequence[float], y: Sequence[float]) -> FitResult:
    """Least-squares fit of ``y = A exp(-t / tau)``.

    Starts from a log-linear fit of the positive samples (or, when fewer than
    two are positive, from ``A = y[argmax |y|]``, ``tau = span / 2``) and
    refines with Levenberg-Marquardt on ``(A, 1/tau)``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size != y.size or t.size < 3:
        raise DomainError("need at least 3 (t, y) points")
    if np.ptp(y) == 0:
        raise SingularFitError("all samples are equal; the decay constant is undetermined")
    pos = y > 0
    if pos.sum() >= 2 and np.ptp(t[pos]) > 0:
        slope, icpt = np.polyfit(t[pos], np.log(y[pos]), 1)
        a0, k0 = math.exp(icpt), -slope
    else:
        a0, k0 = float(y[np.argmax(np.abs(y))]), 2.0 / max(np.ptp(t), 1e-300)
    if k0 <= 0:
        k0 = 1.0 / max(np.ptp(t), 1e-300)

    def resid(p):
        return p[0] * np.exp(-p[1] * t) - y

    def jac(p):
        e = np.exp(-p[1] * t)
        return np.column_stack([e, -p[0] * t * e])

    sol = least_squares(resid, [a0, k0], jac=jac, method="lm", xtol=1e-10, ftol=1e-15, gtol=1e-15,
                        max_nfev=10000)
    a, k = sol.x
    jtj = sol.jac.T @ sol.jac
    if not np.all(np.isfinite(sol.x)) or np.linalg.cond(jtj) > 1e14:
        raise SingularFitError("fit Jacobian is singular")
    if k <= 0:
        raise SingularFitError(f"data do not decay (rate {k:.3g} 1/s)")
    dof = max(t.size - 2, 1)
    s2 = float(sol.fun @ sol.fun) / dof
    cov_ak = np.linalg.inv(jtj) * s2
    g = np.diag([1.0, -1.0 / (k * k)])  # d(A, tau)/d(A, k)
    return FitResult(float(a), float(1.0 / k), float(np.linalg.norm(sol.fun)), g @ cov_ak @ g.T)


@dataclass(frozen=True)
class FilterRow:
    sequence: str
    bath: str
    duration: float
    chi: float
    coherence: float
    error: float
    status: str = "ok"


def run_filter_comparison(cfg: ExperimentConfig) -> tuple[list[FilterRow], dict[tuple[str, float], list[str]]]:
    """chi and W for each (sequence, bath, duration); ranking by W per (bath, duration)."""
    rows = []
    for name, bath in cfg.filter.baths:
        for total in cfg.filter.durations:
            for scheme in cfg.filter.schemes:
                for n in cfg.filter.orders:
                    label = f"{scheme.upper()}-{n}"
                    try:
                        r = chi(times_for(scheme, n, total), bath)
                        rows.append(FilterRow(label, name, total, r.chi, r.coherence, r.error))
                    except QuadratureError as exc:
                        rows.append(FilterRow(label, name, total, math.nan, math.nan, math.nan, str(exc)))
    ranking: dict[tuple[str, float], list[str]] = {}
    for key in dict.fromkeys((r.bath, r.duration) for r in rows):
        ok = [r for r in rows if (r.bath, r.duration) == key and r.status == "ok"]
        ranking[key] = [r.sequence for r in sorted(ok, key=lambda r: -r.coherence)]
    return rows, ranking


def _fmt(x: float) -> str:
    return repr(float(x))


def traces_to_csv(traces: Iterable[CorrelationTrace]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for tr in traces:
        if not tr.ok:
            w.writerow([tr.state, tr.sequence, "nan", "nan", "nan"])
            continue
        for t, c, e in tr.points:
            w.writerow([tr.state, tr.sequence, _fmt(t), _fmt(c), _fmt(e)])
    return buf.getvalue()


def parse_csv(text: str) -> list[CorrelationTrace]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise DomainError(f"expected header {','.join(CSV_HEADER)}")
    traces: dict[tuple[str, str], CorrelationTrace] = {}
    for row in rows[1:]:
        state, seq, t, c, e = row
        tr = traces.setdefault((state, seq), CorrelationTrace(state, seq))
        if t == "nan":
            tr.status = "failed"
            continue
        tr.times.append(float(t))
        tr.correlations.append(float(c))
        tr.std_errors.append(float(e))
    return list(traces.values())


def traces_to_plotdata(traces: Iterable[CorrelationTrace]) -> str:
    payload = {
        "columns": list(CSV_HEADER[2:]),
        "traces": [
            {"state": tr.state, "sequence": tr.sequence, "status": tr.status,
             "time_s": tr.times, "correlation": tr.correlations, "std_error": tr.std_errors}
            for tr in traces
        ],
    }
    return json.dumps(payload, indent=1) + "\n"


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_csv(traces: Iterable[CorrelationTrace], path: str | Path) -> Path:
    return write_text(Path(path), traces_to_csv(traces))


def emit_plotdata(traces: Iterable[CorrelationTrace], path: str | Path) -> Path:
    return write_text(Path(path), traces_to_plotdata(traces))


def fits_to_csv(fits: Iterable[tuple[str, FitResult]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIT_HEADER)
    for label, f in fits:
        w.writerow([label, _fmt(f.amplitude), _fmt(f.tau), _fmt(f.residual)])
    return buf.getvalue()


def filter_rows_to_csv(rows: Iterable[FilterRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("sequence", "bath", "duration_s", "chi", "W", "error", "status"))
    for r in rows:
        w.writerow([r.sequence, r.bath, _fmt(r.duration), _fmt(r.chi), _fmt(r.coherence), _fmt(r.error), r.status])
    return buf.getvalue()
