"""CPMG/UDD pulse timings, finite-pulse timeline compilation and the one-line sequence format."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from typing import Sequence

import numpy as np

from .errors import DomainError, OverlapError, SequenceSyntaxError

SCHEMES = ("cpmg", "udd")
SELECTIVITY = ("both", "1", "2")
UNIT_SCALE = {"s": Decimal(1), "ms": Decimal("1e-3"), "us": Decimal("1e-6")}

# Values used in the storage experiments.
TAU_CPMG = 2e-3
TAU_PI = 27.2e-6


@dataclass(frozen=True)
class TimingVector:
    scheme: str
    total_period: float
    instants: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in self.instants)
        object.__setattr__(self, "instants", t)
        if any(b <= a for a, b in zip(t, t[1:])):
            raise DomainError("pulse instants must be strictly increasing")
        if t and not (0.0 < t[0] and t[-1] < self.total_period):
            raise DomainError("pulse instants must lie strictly inside (0, T)")

    @property
    def order(self) -> int:
        return len(self.instants)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.instants, dtype=float)


def _check_order_period(n: int, total_period: float) -> None:
    if int(n) != n or n < 1:
        raise DomainError(f"order must be an integer >= 1, got {n}")
    if not total_period > 0:
        raise DomainError(f"total period must be positive, got {total_period}")


def cpmg_times(n: int, total_period: float) -> TimingVector:
    """Equally spaced instants ``T (2j - 1) / (2N)``."""
    _check_order_period(n, total_period)
    j = np.arange(1, n + 1)
    return TimingVector("cpmg", float(total_period), tuple(total_period * (2 * j - 1) / (2 * n)))


def udd_times(n: int, total_period: float) -> TimingVector:
    """Uhrig instants ``T sin^2(pi j / (2N + 2))``.

    Orders 1 and 2 return the CPMG instants exactly; the sin^2 form only
    reproduces them up to rounding.
    """
    _check_order_period(n, total_period)
    if n <= 2:
        return replace(cpmg_times(n, total_period), scheme="udd")
    j = np.arange(1, n + 1)
    t = total_period * np.sin(np.pi * j / (2 * n + 2)) ** 2
    # enforce t_j + t_{N+1-j} = T to rounding; the cos^2 half is computed as a complement
    half = n // 2
    t[n - half:] = total_period - t[:half][::-1]
    if n % 2:
        t[half] = total_period / 2
    return TimingVector("udd", float(total_period), tuple(float(x) for x in t))


def times_for(scheme: str, n: int, total_period: float) -> TimingVector:
    scheme = scheme.lower()
    if scheme == "cpmg":
        return cpmg_times(n, total_period)
    if scheme == "udd":
        return udd_times(n, total_period)
    raise DomainError(f"unknown scheme {scheme!r}")


def block_duration(n: int, tau_cpmg: float, tau_pi: float) -> float:
    """``N (2 tau_cpmg + tau_pi)``: keeps the pulse rate fixed across orders."""
    if int(n) != n or n < 1:
        raise DomainError(f"order must be an integer >= 1, got {n}")
    if not tau_cpmg > 0 or tau_pi < 0:
        raise DomainError("tau_cpmg must be positive and tau_pi non-negative")
    return n * (2 * tau_cpmg + tau_pi)


@dataclass(frozen=True)
class PulseParams:
    """A pi pulse of width ``pi_duration``; zero width means an ideal instantaneous flip.

    ``nominal_amplitude`` (Hz) defaults to the pi calibration ``1 / (2 tau_pi)``.
    ``phase`` is in radians, 0 = x.
    """

    pi_duration: float = 0.0
    nominal_amplitude: float | None = None
    phase: float = 0.0
    selectivity: str = "both"

    def __post_init__(self):
        if self.pi_duration < 0:
            raise DomainError("pi_duration must be >= 0")
        if self.selectivity not in SELECTIVITY:
            raise DomainError(f"selectivity must be one of {SELECTIVITY}")
        if self.pi_duration > 0:
            if self.nominal_amplitude is None:
                object.__setattr__(self, "nominal_amplitude", 1.0 / (2.0 * self.pi_duration))
            elif self.nominal_amplitude <= 0:
                raise DomainError("nominal_amplitude must be positive")

    @property
    def instantaneous(self) -> bool:
        return self.pi_duration == 0.0

    def flip_angle(self, kappa: float = 1.0) -> float:
        if self.instantaneous:
            return kappa * math.pi
        return 2 * math.pi * kappa * self.nominal_amplitude * self.pi_duration


@dataclass(frozen=True)
class Segment:
    kind: str  # "delay" or "pulse"
    duration: float
    pulse: PulseParams | None = None


@dataclass(frozen=True)
class Timeline:
    segments: tuple[Segment, ...]
    repeats: int = 1
    block_duration: float = 0.0
    label: str = ""
    instants: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.repeats < 1:
            raise DomainError("repeats must be >= 1")
        if any(s.duration < 0 for s in self.segments):
            raise DomainError("segment durations must be non-negative")
        total = math.fsum(s.duration for s in self.segments)
        if not self.block_duration:
            object.__setattr__(self, "block_duration", total)
        elif abs(total - self.block_duration) > 1e-12:
            raise DomainError("segment durations do not sum to the block duration")

    @property
    def total_duration(self) -> float:
        return self.repeats * self.block_duration

    @property
    def n_pulses(self) -> int:
        return sum(s.kind == "pulse" for s in self.segments) * self.repeats

    def pulse_centers(self) -> list[float]:
        """Centers of the pulses of one block."""
        centers, t = [], 0.0
        for s in self.segments:
            if s.kind == "pulse":
                centers.append(t + s.duration / 2)
            t += s.duration
        return centers


def free_timeline(duration: float, label: str = "none") -> Timeline:
    """Undriven evolution for ``duration`` seconds."""
    if duration < 0:
        raise DomainError("duration must be >= 0")
    return Timeline((Segment("delay", float(duration)),), 1, float(duration) or 0.0, label)


def validate(timing: TimingVector, tau_pi: float) -> None:
    t = timing.instants
    if not t:
        return
    half = tau_pi / 2
    if t[0] <= half:
        raise OverlapError(f"first pulse starts before the block ({t[0]:.6g} s <= {half:.6g} s)")
    if timing.total_period - t[-1] <= half:
        raise OverlapError("last pulse runs past the end of the block")
    for j, (a, b) in enumerate(zip(t, t[1:]), start=1):
        if b - a <= tau_pi:
            raise OverlapError(f"pulses {j} and {j + 1} overlap (gap {b - a:.6g} s <= {tau_pi:.6g} s)")


def compile_timeline(timing: TimingVector, pulse: PulseParams, repeats: int = 1,
                     phase_cycle: Sequence[float] | None = None, label: str = "") -> Timeline:
    """Lay pulses centered on the timing instants and fill the gaps with delays.

    ``phase_cycle`` (radians) is added to the pulse phase cyclically over the
    pulses of a block.
    """
    if repeats < 1:
        raise DomainError("repeats must be >= 1")
    validate(timing, pulse.pi_duration)
    half = pulse.pi_duration / 2
    segments, edge = [], 0.0
    for j, tj in enumerate(timing.instants):
        p = pulse
        if phase_cycle:
            p = replace(pulse, phase=pulse.phase + phase_cycle[j % len(phase_cycle)])
        segments.append(Segment("delay", (tj - half) - edge))
        segments.append(Segment("pulse", pulse.pi_duration, p))
        edge = tj + half
    segments.append(Segment("delay", timing.total_period - edge))
    label = label or f"{timing.scheme.upper()}-{timing.order}"
    return Timeline(tuple(segments), repeats, timing.total_period, label, timing.instants)


# Keep the short name used throughout the docs.
compile = compile_timeline  # noqa: A001


@dataclass(frozen=True)
class SequenceSpec:
    scheme: str
    order: int
    tau_cpmg: float
    tau_pi: float
    repeats: int = 1
    phase_deg: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")
        if self.order < 1:
            raise DomainError("order must be >= 1")
        if not self.tau_cpmg > 0:
            raise DomainError("tau_cpmg must be positive")
        if self.tau_pi < 0:
            raise DomainError("tau_pi must be >= 0")
        if self.repeats < 1:
            raise DomainError("repeats must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.scheme.upper()}-{self.order}"

    @property
    def block_duration(self) -> float:
        return block_duration(self.order, self.tau_cpmg, self.tau_pi)

    def timing(self) -> TimingVector:
        return times_for(self.scheme, self.order, self.block_duration)

    def pulse(self) -> PulseParams:
        return PulseParams(self.tau_pi, phase=math.radians(self.phase_deg))

    def timeline(self, repeats: int | None = None) -> Timeline:
        return compile_timeline(self.timing(), self.pulse(), repeats or self.repeats, label=self.label)


_TOKEN = re.compile(r"\S+")
_QUANTITY = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(s|ms|us)$")
_NUMBER = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")
_INT = re.compile(r"^[+-]?\d+$")
_REQUIRED = ("order", "tau_cpmg", "tau_pi", "repeats")


def _parse_line(line: str, lineno: int) -> SequenceSpec:
    tokens = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(line)]
    scheme, col = tokens[0]
    if scheme.lower() not in SCHEMES:
        raise SequenceSyntaxError(f"unknown scheme {scheme!r}", lineno, col)
    values: dict[str, object] = {}
    for tok, col in tokens[1:]:
        key, sep, raw = tok.partition("=")
        if not sep or not raw:
            raise SequenceSyntaxError(f"expected key=value, got {tok!r}", lineno, col)
        vcol = col + len(key) + 1
        if key in values:
            raise SequenceSyntaxError(f"duplicate key {key!r}", lineno, col)
        if key in ("order", "repeats"):
            if not _INT.match(raw):
                raise SequenceSyntaxError(f"{key} must be an integer", lineno, vcol)
            values[key] = int(raw)
        elif key in ("tau_cpmg", "tau_pi"):
            m = _QUANTITY.match(raw)
            if not m:
                raise SequenceSyntaxError(f"{key} needs a number with unit s, ms or us", lineno, vcol)
            values[key] = float(Decimal(m.group(1)) * UNIT_SCALE[m.group(2)])
        elif key == "phase":
            if not _NUMBER.match(raw):
                raise SequenceSyntaxError("phase must be a number of degrees", lineno, vcol)
            values["phase_deg"] = float(Decimal(raw))
        else:
            raise SequenceSyntaxError(f"unknown key {key!r}", lineno, col)
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise SequenceSyntaxError(f"missing {', '.join(missing)}", lineno, len(line) + 1)
    try:
        return SequenceSpec(scheme.lower(), **values)
    except DomainError as exc:
        raise DomainError(f"line {lineno}: {exc}") from None


def parse_sequence_specs(text: str) -> list[SequenceSpec]:
    """Parse one spec per non-blank line; ``#`` starts a comment."""
    specs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            specs.append(_parse_line(line, lineno))
    return specs


def parse_sequence_spec(text: str) -> SequenceSpec:
    specs = parse_sequence_specs(text)
    if len(specs) != 1:
        raise SequenceSyntaxError(f"expected exactly one sequence, got {len(specs)}", 1, 1)
    return specs[0]


def _fmt_seconds(x: float) -> str:
    try:
        d = Decimal(repr(x))
    except InvalidOperation:  # pragma: no cover
        raise DomainError(f"cannot format {x!r}")
    return f"{d}s"


def format_sequence_spec(spec: SequenceSpec) -> str:
    out = (f"{spec.scheme} order={spec.order} tau_cpmg={_fmt_seconds(spec.tau_cpmg)} "
           f"tau_pi={_fmt_seconds(spec.tau_pi)} repeats={spec.repeats}")
    if spec.phase_deg:
        out += f" phase={spec.phase_deg!r}"
    return out
