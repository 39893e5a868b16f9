"""TOML experiment configuration with unit-carrying quantities.

Every physical value is a string with a unit, e.g. ``"2ms"``, ``"270.4Hz"``,
``"3e3rad/s"``. ``configs/scan.toml`` documents the schema.
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bathfn import SpectralDensity
from .dynamics import REFERENCE_RELAXATION, Distribution, MoleculeParams, NoiseModel, OUProcess, RelaxationParams
from .errors import DomainError
from .protocols import BELL_TARGETS, SpinLockKinetics
from .spinops import get_state
from .sequence import TAU_CPMG, TAU_PI, SequenceSpec, parse_sequence_specs

_UNITS = {
    "time": {"s": Decimal(1), "ms": Decimal("1e-3"), "us": Decimal("1e-6")},
    "frequency": {"Hz": Decimal(1), "kHz": Decimal(1000)},
    "angular": {"rad/s": Decimal(1)},
    "rate": {"1/s": Decimal(1)},
}
_QTY = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf)\s*([A-Za-z/0-9]+)\s*$")


def parse_quantity(text: str, dimension: str) -> float:
    """``"27.2us"`` -> 2.72e-05 for dimension ``"time"``; unitless input is rejected."""
    if not isinstance(text, str):
        raise DomainError(f"{dimension} value {text!r} needs an explicit unit")
    m = _QTY.match(text)
    units = _UNITS[dimension]
    if not m or m.group(2) not in units:
        raise DomainError(f"cannot read {text!r} as a {dimension} ({', '.join(units)})")
    if m.group(1) == "inf":
        return math.inf
    return float(Decimal(m.group(1)) * units[m.group(2)])


def _time(v):
    return parse_quantity(v, "time")


def _freq(v):
    return parse_quantity(v, "frequency")


def _distribution(d: dict | None, dimension: str | None, default: Distribution) -> Distribution:
    if d is None:
        return default
    conv = (lambda v: parse_quantity(v, dimension)) if dimension else float
    kind = d.get("kind", "gaussian")
    if kind == "fixed":
        return Distribution.fixed(conv(d["value"]))
    if kind == "gaussian":
        mean = conv(d["mean"]) if "mean" in d else default.mean
        return Distribution.gaussian(mean, conv(d["sigma"]), d.get("truncate"))
    if kind == "table":
        return Distribution.table([conv(v) for v in d["values"]], d.get("weights", ()))
    raise DomainError(f"unknown distribution kind {kind!r}")


def _bath(d: dict) -> tuple[str, SpectralDensity]:
    kind = d["kind"]
    name = d.get("name", kind)
    if kind == "lorentzian":
        return name, SpectralDensity.lorentzian(parse_quantity(d["sigma"], "angular"), _time(d["tau_c"]))
    if kind == "ohmic_sharp_cutoff":
        return name, SpectralDensity.ohmic_sharp_cutoff(float(d["coupling"]),
                                                        parse_quantity(d["omega_c"], "angular"))
    if kind == "zero":
        return name, SpectralDensity.zero()
    if kind == "table":
        return name, SpectralDensity.table([parse_quantity(w, "angular") for w in d["omega"]],
                                           [float(v) for v in d["values"]])
    raise DomainError(f"unknown bath kind {kind!r}")


def default_sequences() -> list[SequenceSpec]:
    return [SequenceSpec("udd", n, TAU_CPMG, TAU_PI) for n in range(1, 10)]


@dataclass
class FilterConfig:
    schemes: tuple[str, ...] = ("cpmg", "udd")
    orders: tuple[int, ...] = (7,)
    durations: tuple[float, ...] = (1.0,)
    baths: list[tuple[str, SpectralDensity]] = field(default_factory=list)


@dataclass
class ExperimentConfig:
    molecule: MoleculeParams = MoleculeParams(270.4, 4.1)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(relaxation=REFERENCE_RELAXATION))
    sequences: list[SequenceSpec] = field(default_factory=default_sequences)
    include_control: bool = True
    state: str = "S0"
    grid: list[float] = field(default_factory=lambda: list(np.linspace(0.0, 40.0, 25)))
    threshold: float = 0.9
    out_dir: str = "out"
    out_format: str = "csv"
    filter: FilterConfig = field(default_factory=FilterConfig)
    spinlock: SpinLockKinetics = field(default_factory=SpinLockKinetics)
    spinlock_grid: list[float] = field(default_factory=lambda: list(np.linspace(0.0, 60.0, 61)))
    preparation: str = "projector_form"

    def __post_init__(self):
        if not self.grid or any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise DomainError("duration grid must be non-empty and increasing")
        if self.grid[0] < 0:
            raise DomainError("duration grid must be non-negative")
        if self.state.startswith("bell:"):
            if self.state[5:] not in BELL_TARGETS:
                raise DomainError(f"unknown Bell transform {self.state!r}")
        else:
            get_state(self.state)
        if not 0 < self.threshold < 1:
            raise DomainError("threshold must lie in (0, 1)")
        if self.out_format not in ("csv", "plotdata"):
            raise DomainError("output format must be csv or plotdata")

    @property
    def master_seed(self) -> int:
        return self.noise.master_seed


def _grid(d: dict | None, default: list[float]) -> list[float]:
    if d is None:
        return default
    if "times" in d:
        return [_time(t) for t in d["times"]]
    start = _time(d.get("start", "0s"))
    stop = _time(d["stop"])
    points = int(d.get("points", 25))
    return list(np.linspace(start, stop, points))


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    cfg = ExperimentConfig()
    mol = raw.get("molecule", {})
    cfg.molecule = MoleculeParams(
        _freq(mol["delta_nu"]) if "delta_nu" in mol else cfg.molecule.delta_nu,
        _freq(mol["j_coupling"]) if "j_coupling" in mol else cfg.molecule.j_coupling,
    )
    nz = raw.get("noise", {})
    base = NoiseModel()
    relax = REFERENCE_RELAXATION
    if "relaxation" in nz:
        r = nz["relaxation"]
        if not r.get("enabled", True):
            relax = None
        else:
            relax = RelaxationParams(_time(r["t1"]), _time(r["t2"]), float(r.get("equilibrium_polarization", 0.0)))
    deph = None
    if "dephasing" in nz:
        d = nz["dephasing"]
        deph = OUProcess(parse_quantity(d["sigma"], "angular"), _time(d["tau_c"]), d.get("mode", "collective"))
    cfg.noise = NoiseModel(
        relaxation=relax,
        static_offset=_distribution(nz.get("static_offset"), "frequency", base.static_offset),
        rf_scale=_distribution(nz.get("rf_scale"), None, base.rf_scale),
        dephasing=deph,
        ensemble_size=int(nz.get("ensemble_size", base.ensemble_size)),
        master_seed=int(raw.get("seed", nz.get("seed", 0))),
        relax_during_pulses=bool(nz.get("relax_during_pulses", True)),
    )
    seqs = raw.get("sequences", {})
    if "lines" in seqs:
        cfg.sequences = parse_sequence_specs(seqs["lines"])
    cfg.include_control = bool(seqs.get("include_control", True))
    cfg.state = raw.get("state", cfg.state)
    cfg.preparation = raw.get("preparation", cfg.preparation)
    cfg.threshold = float(raw.get("threshold", cfg.threshold))
    cfg.grid = _grid(raw.get("grid"), cfg.grid)
    out = raw.get("outputs", {})
    cfg.out_dir = out.get("dir", cfg.out_dir)
    cfg.out_format = out.get("format", cfg.out_format)
    f = raw.get("filter", {})
    cfg.filter = FilterConfig(
        schemes=tuple(f.get("schemes", FilterConfig.schemes)),
        orders=tuple(int(n) for n in f.get("orders", FilterConfig.orders)),
        durations=tuple(_time(t) for t in f.get("durations", ["1s"])),
        baths=[_bath(b) for b in f.get("bath", [])],
    )
    sl = raw.get("spinlock", {})
    if sl:
        k = SpinLockKinetics()
        cfg.spinlock = SpinLockKinetics(
            singlet_lifetime=_time(sl["singlet_lifetime"]) if "singlet_lifetime" in sl else k.singlet_lifetime,
            triplet_mixing_rate=parse_quantity(sl["triplet_mixing_rate"], "rate")
            if "triplet_mixing_rate" in sl else k.triplet_mixing_rate,
            leak_rate=parse_quantity(sl["leak_rate"], "rate") if "leak_rate" in sl else k.leak_rate,
            coherence_decay=parse_quantity(sl["coherence_decay"], "rate")
            if "coherence_decay" in sl else k.coherence_decay,
            t1=_time(sl["t1"]) if "t1" in sl else k.t1,
            equilibrium_polarization=float(sl.get("equilibrium_polarization", k.equilibrium_polarization)),
        )
        cfg.spinlock_grid = _grid(sl.get("grid"), cfg.spinlock_grid)
    cfg.__post_init__()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise DomainError(f"{path}: {exc}") from None
    try:
        return config_from_dict(raw)
    except KeyError as exc:
        raise DomainError(f"{path}: missing key {exc}") from None
