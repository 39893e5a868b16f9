"""Density-matrix propagation under pulses, relaxation and sampled noise.

Hamiltonians are in rad/s (hbar = 1). Superoperators act on row-major
vectorized density matrices, ``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import spinops as so
from .errors import DomainError, IntegratorError
from .sequence import PulseParams, Segment, Timeline

TWO_PI = 2 * math.pi
TRACE_DRIFT_TOL = 1e-10
POSITIVITY_TOL = 1e-10

_I4 = np.eye(4, dtype=complex)


@dataclass(frozen=True)
class MoleculeParams:
    delta_nu: float = 0.0  # Hz
    j_coupling: float = 0.0  # Hz

    def __post_init__(self):
        if self.j_coupling < 0:
            raise DomainError("J is taken non-negative by convention")


# 5-chlorothiophene-2-carbonitrile protons in DMSO at 500 MHz.
REFERENCE_MOLECULE = MoleculeParams(delta_nu=270.4, j_coupling=4.1)


@dataclass(frozen=True)
class RelaxationParams:
    """Per-spin T1/T2 (seconds).

    ``equilibrium_polarization`` is the <sigma_z> each spin relaxes toward
    (0 = infinite temperature, the identity part of the ensemble state).
    """

    t1: float
    t2: float
    equilibrium_polarization: float = 0.0

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise DomainError("T1 and T2 must be positive")
        if self.t2 > 2 * self.t1:
            raise DomainError(f"T2 = {self.t2} exceeds 2 T1 = {2 * self.t1}: negative dephasing rate")
        if not -1 <= self.equilibrium_polarization <= 1:
            raise DomainError("equilibrium polarization must lie in [-1, 1]")

    @property
    def dephasing_rate(self) -> float:
        return 1.0 / self.t2 - 0.5 / self.t1


REFERENCE_RELAXATION = RelaxationParams(t1=6.3, t2=2.3)


@dataclass(frozen=True)
class Distribution:
    """Scalar distribution for per-member draws.

    ``kind`` is ``"fixed"`` (always ``mean``), ``"gaussian"`` (``mean``,
    ``sigma``, optionally truncated at ``truncate`` sigmas by rejection) or
    ``"table"`` (uniform over ``values``, or weighted by ``weights``).
    """

    kind: str = "fixed"
    mean: float = 0.0
    sigma: float = 0.0
    truncate: float | None = None
    values: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "gaussian", "table"):
            raise DomainError(f"unknown distribution kind {self.kind!r}")
        if self.sigma < 0:
            raise DomainError("sigma must be >= 0")
        if self.kind == "table" and not self.values:
            raise DomainError("table distribution needs values")
        if self.weights and len(self.weights) != len(self.values):
            raise DomainError("weights and values differ in length")

    @classmethod
    def fixed(cls, value: float) -> "Distribution":
        return cls("fixed", mean=value)

    @classmethod
    def gaussian(cls, mean: float, sigma: float, truncate: float | None = None) -> "Distribution":
        return cls("gaussian", mean=mean, sigma=sigma, truncate=truncate)

    @classmethod
    def table(cls, values: Sequence[float], weights: Sequence[float] = ()) -> "Distribution":
        return cls("table", values=tuple(values), weights=tuple(weights))

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "fixed" or (self.kind == "gaussian" and self.sigma == 0):
            return float(self.mean)
        if self.kind == "gaussian":
            while True:
                z = rng.standard_normal()
                if self.truncate is None or abs(z) <= self.truncate:
                    return float(self.mean + self.sigma * z)
        p = None
        if self.weights:
            p = np.asarray(self.weights, float) / math.fsum(self.weights)
        return float(self.values[rng.choice(len(self.values), p=p)])


@dataclass(frozen=True)
class OUProcess:
    """Stationary Ornstein-Uhlenbeck frequency noise.

    ``sigma`` is the rms offset in rad/s, ``tau_c`` the correlation time in
    seconds (``math.inf`` gives quasi-static noise). ``mode`` selects a
    collective ``I_z^1 + I_z^2`` coupling or independent per-spin processes.
    """

    sigma: float
    tau_c: float
    mode: str = "collective"

    def __post_init__(self):
        if self.sigma < 0 or not self.tau_c > 0:
            raise DomainError("OU process needs sigma >= 0 and tau_c > 0")
        if self.mode not in ("collective", "independent"):
            raise DomainError("mode must be 'collective' or 'independent'")

    @property
    def max_step(self) -> float:
        return self.tau_c / 20


@dataclass(frozen=True)
class NoiseModel:
    relaxation: RelaxationParams | None = None
    static_offset: Distribution = Distribution.gaussian(0.0, 10.0)  # Hz, common to both spins
    rf_scale: Distribution = Distribution.gaussian(1.0, 0.03, truncate=3.0)
    dephasing: OUProcess | None = None
    ensemble_size: int = 64
    master_seed: int = 0
    relax_during_pulses: bool = True

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise DomainError("ensemble_size must be >= 1")

    @classmethod
    def noiseless(cls, **kw) -> "NoiseModel":
        kw.setdefault("ensemble_size", 1)
        return cls(static_offset=Distribution.fixed(0.0), rf_scale=Distribution.fixed(1.0), **kw)


def free_hamiltonian(mol: MoleculeParams, common_offset: float = 0.0) -> np.ndarray:
    """Rotating-frame Hamiltonian in rad/s; ``common_offset`` (Hz) shifts both spins."""
    return TWO_PI * (
        mol.delta_nu / 2 * (so.IZ1 - so.IZ2)
        + mol.j_coupling * so.I1_DOT_I2
        + common_offset * so.IZ
    )


def _rf_axis(phase: float, selectivity: str) -> np.ndarray:
    if selectivity == "1":
        ix, iy = so.IX1, so.IY1
    elif selectivity == "2":
        ix, iy = so.IX2, so.IY2
    else:
        ix, iy = so.IX, so.IY
    return math.cos(phase) * ix + math.sin(phase) * iy


def pulse_hamiltonian(pulse: PulseParams, kappa: float, mol: MoleculeParams,
                      common_offset: float = 0.0) -> np.ndarray:
    """Free Hamiltonian plus the RF term; shift and J stay on during the pulse."""
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    if pulse.instantaneous:
        raise DomainError("an instantaneous pulse has no Hamiltonian; use ideal_rotation")
    rf = TWO_PI * kappa * pulse.nominal_amplitude * _rf_axis(pulse.phase, pulse.selectivity)
    return free_hamiltonian(mol, common_offset) + rf


def ideal_rotation(angle: float, phase: float = 0.0, selectivity: str = "both") -> np.ndarray:
    """``exp(-i angle (cos phase I_x + sin phase I_y))`` on the selected spins."""
    return unitary(_rf_axis(phase, selectivity), angle)


def unitary(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i H dt)`` for Hermitian ``H`` via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def propagate_unitary(rho: np.ndarray, h: np.ndarray, dt: float) -> np.ndarray:
    if dt < 0:
        raise DomainError("dt must be >= 0")
    if dt == 0:
        return np.array(rho, dtype=complex)
    u = unitary(h, dt)
    return u @ rho @ u.conj().T


def _dissipator(op: np.ndarray, rate: float) -> np.ndarray:
    ldl = op.conj().T @ op
    return rate * (np.kron(op, op.conj()) - 0.5 * np.kron(ldl, _I4) - 0.5 * np.kron(_I4, ldl.T))


def jump_operators(relax: RelaxationParams) -> list[tuple[float, np.ndarray]]:
    """(rate, operator) pairs: generalized amplitude damping and pure dephasing per spin."""
    p = relax.equilibrium_polarization
    lower = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
    jumps = []
    for spin in (1, 2):
        jumps.append(((1 + p) / (2 * relax.t1), so.on_spin(lower, spin)))
        jumps.append(((1 - p) / (2 * relax.t1), so.on_spin(lower.T, spin)))
        jumps.append((relax.dephasing_rate / 2, so.on_spin(so.SIGMA["Z"], spin)))
    return [(g, op) for g, op in jumps if g > 0]


def liouvillian(h: np.ndarray, relax: RelaxationParams | None = None) -> np.ndarray:
    lv = -1j * (np.kron(h, _I4) - np.kron(_I4, h.T))
    if relax is not None:
        for rate, op in jump_operators(relax):
            lv = lv + _dissipator(op, rate)
    return lv


def unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def apply_superop(s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return (s @ rho.reshape(16)).reshape(4, 4)


def lindblad_step(rho: np.ndarray, h: np.ndarray, relax: RelaxationParams | None, dt: float) -> np.ndarray:
    """Exact step ``exp(L dt)`` of the Lindblad equation with time-independent ``H``."""
    if dt < 0:
        raise DomainError("dt must be >= 0")
    return apply_superop(expm(liouvillian(h, relax) * dt), np.asarray(rho, dtype=complex))


def _ou_path(process: OUProcess, steps: np.ndarray, rng: np.random.Generator):
    """Point values and exact step averages of one OU realization.

    The point update is ``x' = a x + sigma sqrt(1 - a^2) xi`` with
    ``a = exp(-dt / tau_c)``; the step integral is drawn from its exact
    conditional Gaussian given the same ``xi``.
    """
    steps = np.asarray(steps, dtype=float)
    n = steps.size
    s, tau = process.sigma, process.tau_c
    xi = rng.standard_normal(n)
    eta = rng.standard_normal(n)
    x = np.empty(n + 1)
    x[0] = s * rng.standard_normal()
    avg = np.empty(n)
    for k, h in enumerate(steps):
        if math.isinf(tau):
            x[k + 1] = x[k]
            avg[k] = x[k]
            continue
        a = math.exp(-h / tau)
        one_a = -math.expm1(-h / tau)
        var_u = s * s * (1 - a * a)
        var_v = 2 * s * s * tau * (h - 2 * tau * one_a + tau * (1 - a * a) / 2)
        cov = s * s * tau * one_a * one_a
        u = math.sqrt(var_u) * xi[k]
        x[k + 1] = a * x[k] + u
        if h == 0:
            avg[k] = x[k]
            continue
        cond = max(var_v - (cov * cov / var_u if var_u > 0 else 0.0), 0.0)
        v = (cov / var_u * u if var_u > 0 else 0.0) + math.sqrt(cond) * eta[k]
        avg[k] = (tau * one_a * x[k] + v) / h
    return x, avg


def sample_ou_trajectory(process: OUProcess, steps, seed) -> np.ndarray:
    """OU values (rad/s) at the step boundaries, starting from a stationary draw.

    ``steps`` is a sequence of step durations; ``seed`` anything accepted by
    ``numpy.random.default_rng``.
    """
    steps = np.asarray(steps, dtype=float)
    if np.any(steps <= 0):
        raise DomainError("OU grid steps must be positive")
    x, _ = _ou_path(process, steps, np.random.default_rng(seed))
    return x


@dataclass
class PropagationResult:
    times: np.ndarray
    states: np.ndarray  # (n_times, 4, 4) ensemble averages
    final: np.ndarray
    min_eigenvalue: float
    trace_drift: float
    hermiticity_error: float
    member_states: np.ndarray | None = field(default=None, repr=False)  # (members, n_times, 4, 4)


@dataclass(frozen=True)
class _Draw:
    offset: float  # Hz
    kappa: float


def _segment_hamiltonian(seg: Segment, mol: MoleculeParams, draw: _Draw) -> np.ndarray:
    if seg.kind == "pulse":
        return pulse_hamiltonian(seg.pulse, draw.kappa, mol, draw.offset)
    return free_hamiltonian(mol, draw.offset)


def _instant_map(seg: Segment, draw: _Draw) -> np.ndarray:
    p = seg.pulse
    return unitary_superop(ideal_rotation(p.flip_angle(draw.kappa), p.phase, p.selectivity))


class _MemberPropagator:
    """Propagates one ensemble member with its drawn offset, RF scale and noise path."""

    def __init__(self, timeline: Timeline, model: NoiseModel, mol: MoleculeParams, draw: _Draw):
        self.timeline = timeline
        self.model = model
        self.mol = mol
        self.draw = draw
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _relax_for(self, seg: Segment) -> RelaxationParams | None:
        if seg.kind == "pulse" and not self.model.relax_during_pulses:
            return None
        return self.model.relaxation

    def _generator(self, idx: int) -> tuple[np.ndarray, np.ndarray | None]:
        """(Hamiltonian, Liouvillian or None) of segment ``idx``."""
        if idx not in self._cache:
            seg = self.timeline.segments[idx]
            h = _segment_hamiltonian(seg, self.mol, self.draw)
            relax = self._relax_for(seg)
            self._cache[idx] = (h, liouvillian(h, relax) if relax is not None else None)
        return self._cache[idx]

    def segment_map(self, idx: int, dt: float, extra: np.ndarray | None = None) -> np.ndarray:
        seg = self.timeline.segments[idx]
        if seg.duration == 0 and seg.kind == "pulse":
            return _instant_map(seg, self.draw)
        h, lv = self._generator(idx)
        if extra is None:
            if lv is None:
                return unitary_superop(unitary(h, dt))
            return expm(lv * dt)
        if lv is None:
            return unitary_superop(unitary(h + extra, dt))
        return expm((lv - 1j * (np.kron(extra, _I4) - np.kron(_I4, extra.T))) * dt)

    def run(self, rho0: np.ndarray, sample_at: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.model.dephasing is None:
            return self._run_static(rho0, sample_at)
        return self._run_stochastic(rho0, sample_at, rng)

    def _run_static(self, rho0, sample_at):
        tl = self.timeline
        maps = [self.segment_map(i, s.duration) for i, s in enumerate(tl.segments)]
        block = np.eye(16, dtype=complex)
        for m in maps:
            block = m @ block
        v = rho0.reshape(16).astype(complex)
        done = 0  # blocks applied to v
        out = []
        for t in sample_at:
            k, rem = _split_time(t, tl.block_duration, tl.repeats)
            if k > done:
                v = np.linalg.matrix_power(block, k - done) @ v
                done = k
            w = v
            for i, seg in enumerate(tl.segments):
                if rem <= 0 and seg.duration > 0:
                    break
                if seg.duration <= rem:
                    w = maps[i] @ w
                    rem -= seg.duration
                else:
                    w = self.segment_map(i, rem) @ w
                    rem = 0.0
            out.append(w.reshape(4, 4))
        return np.array(out)

    def _ou_operator(self, values) -> np.ndarray:
        if self.model.dephasing.mode == "collective":
            return values[0] * so.IZ
        return values[0] * so.IZ1 + values[1] * so.IZ2

    def _run_stochastic(self, rho0, sample_at, rng):
        tl = self.timeline
        proc = self.model.dephasing
        horizon = float(sample_at[-1]) if len(sample_at) else 0.0
        # step list over whole segments up to the horizon
        plan = []  # (segment index, step duration)
        t = 0.0
        for _ in range(tl.repeats):
            if t >= horizon:
                break
            for i, seg in enumerate(tl.segments):
                if seg.duration == 0:
                    plan.append((i, 0.0))
                    continue
                n = max(4, math.ceil(seg.duration / proc.max_step))
                plan.extend([(i, seg.duration / n)] * n)
                t += seg.duration
        steps = np.array([h for _, h in plan if h > 0])
        n_proc = 1 if proc.mode == "collective" else 2
        avgs = [_ou_path(proc, steps, rng)[1] for _ in range(n_proc)] if steps.size else [[]] * n_proc
        v = rho0.reshape(16).astype(complex)
        out = []
        clock, k, si = 0.0, 0, 0
        targets = list(sample_at)
        for i, h in plan:
            if h == 0:
                v = self.segment_map(i, 0.0) @ v
                continue
            while si < len(targets) and targets[si] <= clock + 1e-15:
                out.append(v.reshape(4, 4))
                si += 1
            if si == len(targets):
                break
            extra = self._ou_operator([a[k] for a in avgs])
            while si < len(targets) and targets[si] < clock + h - 1e-15:
                out.append((self.segment_map(i, targets[si] - clock, extra) @ v).reshape(4, 4))
                si += 1
            v = self.segment_map(i, h, extra) @ v
            clock += h
            k += 1
        while si < len(targets):
            out.append(v.reshape(4, 4))
            si += 1
        return np.array(out)


def _split_time(t: float, block: float, repeats: int) -> tuple[int, float]:
    """Whole blocks and remainder for time ``t``; boundary rounding snaps to the block edge."""
    if block <= 0:
        return 0, 0.0
    k = int(math.floor(t / block))
    rem = t - k * block
    if block - rem <= 1e-12 * max(1.0, t):
        k, rem = k + 1, 0.0
    if rem <= 1e-12 * max(1.0, t):
        rem = 0.0
    if k > repeats or (k == repeats and rem > 0):
        raise DomainError(f"sample time {t} exceeds the timeline duration")
    return k, rem


def member_seeds(master_seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(master_seed).spawn(n)


def draw_member(model: NoiseModel, rng: np.random.Generator) -> _Draw:
    return _Draw(model.static_offset.sample(rng), model.rf_scale.sample(rng))


def run_timeline(rho0: np.ndarray, timeline: Timeline, model: NoiseModel,
                 sample_at: Sequence[float] | None = None, mol: MoleculeParams = MoleculeParams(),
                 threads: int = 1, keep_members: bool = False, check: bool = True) -> PropagationResult:
    """Ensemble-averaged evolution of ``rho0`` through ``timeline``.

    Each member draws its static offset, RF scale and OU path from a seed
    spawned from ``model.master_seed``; members are averaged in index order,
    so the result does not depend on ``threads``. The final total duration is
    always included as the last sample.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    total = timeline.total_duration
    times = sorted(float(t) for t in (sample_at if sample_at is not None else []))
    if any(t < 0 or t > total * (1 + 1e-12) + 1e-15 for t in times):
        raise DomainError("sample times must lie within the timeline duration")
    if not times or times[-1] < total:
        times.append(total)
    grid = np.array(times)

    def one(seed_seq):
        rng = np.random.default_rng(seed_seq)
        draw = draw_member(model, rng)
        return _MemberPropagator(timeline, model, mol, draw).run(rho0, grid, rng)

    seeds = member_seeds(model.master_seed, model.ensemble_size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            members = list(pool.map(one, seeds))
    else:
        members = [one(s) for s in seeds]
    acc = np.zeros_like(members[0])
    for m in members:
        acc = acc + m
    states = acc / len(members)

    tr0 = np.trace(rho0)
    drift = float(np.max(np.abs(np.trace(states, axis1=1, axis2=2) - tr0)))
    herm = float(np.max(np.abs(states - states.conj().transpose(0, 2, 1))))
    hs = 0.5 * (states + states.conj().transpose(0, 2, 1))
    min_eig = float(np.min(np.linalg.eigvalsh(hs)))
    physical = np.linalg.eigvalsh(0.5 * (rho0 + rho0.conj().T)).min() >= -POSITIVITY_TOL
    if check and (drift > TRACE_DRIFT_TOL or (physical and min_eig < -POSITIVITY_TOL)):
        raise IntegratorError(f"trace drift {drift:.3g}, min eigenvalue {min_eig:.3g}")
    return PropagationResult(
        times=grid, states=states, final=states[-1], min_eigenvalue=min_eig,
        trace_drift=drift, hermiticity_error=herm,
        member_states=np.array(members) if keep_members else None,
    )


def apply_timeline(rho: np.ndarray, timeline: Timeline, mol: MoleculeParams = MoleculeParams(),
                   relax: RelaxationParams | None = None) -> np.ndarray:
    """Noise-free single-trajectory evolution through the whole timeline."""
    model = NoiseModel.noiseless(relaxation=relax)
    return run_timeline(rho, timeline, model, mol=mol, check=False).final
