"""State pipelines around the storage experiment.

Initial singlet/triplet mixtures, spin-lock purification kinetics, the
singlet-to-Bell transforms and the singlet-order readout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import spinops as so
from .dynamics import MoleculeParams, apply_timeline, free_hamiltonian, ideal_rotation, propagate_unitary
from .errors import DomainError
from .sequence import PulseParams, Segment, Timeline
from .trace import CorrelationTrace

PREPARATION_FORMS = ("projector_form", "operator_form")

# singlet, T+1, T0, T-1 as columns
_ST_LABELS = ("S0", "T+1", "T0", "T-1")
ST_BASIS = np.column_stack([so.get_state(k) for k in _ST_LABELS])


def prepare_initial(form: str = "projector_form") -> np.ndarray:
    """Traceless singlet/triplet mixture.

    ``"projector_form"`` is ``|S0><S0| - |T0><T0|``, ``"operator_form"`` is
    ``-I^1.I^2``. The two are not the same operator; the projector form is
    the default.
    """
    if form == "projector_form":
        s0, t0 = so.get_state("S0"), so.get_state("T0")
        return so.projector(s0) - so.projector(t0)
    if form == "operator_form":
        return -so.I1_DOT_I2.copy()
    raise DomainError(f"form must be one of {PREPARATION_FORMS}")


@dataclass(frozen=True)
class SpinLockKinetics:
    """Relaxation rates under the spin-lock (times in s, rates in 1/s).

    Populations in the singlet/triplet basis follow a linear rate model:
    triplets equilibrate with each other at ``triplet_mixing_rate``, singlet
    order relaxes with ``singlet_lifetime``, ``leak_rate`` exchanges singlet
    and each triplet symmetrically, and triplet populations relax with ``t1``
    toward a Zeeman-polarized equilibrium of strength
    ``equilibrium_polarization`` (in units of the initial deviation).
    Coherences in that basis decay at ``coherence_decay``.
    """

    singlet_lifetime: float = 16.0
    triplet_mixing_rate: float = 5.0
    leak_rate: float = 0.02
    coherence_decay: float = 2.0
    t1: float = 6.3
    equilibrium_polarization: float = 1.0

    def __post_init__(self):
        rates = (self.triplet_mixing_rate, self.leak_rate, self.coherence_decay)
        if any(r < 0 for r in rates) or self.singlet_lifetime <= 0 or self.t1 <= 0:
            raise DomainError("rates must be >= 0 and lifetimes positive")


def _population_generator(k: SpinLockKinetics) -> tuple[np.ndarray, np.ndarray]:
    """Affine generator ``dp/dt = A p + b`` over (S0, T+1, T0, T-1) populations."""
    a = np.zeros((4, 4))
    b = np.zeros(4)
    rt = k.triplet_mixing_rate
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            a[i, j] += rt / 3
        a[i, i] -= rt
    a[0, 0] -= 1.0 / k.singlet_lifetime
    for i in (1, 2, 3):
        a[0, 0] -= k.leak_rate
        a[0, i] += k.leak_rate
        a[i, i] -= k.leak_rate
        a[i, 0] += k.leak_rate
    r1 = 1.0 / k.t1
    eq = np.array([0.0, k.equilibrium_polarization, 0.0, -k.equilibrium_polarization])
    for i in (1, 2, 3):
        a[i, i] -= r1
        b[i] += r1 * eq[i]
    # redistribute any loss uniformly so the deviation stays traceless
    proj = np.eye(4) - np.full((4, 4), 0.25)
    return proj @ a, proj @ b


def spinlock_purify(rho0: np.ndarray, kinetics: SpinLockKinetics, times: Sequence[float],
                    target: str = "S0") -> tuple[CorrelationTrace, list[np.ndarray]]:
    """Evolve a deviation matrix under the spin-lock kinetics.

    Returns the correlation trace against ``target`` and the deviation
    matrices at each time.
    """
    grid = np.asarray(times, dtype=float)
    if grid.size and (np.any(np.diff(grid) <= 0) or grid[0] < 0):
        raise DomainError("time grid must be increasing and non-negative")
    rho0 = np.asarray(rho0, dtype=complex)
    if abs(np.trace(rho0)) > 1e-12:
        raise DomainError("spin-lock kinetics act on a traceless deviation")
    st = ST_BASIS.conj().T @ rho0 @ ST_BASIS
    pops0 = np.real(np.diag(st))
    coh0 = st - np.diag(np.diag(st))
    a, b = _population_generator(kinetics)
    aug = np.zeros((5, 5))
    aug[:4, :4] = a
    aug[:4, 4] = b
    psi = so.get_state(target)
    states, corr = [], []
    for t in grid:
        p = (expm(aug * t) @ np.append(pops0, 1.0))[:4]
        m = np.diag(p).astype(complex) + coh0 * math.exp(-kinetics.coherence_decay * t)
        rho = ST_BASIS @ m @ ST_BASIS.conj().T
        states.append(rho)
        corr.append(so.correlation(rho, psi))
    trace = CorrelationTrace(target, "spinlock", [float(t) for t in grid], corr, [0.0] * len(corr))
    return trace, states


BELL_KINDS = ("psi_plus", "phi_minus", "phi_plus")


def bell_from_singlet(kind: str, mol: MoleculeParams, pulse: PulseParams | None = None) -> Timeline:
    """Timeline turning the singlet into another Bell state.

    The z rotation of spin 1 is free chemical-shift evolution for
    ``1/(2 |delta_nu|)``; the x rotation of spin 1 is an ideal selective pi
    pulse (phase taken from ``pulse``). Results match the target up to a
    global phase.
    """
    if kind not in BELL_KINDS:
        raise DomainError(f"kind must be one of {BELL_KINDS}")
    if mol.delta_nu == 0:
        raise DomainError("a z rotation by chemical shift needs delta_nu != 0")
    phase = pulse.phase if pulse is not None else 0.0
    z_rot = Segment("delay", 1.0 / (2 * abs(mol.delta_nu)))
    x_rot = Segment("pulse", 0.0, PulseParams(0.0, phase=phase, selectivity="1"))
    segments = {
        "psi_plus": (z_rot,),
        "phi_minus": (x_rot,),
        "phi_plus": (z_rot, x_rot),
    }[kind]
    return Timeline(segments, 1, label=f"bell:{kind}")


BELL_TARGETS = {"psi_plus": "psi+", "phi_minus": "phi-", "phi_plus": "phi+"}


def prepare_bell(kind: str, mol: MoleculeParams, rho_singlet: np.ndarray | None = None) -> np.ndarray:
    """Apply :func:`bell_from_singlet` noise-free to a singlet density matrix."""
    if rho_singlet is None:
        rho_singlet = so.projector(so.get_state("S0"))
    return apply_timeline(rho_singlet, bell_from_singlet(kind, mol), mol)


@dataclass(frozen=True)
class ReadoutSignal:
    amplitude: float  # antiphase component along the pulse phase
    x: float  # in-phase <I_x^1 + I_x^2>
    y: float  # in-phase <I_y^1 + I_y^2>
    state: np.ndarray


def singlet_readout(rho: np.ndarray, mol: MoleculeParams, pulse: PulseParams | None = None) -> ReadoutSignal:
    """Convert singlet order to observable signal.

    Free evolution for ``1/(4 delta_nu)`` followed by a hard pi/2 pulse.
    Singlet order is exchange-symmetric while the chemical-shift step is
    antisymmetric, so net in-phase magnetization stays zero and the signal
    appears as antiphase magnetization on both spins. ``amplitude`` is
    ``tr(rho' 2 (I_p^1 I_z^2 - I_z^1 I_p^2))`` with ``p`` the pulse axis;
    it is linear in ``rho``.
    """
    if mol.delta_nu == 0:
        raise DomainError("singlet readout needs delta_nu != 0")
    phase = pulse.phase if pulse is not None else 0.0
    rho = np.asarray(rho, dtype=complex)
    r = propagate_unitary(rho, free_hamiltonian(mol), 1.0 / (4 * abs(mol.delta_nu)))
    u = ideal_rotation(math.pi / 2, phase)
    r = u @ r @ u.conj().T
    ip1 = math.cos(phase) * so.IX1 + math.sin(phase) * so.IY1
    ip2 = math.cos(phase) * so.IX2 + math.sin(phase) * so.IY2
    anti = 2 * (ip1 @ so.IZ2 - so.IZ1 @ ip2)
    return ReadoutSignal(
        amplitude=float(np.real(np.trace(r @ anti))),
        x=float(np.real(np.trace(r @ so.IX))),
        y=float(np.real(np.trace(r @ so.IY))),
        state=r,
    )
