from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uddstore import spinops as so
from uddstore.dynamics import MoleculeParams
from uddstore.errors import DomainError
from uddstore.protocols import (
    BELL_TARGETS,
    ST_BASIS,
    SpinLockKinetics,
    bell_from_singlet,
    prepare_bell,
    prepare_initial,
    singlet_readout,
    spinlock_purify,
)
from uddstore.sequence import PulseParams

S0 = so.get_state("S0")
REFERENCE_MOL = MoleculeParams(270.4, 4.1)


def test_operator_form_spectrum():
    rho = prepare_initial("operator_form")
    assert abs(np.trace(rho)) < 1e-15
    assert np.allclose(np.linalg.eigvalsh(rho), [-0.25, -0.25, -0.25, 0.75])


def test_projector_form_spectrum():
    rho = prepare_initial("projector_form")
    assert abs(np.trace(rho)) < 1e-15
    assert np.allclose(np.linalg.eigvalsh(rho), [-1, 0, 0, 1])
    assert so.correlation(rho, S0) == pytest.approx(math.sqrt(2 / 3), abs=1e-14)
    with pytest.raises(DomainError):
        prepare_initial("other")


def test_operator_form_is_pure_singlet_order():
    assert so.correlation(prepare_initial("operator_form"), S0) == pytest.approx(1.0, abs=1e-14)


def test_spinlock_all_rates_zero_is_constant():
    k = SpinLockKinetics(singlet_lifetime=math.inf, triplet_mixing_rate=0, leak_rate=0,
                         coherence_decay=0, t1=math.inf)
    trace, _ = spinlock_purify(prepare_initial(), k, np.linspace(0, 100, 11))
    assert np.allclose(trace.correlations, math.sqrt(2 / 3), atol=1e-12)


def test_spinlock_fast_mixing_limit():
    k = SpinLockKinetics(singlet_lifetime=math.inf, triplet_mixing_rate=1e4, leak_rate=0,
                         coherence_decay=0, t1=math.inf)
    trace, _ = spinlock_purify(prepare_initial(), k, [0.0, 1.0])
    assert trace.correlations[-1] == pytest.approx(1.0, abs=1e-9)


def test_spinlock_default_narrative():
    trace, states = spinlock_purify(prepare_initial(), SpinLockKinetics(), np.linspace(0, 60, 121))
    c = np.array(trace.correlations)
    assert c[0] == pytest.approx(math.sqrt(2 / 3), abs=1e-12)
    assert c.max() > c[0] and c[-1] < c.max()
    assert all(abs(np.trace(r)) < 1e-12 for r in states)


@settings(max_examples=50, deadline=None)
@given(rt=st.floats(0, 50), leak=st.floats(0, 1), ts=st.floats(0.1, 100), t1=st.floats(0.1, 100),
       r2=st.floats(0, 10), p=st.floats(0.05, 1), t=st.floats(0, 200))
def test_spinlock_traceless(rt, leak, ts, t1, r2, p, t):
    # p > 0 keeps a nonzero steady state, so the correlation stays defined
    k = SpinLockKinetics(ts, rt, leak, r2, t1, p)
    _, states = spinlock_purify(prepare_initial("operator_form"), k, [t])
    assert abs(np.trace(states[0])) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(rt=st.floats(0.01, 50), t=st.floats(0.01, 50))
def test_spinlock_triplet_total_conserved(rt, t):
    # conserved when singlet loss, leak and T1 are all off
    k = SpinLockKinetics(math.inf, rt, 0.0, 1.0, math.inf)
    rho0 = np.diag([0.1, 0.5, -0.2, -0.4]).astype(complex)
    rho0 = ST_BASIS @ rho0 @ ST_BASIS.conj().T
    _, states = spinlock_purify(rho0, k, [0.0, t])
    pops = [np.real(np.diag(ST_BASIS.conj().T @ r @ ST_BASIS)) for r in states]
    assert pops[1][1:].sum() == pytest.approx(pops[0][1:].sum(), abs=1e-12)
    spread = lambda p: np.ptp(p[1:])  # noqa: E731
    assert spread(pops[1]) < spread(pops[0])


def test_spinlock_validation():
    with pytest.raises(DomainError):
        SpinLockKinetics(leak_rate=-1)
    with pytest.raises(DomainError):
        spinlock_purify(np.eye(4) / 4, SpinLockKinetics(), [0.0])
    with pytest.raises(DomainError):
        spinlock_purify(prepare_initial(), SpinLockKinetics(), [1.0, 0.5])


@pytest.mark.parametrize("kind", ["psi_plus", "phi_minus", "phi_plus"])
def test_bell_transforms_exact_without_coupling(kind):
    rho = prepare_bell(kind, MoleculeParams(270.4, 0.0))
    assert so.correlation(rho, so.get_state(BELL_TARGETS[kind])) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("kind", ["psi_plus", "phi_minus", "phi_plus"])
def test_bell_transforms_with_reference_coupling(kind):
    # J stays on during the chemical-shift delay, so the z-step is slightly imperfect
    rho = prepare_bell(kind, REFERENCE_MOL)
    assert so.correlation(rho, so.get_state(BELL_TARGETS[kind])) > 1 - 5e-4


def test_bell_z_step_duration():
    tl = bell_from_singlet("psi_plus", REFERENCE_MOL)
    assert tl.segments[0].duration == pytest.approx(1.8491e-3, abs=5e-8)
    assert tl.segments[0].duration == 1 / (2 * 270.4)


def test_bell_phi_minus_is_selective_pulse():
    tl = bell_from_singlet("phi_minus", REFERENCE_MOL, PulseParams(0.0, phase=0.3))
    (seg,) = tl.segments
    assert seg.kind == "pulse" and seg.pulse.selectivity == "1" and seg.pulse.phase == 0.3


def test_bell_requires_shift():
    with pytest.raises(DomainError):
        bell_from_singlet("psi_plus", MoleculeParams(0.0, 4.1))
    with pytest.raises(DomainError):
        bell_from_singlet("phi_zero", REFERENCE_MOL)


def test_readout_identity_is_silent():
    r = singlet_readout(np.eye(4) / 4, REFERENCE_MOL)
    assert r.amplitude == pytest.approx(0, abs=1e-15)
    assert r.x == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_readout_linear(c):
    d = so.deviation(so.projector(S0))
    a = singlet_readout(d, REFERENCE_MOL).amplitude
    b = singlet_readout(c * d, REFERENCE_MOL).amplitude
    assert b == pytest.approx(c * a, rel=1e-12)


def test_readout_of_singlet_is_nonzero():
    d = so.deviation(so.projector(S0))
    r = singlet_readout(d, REFERENCE_MOL)
    # frozen from an explicit expm evaluation of delay + hard pulse on P_S - 1/4
    assert r.amplitude == pytest.approx(0.999885049451338, abs=1e-12)
    # the net in-phase magnetization vanishes by exchange symmetry
    assert abs(r.x) < 1e-12 and abs(r.y) < 1e-12
    assert singlet_readout(d, MoleculeParams(270.4, 0.0)).amplitude == pytest.approx(1.0, abs=1e-12)


def test_readout_global_phase_invariance():
    psi = so.get_state("S0")
    a = singlet_readout(so.projector(psi), REFERENCE_MOL).amplitude
    b = singlet_readout(so.projector(np.exp(0.7j) * psi), REFERENCE_MOL).amplitude
    assert a == pytest.approx(b, abs=1e-14)


def test_readout_needs_shift():
    with pytest.raises(DomainError):
        singlet_readout(np.eye(4) / 4, MoleculeParams(0.0, 4.1))
