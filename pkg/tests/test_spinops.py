from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from uddstore import spinops as so
from uddstore.errors import DegenerateStateError, DomainError

STATES = so.canonical_states()


def random_density(rng, rank=4):
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def test_commutation_relations():
    for k in (1, 2):
        x, y, z = (so.spin_operator(a, k) for a in "xyz")
        assert np.allclose(x @ y - y @ x, 1j * z, atol=1e-14)
        assert np.allclose(y @ z - z @ y, 1j * x, atol=1e-14)
        assert np.allclose(z @ x - x @ z, 1j * y, atol=1e-14)


def test_generator_spectra():
    for k in (1, 2):
        for a in "xyz":
            op = so.spin_operator(a, k)
            assert so.is_hermitian(op)
            assert np.allclose(np.linalg.eigvalsh(op), [-0.5, -0.5, 0.5, 0.5])
    ev = np.linalg.eigvalsh(so.I1_DOT_I2)
    assert np.allclose(ev, [-0.75, 0.25, 0.25, 0.25])


def test_canonical_states_orthonormal():
    st_basis = [STATES[k] for k in ("S0", "T+1", "T0", "T-1")]
    gram = np.array([[np.vdot(a, b) for b in st_basis] for a in st_basis])
    assert np.allclose(gram, np.eye(4), atol=1e-15)
    bell = [STATES[k] for k in ("S0", "psi+", "phi+", "phi-")]
    gram = np.array([[np.vdot(a, b) for b in bell] for a in bell])
    assert np.allclose(gram, np.eye(4), atol=1e-15)
    for v in STATES.values():
        assert abs(np.linalg.norm(v) - 1) < 1e-12
        first = v[np.flatnonzero(np.abs(v) > 1e-15)[0]]
        assert first.real > 0 and abs(first.imag) < 1e-15


def test_singlet_sign_and_coupling_eigenvalue():
    s0 = STATES["S0"]
    assert np.allclose(s0, np.array([0, 1, -1, 0]) / math.sqrt(2))
    assert np.allclose(so.I1_DOT_I2 @ s0, -0.75 * s0, atol=1e-15)


def test_get_state_unknown():
    with pytest.raises(DomainError):
        so.get_state("S1")


def test_pseudopure_examples():
    s0 = STATES["S0"]
    assert np.allclose(so.pseudopure(s0, 1.0), so.projector(s0))
    eps = 1e-4
    r = so.pseudopure(s0, eps)
    assert abs(np.trace(r) - 1) < 1e-12
    assert abs(np.linalg.eigvalsh(r).min() - (1 - eps) / 4) < 1e-15
    r = so.pseudopure(STATES["00"], 0.5)
    assert np.allclose(np.diag(r).real, [0.625, 0.125, 0.125, 0.125])
    assert np.allclose(r, np.diag(np.diag(r)))


@pytest.mark.parametrize("eps", [0.0, -0.1, 1.0000001, 2.0])
def test_pseudopure_rejects_eps(eps):
    with pytest.raises(DomainError):
        so.pseudopure(STATES["S0"], eps)


def test_deviation_examples():
    assert np.allclose(so.deviation(so.IDENTITY / 4), 0)
    s0 = STATES["S0"]
    eps = 0.37
    assert np.allclose(so.deviation(so.pseudopure(s0, eps)), eps * (so.projector(s0) - so.IDENTITY / 4))


def test_correlation_examples():
    s0, t0 = STATES["S0"], STATES["T0"]
    assert so.correlation(so.projector(s0), s0) == pytest.approx(1.0, abs=1e-15)
    rho = so.projector(s0) - so.projector(t0)
    # <A, B> = 1, |A| = sqrt 2, |B| = sqrt 3 / 2
    assert so.correlation(rho, s0) == pytest.approx(math.sqrt(2 / 3), abs=1e-14)
    assert so.correlation(so.projector(t0), s0) == pytest.approx(-1 / 3, abs=1e-14)
    assert so.correlation(so.pseudopure(s0, 0.3), s0) == pytest.approx(1.0, abs=1e-14)


def test_correlation_degenerate():
    with pytest.raises(DegenerateStateError):
        so.correlation(so.IDENTITY / 4, STATES["S0"])


def test_pauli_examples():
    p = so.pauli_expectations(so.projector(STATES["00"]))
    for lab, v in p.items():
        assert v == pytest.approx(1.0 if lab in ("ZI", "IZ", "ZZ") else 0.0, abs=1e-15)
    p = so.pauli_expectations(so.projector(STATES["S0"]))
    for lab, v in p.items():
        assert v == pytest.approx(-1.0 if lab in ("XX", "YY", "ZZ") else 0.0, abs=1e-15)
    assert all(abs(v) < 1e-15 for v in so.pauli_expectations(so.IDENTITY / 4).values())
    assert len(so.PAULI_LABELS) == 15


def test_check_density_matrix():
    so.check_density_matrix(so.projector(STATES["S0"]))
    with pytest.raises(DomainError):
        so.check_density_matrix(np.diag([1.2, -0.2, 0, 0]))
    with pytest.raises(DomainError):
        so.check_density_matrix(np.eye(4) / 2)
    with pytest.raises(DomainError):
        so.check_density_matrix(np.eye(3) / 3)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=200, deadline=None)
@given(seed=seeds, c=st.floats(1e-6, 1e6))
def test_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    d = so.deviation(random_density(rng))
    psi = list(STATES.values())[seed % len(STATES)]
    assert abs(so.correlation(c * d, psi) - so.correlation(d, psi)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(seed=seeds)
def test_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng)
    for psi in STATES.values():
        assert -1.0 <= so.correlation(rho, psi) <= 1.0
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    v /= np.linalg.norm(v)
    assert so.correlation(so.pseudopure(v, 0.2), v) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(e1=st.floats(1e-4, 1.0), e2=st.floats(1e-4, 1.0), label=st.sampled_from(sorted(STATES)),
       target=st.sampled_from(sorted(STATES)))
def test_epsilon_independence(e1, e2, label, target):
    psi, tgt = STATES[label], STATES[target]
    c1 = so.correlation(so.deviation(so.pseudopure(psi, e1)), tgt)
    c2 = so.correlation(so.deviation(so.pseudopure(psi, e2)), tgt)
    assert abs(c1 - c2) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(eps=st.floats(1e-12, 1e-4), label=st.sampled_from(sorted(STATES)), target=st.sampled_from(sorted(STATES)))
def test_epsilon_independence_tiny(eps, label, target):
    # the deviation sits eps below a 1/4 background, so float64 keeps about 1e-16 / eps of it
    psi, tgt = STATES[label], STATES[target]
    ref = so.correlation(so.pseudopure(psi, 1.0), tgt)
    got = so.correlation(so.deviation(so.pseudopure(psi, eps)), tgt)
    assert abs(got - ref) <= 1e-12 + 1e-15 / eps


@settings(max_examples=200, deadline=None)
@given(seed=seeds)
def test_pauli_round_trip(seed):
    rho = random_density(np.random.default_rng(seed))
    back = so.from_pauli_expectations(so.pauli_expectations(rho))
    assert np.max(np.abs(back - rho)) <= 1e-12


@given(arrays(np.float64, 15, elements=st.floats(-1, 1)))
def test_pauli_coordinates_recovered(values):
    vals = dict(zip(so.PAULI_LABELS, values))
    rho = so.from_pauli_expectations(vals)
    got = so.pauli_expectations(rho)
    assert all(abs(got[k] - vals[k]) < 1e-12 for k in vals)
