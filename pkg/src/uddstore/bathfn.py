"""Filter functions and dephasing exponents for instantaneous-pulse sequences.

Conventions: the coherence of a single spin under a pulse train decays as
``W = exp(-chi)`` with

    chi = (2/pi) * integral_0^inf S(w) F(w T) / w^2 dw,

and ``F`` the modulus squared of the switching-function transform times
``w``. With this normalization a Lorentzian ``S(w) = s^2 tau_c / (2 (1 +
w^2 tau_c^2))`` is exactly the spectrum of an OU offset with rms ``s``
(rad/s) and correlation time ``tau_c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError
from .sequence import TimingVector

RTOL = 1e-8


@dataclass(frozen=True)
class SpectralDensity:
    """Bath spectrum ``S(w)`` for ``w >= 0`` (w in rad/s).

    Use the constructors: :meth:`lorentzian`, :meth:`ohmic_sharp_cutoff`,
    :meth:`table`.
    """

    kind: str
    params: tuple[float, ...] = ()
    omega: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    @classmethod
    def lorentzian(cls, sigma: float, tau_c: float) -> "SpectralDensity":
        if sigma < 0 or not tau_c > 0:
            raise DomainError("Lorentzian needs sigma >= 0 and tau_c > 0")
        return cls("lorentzian", (float(sigma), float(tau_c)))

    @classmethod
    def ohmic_sharp_cutoff(cls, coupling: float, omega_c: float) -> "SpectralDensity":
        if coupling < 0 or not omega_c > 0:
            raise DomainError("Ohmic bath needs coupling >= 0 and omega_c > 0")
        return cls("ohmic_sharp_cutoff", (float(coupling), float(omega_c)))

    @classmethod
    def table(cls, omega: Sequence[float], values: Sequence[float]) -> "SpectralDensity":
        w = np.asarray(omega, float)
        s = np.asarray(values, float)
        if w.ndim != 1 or w.shape != s.shape or w.size < 2:
            raise DomainError("table needs matching 1-d omega/S arrays of length >= 2")
        if np.any(np.diff(w) <= 0) or w[0] < 0:
            raise DomainError("table omega must be increasing and non-negative")
        if np.any(s < 0):
            raise DomainError("spectral density must be non-negative")
        return cls("table", omega=tuple(w), values=tuple(s))

    @classmethod
    def zero(cls) -> "SpectralDensity":
        return cls("ohmic_sharp_cutoff", (0.0, 1.0))

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "lorentzian":
            s, tau = self.params
            return s * s * tau / (2 * (1 + (w * tau) ** 2))
        if self.kind == "ohmic_sharp_cutoff":
            a, wc = self.params
            return np.where(w <= wc, a * w, 0.0)
        return np.interp(w, self.omega, self.values, left=0.0, right=0.0)

    def scaled(self, c: float) -> "SpectralDensity":
        if c < 0:
            raise DomainError("scale must be non-negative")
        if self.kind == "lorentzian":
            s, tau = self.params
            return SpectralDensity.lorentzian(s * math.sqrt(c), tau)
        if self.kind == "ohmic_sharp_cutoff":
            a, wc = self.params
            return SpectralDensity.ohmic_sharp_cutoff(a * c, wc)
        return SpectralDensity.table(self.omega, [c * v for v in self.values])

    @property
    def is_zero(self) -> bool:
        if self.kind == "lorentzian":
            return self.params[0] == 0
        if self.kind == "ohmic_sharp_cutoff":
            return self.params[0] == 0
        return not any(self.values)

    @property
    def support_end(self) -> float:
        """Upper edge of the support (``inf`` for the Lorentzian)."""
        if self.kind == "lorentzian":
            return math.inf
        if self.kind == "ohmic_sharp_cutoff":
            return self.params[1]
        return self.omega[-1]

    @property
    def breakpoints(self) -> list[float]:
        if self.kind == "table":
            return list(self.omega)
        return []


@dataclass(frozen=True)
class FilterResult:
    chi: float
    error: float

    @property
    def coherence(self) -> float:
        return math.exp(-self.chi)

    W = coherence


def _switch_instants(times: TimingVector | Sequence[float], total: float | None):
    if isinstance(times, TimingVector):
        return np.asarray(times.instants, float), times.total_period
    if total is None:
        raise DomainError("total duration required with a bare instant list")
    return np.asarray(times, float), float(total)


def _filter_double(t: np.ndarray, total: float, w: np.ndarray) -> np.ndarray:
    n = t.size
    signs = 2.0 * (-1.0) ** np.arange(1, n + 1)
    amp = 1.0 + (-1.0) ** (n + 1) * np.exp(1j * w * total)
    if n:
        amp = amp + np.exp(1j * np.multiply.outer(w, t)) @ signs
    return np.abs(amp) ** 2


def _exact_instants(times: TimingVector | Sequence[float], total: float):
    """Instants as mpf; named schemes are re-evaluated from their formulas."""
    if isinstance(times, TimingVector) and times.scheme in ("udd", "cpmg"):
        n, big_t = times.order, mpmath.mpf(total)
        if times.scheme == "udd":
            return [big_t * mpmath.sin(mpmath.pi * j / (2 * n + 2)) ** 2 for j in range(1, n + 1)]
        return [big_t * (2 * j - 1) / (2 * n) for j in range(1, n + 1)]
    t, _ = _switch_instants(times, total)
    return [mpmath.mpf(float(x)) for x in t]


def _filter_extended(times, total: float, w: float) -> float:
    # low-frequency values are differences of O(1) terms; cancellation needs extra digits
    with mpmath.workdps(60):
        inst = _exact_instants(times, total)
        n = len(inst)
        wm = mpmath.mpf(float(w))
        amp = 1 + (-1) ** (n + 1) * mpmath.expj(wm * mpmath.mpf(total))
        for j, tj in enumerate(inst, start=1):
            amp += 2 * (-1) ** j * mpmath.expj(wm * tj)
        return float(abs(amp) ** 2)


def filter_function(times: TimingVector | Sequence[float], omega, total: float | None = None):
    """``F(wT) = |1 + (-1)^(N+1) e^{iwT} + 2 sum_j (-1)^j e^{i w t_j}|^2``.

    ``times`` is a :class:`TimingVector` or a bare list of instants (then
    ``total`` gives T; an empty list is free decay). Points with ``w T < 1``
    are evaluated in extended precision, with CPMG/UDD instants recomputed
    from their formulas, so the high-order zero at ``w = 0`` is resolved.
    """
    t, total = _switch_instants(times, total)
    w = np.asarray(omega, dtype=float)
    out = _filter_double(t, total, np.atleast_1d(w))
    low = np.flatnonzero(np.abs(np.atleast_1d(w)) * total < 1.0)
    for k in low:
        out[k] = _filter_extended(times, total, np.atleast_1d(w)[k])
    return out.reshape(w.shape) if w.ndim else float(out[0])


def _kernel_factory(t: np.ndarray, total: float) -> Callable[[float], float]:
    """Scalar ``F(w)/w^2``; below ``w T = 1e-3`` it is replaced by its ``w -> 0`` limit."""
    coef = [1.0] + [2.0 * (-1) ** j for j in range(1, t.size + 1)] + [(-1.0) ** (t.size + 1)]
    inst = [0.0] + [float(x) for x in t] + [total]
    edges = np.concatenate(([0.0], t, [total]))
    f0 = float(np.sum(np.diff(edges) * (-1.0) ** np.arange(t.size + 1)))
    small = 1e-3 / total
    pairs = list(zip(coef, inst))

    def kernel(w: float) -> float:
        if w < small:
            return f0 * f0
        re = im = 0.0
        for c, tj in pairs:
            re += c * math.cos(w * tj)
            im += c * math.sin(w * tj)
        return (re * re + im * im) / (w * w)

    return kernel


def _lorentzian_tail(sigma: float, tau: float, omega: float) -> float:
    """``integral_omega^inf S(w)/w^2 dw`` for the Lorentzian."""
    return sigma * sigma * tau / 2 * (1 / omega - tau * (math.pi / 2 - math.atan(omega * tau)))


def chi(times: TimingVector | Sequence[float], spectrum: SpectralDensity,
        total: float | None = None, rtol: float = RTOL) -> FilterResult:
    """Dephasing exponent by adaptive quadrature.

    The integral is split into panels a few oscillation periods wide (and at
    the cutoff / table knots), each integrated with QUADPACK. For the
    Lorentzian the range is extended until the remaining tail, evaluated with
    the frequency-averaged filter function ``2 + 4N``, is below ``rtol/10`` of
    the total; the tail's worst-case deviation enters the error estimate.
    """
    if not 1e-13 <= rtol < 1:
        raise DomainError("rtol must lie in [1e-13, 1)")
    t, total = _switch_instants(times, total)
    if spectrum.is_zero:
        return FilterResult(0.0, 0.0)
    if total <= 0:
        raise DomainError("total duration must be positive")
    kernel = _kernel_factory(t, total)
    if spectrum.kind == "lorentzian":
        sig, tau = spectrum.params

        def integrand(w):
            return sig * sig * tau / (2 * (1 + (w * tau) ** 2)) * kernel(w)
    elif spectrum.kind == "ohmic_sharp_cutoff":
        alpha = spectrum.params[0]

        def integrand(w):
            return alpha * w * kernel(w)
    else:
        def integrand(w):
            return float(spectrum(w)) * kernel(w)

    n = t.size
    panel = math.pi * (n + 1) / total
    end = spectrum.support_end

    def integrate_range(a, b):
        val = err = 0.0
        edges = sorted({a, b, *[x for x in spectrum.breakpoints if a < x < b]})
        for lo, hi in zip(edges, edges[1:]):
            m = max(1, math.ceil((hi - lo) / panel))
            knots = np.linspace(lo, hi, m + 1)
            for p, q in zip(knots, knots[1:]):
                v, e = _quad(integrand, float(p), float(q), rtol)
                val += v
                err += e
        return val, err

    if math.isfinite(end):
        val, err = integrate_range(0.0, end)
    else:
        sig, tau = spectrum.params
        mean_f = 2.0 + 4.0 * n
        max_f = (2.0 * n + 2.0) ** 2
        hi = max(50 * panel, 10.0 / tau)
        val, err = integrate_range(0.0, hi)
        while True:
            tail = mean_f * _lorentzian_tail(sig, tau, hi)
            if tail <= 0.1 * rtol * abs(val + tail) or hi > 1e6 * max(panel, 1 / tau):
                break
            new_hi = 2 * hi
            v, e = integrate_range(hi, new_hi)
            val, err, hi = val + v, err + e, new_hi
        val += tail
        err += tail * max_f / mean_f
    c = 2 / math.pi * val
    e = 2 / math.pi * err
    if e > rtol * abs(c) and e > 1e-14:
        raise QuadratureError(f"chi = {c:.6g} with error estimate {e:.3g} above tolerance")
    return FilterResult(max(c, 0.0), e)


def _quad(f: Callable[[float], float], a: float, b: float, rtol: float):
    val, err, infodict, *rest = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol / 10, limit=200,
                                               full_output=True)
    if rest and err > rtol * abs(val) and err > 1e-300:
        raise QuadratureError(f"quadrature on [{a:.6g}, {b:.6g}] did not converge: {rest[0]}")
    return val, err


def coherence_curve(make_times: Callable[[float], TimingVector], spectrum: SpectralDensity,
                    durations: Sequence[float]) -> list[tuple[float, float]]:
    """``(T, W(T))`` for each duration; ``make_times(T)`` builds the sequence of length T.

    ``T = 0`` maps to ``W = 1``.
    """
    out = []
    for total in durations:
        if total == 0:
            out.append((0.0, 1.0))
            continue
        out.append((float(total), chi(make_times(total), spectrum).coherence))
    return out
