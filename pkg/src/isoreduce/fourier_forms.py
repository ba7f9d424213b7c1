"""Exact algebra over finite Fourier series with affine unknown coefficients.

A :class:`HarmonicSeries` is a finite trigonometric polynomial in a single
base frequency whose sine/cosine coefficients are :class:`LinearForm` objects:
affine expressions ``const + sum(coeff * unknown)`` over named unknowns.
Products expand exactly through trigonometric product-to-sum identities, and
the unique periodic steady state of ``psi' = lam * psi + forcing(t)`` is
available in closed form.  Linearity in the unknowns is preserved throughout,
which is what makes stage-wise least-squares fitting of expansion tensors
possible without a general symbolic algebra system.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MissingUnknown,
    MixedFrequency,
    NonlinearUnknowns,
    ResonantDenominator,
    UnstableEigenvalue,
)

MAX_HARMONIC = 16

Index = tuple[int, ...]


def canonical_index(indices) -> Index:
    """Return the multi-index sorted into canonical non-increasing order."""
    return tuple(sorted((int(b) for b in indices), reverse=True))


@dataclass(frozen=True)
class UnknownId:
    """Name of one expansion coefficient to be fitted.

    ``kind`` is ``"response"`` for entries of an isostable input-response
    tensor (indexed by the isostable number) or ``"output"`` for entries of
    an output-map tensor (indexed by the output number).  ``multi_index`` is
    the canonical non-increasing tuple of isostable indices (1-based).
    """

    kind: str
    index: int
    multi_index: Index

    def __post_init__(self):
        if self.kind not in ("response", "output"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if tuple(self.multi_index) != canonical_index(self.multi_index):
            raise ValueError(f"multi-index {self.multi_index} not canonical")

    def __str__(self):
        sup = "".join(str(b) for b in self.multi_index) or "0"
        tag = "I" if self.kind == "response" else "g"
        return f"{tag}[{self.index}]^{sup}"


class LinearForm:
    """Affine expression ``const + sum(terms[u] * u)`` over unknowns.

    Zero-coefficient entries are dropped on construction so that equality of
    the ``terms`` dict is a canonical-form comparison.
    """

    __slots__ = ("const", "terms")

    def __init__(self, const=0.0, terms=None):
        self.const = complex(const)
        self.terms = {}
        if terms:
            for uid, coeff in terms.items():
                c = complex(coeff)
                if c != 0:
                    self.terms[uid] = c

    @classmethod
    def unknown(cls, uid: UnknownId, coeff=1.0) -> "LinearForm":
        return cls(0.0, {uid: coeff})

    @property
    def is_constant(self) -> bool:
        return not self.terms

    @property
    def is_zero(self) -> bool:
        return self.const == 0 and not self.terms

    def unknowns(self):
        return set(self.terms)

    def __add__(self, other):
        if not isinstance(other, LinearForm):
            other = LinearForm(other)
        terms = dict(self.terms)
        for uid, c in other.terms.items():
            terms[uid] = terms.get(uid, 0.0) + c
        return LinearForm(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return LinearForm(-self.const, {u: -c for u, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, LinearForm):
            other = LinearForm(other)
        return self + (-other)

    def __mul__(self, other):
        """Product with a scalar or with another (constant) linear form."""
        if isinstance(other, LinearForm):
            if self.terms and other.terms:
                raise NonlinearUnknowns(
                    "product of two unknown-carrying linear forms")
            if other.terms:
                return other * self.const
            other = other.const
        z = complex(other)
        return LinearForm(self.const * z,
                          {u: c * z for u, c in self.terms.items()})

    __rmul__ = __mul__

    def conjugate(self) -> "LinearForm":
        return LinearForm(self.const.conjugate(),
                          {u: c.conjugate() for u, c in self.terms.items()})

    def substitute(self, values) -> complex:
        missing = [u for u in self.terms if u not in values]
        if missing:
            raise MissingUnknown(missing)
        return self.const + sum(c * values[u] for u, c in self.terms.items())

    def __eq__(self, other):
        if not isinstance(other, LinearForm):
            return NotImplemented
        return self.const == other.const and self.terms == other.terms

    def __repr__(self):
        parts = [f"{self.const}"] if self.const or not self.terms else []
        parts += [f"{c}*{u}" for u, c in self.terms.items()]
        return " + ".join(parts) if parts else "0"


_ZERO = LinearForm(0.0)


def _as_form(x) -> LinearForm:
    return x if isinstance(x, LinearForm) else LinearForm(x)


class HarmonicSeries:
    """Finite Fourier series ``sum_k s_k sin(k w t) + c_k cos(k w t)``.

    Coefficients are :class:`LinearForm` values; ``sin[0]`` is identically
    zero and the DC value lives in ``cos[0]``.  Trailing all-zero harmonics
    are trimmed so ``max_harmonic`` equals the largest harmonic actually
    present.
    """

    __slots__ = ("omega", "sin", "cos")

    def __init__(self, omega: float, sin=None, cos=None):
        if omega <= 0:
            raise ValueError("base frequency must be positive")
        self.omega = float(omega)
        sin = [_as_form(s) for s in (sin or [])]
        cos = [_as_form(c) for c in (cos or [])]
        K = max(len(sin), len(cos), 1) - 1
        sin += [_ZERO] * (K + 1 - len(sin))
        cos += [_ZERO] * (K + 1 - len(cos))
        if not sin[0].is_zero:
            raise ValueError("sin coefficient of harmonic 0 must be zero")
        while K > 0 and sin[K].is_zero and cos[K].is_zero:
            K -= 1
        if K > MAX_HARMONIC:
            raise ValueError(f"harmonic order {K} exceeds cap {MAX_HARMONIC}")
        self.sin = sin[:K + 1]
        self.cos = cos[:K + 1]

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, omega) -> "HarmonicSeries":
        return cls(omega)

    @classmethod
    def constant(cls, omega, value) -> "HarmonicSeries":
        return cls(omega, cos=[value])

    @classmethod
    def sinusoid(cls, omega, harmonic=1, sin_amp=1.0, cos_amp=0.0):
        sin = [0.0] * (harmonic + 1)
        cos = [0.0] * (harmonic + 1)
        if harmonic > 0:
            sin[harmonic] = sin_amp
        cos[harmonic] = cos_amp
        return cls(omega, sin=sin, cos=cos)

    # -- inspection ------------------------------------------------------------

    @property
    def max_harmonic(self) -> int:
        return len(self.sin) - 1

    @property
    def has_unknowns(self) -> bool:
        return any(not f.is_constant for f in self.sin + self.cos)

    def unknowns(self):
        out = set()
        for f in self.sin + self.cos:
            out |= f.unknowns()
        return out

    def __eq__(self, other):
        if not isinstance(other, HarmonicSeries):
            return NotImplemented
        return (self.omega == other.omega and self.sin == other.sin
                and self.cos == other.cos)

    def __repr__(self):
        return (f"HarmonicSeries(omega={self.omega}, "
                f"K={self.max_harmonic}, unknowns={len(self.unknowns())})")

    # -- arithmetic ------------------------------------------------------------

    def _check_freq(self, other):
        if abs(self.omega - other.omega) > 1e-12 * (1.0 + abs(self.omega)):
            raise MixedFrequency(
                f"base frequencies differ: {self.omega} vs {other.omega}")

    def __add__(self, other):
        if not isinstance(other, HarmonicSeries):
            return NotImplemented
        self._check_freq(other)
        K = max(self.max_harmonic, other.max_harmonic)
        sin = [_ZERO] * (K + 1)
        cos = [_ZERO] * (K + 1)
        for k in range(K + 1):
            a_s = self.sin[k] if k <= self.max_harmonic else _ZERO
            a_c = self.cos[k] if k <= self.max_harmonic else _ZERO
            b_s = other.sin[k] if k <= other.max_harmonic else _ZERO
            b_c = other.cos[k] if k <= other.max_harmonic else _ZERO
            sin[k] = a_s + b_s
            cos[k] = a_c + b_c
        return HarmonicSeries(self.omega, sin, cos)

    def scaled(self, factor) -> "HarmonicSeries":
        """Multiply every coefficient by a scalar or constant/unknown form."""
        f = _as_form(factor)
        if f.terms and self.has_unknowns:
            raise NonlinearUnknowns(
                "scaling an unknown-carrying series by an unknown form")
        return HarmonicSeries(self.omega,
                              [s * f for s in self.sin],
                              [c * f for c in self.cos])

    def conjugate(self) -> "HarmonicSeries":
        return HarmonicSeries(self.omega,
                              [s.conjugate() for s in self.sin],
                              [c.conjugate() for c in self.cos])

    def sample(self, t) -> np.ndarray:
        """Evaluate an unknown-free series at times ``t`` (complex output)."""
        if self.has_unknowns:
            raise MissingUnknown(self.unknowns())
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for k in range(self.max_harmonic + 1):
            if k and self.sin[k].const != 0:
                out += self.sin[k].const * np.sin(k * self.omega * t)
            if self.cos[k].const != 0:
                out += self.cos[k].const * np.cos(k * self.omega * t)
        return out


def multiply(a: HarmonicSeries, b: HarmonicSeries) -> HarmonicSeries:
    """Exact product of two series via product-to-sum identities.

    At most one factor may carry unknowns; the result has max harmonic
    ``a.max_harmonic + b.max_harmonic``.
    """
    a._check_freq(b)
    if a.has_unknowns and b.has_unknowns:
        raise NonlinearUnknowns("product of two unknown-carrying series")
    K = a.max_harmonic + b.max_harmonic
    sin = [_ZERO] * (K + 1)
    cos = [_ZERO] * (K + 1)
    for k in range(a.max_harmonic + 1):
        sa, ca = a.sin[k], a.cos[k]
        for l in range(b.max_harmonic + 1):
            sb, cb = b.sin[l], b.cos[l]
            m, p = abs(k - l), k + l
            if not (sa.is_zero or sb.is_zero):
                ss = sa * sb
                cos[m] = cos[m] + 0.5 * ss
                cos[p] = cos[p] - 0.5 * ss
            if not (ca.is_zero or cb.is_zero):
                cc = ca * cb
                cos[m] = cos[m] + 0.5 * cc
                cos[p] = cos[p] + 0.5 * cc
            if not (sa.is_zero or cb.is_zero):
                sc = sa * cb
                sin[p] = sin[p] + 0.5 * sc
                if k > l:
                    sin[m] = sin[m] + 0.5 * sc
                elif l > k:
                    sin[m] = sin[m] - 0.5 * sc
            if not (ca.is_zero or sb.is_zero):
                cs = ca * sb
                sin[p] = sin[p] + 0.5 * cs
                if l > k:
                    sin[m] = sin[m] + 0.5 * cs
                elif k > l:
                    sin[m] = sin[m] - 0.5 * cs
    return HarmonicSeries(a.omega, sin, cos)


def steady_state_solve(forcing: HarmonicSeries, lam) -> HarmonicSeries:
    """Unique periodic steady state of ``psi' = lam * psi + forcing(t)``.

    Harmonic k of the forcing, ``g sin(k w t) + d cos(k w t)``, maps to
    ``(-g lam + d k w) sin + (-g k w - d lam) cos`` over ``lam^2 + (k w)^2``;
    the DC term maps ``c -> -c / lam``.  Unknown coefficients pass through
    linearly.
    """
    lam = complex(lam)
    if lam.real >= 0:
        raise UnstableEigenvalue(f"Re(lambda) = {lam.real} >= 0")
    w = forcing.omega
    tol = 1e-12 * (1.0 + abs(lam) ** 2)
    sin = []
    cos = []
    for k in range(forcing.max_harmonic + 1):
        g, d = forcing.sin[k], forcing.cos[k]
        denom = lam * lam + (k * w) ** 2
        if abs(denom) < tol:
            raise ResonantDenominator(
                f"|lambda^2 + (k omega)^2| = {abs(denom)} at harmonic {k}")
        sin.append((g * (-lam) + d * (k * w)) * (1.0 / denom))
        cos.append((g * (-(k * w)) + d * (-lam)) * (1.0 / denom))
    return HarmonicSeries(w, sin, cos)


def extract_harmonic(series: HarmonicSeries, k: int):
    """Return the ``(sin, cos)`` coefficient pair of harmonic ``k``.

    Equals the trig-weighted period integrals ``(w/pi) * int series*sin(kwt)``
    and the cosine analogue; for ``k = 0`` the DC value is the cos entry.
    Out-of-range harmonics return zero forms.
    """
    if k < 0 or k > series.max_harmonic:
        return _ZERO, _ZERO
    return series.sin[k], series.cos[k]


def substitute(series: HarmonicSeries, values) -> HarmonicSeries:
    """Resolve every unknown in the series to a number.

    Raises :class:`MissingUnknown` listing any identifier not covered by
    ``values``.
    """
    missing = {u for u in series.unknowns() if u not in values}
    if missing:
        raise MissingUnknown(missing)
    return HarmonicSeries(
        series.omega,
        [LinearForm(f.substitute(values)) for f in series.sin],
        [LinearForm(f.substitute(values)) for f in series.cos],
    )


def fourier_coefficients(samples: np.ndarray, omega: float, dt: float,
                         max_harmonic: int):
    """Trapezoid Fourier coefficients of one sampled period.

    ``samples`` covers exactly one period including both endpoints
    (``n*dt = 2 pi / omega``).  Returns ``(sin_coeffs, cos_coeffs)`` arrays of
    length ``max_harmonic + 1`` matching the :class:`HarmonicSeries`
    convention (DC in ``cos[0]``).
    """
    samples = np.asarray(samples)
    n = samples.shape[0] - 1
    t = np.arange(n + 1) * dt
    period = 2.0 * np.pi / omega
    sin_out = np.zeros(max_harmonic + 1, dtype=samples.dtype)
    cos_out = np.zeros(max_harmonic + 1, dtype=samples.dtype)
    for k in range(max_harmonic + 1):
        norm = (1.0 / period) if k == 0 else (2.0 / period)
        if k:
            sin_out[k] = norm * np.trapezoid(samples * np.sin(k * omega * t),
                                             dx=dt)
        cos_out[k] = norm * np.trapezoid(samples * np.cos(k * omega * t),
                                         dx=dt)
    return sin_out, cos_out


def random_series(rng, omega, max_harmonic, complex_coeffs=False):
    """Random unknown-free series for property tests."""
    K = int(max_harmonic)
    draw = rng.standard_normal(2 * (K + 1))
    if complex_coeffs:
        draw = draw + 1j * rng.standard_normal(2 * (K + 1))
    sin = [0.0] + list(draw[1:K + 1])
    cos = list(draw[K + 1:])
    return HarmonicSeries(omega, sin, cos)
