"""Reduced-order model in isostable coordinates: evaluation, simulation, I/O.

The model is ``psi_k' = lam_k psi_k + R_k(psi) u(t)`` with outputs
``y_m = y0_m + Re(G_m(psi))``, where each ``R_k`` (input-response polynomial,
constant term normalized to 1) and ``G_m`` (output map) is a truncated
polynomial in the isostable coordinates with complex coefficients stored per
canonical multi-index.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (
    ConjugateSymmetryViolation,
    InvariantViolation,
    NonFiniteState,
    SchemaVersionMismatch,
    StepTooLarge,
)
from .fourier_forms import Index, canonical_index
from .signals import InputSignal

SCHEMA_VERSION = 1

_MAX_STATE = 1e12


def multi_indices(M: int, order: int) -> list[Index]:
    """All canonical (non-increasing) multi-indices of the given order."""
    if order == 0:
        return [()]
    return list(itertools.combinations_with_replacement(range(M, 0, -1),
                                                        order))


def indices_up_to(M: int, max_order: int, min_order: int = 0) -> list[Index]:
    out = []
    for p in range(min_order, max_order + 1):
        out.extend(multi_indices(M, p))
    return out


def index_exponents(idx: Index, M: int) -> np.ndarray:
    """Exponent-count representation of a multi-index: counts[j] of j+1."""
    exps = np.zeros(M, dtype=np.int64)
    for b in idx:
        exps[b - 1] += 1
    return exps


@dataclass
class ExpansionTensor:
    """Polynomial coefficients keyed by canonical multi-index.

    Missing entries read as zero; every stored index must be canonical and
    of order at most ``order_cap``.
    """

    order_cap: int
    entries: dict[Index, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for idx, val in self.entries.items():
            idx = tuple(int(b) for b in idx)
            if idx != canonical_index(idx):
                raise InvariantViolation(f"index {idx} not canonical")
            if len(idx) > self.order_cap:
                raise InvariantViolation(
                    f"index {idx} exceeds order cap {self.order_cap}")
            clean[idx] = complex(val)
        self.entries = clean
        self._cache = None

    def value(self, idx) -> complex:
        return self.entries.get(canonical_index(idx), 0.0 + 0.0j)

    def set(self, idx, val):
        self.entries[canonical_index(idx)] = complex(val)
        self._cache = None

    def _compiled(self, M: int):
        if self._cache is None or self._cache[2] != M:
            items = sorted(self.entries.items())
            coeffs = np.array([v for _, v in items], dtype=complex)
            exps = np.zeros((len(items), M), dtype=np.int64)
            for row, (idx, _) in enumerate(items):
                exps[row] = index_exponents(idx, M)
            self._cache = (coeffs, exps, M)
        return self._cache[0], self._cache[1]

    def evaluate(self, psi) -> complex:
        """Value of the truncated polynomial at one coordinate vector."""
        psi = np.asarray(psi, dtype=complex)
        coeffs, exps = self._compiled(psi.shape[0])
        if coeffs.size == 0:
            return 0.0 + 0.0j
        monomials = np.prod(psi[None, :] ** exps, axis=1)
        return complex(coeffs @ monomials)

    def evaluate_many(self, psi_samples) -> np.ndarray:
        """Vectorized evaluation over rows of ``psi_samples`` (n, M)."""
        psi = np.asarray(psi_samples, dtype=complex)
        coeffs, exps = self._compiled(psi.shape[1])
        if coeffs.size == 0:
            return np.zeros(psi.shape[0], dtype=complex)
        monomials = np.prod(psi[:, None, :] ** exps[None, :, :], axis=2)
        return monomials @ coeffs

    def truncated(self, order: int) -> "ExpansionTensor":
        return ExpansionTensor(order, {i: v for i, v in self.entries.items()
                                       if len(i) <= order})

    def max_abs(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)


def _pair_map(M: int, conjugate_pairs) -> dict[int, int]:
    sigma = {n: n for n in range(1, M + 1)}
    for a, b in conjugate_pairs:
        sigma[a] = b
        sigma[b] = a
    return sigma


@dataclass
class ReducedModel:
    """Identified isostable reduced model (immutable after construction)."""

    eigenvalues: np.ndarray
    response_tensors: list[ExpansionTensor]
    output_tensors: list[ExpansionTensor]
    y0: np.ndarray
    order: int
    conjugate_pairs: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=complex)
        self.y0 = np.asarray(self.y0, dtype=float)
        self.validate()

    @property
    def M(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n_outputs(self) -> int:
        return len(self.output_tensors)

    def validate(self, tol: float = 1e-8):
        if self.M < 1 or len(self.response_tensors) != self.M:
            raise InvariantViolation("one response tensor per isostable "
                                     "coordinate is required")
        if np.any(self.eigenvalues.real >= 0):
            raise InvariantViolation("all eigenvalues must have Re < 0")
        for n, tensor in enumerate(self.response_tensors, start=1):
            if abs(tensor.value(()) - 1.0) > 1e-12:
                raise InvariantViolation(
                    f"response tensor {n} constant term must equal 1")
            if tensor.order_cap > self.order - 1:
                raise InvariantViolation("response tensor order cap must be "
                                         "model order - 1")
        for tensor in self.output_tensors:
            if tensor.order_cap > self.order:
                raise InvariantViolation("output tensor order cap must not "
                                         "exceed the model order")
        sigma = _pair_map(self.M, self.conjugate_pairs)
        for a, b in self.conjugate_pairs:
            if abs(self.eigenvalues[a - 1] -
                   np.conj(self.eigenvalues[b - 1])) > tol * (
                       1 + abs(self.eigenvalues[a - 1])):
                raise InvariantViolation(
                    f"eigenvalues {a} and {b} are not a conjugate pair")
        err = self.symmetry_defect(sigma)
        if err > tol:
            raise InvariantViolation(
                f"tensor conjugation symmetry violated by {err:.3e}")

    def symmetry_defect(self, sigma=None) -> float:
        """Largest violation of the index-conjugation symmetry."""
        if sigma is None:
            sigma = _pair_map(self.M, self.conjugate_pairs)
        worst = 0.0
        for n in range(1, self.M + 1):
            tensor = self.response_tensors[n - 1]
            mirror = self.response_tensors[sigma[n] - 1]
            for idx, val in tensor.entries.items():
                midx = canonical_index(sigma[b] for b in idx)
                worst = max(worst, abs(np.conj(val) - mirror.value(midx)))
        for tensor in self.output_tensors:
            for idx, val in tensor.entries.items():
                midx = canonical_index(sigma[b] for b in idx)
                worst = max(worst, abs(np.conj(val) - tensor.value(midx)))
        return worst

    # -- evaluation -----------------------------------------------------------

    def response(self, n: int, psi) -> complex:
        """Input-response polynomial of isostable coordinate ``n`` (1-based)."""
        return self.response_tensors[n - 1].evaluate(psi)

    def output(self, m: int, psi) -> float:
        """Output ``m`` (1-based) at coordinates ``psi``; checks reality."""
        val = self.output_tensors[m - 1].evaluate(psi)
        if abs(val.imag) > 1e-8 * (1.0 + abs(val.real)):
            raise ConjugateSymmetryViolation(
                f"output {m} imaginary residual {val.imag:.3e}")
        return float(self.y0[m - 1] + val.real)

    def outputs_many(self, psi_samples) -> np.ndarray:
        """All outputs along a trajectory; raises if any imaginary residual
        exceeds tolerance."""
        n = np.asarray(psi_samples).shape[0]
        out = np.empty((n, self.n_outputs))
        for m in range(self.n_outputs):
            vals = self.output_tensors[m].evaluate_many(psi_samples)
            bad = np.abs(vals.imag) > 1e-8 * (1.0 + np.abs(vals.real))
            if np.any(bad):
                raise ConjugateSymmetryViolation(
                    f"output {m + 1} imaginary residual up to "
                    f"{np.abs(vals.imag).max():.3e}")
            out[:, m] = self.y0[m] + vals.real
        return out

    def truncated(self, order: int) -> "ReducedModel":
        """Model with all entries above the given accuracy order dropped."""
        return ReducedModel(
            self.eigenvalues.copy(),
            [t.truncated(min(t.order_cap, order - 1))
             for t in self.response_tensors],
            [t.truncated(min(t.order_cap, order))
             for t in self.output_tensors],
            self.y0.copy(),
            order,
            list(self.conjugate_pairs),
        )

    def _response_arrays(self):
        coeffs = []
        exps = []
        offsets = [0]
        for tensor in self.response_tensors:
            c, e = tensor._compiled(self.M)
            coeffs.append(c)
            exps.append(e)
            offsets.append(offsets[-1] + c.shape[0])
        return (np.concatenate(coeffs) if coeffs else np.zeros(0, complex),
                np.vstack(exps) if exps else np.zeros((0, self.M), np.int64),
                np.array(offsets, dtype=np.int64))

    # -- serialization ----------------------------------------------------------

    def to_document(self) -> dict:
        def tensor_doc(t):
            return {"order_cap": t.order_cap,
                    "entries": [{"index": list(i),
                                 "value": [v.real, v.imag]}
                                for i, v in sorted(t.entries.items())]}
        return {
            "version": SCHEMA_VERSION,
            "M": self.M,
            "order": self.order,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "conjugate_pairs": [list(p) for p in self.conjugate_pairs],
            "y0": self.y0.tolist(),
            "response_tensors": [tensor_doc(t) for t in self.response_tensors],
            "output_tensors": [tensor_doc(t) for t in self.output_tensors],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "ReducedModel":
        version = doc.get("version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"model document version {version!r}, expected "
                f"{SCHEMA_VERSION}")

        def tensor(d):
            return ExpansionTensor(
                d["order_cap"],
                {tuple(e["index"]): complex(e["value"][0], e["value"][1])
                 for e in d["entries"]})
        try:
            model = cls(
                np.array([complex(re, im)
                          for re, im in doc["eigenvalues"]]),
                [tensor(d) for d in doc["response_tensors"]],
                [tensor(d) for d in doc["output_tensors"]],
                np.asarray(doc["y0"], dtype=float),
                int(doc["order"]),
                [tuple(p) for p in doc.get("conjugate_pairs", [])],
            )
        except KeyError as exc:
            raise InvariantViolation(f"model document missing {exc}") from exc
        if model.M != doc["M"]:
            raise InvariantViolation("declared M does not match eigenvalues")
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_document(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ReducedModel":
        with open(path) as fh:
            return cls.from_document(json.load(fh))


@njit(cache=True)
def _poly_eval(psi, coeffs, exps, lo, hi):
    total = 0.0 + 0.0j
    for e in range(lo, hi):
        term = coeffs[e]
        for j in range(psi.shape[0]):
            for _ in range(exps[e, j]):
                term *= psi[j]
        total += term
    return total


@njit(cache=True)
def _rk4_chunk(psi, lam, coeffs, exps, offsets, u_half, n_samples, n_sub, dt,
               out):
    M = psi.shape[0]
    k1 = np.empty(M, dtype=np.complex128)
    k2 = np.empty(M, dtype=np.complex128)
    k3 = np.empty(M, dtype=np.complex128)
    k4 = np.empty(M, dtype=np.complex128)
    tmp = np.empty(M, dtype=np.complex128)
    step = 0
    for s in range(n_samples):
        for _ in range(n_sub):
            u0 = u_half[2 * step]
            um = u_half[2 * step + 1]
            u1 = u_half[2 * step + 2]
            for n in range(M):
                k1[n] = lam[n] * psi[n] + _poly_eval(
                    psi, coeffs, exps, offsets[n], offsets[n + 1]) * u0
            for n in range(M):
                tmp[n] = psi[n] + 0.5 * dt * k1[n]
            for n in range(M):
                k2[n] = lam[n] * tmp[n] + _poly_eval(
                    tmp, coeffs, exps, offsets[n], offsets[n + 1]) * um
            for n in range(M):
                tmp[n] = psi[n] + 0.5 * dt * k2[n]
            for n in range(M):
                k3[n] = lam[n] * tmp[n] + _poly_eval(
                    tmp, coeffs, exps, offsets[n], offsets[n + 1]) * um
            for n in range(M):
                tmp[n] = psi[n] + dt * k3[n]
            for n in range(M):
                k4[n] = lam[n] * tmp[n] + _poly_eval(
                    tmp, coeffs, exps, offsets[n], offsets[n + 1]) * u1
            for n in range(M):
                psi[n] = psi[n] + (dt / 6.0) * (
                    k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n])
            step += 1
        ok = True
        for n in range(M):
            mag = abs(psi[n])
            if not np.isfinite(mag) or mag > _MAX_STATE:
                ok = False
        out[s] = psi
        if not ok:
            return s + 1
    return n_samples


def simulate_reduced(model: ReducedModel, u: InputSignal, psi0, t_span: float,
                     dt: float, substeps: int = 1):
    """Integrate the reduced model with classical RK4 at a fixed step.

    Parameters
    ----------
    u : InputSignal
        Scalar drive applied through the response polynomials.
    psi0 : array_like
        Initial isostable coordinates (length M, complex).
    t_span : float
        Duration; samples are returned every ``dt`` from 0 to ``t_span``.
    dt : float
        Sample step.  The integrator runs at ``dt / substeps``, which must
        satisfy ``(dt/substeps) * max|lambda| <= 0.1``.

    Returns
    -------
    t, psi, y : ndarray
        Times ``(n+1,)``, coordinates ``(n+1, M)`` and outputs
        ``(n+1, n_outputs)``.
    """
    if dt <= 0 or substeps < 1:
        raise StepTooLarge("dt and substeps must be positive")
    dt_int = dt / substeps
    lam_max = np.abs(model.eigenvalues).max()
    if dt_int * lam_max > 0.1 + 1e-12:
        raise StepTooLarge(
            f"dt*max|lambda| = {dt_int * lam_max:.3g} exceeds 0.1; "
            "reduce dt or raise substeps")
    n_samples = int(round(t_span / dt))
    psi = np.asarray(psi0, dtype=complex).copy()
    if psi.shape != (model.M,):
        raise InvariantViolation(f"psi0 must have shape ({model.M},)")
    coeffs, exps, offsets = model._response_arrays()
    t = np.arange(n_samples + 1) * dt
    psi_out = np.empty((n_samples + 1, model.M), dtype=complex)
    psi_out[0] = psi

    chunk = max(1, min(n_samples, int(2e6 // max(1, 2 * substeps))))
    done = 0
    while done < n_samples:
        n_chunk = min(chunk, n_samples - done)
        t0 = done * dt
        t_half = t0 + (dt_int / 2.0) * np.arange(2 * n_chunk * substeps + 1)
        u_half = np.asarray(u(t_half), dtype=float)
        out = np.empty((n_chunk, model.M), dtype=complex)
        reached = _rk4_chunk(psi, model.eigenvalues.astype(complex), coeffs,
                             exps, offsets, u_half, n_chunk, substeps, dt_int,
                             out)
        psi_out[done + 1:done + 1 + reached] = out[:reached]
        if reached < n_chunk:
            raise NonFiniteState(
                f"|psi| exceeded {_MAX_STATE:g} at t = "
                f"{(done + reached) * dt:.6g}")
        done += n_chunk
    y = model.outputs_many(psi_out)
    return t, psi_out, y


class ReducedModelSUT:
    """System-under-test adapter so a reduced model can itself be probed."""

    def __init__(self, model: ReducedModel, substeps: int = 1):
        self.model = model
        self.substeps = substeps
        self.baseline = model.y0.copy()
        self.n_outputs = model.n_outputs

    def run(self, u: InputSignal, t_span: float, dt: float):
        lam_max = np.abs(self.model.eigenvalues).max()
        sub = self.substeps
        if (dt / sub) * lam_max > 0.1:
            sub = int(np.ceil(dt * lam_max / 0.1))
        t, _, y = simulate_reduced(self.model, u,
                                   np.zeros(self.model.M, dtype=complex),
                                   t_span, dt, substeps=sub)
        return t, y
