"""Stage-wise least-squares fitting of the expansion tensors.

Stage j+1 assembles, per probe frequency, the order-(j+1) forcing of each
isostable coordinate (response unknowns of order j entering linearly), solves
the periodically forced linear ODE exactly, forms the order-(j+1) output
series (output-map unknowns of order j+1 entering linearly), and matches its
harmonic-(j+1) coefficients (plus the DC coefficient at stage 2) against the
measured probe integrals.  Each coefficient stays affine in the current
stage's unknowns throughout, so one complex least-squares solve per stage
recovers them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    IllConditioned,
    InconsistentProbeGrids,
    MissingLowerStage,
    RankDeficient,
)
from .fourier_forms import (
    HarmonicSeries,
    LinearForm,
    UnknownId,
    canonical_index,
    extract_harmonic,
    multiply,
    steady_state_solve,
    substitute,
)
from .model_core import ExpansionTensor, ReducedModel, multi_indices
from .probe_engine import assemble_gamma


def compositions(total: int, parts: int):
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def stage_unknowns(M: int, n_outputs: int, stage: int) -> list[UnknownId]:
    """Deterministic unknown ordering for one stage.

    Response-tensor entries of order ``stage - 1`` (absent at stage 1, where
    the constant term is pinned to 1) come first, then output-map entries of
    order ``stage`` grouped by output.
    """
    out = []
    if stage >= 2:
        for n in range(1, M + 1):
            for idx in multi_indices(M, stage - 1):
                out.append(UnknownId("response", n, idx))
    for m in range(1, n_outputs + 1):
        for idx in multi_indices(M, stage):
            out.append(UnknownId("output", m, idx))
    return out


class HarmonicLedger:
    """Per-frequency steady-state series of each expansion order.

    ``series(omega, a)`` returns the list over isostable coordinates of the
    order-``a`` steady-state series (numeric once stage ``a`` is fitted);
    their top-harmonic coefficients are the quantities propagated between
    stages.
    """

    def __init__(self, eigenvalues):
        self.eigenvalues = np.asarray(eigenvalues, dtype=complex)
        self._store: dict[tuple[float, int], list[HarmonicSeries]] = {}

    @property
    def M(self) -> int:
        return self.eigenvalues.shape[0]

    def series(self, omega: float, order: int) -> list[HarmonicSeries]:
        key = (float(omega), int(order))
        if key not in self._store:
            raise MissingLowerStage(
                f"order-{order} series at omega={omega:.6g} not available")
        return self._store[key]

    def store(self, omega: float, order: int, series_list):
        self._store[(float(omega), int(order))] = list(series_list)

    def top_coefficients(self, omega: float, order: int, n: int):
        """(sin, cos) coefficients of the highest harmonic of psi_n^(order)."""
        s = self.series(omega, order)[n - 1]
        a, b = extract_harmonic(s, order)
        return a.const, b.const

    def ensure(self, omega: float, up_to: int, response_value):
        """Build numeric series through the given order for one frequency.

        ``response_value(n, idx)`` must return the already-fitted response
        coefficient (order < ``up_to``).
        """
        for a in range(1, up_to + 1):
            key = (float(omega), a)
            if key in self._store:
                continue
            series_list = []
            for n in range(1, self.M + 1):
                bracket = _forcing_bracket(self, omega, n, a - 1,
                                           response_value, None)
                forcing = multiply(bracket,
                                   HarmonicSeries.sinusoid(omega))
                series_list.append(
                    steady_state_solve(forcing, self.eigenvalues[n - 1]))
            self.store(omega, a, series_list)


def _product_series(ledger: HarmonicLedger, omega: float, idx, comp):
    """Numeric product prod_i psi_{idx_i}^{(comp_i)} at one frequency."""
    out = None
    for b, a in zip(idx, comp):
        s = ledger.series(omega, a)[b - 1]
        out = s if out is None else multiply(out, s)
    return out


def _forcing_bracket(ledger, omega, n, j, response_value, unknown_order):
    """The response-polynomial factor of the order-(j+1) forcing.

    Sum over multi-indices B of order p <= j of (coefficient of B) times the
    order-j part of prod psi_B; coefficients of order ``unknown_order`` enter
    as unknowns, everything else as numbers.  ``j = 0`` yields the constant
    response term (pinned to 1).
    """
    M = ledger.M
    total = HarmonicSeries.zero(omega)
    for p in range(0, j + 1):
        for idx in multi_indices(M, p):
            if p == 0:
                base = HarmonicSeries.constant(omega, 1.0)
            else:
                base = None
                for comp in compositions(j, p):
                    prod = _product_series(ledger, omega, idx, comp)
                    base = prod if base is None else base + prod
                if base is None:
                    continue
            if unknown_order is not None and p == unknown_order:
                coeff = LinearForm.unknown(UnknownId("response", n, idx))
            else:
                coeff = LinearForm(1.0 if p == 0
                                   else response_value(n, idx))
            total = total + base.scaled(coeff)
    return total


def _output_series(ledger, omega, m, order, output_value, psi_next):
    """Order-``order`` part of output m as an unknown-carrying series.

    ``psi_next`` holds the (possibly unknown-carrying) order-``order`` series
    of each coordinate; output-map unknowns of order ``order`` are attached
    to the all-first-order product.
    """
    M = ledger.M
    total = HarmonicSeries.zero(omega)
    for p in range(1, order + 1):
        for idx in multi_indices(M, p):
            if p == order:
                base = _product_series(ledger, omega, idx, (1,) * p)
                coeff = LinearForm.unknown(UnknownId("output", m, idx))
                total = total + base.scaled(coeff)
            elif p == 1:
                g = output_value(m, idx)
                total = total + psi_next[idx[0] - 1].scaled(g)
            else:
                base = None
                for comp in compositions(order, p):
                    prod = _product_series(ledger, omega, idx, comp)
                    base = prod if base is None else base + prod
                if base is not None:
                    g = output_value(m, idx)
                    total = total + base.scaled(g)
    return total


@dataclass
class StageProblem:
    """One stage's linear system plus the series needed to propagate it."""

    stage: int
    epsilon: float
    unknowns: list[UnknownId]
    xi: np.ndarray
    r: np.ndarray
    gamma: np.ndarray
    row_weights: np.ndarray
    row_labels: list[tuple[int, float, str]]
    psi_next: dict[tuple[float, int], HarmonicSeries]
    frequencies: list[float]

    @property
    def condition_estimate(self) -> float:
        s = np.linalg.svd(self.xi, compute_uv=False)
        if s[-1] == 0:
            return np.inf
        return float(s[0] / s[-1])

    @property
    def normalized_rhs(self) -> np.ndarray:
        return self.gamma / (self.row_weights * self.epsilon ** self.stage)


@dataclass
class StageFit:
    """Solution of one stage with solver diagnostics."""

    stage: int
    values: dict[UnknownId, complex]
    residual_norm: float
    condition: float
    rank: int
    symmetry_defect: float
    n_rows: int
    n_unknowns: int


class FitState:
    """Mutable state threaded through the stage fits."""

    def __init__(self, eigenvalues, n_outputs, conjugate_pairs=()):
        self.eigenvalues = np.asarray(eigenvalues, dtype=complex)
        self.n_outputs = int(n_outputs)
        self.conjugate_pairs = [tuple(p) for p in conjugate_pairs]
        self.fitted: dict[UnknownId, complex] = {}
        self.ledger = HarmonicLedger(self.eigenvalues)

    @property
    def M(self) -> int:
        return self.eigenvalues.shape[0]

    def response_value(self, n: int, idx) -> complex:
        if len(idx) == 0:
            return 1.0 + 0.0j
        uid = UnknownId("response", n, canonical_index(idx))
        try:
            return self.fitted[uid]
        except KeyError:
            raise MissingLowerStage(f"{uid} has not been fitted") from None

    def output_value(self, m: int, idx) -> complex:
        uid = UnknownId("output", m, canonical_index(idx))
        try:
            return self.fitted[uid]
        except KeyError:
            raise MissingLowerStage(f"{uid} has not been fitted") from None

    def sigma(self) -> dict[int, int]:
        out = {n: n for n in range(1, self.M + 1)}
        for a, b in self.conjugate_pairs:
            out[a] = b
            out[b] = a
        return out


def _check_stage_records(records, n_outputs):
    if not records:
        raise ConfigError("a stage needs at least one probe record")
    eps = records[0].epsilon
    freqs = []
    for rec in records:
        if abs(rec.epsilon - eps) > 1e-12 * (1 + abs(eps)):
            raise InconsistentProbeGrids(
                "records of one stage must share the probe amplitude")
        if rec.n_outputs != n_outputs:
            raise InconsistentProbeGrids(
                f"record at omega={rec.omega:.6g} has {rec.n_outputs} "
                f"outputs, expected {n_outputs}")
        freqs.append(rec.omega)
    if len(set(freqs)) != len(freqs):
        raise InconsistentProbeGrids("duplicate frequencies within a stage")
    return eps, freqs


def build_stage(state: FitState, records, stage: int) -> StageProblem:
    """Assemble the stage's linear system from probe records.

    Requires every stage below to be fitted into ``state``.  Rows are
    grouped output-major, then per frequency in record order: sin and cos of
    harmonic ``stage`` (plus the DC row at stage 2).
    """
    if stage < 1:
        raise ConfigError("stage must be >= 1")
    epsilon, freqs = _check_stage_records(records, state.n_outputs)
    unknowns = stage_unknowns(state.M, state.n_outputs, stage)
    col = {uid: i for i, uid in enumerate(unknowns)}

    psi_next: dict[tuple[float, int], HarmonicSeries] = {}
    out_series: dict[tuple[float, int], HarmonicSeries] = {}
    for rec in records:
        w = rec.omega
        state.ledger.ensure(w, max(stage - 1, 1), state.response_value)
        per_freq = []
        for n in range(1, state.M + 1):
            bracket = _forcing_bracket(
                state.ledger, w, n, stage - 1, state.response_value,
                unknown_order=stage - 1 if stage >= 2 else None)
            forcing = multiply(bracket, HarmonicSeries.sinusoid(w))
            series = steady_state_solve(forcing,
                                        state.eigenvalues[n - 1])
            psi_next[(w, n)] = series
            per_freq.append(series)
        for m in range(1, state.n_outputs + 1):
            out_series[(w, m)] = _output_series(
                state.ledger, w, m, stage, state.output_value, per_freq)

    rows = []
    labels = []
    weights = []
    for m in range(1, state.n_outputs + 1):
        for rec in records:
            series = out_series[(rec.omega, m)]
            s_lf, c_lf = extract_harmonic(series, stage)
            rows.append(s_lf)
            labels.append((m, rec.omega, "sin"))
            weights.append(np.pi)
            rows.append(c_lf)
            labels.append((m, rec.omega, "cos"))
            weights.append(np.pi)
            if stage == 2:
                _, dc_lf = extract_harmonic(series, 0)
                rows.append(dc_lf)
                labels.append((m, rec.omega, "dc"))
                weights.append(2.0 * np.pi)

    xi = np.zeros((len(rows), len(unknowns)), dtype=complex)
    r = np.zeros(len(rows), dtype=complex)
    for i, lf in enumerate(rows):
        r[i] = lf.const
        for uid, coeff in lf.terms.items():
            xi[i, col[uid]] = coeff

    gamma = np.concatenate([assemble_gamma(records, stage, m)
                            for m in range(1, state.n_outputs + 1)])
    return StageProblem(stage, epsilon, unknowns, xi, r, gamma,
                        np.asarray(weights), labels, psi_next, freqs)


def _symmetrize(values, unknowns, sigma):
    """Average each entry with the conjugate of its index-conjugated partner.

    Returns the symmetrized values and the largest pre-projection mismatch.
    """
    defect = 0.0
    out = {}
    for uid in unknowns:
        midx = canonical_index(sigma[b] for b in uid.multi_index)
        if uid.kind == "response":
            mirror = UnknownId("response", sigma[uid.index], midx)
        else:
            mirror = UnknownId("output", uid.index, midx)
        v = values[uid]
        vm = values[mirror]
        defect = max(defect, abs(v - np.conj(vm)))
        out[uid] = 0.5 * (v + np.conj(vm))
    return out, defect


def solve_stage(problem: StageProblem, conjugate_pairs=(),
                condition_cap: float = 1e8, M: int | None = None) -> StageFit:
    """Least-squares solve of one stage with conjugate-pair projection."""
    n_rows, n_cols = problem.xi.shape
    if n_rows < n_cols:
        raise RankDeficient(
            f"stage {problem.stage}: {n_rows} rows for {n_cols} unknowns")
    cond = problem.condition_estimate
    if cond > condition_cap:
        raise IllConditioned(
            f"stage {problem.stage} condition {cond:.3e} exceeds cap "
            f"{condition_cap:.1e}", condition=cond)
    b = problem.normalized_rhs - problem.r
    sol, _, rank, _ = np.linalg.lstsq(problem.xi, b, rcond=None)
    if rank < n_cols:
        raise RankDeficient(
            f"stage {problem.stage}: rank {rank} < {n_cols} unknowns")
    values = {uid: complex(sol[i]) for i, uid in enumerate(problem.unknowns)}

    if M is None:
        M = max([b for uid in problem.unknowns for b in uid.multi_index],
                default=1)
    sigma = {n: n for n in range(1, M + 1)}
    for a, bb in conjugate_pairs:
        sigma[a] = bb
        sigma[bb] = a
    values, defect = _symmetrize(values, problem.unknowns, sigma)

    residual = float(np.linalg.norm(
        problem.xi @ np.array([values[u] for u in problem.unknowns]) - b))
    return StageFit(problem.stage, values, residual, cond, int(rank), defect,
                    n_rows, n_cols)


def propagate_harmonics(state: FitState, problem: StageProblem,
                        fit: StageFit):
    """Resolve the stage's unknown-carrying series into the ledger."""
    for w in problem.frequencies:
        series_list = []
        for n in range(1, state.M + 1):
            numeric = substitute(problem.psi_next[(w, n)], fit.values)
            if numeric.has_unknowns:
                raise MissingLowerStage("substitution left unknowns behind")
            series_list.append(numeric)
        state.ledger.store(w, problem.stage, series_list)


def fit_reduced_model(records_by_stage: dict[int, list], eigenvalues,
                      order: int, conjugate_pairs=(), y0=None,
                      condition_cap: float = 1e8):
    """Run stages 1..order and assemble the reduced model.

    ``records_by_stage[j]`` holds the probe records used for stage ``j``
    (stages may share records when their amplitudes coincide).  Returns the
    model and the per-stage fit diagnostics.  Handles any number of outputs;
    response tensors are shared across outputs and fitted jointly.
    """
    if order < 1:
        raise ConfigError("order must be >= 1")
    first = records_by_stage.get(1)
    if not first:
        raise ConfigError("stage 1 records are required")
    n_outputs = first[0].n_outputs
    state = FitState(eigenvalues, n_outputs, conjugate_pairs)
    fits = []
    for stage in range(1, order + 1):
        records = records_by_stage.get(stage)
        if not records:
            raise ConfigError(f"no probe records for stage {stage}")
        problem = build_stage(state, records, stage)
        fit = solve_stage(problem, conjugate_pairs=state.conjugate_pairs,
                          condition_cap=condition_cap, M=state.M)
        state.fitted.update(fit.values)
        propagate_harmonics(state, problem, fit)
        fits.append(fit)

    if y0 is None:
        y0 = first[0].baseline
    response = []
    for n in range(1, state.M + 1):
        entries = {(): 1.0 + 0.0j}
        for p in range(1, order):
            for idx in multi_indices(state.M, p):
                entries[idx] = state.fitted[UnknownId("response", n, idx)]
        response.append(ExpansionTensor(max(order - 1, 0), entries))
    outputs = []
    for m in range(1, n_outputs + 1):
        entries = {}
        for p in range(1, order + 1):
            for idx in multi_indices(state.M, p):
                entries[idx] = state.fitted[UnknownId("output", m, idx)]
        outputs.append(ExpansionTensor(order, entries))
    model = ReducedModel(np.asarray(eigenvalues, dtype=complex), response,
                         outputs, np.asarray(y0, dtype=float), order,
                         [tuple(p) for p in conjugate_pairs])
    return model, fits
