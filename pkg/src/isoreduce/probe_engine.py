"""Sinusoidal probing of a system under test and Fourier-integral extraction.

A probe drives the black box with ``u(t) = eps * sin(omega t)``, discards a
settling prefix, then averages trig-weighted period integrals
``omega * int y(t) trig(k omega t) dt`` over a number of cycles.  Those
integrals are the measured left-hand sides of the stage-fitting linear
systems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    MissingHarmonic,
    NotSettled,
    SamplingTooCoarse,
)
from .signals import Sinusoid


@dataclass
class ProbeRecord:
    """Fourier integrals of one steady-state sinusoidal experiment.

    ``sin_int[m, k]`` and ``cos_int[m, k]`` hold the cycle-averaged values of
    ``omega * int_0^{2pi/omega} y_m(t) trig(k omega t) dt`` for harmonics
    ``k = 0..max_harmonic`` (the k = 0 cosine entry is the raw period
    integral times omega).  ``dc[m]`` is the baseline-corrected DC row,
    ``cos_int[m, 0] - 2 pi y0[m]``.  Variances are across averaged cycles.
    """

    omega: float
    epsilon: float
    cycles_settled: int
    cycles_averaged: int
    samples_per_cycle: int
    max_harmonic: int
    baseline: np.ndarray
    sin_int: np.ndarray
    cos_int: np.ndarray
    sin_var: np.ndarray
    cos_var: np.ndarray

    @property
    def n_outputs(self) -> int:
        return self.baseline.shape[0]

    @property
    def dc(self) -> np.ndarray:
        return self.cos_int[:, 0] - 2.0 * np.pi * self.baseline

    def to_json(self) -> str:
        doc = {
            "omega": self.omega,
            "epsilon": self.epsilon,
            "cycles_settled": self.cycles_settled,
            "cycles_averaged": self.cycles_averaged,
            "samples_per_cycle": self.samples_per_cycle,
            "max_harmonic": self.max_harmonic,
            "baseline": self.baseline.tolist(),
            "sin": self.sin_int.tolist(),
            "cos": self.cos_int.tolist(),
            "sin_var": self.sin_var.tolist(),
            "cos_var": self.cos_var.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ProbeRecord":
        doc = json.loads(line)
        return cls(
            omega=float(doc["omega"]),
            epsilon=float(doc["epsilon"]),
            cycles_settled=int(doc["cycles_settled"]),
            cycles_averaged=int(doc["cycles_averaged"]),
            samples_per_cycle=int(doc["samples_per_cycle"]),
            max_harmonic=int(doc["max_harmonic"]),
            baseline=np.asarray(doc["baseline"], dtype=float),
            sin_int=np.asarray(doc["sin"], dtype=float),
            cos_int=np.asarray(doc["cos"], dtype=float),
            sin_var=np.asarray(doc["sin_var"], dtype=float),
            cos_var=np.asarray(doc["cos_var"], dtype=float),
        )


def save_records(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def load_records(path) -> list[ProbeRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ProbeRecord.from_json(line))
    return out


def _cycle_integrals(y, t, omega, n_per, cycle, max_harmonic):
    """Trig-weighted integrals over one cycle window, times omega."""
    i0 = cycle * n_per
    sl = slice(i0, i0 + n_per + 1)
    yw = y[sl]
    tw = t[sl]
    dt = tw[1] - tw[0]
    sin_out = np.zeros((y.shape[1], max_harmonic + 1))
    cos_out = np.zeros((y.shape[1], max_harmonic + 1))
    for k in range(max_harmonic + 1):
        ck = np.cos(k * omega * tw)
        cos_out[:, k] = omega * np.trapezoid(yw * ck[:, None], dx=dt, axis=0)
        if k:
            sk = np.sin(k * omega * tw)
            sin_out[:, k] = omega * np.trapezoid(yw * sk[:, None], dx=dt,
                                                 axis=0)
    return sin_out, cos_out


def run_probe(sut, omega: float, epsilon: float, settle_cycles: int,
              avg_cycles: int, dt: float, max_harmonic: int,
              settle_tolerance: float | None = 1e-3,
              settle_time: float = 0.0) -> ProbeRecord:
    """Drive ``sut`` with ``eps sin(omega t)`` and extract Fourier integrals.

    The requested ``dt`` is snapped down so an integer number of samples
    tiles each cycle; at least 64 samples per cycle are required.  The
    settling prefix spans at least ``settle_cycles`` cycles and at least
    ``settle_time`` time units (slow decay rates need a time-based floor;
    the higher-harmonic integrals are orders of magnitude smaller than the
    fundamental, so leftover transients pollute them first).  The last
    settling cycle and the first averaged cycle must agree in every Fourier
    integral to ``settle_tolerance`` (relative to the dominant integral of
    each output); pass ``None`` to skip the check for noisy systems.
    """
    if omega <= 0 or epsilon <= 0:
        raise ConfigError("omega and epsilon must be positive")
    if settle_cycles < 1 or avg_cycles < 1:
        raise ConfigError("at least one settle and one averaging cycle")
    period = 2.0 * np.pi / omega
    if settle_time > 0:
        settle_cycles = max(settle_cycles,
                            int(np.ceil(settle_time / period)))
    if dt > period / 64 + 1e-12:
        raise SamplingTooCoarse(
            f"dt = {dt:.4g} gives fewer than 64 samples per cycle "
            f"(period {period:.4g})")
    n_per = int(np.ceil(period / dt - 1e-9))
    dt_s = period / n_per

    total = (settle_cycles + avg_cycles) * period
    t, y = sut.run(Sinusoid(epsilon, omega), total, dt_s)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]

    cycles = []
    for c in range(settle_cycles - 1, settle_cycles + avg_cycles):
        cycles.append(_cycle_integrals(y, t, omega, n_per, c, max_harmonic))
    last_settle = cycles[0]
    averaged = cycles[1:]
    sin_all = np.stack([s for s, _ in averaged])
    cos_all = np.stack([c for _, c in averaged])
    sin_mean = sin_all.mean(axis=0)
    cos_mean = cos_all.mean(axis=0)

    if settle_tolerance is not None:
        scale = np.maximum(np.abs(sin_mean).max(axis=1),
                           np.abs(cos_mean).max(axis=1))
        scale = np.maximum(scale, 1e-30)
        d_sin = np.abs(last_settle[0] - sin_all[0]) / scale[:, None]
        d_cos = np.abs(last_settle[1] - cos_all[0]) / scale[:, None]
        worst = max(d_sin.max(), d_cos.max())
        if worst > settle_tolerance:
            raise NotSettled(
                f"omega={omega:.6g}: settle/first-average cycles differ by "
                f"{worst:.3e} (tolerance {settle_tolerance:.1e}); "
                "increase settle_cycles")

    return ProbeRecord(
        omega=omega,
        epsilon=epsilon,
        cycles_settled=settle_cycles,
        cycles_averaged=avg_cycles,
        samples_per_cycle=n_per,
        max_harmonic=max_harmonic,
        baseline=np.asarray(sut.baseline, dtype=float).reshape(-1),
        sin_int=sin_mean,
        cos_int=cos_mean,
        sin_var=sin_all.var(axis=0),
        cos_var=cos_all.var(axis=0),
    )


def probe_sweep(sut, frequencies, epsilon: float, settle_cycles: int,
                avg_cycles: int, samples_per_cycle: int = 64,
                max_harmonic: int = 3,
                settle_tolerance: float | None = 1e-3,
                settle_time: float = 0.0,
                path=None, progress=None) -> list[ProbeRecord]:
    """One probe per frequency; records are persisted incrementally.

    ``samples_per_cycle`` sets the probe dt as ``period / samples_per_cycle``
    per frequency.  If ``path`` is given each record is appended to the file
    as soon as it is available.
    """
    freqs = [float(w) for w in frequencies]
    if any(w <= 0 for w in freqs):
        raise ConfigError("frequencies must be positive")
    if len(set(freqs)) != len(freqs):
        raise ConfigError("duplicate probe frequencies")
    if samples_per_cycle < 64:
        raise SamplingTooCoarse("need at least 64 samples per cycle")
    records = []
    if path is not None:
        open(path, "w").close()
    for w in freqs:
        dt = (2.0 * np.pi / w) / samples_per_cycle
        try:
            rec = run_probe(sut, w, epsilon, settle_cycles, avg_cycles, dt,
                            max_harmonic, settle_tolerance)
        except NotSettled:
            raise
        except Exception as exc:
            raise type(exc)(f"omega={w:.6g}: {exc}") from exc
        records.append(rec)
        if path is not None:
            with open(path, "a") as fh:
                fh.write(rec.to_json() + "\n")
        if progress is not None:
            progress(rec)
    return records


def assemble_gamma(records, stage: int, output: int) -> np.ndarray:
    """Measured stage vector for one output (1-based ``output``).

    Stage 1 and stages >= 3 give ``[sin_j, cos_j]`` rows per frequency
    (length 2q at harmonic j = stage); stage 2 additionally carries the
    baseline-corrected DC row (length 3q, ordered sin, cos, dc per
    frequency).
    """
    if stage < 1:
        raise ConfigError("stage must be >= 1")
    m = output - 1
    rows = []
    for rec in records:
        if rec.max_harmonic < stage:
            raise MissingHarmonic(
                f"record at omega={rec.omega:.6g} holds harmonics up to "
                f"{rec.max_harmonic}, stage {stage} requires {stage}")
        rows.append(rec.sin_int[m, stage])
        rows.append(rec.cos_int[m, stage])
        if stage == 2:
            rows.append(rec.dc[m])
    return np.asarray(rows, dtype=complex)
