"""Scalar input signals u(t) shared by the testbeds and the reduced model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


class InputSignal:
    """Callable scalar signal; subclasses must be vectorized over ``t``."""

    def __call__(self, t):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(spec: dict) -> "InputSignal":
        kind = spec.get("kind")
        if kind == "zero":
            return Zero()
        if kind == "sinusoid":
            return Sinusoid(spec["amplitude"], spec["omega"])
        if kind == "sum_of_sinusoids":
            return SumOfSinusoids([(c["amplitude"], c["omega"])
                                   for c in spec["components"]])
        if kind == "chirp":
            return Chirp(spec["amplitude"], spec["sweep"])
        if kind == "table":
            return SampledSignal(np.asarray(spec["times"], dtype=float),
                                 np.asarray(spec["values"], dtype=float))
        raise ConfigError(f"unknown input signal kind {kind!r}")


@dataclass
class Zero(InputSignal):
    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def to_dict(self):
        return {"kind": "zero"}


@dataclass
class Sinusoid(InputSignal):
    """u(t) = amplitude * sin(omega * t)."""

    amplitude: float
    omega: float

    def __call__(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t, dtype=float))

    def to_dict(self):
        return {"kind": "sinusoid", "amplitude": self.amplitude,
                "omega": self.omega}


class SumOfSinusoids(InputSignal):
    """u(t) = sum_i amplitude_i * sin(omega_i * t)."""

    def __init__(self, components):
        self.components = [(float(a), float(w)) for a, w in components]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, w in self.components:
            out += a * np.sin(w * t)
        return out

    def to_dict(self):
        return {"kind": "sum_of_sinusoids",
                "components": [{"amplitude": a, "omega": w}
                               for a, w in self.components]}


@dataclass
class Chirp(InputSignal):
    """u(t) = amplitude * sin(t^2 / sweep), a slow-to-fast frequency sweep."""

    amplitude: float
    sweep: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.sin(t * t / self.sweep)

    def to_dict(self):
        return {"kind": "chirp", "amplitude": self.amplitude,
                "sweep": self.sweep}


class SampledSignal(InputSignal):
    """Linearly interpolated table; constant beyond the endpoints."""

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ConfigError("table times/values must be matching 1-D arrays")
        if np.any(np.diff(times) <= 0):
            raise ConfigError("table times must be strictly increasing")
        self.times = times
        self.values = values

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.times, self.values)

    def to_dict(self):
        return {"kind": "table", "times": self.times.tolist(),
                "values": self.values.tolist()}
