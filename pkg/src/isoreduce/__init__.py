"""Data-driven identification of nonlinear isostable reduced-order models.

The package infers reduced models of the form
``psi_k' = lam_k psi_k + R_k(psi) u(t)``, ``y = y0 + G(psi)`` for
stable-fixed-point systems purely from input/output data: sinusoidal probes
feed stage-wise least-squares fits of the polynomial expansion tensors, with
eigenvalues estimated from unforced data and refined by Newton iteration.
Built-in testbeds and an independent forward-computation oracle support
validation end to end.
"""

from . import errors
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
from .model_core import (
    ExpansionTensor,
    ReducedModel,
    ReducedModelSUT,
    multi_indices,
    simulate_reduced,
)
from .order_fitting import (
    FitState,
    HarmonicLedger,
    StageProblem,
    build_stage,
    fit_reduced_model,
    propagate_harmonics,
    solve_stage,
    stage_unknowns,
)
from .probe_engine import (
    ProbeRecord,
    assemble_gamma,
    load_records,
    probe_sweep,
    run_probe,
    save_records,
)
from .signals import Chirp, InputSignal, SampledSignal, Sinusoid, \
    SumOfSinusoids, Zero

__version__ = "0.1.0"
