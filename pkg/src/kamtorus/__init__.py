"""Semiclassical KAM renormalization on the torus.

Library layout:

* ``symbols``      — exact mode calculus (norms, Moyal product, Lie series),
* ``diophantine``  — nonresonance certificates for frequency vectors,
* ``cohomology``   — small-divisor solves of the transport bracket equation,
* ``renormalize``  — the counterterm iteration and its unitary assembly,
* ``classical``    — the quadratic conjugacy scheme for perturbed fields and
                     the induced composition unitaries,
* ``quantize``     — truncated Weyl matrices, spectra, operator norms,
* ``wigner``       — Wigner pairings, densities, measure diagnostics,
* ``experiments``  — config-driven pipelines; ``cli`` wraps them.
"""

from .symbols import (
    DEFAULT_TAIL_TOL,
    DivergentLieSeriesError,
    LatticeMismatchError,
    ModeSymbol,
    NormParams,
    SemiclassicalScale,
    ad_series,
    conjugate,
    flow_derivative,
    lie_conjugate,
    moyal,
    moyal_commutator,
    multiply,
    poisson,
    transport_commutator,
)
from .diophantine import (
    DiophantineCert,
    ResonantFrequencyError,
    best_constant,
    certify_best,
    check,
)
from .cohomology import CertificateTooSmallError, NearResonantError, bound_check, solve
from .quantize import (
    BandExceedsTruncationError,
    TorusOperator,
    basis_k,
    operator_norm,
    spectrum,
    transport_matrix,
    weyl_matrix,
    window_spectrum,
)
from .renormalize import (
    ContractionFailureError,
    FixedPointFailureError,
    KamConstants,
    KamSchedule,
    KamState,
    TruncationTooSmallError,
    assemble_unitary,
    conjugation_residuals,
    counterterm,
    renormalized_operator,
    run,
    smallness_check,
    smallness_threshold,
    step,
)
from .classical import (
    DiffeoBreakdownError,
    DivergenceError,
    FrequencyMap,
    GridTooSmallError,
    SymplecticLift,
    TorusDiffeo,
    TorusVectorField,
    kam_conjugate,
    linear_transport_matrix,
    symplectic_lift,
    transport_unitary,
    verify_egorov,
)
from .wigner import (
    StateVector,
    density,
    density_flatness,
    haar_prediction,
    measure_diagnostics,
    wigner_eval,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
