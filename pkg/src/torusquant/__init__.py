"""Quantization of completely integrable systems in action-angle coordinates.

Set ``TQ_THREADS`` before import to cap BLAS/OpenMP threads.
"""

import os as _os

if _os.environ.get("TQ_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["TQ_THREADS"])

from .errors import (  # noqa: E402
    AnalyticDomainViolation,
    CheckFailure,
    InputError,
    NonCommutingPerturbation,
    NumericGuard,
    ParseError,
    TQError,
    ValidationError,
)
from .fourier import FourierPolynomial, TruncationWindow, WaveFunction, inner_product  # noqa: E402
from .operators import (  # noqa: E402
    AffineObservable,
    LinearOperator,
    Representation,
    action_operator,
    poisson_bracket,
    quantize_affine,
)
from .spectra import HamiltonianSpec, evolve, quantize_hamiltonian, spectrum  # noqa: E402
from .holonomy import ParameterPath, PerturbationSpec, holonomy_operator  # noqa: E402

__version__ = "0.1.0"
