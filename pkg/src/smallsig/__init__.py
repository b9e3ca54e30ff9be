"""Small-signal stability toolkit for linear and linearized DAEs.

Modules: ``pencil`` (matrix pencils, QZ, Moebius transforms), ``dae``
(linearized models), ``participation`` (participation factors), ``fractional``
(Oustaloup approximation and fractional closed loops), ``delay`` (retarded
systems and stability maps), ``integrator`` (trapezoidal DAE/DDAE
integration), ``toymodel`` and ``io``.
"""

from .errors import (  # noqa: F401
    InconsistentInitialCondition, InputError, NewtonDivergence, NonRegularPencil, NumericalError,
    PreconditionError, RepeatedEigenvalue, SingularJacobian, ToolkitError,
)
from .pencil import (  # noqa: F401
    MatrixPencil, EigenSolution, MoebiusCoeffs, chordal_distance, eigen, is_regular, moebius_transform, prime_spectrum,
)
from .dae import LinearDAE, augment_pencil, reduce_state_matrix, builtin_model  # noqa: F401

__version__ = "0.1.0"
