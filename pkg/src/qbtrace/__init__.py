"""Finite-dimensional boundary triples for discretized elliptic operators.

Builds quasi boundary triples from finite-difference models, evaluates the
gamma-field and Weyl function, checks Krein resolvent formulas and trace
identities for resolvent power differences, and measures singular-value decay
of those differences.
"""
__version__ = "0.1.0"

from qbtrace.errors import *  # noqa: F401,F403
from qbtrace.linalg import (  # noqa: F401
    KERNEL_BACKEND,
    SpectralDecomposition,
    WeightedSpace,
    hermitian_eig,
    solve,
    svd_values,
    trace,
    weak_schatten_quasinorm,
    weighted_adjoint,
)
from qbtrace.triple import (  # noqa: F401
    DirectSumTriple,
    QuasiTriple,
    RobinParameter,
    check_green_identity,
    gamma,
    gamma_adjoint,
    krein_dn,
    krein_robin,
    realization,
    restrict_to_kernel,
    weyl,
)
from qbtrace.calculus import derivative, fd_derivative, leibniz_expand  # noqa: F401
from qbtrace.models import (  # noqa: F401
    BoundaryOpSpec,
    ModelConfig,
    build,
    build_boundary_op,
    build_disk_modes,
    build_rect2d,
    build_sl1d,
    micro_model,
)
from qbtrace.spectral import (  # noqa: F401
    fit_decay_exponent,
    resolvent_power_diff,
    singular_value_ladder,
    trace_formula_check,
)
