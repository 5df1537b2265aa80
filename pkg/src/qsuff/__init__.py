"""Sufficient subalgebras of quantum statistical models.

Finds the smallest real *-algebra and Jordan algebra that keep all the
statistical information of a family of density operators (and their
derivatives), builds the conditional expectations onto them, and reads
off the block decomposition ``X = U ((+)_i x_i (x) P_i) U*``.
"""
from .algebra import (
    RealSubspace,
    center,
    commutant,
    generate_jordan,
    generate_star,
    member,
    project,
    span,
)
from .errors import (
    ConsistencyError,
    InputError,
    NotAbsolutelyContinuousError,
    NotHermitianError,
    NotInRangeError,
    NotModularInvariantError,
    NotPSDError,
    NotSufficientError,
    QsuffError,
    StructureError,
)
from .kernels import BACKEND, available_backends, set_backend
from .matcore import DEFAULT_TOL, Tolerances, geninv, psd_sqrt, spin_factor
from .model import (
    Model,
    ModelElement,
    Superoperator,
    d_tilde,
    likelihood_ratio_set,
    make_model,
    modular_superop,
    restrict_to_HS,
    sld,
    sqrt_likelihood_ratio,
)
from .report import ResidualTable
from .structure import (
    BlockDescriptor,
    KIDecomposition,
    StructureDecomposition,
    classical_fisher,
    identify_structure,
    jordan_dim,
    ki_decompose,
    sld_fisher,
    support_size_bound,
)
from .sufficiency import (
    SufficiencyCertificate,
    conditional_expectation,
    faithful_extension,
    fixed_point_pipeline,
    likelihood_in_algebra_check,
    minimal_sufficient_jordan,
    minimal_sufficient_star,
    ratio_membership,
    verify_sufficient,
)

__version__ = "0.1.0"
