"""Finite-dimensional Hilbert complexes and their annihilating skew block operators."""
from .annihilating import (
    ProductSpace,
    SkewBlockOperator,
    appendix_product_table,
    build,
    equivalence_check,
    fredholm_report,
    generalized_helmholtz,
    poincare_constant,
    restricted_iso,
    s_squared_blocks,
    verify_annihilating,
)
from .complexes import (
    HilbertComplexSpec,
    cohomology,
    corrupt_complex,
    dual_complex,
    hodge_decompose,
    hodge_laplacian,
    random_complex,
    validate_complex,
)
from .derham import (
    BoundaryConditionSpec,
    GridDomain3D,
    MaterialWeights,
    SimplicialComplexMesh,
    build_derham,
    build_forms_complex,
    build_interval,
    dual_grid_dirichlet,
)
from .estimators import HelmholtzProjector, HodgeProjector
from .exceptions import (
    CertificateViolationError,
    ChainInconsistencyError,
    CohomologyMismatchError,
    InvalidSpaceError,
    SingularSystemError,
    SpaceMismatchError,
    TheoremViolationError,
)
from .factorization import (
    EvolutionProblem,
    component_solve,
    direct_resolvent_apply,
    evolve,
    factored_resolvent_apply,
)
from .linmap import InnerProductSpace, LinearMap, SubspaceBasis, adjoint, rank_and_kernel
from .serialization import load_complex, save_complex

__version__ = "0.1.0"
