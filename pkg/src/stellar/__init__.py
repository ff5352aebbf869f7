"""Stellar representation of single-mode continuous-variable pure states.

States of finite stellar rank are handled exactly as a Gaussian unitary
acting on a finite Fock superposition (the core state); arbitrary states
enter as truncated Fock amplitude vectors.
"""

from .analysis import (
    RankReport,
    StellarDecomposition,
    decompose,
    gaussian_convertible,
    group_roots,
    husimi,
    rank_approximant,
    rank_report,
    reconstruct,
    stellar_eval,
    stellar_rank,
    stellar_roots,
)
from .errors import (
    AnnihilatedToZero,
    BadArguments,
    CutoffTooSmall,
    NotConverged,
    OracleMismatch,
    RankZero,
    StateFileError,
    StellarError,
    ZeroVector,
)
from .fock import (
    FockState,
    OperatorMatrix,
    basis_state,
    cutoff_distance,
    fidelity,
    normalize,
    oracle_operator,
    trace_distance,
)
from .gaussian import (
    CanonicalState,
    CoreState,
    GaussianTriple,
    GaussianUnitary,
    PForm,
    apply_gaussian,
    canonical_params,
    compose,
    extract_core,
    fock_amplitudes,
    hermite,
    photon_add,
    photon_subtract,
    stellar_triple,
    to_p_form,
)
from .robustness import (
    NGFResult,
    RobustnessResult,
    fidelity_threshold,
    ngf,
    projection_fidelity,
    robustness,
    robustness_rank1_closed_form,
)

__version__ = "0.1.0"
