"""Decide two-quantifier sentences over finite upper semilattices with top, and build the tables and trees behind them."""

from .decide import Caps, decide, decide_pi2, decide_question1, decide_sigma2, enumerate_aee_extensions
from .errors import (
    BadTransferLength,
    CapExceeded,
    DecompositionFailed,
    DepthExceeded,
    FormatError,
    InvalidTree,
    InvalidWitness,
    NotAlmostEndExtension,
    NotPi2,
    NotSigma2,
    PairDoesNotJoinToTop,
    ParseError,
    PrefixTooShort,
    Sigma2LabError,
    TooFewCoatoms,
    ValidationError,
)
from .extensions import decompose, free_extend, verify_decomposition, verify_embedding
from .order import (
    FiniteUslTop,
    are_isomorphic,
    canonical_form,
    chain,
    diamond,
    enumerate_usl_top,
    find_isomorphism,
    is_almost_end_extension,
    make_witness,
    validate,
)
from .report import Report
from .sentences import parse, prenex_pi2, prenex_sigma2
from .tables import (
    build_rep_prefix,
    build_table,
    check_homogeneity_interpolants,
    check_meet_interpolants,
    verify_coding_ready,
    verify_table,
)
from .trees import (
    UniformTreeSpec,
    apply,
    decode,
    encode_bits,
    find_splits,
    identity_tree,
    make_tree,
    restrict,
    sp_set,
    transfer,
    x_safe,
)

__version__ = "0.1.0"
