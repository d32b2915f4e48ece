"""Dense complex linear algebra at double, double-double and exact precision."""

from nhlab.kernel.eigen import (
    balance_factors,
    eigs_dense,
    eigvals_dense,
    left_right_eigenpair,
    rank_within_tol,
)
from nhlab.kernel.exact import (
    QI,
    RealPolynomial,
    char_poly_exact,
    exact_rank,
    sturm_real_root_count,
)
from nhlab.kernel.matrix import DEFAULT_TOLERANCES, DenseMatrix, EigenPair, Tolerances

__all__ = [
    "DEFAULT_TOLERANCES",
    "DenseMatrix",
    "EigenPair",
    "QI",
    "RealPolynomial",
    "Tolerances",
    "balance_factors",
    "char_poly_exact",
    "eigs_dense",
    "eigvals_dense",
    "exact_rank",
    "left_right_eigenpair",
    "rank_within_tol",
    "sturm_real_root_count",
]
