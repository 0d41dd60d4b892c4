"""Small shared linear-algebra helpers for the Gibbs updates."""

import numpy as np

from .errors import NumericalError

# Jitter ladder applied to failed Cholesky factorizations: absolute ridge
# added to the diagonal, escalating tenfold per rung.
_JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def chol_with_jitter(a, step=None, iteration=None):
    """Lower Cholesky factor of ``a``, retrying with a diagonal ridge.

    Raises NumericalError once the ladder is exhausted.
    """
    eye = np.eye(a.shape[0])
    for jitter in _JITTER_LADDER:
        try:
            return np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        "Cholesky factorization failed beyond jitter ladder "
        f"(max jitter {_JITTER_LADDER[-1]:g})",
        step=step,
        iteration=iteration,
    )


def chol_solve(chol_lower, b):
    """Solve ``A x = b`` given the lower Cholesky factor of A."""
    y = np.linalg.solve(chol_lower, b)
    return np.linalg.solve(chol_lower.T, y)


def symmetrize(a):
    """Average a nearly-symmetric matrix with its transpose."""
    return 0.5 * (a + a.T)
