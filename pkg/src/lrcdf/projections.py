"""Projection operators for the feasible set of the CDF factorization.

Factor columns must be discretized 1-D CDFs (non-negative, non-decreasing,
ending at 1) and the mixture weights must lie on the probability simplex.
All three operators are pure functions of their input vector.
"""

import numpy as np

__all__ = [
    "isotonic_project",
    "valid_cdf_project",
    "valid_cdf_project_columns",
    "simplex_project",
]


def isotonic_project(values):
    """Least-squares nearest non-decreasing vector (pool-adjacent-violators).

    Adjacent entries that violate monotonicity are merged into blocks and
    replaced by the block average, back-merging as far as needed.  Equal
    adjacent values are not violations and are left untouched.  The result
    is the unique Euclidean projection onto the monotone cone, and the
    operator is idempotent.

    Parameters
    ----------
    values : array_like, shape (I,)

    Returns
    -------
    ndarray, shape (I,)
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("isotonic_project expects a non-empty 1-D vector")
    means = []
    counts = []
    for x in v:
        means.append(x)
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m_hi, c_hi = means.pop(), counts.pop()
            m_lo, c_lo = means.pop(), counts.pop()
            c = c_lo + c_hi
            means.append((m_lo * c_lo + m_hi * c_hi) / c)
            counts.append(c)
    return np.repeat(means, counts)


def valid_cdf_project(values):
    """Project a vector onto the set of valid discretized CDF columns.

    Applies ``isotonic_project``, clamps to [0, 1], then pins the last entry
    to exactly 1.  The composition is not the exact Euclidean projection onto
    the intersection, but it always lands in the feasible set and is
    idempotent.

    Returns
    -------
    ndarray, shape (I,) -- non-decreasing, within [0, 1], last entry 1.0
    """
    out = np.clip(isotonic_project(values), 0.0, 1.0)
    out[-1] = 1.0
    return out


def valid_cdf_project_columns(matrix):
    """Apply ``valid_cdf_project`` to every column of a matrix."""
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    out = np.empty_like(mat)
    for h in range(mat.shape[1]):
        out[:, h] = valid_cdf_project(mat[:, h])
    return out


def simplex_project(values):
    """Euclidean projection onto the probability simplex.

    Uses the sort-and-threshold method: sort descending, find the largest
    prefix whose shifted average keeps entries positive, subtract the
    threshold and clip at zero.

    Returns
    -------
    ndarray, shape (R,) -- non-negative, summing to 1
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("simplex_project expects a non-empty 1-D vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    feasible = u + (1.0 - css) / k > 0
    rho = k[feasible][-1]
    theta = (1.0 - css[feasible][-1]) / rho
    return np.maximum(v + theta, 0.0)
