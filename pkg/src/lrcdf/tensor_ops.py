"""Small tensor toolkit: Khatri-Rao products, unfoldings, CP reconstruction.

Convention used throughout: the mode-n unfolding has rows indexed by mode n
and columns enumerating the remaining modes in ascending order with the
lowest-numbered mode varying fastest.  ``khatri_rao`` pairs with this by
letting the first matrix in the list vary fastest.
"""

import functools

import numpy as np

from .errors import CapacityError

DEFAULT_CELL_CAP = 1 << 24

_DIM_LETTERS = "abcdefghijklmnopq"


def khatri_rao(matrices):
    """Column-wise Kronecker product; the first matrix's row index varies fastest.

    All matrices must share the same column count R.  The result has
    ``prod(I_k)`` rows and R columns.
    """
    mats = [np.asarray(m, dtype=float) for m in matrices]
    if not mats:
        raise ValueError("khatri_rao needs at least one matrix")
    out = mats[0]
    for m in mats[1:]:
        out = (m[:, None, :] * out[None, :, :]).reshape(-1, out.shape[1])
    return out


def unfold(tensor, mode):
    """Mode-n unfolding, shape (I_n, prod of the other sizes).

    Column j decomposes over the remaining modes in ascending order with the
    lowest-numbered mode varying fastest, matching ``khatri_rao`` of the
    remaining factors in ascending order.
    """
    t = np.asarray(tensor)
    perm = [mode] + [k for k in range(t.ndim) if k != mode]
    return np.transpose(t, perm).reshape(t.shape[mode], -1, order="F")


def cp_tensor(weights, factors, max_cells=DEFAULT_CELL_CAP):
    """Dense tensor of the CP model ``sum_h w[h] outer(factors[0][:,h], ...)``."""
    shape = tuple(f.shape[0] for f in factors)
    cells = int(np.prod([float(s) for s in shape]))
    if cells > max_cells:
        raise CapacityError(f"{cells} cells exceed cap {max_cells}")
    out = np.zeros(shape)
    for h in range(len(weights)):
        out += weights[h] * functools.reduce(
            np.multiply.outer, [f[:, h] for f in factors]
        )
    return out


def _subscripts(ndim, skip=None):
    if ndim > len(_DIM_LETTERS):
        raise ValueError(f"at most {len(_DIM_LETTERS)} modes supported")
    dims = _DIM_LETTERS[:ndim]
    ins = [dims]
    for k in range(ndim):
        if k != skip:
            ins.append(dims[k] + "r")
    target = "r" if skip is None else dims[skip] + "r"
    return ",".join(ins) + "->" + target


def mttkrp(tensor, factors, mode):
    """Matricized-tensor times Khatri-Rao product along ``mode``.

    Equals ``unfold(tensor, mode) @ khatri_rao(other factors ascending)``
    but contracts mode by mode without forming the Khatri-Rao matrix.
    """
    ops = [tensor] + [f for k, f in enumerate(factors) if k != mode]
    return np.einsum(_subscripts(tensor.ndim, skip=mode), *ops, optimize=True)


def full_contraction(tensor, factors):
    """Vector w with w[h] = <tensor, outer product of the h-th columns>."""
    return np.einsum(_subscripts(tensor.ndim), tensor, *factors, optimize=True)
