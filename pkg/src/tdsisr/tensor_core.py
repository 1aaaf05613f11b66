"""Dense order-3 tensor primitives.

Volumes are plain ``float64`` numpy arrays of shape ``(I, J, K)``. Modes are
numbered 1, 2, 3. The mode-n unfolding places fiber ``(j, k)`` of mode 1 at
column ``j + k*J`` (remaining indices in increasing mode order, the lowest
one varying fastest), so that

    unfold([[U1, U2, U3]], 1) == U1 @ khatri_rao(U3, U2).T

and cyclically for the other modes.
"""

import numpy as np

from .errors import DimensionError

__all__ = [
    "as_volume",
    "unfold",
    "fold",
    "mode_n_product",
    "multi_mode_product",
    "khatri_rao",
    "frobenius_norm",
]


def _check_mode(mode):
    if mode not in (1, 2, 3):
        raise DimensionError(f"mode must be 1, 2 or 3, got {mode!r}")
    return mode - 1


def as_volume(x):
    """Return ``x`` as a finite float64 array of shape (I, J, K)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"expected an order-3 tensor, got shape {x.shape}")
    if any(d < 1 for d in x.shape):
        raise DimensionError(f"all dimensions must be positive, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("volume contains NaN or Inf")
    return x


def unfold(x, mode):
    """Mode-n unfolding: an ``x.shape[mode-1] x (product of the rest)`` matrix."""
    ax = _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"expected an order-3 tensor, got shape {x.shape}")
    return np.reshape(np.moveaxis(x, ax, 0), (x.shape[ax], -1), order="F")


def fold(m, mode, dims):
    """Inverse of :func:`unfold`."""
    ax = _check_mode(mode)
    m = np.asarray(m, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise DimensionError(f"dims must have length 3, got {dims}")
    rest = [d for i, d in enumerate(dims) if i != ax]
    if m.ndim != 2 or m.shape != (dims[ax], rest[0] * rest[1]):
        raise DimensionError(
            f"matrix of shape {m.shape} cannot be folded along mode {mode} "
            f"into {dims}"
        )
    t = np.reshape(m, (dims[ax], rest[0], rest[1]), order="F")
    return np.moveaxis(t, 0, ax)


def mode_n_product(x, p, mode):
    """Compute ``x ×_mode p``.

    ``p`` must have ``x.shape[mode-1]`` columns; that dimension of the result
    becomes ``p.shape[0]``.
    """
    ax = _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != x.shape[ax]:
        raise DimensionError(
            f"matrix of shape {p.shape} does not match mode {mode} of "
            f"tensor with shape {x.shape}"
        )
    out = np.tensordot(p, x, axes=([1], [ax]))
    return np.ascontiguousarray(np.moveaxis(out, 0, ax))


def multi_mode_product(x, matrices, transpose=False):
    """Apply one matrix per mode: ``x ×_1 P1 ×_2 P2 ×_3 P3``.

    ``None`` entries are skipped. With ``transpose=True`` each ``Pn.T`` is used.
    """
    for mode, p in enumerate(matrices, start=1):
        if p is None:
            continue
        x = mode_n_product(x, p.T if transpose else p, mode)
    return x


def khatri_rao(a, b):
    """Column-wise Kronecker product.

    Column ``r`` of the result is ``np.kron(a[:, r], b[:, r])``; the row index
    is ``ia * b.shape[0] + ib``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"Khatri-Rao operands need equal column counts, got {a.shape} "
            f"and {b.shape}"
        )
    return (a[:, None, :] * b[None, :, :]).reshape(-1, a.shape[1])


def frobenius_norm(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.sum(x * x)))
