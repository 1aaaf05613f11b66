"""CPD-based super-resolution by alternating least squares.

Each factor update folds the LR-side operators into the least-squares
problem. For mode 1, with ``B_n = A_n U_n`` and ``A_n = D_n H_n``::

    U1 = A1† · Y(1) · pinv(B3 ⊙ B2)ᵀ

where both pseudoinverses carry the same Tikhonov term ``epsilon``. The
pseudoinverse of the Khatri-Rao matrix is never formed; its transpose is
``(B3 ⊙ B2) (G + eps I)^{-1}`` with ``G = (B3ᵀB3) * (B2ᵀB2)``.

The rank controls denoising: a small rank cannot represent the noise.
"""

from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionError, DivergenceError, ParameterError
from .operators import linear_upsampling
from .tensor_core import as_volume, fold, frobenius_norm, khatri_rao, multi_mode_product, unfold


@dataclass
class CpdFactors:
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray

    def __post_init__(self):
        ranks = {u.shape[1] for u in self.factors}
        if len(ranks) != 1:
            raise DimensionError(f"factor column counts differ: {sorted(ranks)}")

    @property
    def factors(self):
        return (self.u1, self.u2, self.u3)

    @property
    def rank(self):
        return self.u1.shape[1]

    @property
    def shape(self):
        return tuple(u.shape[0] for u in self.factors)


@dataclass
class CpdConfig:
    rank: int = 500
    max_sweeps: int = 10
    rel_tol: float = 1e-4
    epsilon: float = 1.0
    init: str = "random"
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ParameterError(f"rank must be >= 1, got {self.rank}")
        if not self.rel_tol > 0:
            raise ParameterError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_sweeps < 1:
            raise ParameterError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.epsilon < 0:
            raise ParameterError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.init not in ("random", "hosvd-of-upsampled"):
            raise ParameterError(f"unknown init {self.init!r}")


class CpdResult(NamedTuple):
    volume: np.ndarray
    factors: CpdFactors
    trace: List[float]


def cpd_reconstruct(f):
    """Sum of rank-1 terms ``sum_r u1[:, r] ∘ u2[:, r] ∘ u3[:, r]``."""
    u1, u2, u3 = f.factors
    return fold(u1 @ khatri_rao(u3, u2).T, 1, f.shape)


def _kr_pinv_t(b_slow, b_fast, epsilon):
    """Transpose of the regularized pseudoinverse of ``b_slow ⊙ b_fast``."""
    gram = (b_slow.T @ b_slow) * (b_fast.T @ b_fast)
    kr = khatri_rao(b_slow, b_fast)
    if epsilon == 0:
        return kr @ scipy.linalg.pinvh(gram)
    gram[np.diag_indices_from(gram)] += epsilon
    return scipy.linalg.solve(gram, kr.T, assume_a="pos").T


def _lr_residual(y, b):
    model = fold(b[0] @ khatri_rao(b[2], b[1]).T, 1, y.shape)
    return frobenius_norm(y - model)


def _init_factors(y, ops, cfg, hr_dims):
    rng = np.random.default_rng(cfg.seed)
    R = cfg.rank
    if cfg.init == "random":
        scale = (frobenius_norm(y) / np.sqrt(R * np.prod(hr_dims))) ** (1.0 / 3.0)
        return [scale * rng.standard_normal((n, R)) for n in hr_dims]
    up = multi_mode_product(y, [linear_upsampling(op.lr_len, op.rate) for op in ops])
    out = []
    for mode, n in enumerate(hr_dims, start=1):
        u, _, _ = np.linalg.svd(unfold(up, mode), full_matrices=False)
        k = min(R, u.shape[1])
        fac = np.empty((n, R))
        fac[:, :k] = u[:, :k]
        if R > k:
            fac[:, k:] = rng.standard_normal((n, R - k)) / np.sqrt(n)
        out.append(fac)
    return out


def validate_rank(rank, lr_dims):
    """Reject ranks larger than the column count of some LR unfolding."""
    I, J, K = lr_dims
    limit = min(J * K, I * K, I * J)
    if rank > limit:
        raise ParameterError(
            f"rank {rank} exceeds the column count of an LR unfolding (min {limit})"
        )


def tf_sisr(y, ops, cfg=None):
    """Super-resolve LR volume ``y`` with the CPD/ALS pipeline.

    Returns ``CpdResult(volume, factors, trace)``; ``trace[0]`` is the LR
    residual of the initial factors and ``trace[s]`` the residual after
    sweep ``s``.
    """
    cfg = cfg or CpdConfig()
    y = as_volume(y)
    lr_dims = y.shape
    if tuple(op.lr_len for op in ops) != lr_dims:
        raise DimensionError(
            f"LR volume {lr_dims} does not match operators "
            f"{tuple(op.lr_len for op in ops)}"
        )
    hr_dims = tuple(op.hr_len for op in ops)
    validate_rank(cfg.rank, lr_dims)
    R = cfg.rank
    if frobenius_norm(y) == 0:
        zero = CpdFactors(*(np.zeros((n, R)) for n in hr_dims))
        return CpdResult(np.zeros(hr_dims), zero, [0.0])

    a = [op.composite for op in ops]
    p = [op.pinv for op in ops]
    u = _init_factors(y, ops, cfg, hr_dims)
    b = [a[n] @ u[n] for n in range(3)]
    unfolded = [unfold(y, m) for m in (1, 2, 3)]
    trace = [_lr_residual(y, b)]
    # (mode, slow partner, fast partner) in Khatri-Rao order
    order = ((0, 2, 1), (1, 2, 0), (2, 1, 0))
    for sweep in range(cfg.max_sweeps):
        for n, s, f in order:
            rhs = _kr_pinv_t(b[s], b[f], cfg.epsilon)
            u[n] = p[n] @ (unfolded[n] @ rhs)
            b[n] = a[n] @ u[n]
        res = _lr_residual(y, b)
        trace.append(res)
        if not np.isfinite(res) or not all(np.all(np.isfinite(x)) for x in u):
            raise DivergenceError(f"non-finite residual at sweep {sweep + 1}", trace)
        prev = trace[-2]
        if abs(prev - res) <= cfg.rel_tol * max(prev, np.finfo(float).tiny):
            break
    factors = CpdFactors(*u)
    return CpdResult(cpd_reconstruct(factors), factors, trace)
