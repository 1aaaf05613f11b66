"""Truncated-HOSVD denoising followed by separable Tikhonov deconvolution.

The LR volume ``Y`` is decomposed as ``Σ ×1 V1 ×2 V2 ×3 V3`` with orthonormal
``Vn`` taken from the left singular vectors of each unfolding. The mode-n
singular value ``SVn(i)`` is the Frobenius norm of the i-th mode-n slice of
``Σ``. Components whose singular value falls below the per-mode threshold
(or beyond the per-mode count) are dropped, and the pseudoinverses
``(Dn Hn)†`` are folded into the remaining factors so the HR estimate is
``Σ̄ ×1 (A1† V̄1) ×2 (A2† V̄2) ×3 (A3† V̄3)``.
"""

import time
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple, Tuple

import numpy as np

from .errors import DimensionError, ParameterError
from .tensor_core import as_volume, multi_mode_product, unfold

# Use the Gram matrix when the other-modes product is at least this many
# times the mode length.
GRAM_RATIO = 4
_SIGN_TOL = 1e-12


@dataclass(frozen=True)
class TuckerModel:
    core: np.ndarray
    factors: Tuple[np.ndarray, np.ndarray, np.ndarray]
    sv: Tuple[np.ndarray, np.ndarray, np.ndarray]
    clamped: bool = False

    @property
    def shape(self):
        return tuple(v.shape[0] for v in self.factors)

    @property
    def ranks(self):
        return tuple(v.shape[1] for v in self.factors)


@dataclass(frozen=True)
class TruncationRule:
    """Per-mode rule: ``("count", R_n)`` or ``("threshold", tau_n)``."""

    modes: Tuple[Tuple[str, float], Tuple[str, float], Tuple[str, float]]

    def __post_init__(self):
        if len(self.modes) != 3:
            raise ParameterError("a truncation rule needs one entry per mode")
        for kind, value in self.modes:
            if kind == "count":
                if int(value) != value or value < 1:
                    raise ParameterError(f"count must be a positive integer, got {value}")
            elif kind == "threshold":
                if not value >= 0:
                    raise ParameterError(f"threshold must be >= 0, got {value}")
            else:
                raise ParameterError(f"unknown truncation kind {kind!r}")

    @classmethod
    def counts(cls, r1, r2, r3):
        return cls(tuple(("count", int(r)) for r in (r1, r2, r3)))

    @classmethod
    def thresholds(cls, t1, t2, t3):
        return cls(tuple(("threshold", float(t)) for t in (t1, t2, t3)))

    def describe(self):
        return [{"kind": k, "value": v} for k, v in self.modes]


class TuckerResult(NamedTuple):
    volume: np.ndarray
    model: TuckerModel
    runtime_s: float


def _fix_signs(v):
    # first entry above tolerance of each column made non-negative
    big = np.abs(v) > _SIGN_TOL
    first = np.argmax(big, axis=0)
    signs = np.sign(v[first, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def leading_subspace(m):
    """Orthonormal left singular vectors of ``m`` (``min(m.shape)`` of them)."""
    rows, cols = m.shape
    k = min(rows, cols)
    if cols >= GRAM_RATIO * rows:
        w, vecs = np.linalg.eigh(m @ m.T)
        vecs = vecs[:, ::-1][:, :k]
    else:
        vecs = np.linalg.svd(m, full_matrices=False)[0][:, :k]
    return _fix_signs(vecs)


def slice_norms(core, mode):
    return np.linalg.norm(unfold(core, mode), axis=1)


def hosvd(y):
    """Full (untruncated) HOSVD of ``y``, columns sorted by singular value."""
    y = as_volume(y)
    factors = [leading_subspace(unfold(y, m)) for m in (1, 2, 3)]
    core = multi_mode_product(y, factors, transpose=True)
    svs = []
    for mode in (1, 2, 3):
        sv = slice_norms(core, mode)
        order = np.argsort(-sv, kind="stable")
        factors[mode - 1] = factors[mode - 1][:, order]
        core = np.take(core, order, axis=mode - 1)
        svs.append(sv[order])
    return TuckerModel(core=core, factors=tuple(factors), sv=tuple(svs))


def _kept(sv, current, kind, value):
    if kind == "count":
        return min(int(value), current), False
    keep = int(np.count_nonzero(sv[:current] >= value))
    if keep == 0:
        return 1, True
    return keep, False


def truncate(m, rule):
    """Keep the leading components of each mode according to ``rule``.

    The truncated core is the corresponding sub-block of the full core, which
    equals ``Y ×1 V̄1ᵀ ×2 V̄2ᵀ ×3 V̄3ᵀ`` because the factors are orthonormal.
    A threshold that would drop every component keeps one and sets
    ``clamped``.
    """
    keeps, clamped = [], m.clamped
    for mode, (kind, value) in enumerate(rule.modes):
        k, c = _kept(m.sv[mode], m.factors[mode].shape[1], kind, value)
        keeps.append(k)
        clamped = clamped or c
    if clamped and not m.clamped:
        warnings.warn("truncation threshold excluded every component of a mode; kept one",
                      RuntimeWarning, stacklevel=2)
    core = m.core[: keeps[0], : keeps[1], : keeps[2]]
    factors = tuple(v[:, :k] for v, k in zip(m.factors, keeps))
    return replace(m, core=np.ascontiguousarray(core), factors=factors, clamped=clamped)


def tucker_reconstruct(m):
    return multi_mode_product(m.core, m.factors)


def td_sisr(y, ops, rule):
    """Denoise ``y`` by truncated HOSVD, then deconvolve mode by mode.

    Returns ``TuckerResult(volume, model, runtime_s)``.
    """
    t0 = time.perf_counter()
    y = as_volume(y)
    if tuple(op.lr_len for op in ops) != y.shape:
        raise DimensionError(
            f"LR volume {y.shape} does not match operators "
            f"{tuple(op.lr_len for op in ops)}"
        )
    model = truncate(hosvd(y), rule)
    lifted = [op.pinv @ v for op, v in zip(ops, model.factors)]
    x_hat = multi_mode_product(model.core, lifted)
    return TuckerResult(x_hat, model, time.perf_counter() - t0)


def sv_spectrum(m):
    """Mode-wise singular value series ``[(index, sv), ...]`` for each mode.

    Indices start at 1, as used for the log-scale spectra plots.
    """
    return [np.column_stack([np.arange(1, len(s) + 1), s]) for s in m.sv]
