"""Separable blur/decimation operators and their Tikhonov pseudoinverses.

Each mode ``n`` of the degradation is the matrix ``A_n = D_n H_n`` where
``H_n`` is a circulant Gaussian blur and ``D_n`` keeps every ``rate``-th
sample. The deconvolution side uses ``(A^T A + eps I)^{-1} A^T``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionError, ParameterError
from .tensor_core import multi_mode_product

__all__ = [
    "GaussianKernel1D",
    "ModeOperator",
    "gaussian_kernel",
    "circulant_blur",
    "decimation",
    "tikhonov_pinv",
    "build_mode_operator",
    "build_operators",
    "apply_forward_all_modes",
    "apply_pinv_all_modes",
    "linear_upsampling",
    "upsample_linear",
]


@dataclass(frozen=True)
class GaussianKernel1D:
    sigma: float
    taps: np.ndarray = field(repr=False)

    @property
    def radius(self):
        return len(self.taps) // 2


def gaussian_kernel(sigma, radius_in_sigmas=3.0):
    """Integer-offset samples of a Gaussian truncated at ``±radius_in_sigmas*sigma``.

    The taps are renormalized to unit sum after truncation.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if not radius_in_sigmas > 0:
        raise ParameterError(f"kernel radius must be positive, got {radius_in_sigmas}")
    half = int(math.ceil(radius_in_sigmas * sigma))
    t = np.arange(-half, half + 1, dtype=np.float64)
    taps = np.exp(-(t * t) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    return GaussianKernel1D(float(sigma), taps)


def circulant_blur(n, kernel):
    """``n x n`` circulant matrix whose row ``i`` is the kernel centred at ``i``."""
    taps = kernel.taps
    if len(taps) > n:
        raise ParameterError(
            f"kernel of length {len(taps)} is longer than the axis ({n})"
        )
    c = len(taps) // 2
    h = np.zeros((n, n))
    rows = np.arange(n)
    for t, w in enumerate(taps):
        h[rows, (rows + t - c) % n] += w
    return h


def decimation(n, rate, mode="decimate"):
    """``(n/rate) x n`` downsampling matrix.

    ``"decimate"`` keeps indices 0, rate, 2*rate, ...; ``"average"`` averages
    each block of ``rate`` consecutive samples.
    """
    if rate < 1 or n % rate:
        raise ParameterError(f"axis length {n} is not divisible by rate {rate}")
    m = n // rate
    d = np.zeros((m, n))
    if mode == "decimate":
        d[np.arange(m), np.arange(m) * rate] = 1.0
    elif mode == "average":
        for off in range(rate):
            d[np.arange(m), np.arange(m) * rate + off] = 1.0 / rate
    else:
        raise ParameterError(f"unknown downsampling mode {mode!r}")
    return d


def tikhonov_pinv(a, epsilon):
    """Return ``(A^T A + epsilon I)^{-1} A^T``.

    For ``epsilon == 0`` the plain Moore-Penrose pseudoinverse is returned,
    which is the limit of the regularized form and stays defined when
    ``A^T A`` is singular.
    """
    a = np.asarray(a, dtype=np.float64)
    if epsilon < 0:
        raise ParameterError(f"epsilon must be non-negative, got {epsilon}")
    if epsilon == 0:
        return np.linalg.pinv(a)
    gram = a.T @ a
    gram[np.diag_indices_from(gram)] += epsilon
    return scipy.linalg.solve(gram, a.T, assume_a="pos")


@dataclass(frozen=True)
class ModeOperator:
    """Blur, downsampling and cached pseudoinverse for one mode."""

    mode: int
    hr_len: int
    rate: int
    epsilon: float
    blur: np.ndarray = field(repr=False)
    down: np.ndarray = field(repr=False)
    composite: np.ndarray = field(repr=False)
    pinv: np.ndarray = field(repr=False)

    @property
    def lr_len(self):
        return self.hr_len // self.rate


def build_mode_operator(hr_len, rate, kernel, epsilon=1.0, mode=1, downsample="decimate"):
    if rate < 1 or hr_len % rate:
        raise ParameterError(f"HR length {hr_len} is not divisible by rate {rate}")
    blur = circulant_blur(hr_len, kernel)
    down = decimation(hr_len, rate, downsample)
    composite = down @ blur
    pinv = tikhonov_pinv(composite, epsilon)
    for arr in (blur, down, composite, pinv):
        arr.setflags(write=False)
    return ModeOperator(
        mode=mode,
        hr_len=int(hr_len),
        rate=int(rate),
        epsilon=float(epsilon),
        blur=blur,
        down=down,
        composite=composite,
        pinv=pinv,
    )


def build_operators(hr_dims, sigmas, rate, epsilon=1.0, kernel_radius=3.0,
                    downsample="decimate"):
    """Three mode operators for an HR volume of shape ``hr_dims``."""
    if len(hr_dims) != 3 or len(sigmas) != 3:
        raise ParameterError("need three HR dimensions and three sigmas")
    return tuple(
        build_mode_operator(
            n, rate, gaussian_kernel(s, kernel_radius), epsilon,
            mode=m, downsample=downsample,
        )
        for m, (n, s) in enumerate(zip(hr_dims, sigmas), start=1)
    )


def _check_dims(x, expected):
    if tuple(x.shape) != tuple(expected):
        raise DimensionError(f"volume shape {x.shape} does not match operators {tuple(expected)}")


def apply_forward_all_modes(x, ops):
    """Noiseless degradation ``x ×_1 A_1 ×_2 A_2 ×_3 A_3``."""
    x = np.asarray(x, dtype=np.float64)
    _check_dims(x, [op.hr_len for op in ops])
    return multi_mode_product(x, [op.composite for op in ops])


def apply_pinv_all_modes(y, ops):
    """Separable Tikhonov deconvolution ``y ×_1 A_1† ×_2 A_2† ×_3 A_3†``."""
    y = np.asarray(y, dtype=np.float64)
    _check_dims(y, [op.lr_len for op in ops])
    return multi_mode_product(y, [op.pinv for op in ops])


def linear_upsampling(lr_len, rate):
    """Periodic linear interpolation matrix (``lr_len*rate x lr_len``).

    LR sample ``l`` sits at HR index ``l*rate``, matching :func:`decimation`.
    """
    n = lr_len * rate
    pos = np.arange(n) / rate
    lo = np.floor(pos).astype(int)
    frac = pos - lo
    u = np.zeros((n, lr_len))
    rows = np.arange(n)
    u[rows, lo % lr_len] += 1.0 - frac
    u[rows, (lo + 1) % lr_len] += frac
    return u


def upsample_linear(y, rate):
    """Trilinear (periodic) upsampling baseline."""
    y = np.asarray(y, dtype=np.float64)
    return multi_mode_product(y, [linear_upsampling(n, rate) for n in y.shape])
