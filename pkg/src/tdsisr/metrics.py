"""Masked PSNR, 3D SSIM, Dice overlap and threshold segmentation."""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import DimensionError, ParameterError

DB_CAP = 200.0

SSIM_SIGMA = 1.5
SSIM_RADIUS = 5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    psnr_db: float
    ssi: float
    dice: Optional[float] = None
    runtime_s: float = 0.0
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _pair(ref, test):
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise DimensionError(f"shape mismatch {ref.shape} vs {test.shape}")
    return ref, test


def _mask(mask, shape):
    if mask is None:
        return np.ones(shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise DimensionError(f"mask shape {mask.shape} does not match {shape}")
    if not mask.any():
        raise ParameterError("mask is empty")
    return mask


def dynamic_range(ref):
    return float(np.max(ref) - np.min(ref))


def psnr(ref, test, mask=None):
    """PSNR with peak = full-volume range of ``ref`` and MSE over ``mask``."""
    ref, test = _pair(ref, test)
    mask = _mask(mask, ref.shape)
    mse = np.mean((ref[mask] - test[mask]) ** 2)
    peak = dynamic_range(ref)
    if mse == 0:
        return DB_CAP
    if peak == 0:
        return -DB_CAP
    return float(min(DB_CAP, 10.0 * np.log10(peak * peak / mse)))


def ssim_window_1d(sigma=SSIM_SIGMA, radius=SSIM_RADIUS):
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(t * t) / (2 * sigma * sigma))
    return w / w.sum()


def _smooth_valid(x, w):
    r = len(w) // 2
    for ax in range(3):
        x = ndimage.correlate1d(x, w, axis=ax, mode="constant")
    return x[r:-r, r:-r, r:-r] if r else x


def ssim_map(ref, test, data_range=None):
    """Local SSIM at every voxel whose whole window lies inside the volume.

    Returns an array of shape ``(I - 2r, J - 2r, K - 2r)``.
    """
    ref, test = _pair(ref, test)
    w = ssim_window_1d()
    r = SSIM_RADIUS
    if min(ref.shape) < 2 * r + 1:
        raise ParameterError(
            f"volume {ref.shape} is smaller than the {2 * r + 1}^3 SSIM window"
        )
    L = dynamic_range(ref) if data_range is None else data_range
    if L == 0:
        L = 1.0
    c1 = (SSIM_K1 * L) ** 2
    c2 = (SSIM_K2 * L) ** 2
    mx = _smooth_valid(ref, w)
    my = _smooth_valid(test, w)
    sxx = _smooth_valid(ref * ref, w) - mx * mx
    syy = _smooth_valid(test * test, w) - my * my
    sxy = _smooth_valid(ref * test, w) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssi(ref, test, mask=None):
    """Mean local SSIM over masked voxels (window centres), clamped to [0, 1]."""
    ref, test = _pair(ref, test)
    mask = _mask(mask, ref.shape)
    smap = ssim_map(ref, test)
    r = SSIM_RADIUS
    inner = mask[r:-r, r:-r, r:-r]
    if not inner.any():
        raise ParameterError("mask has no voxels away from the volume border")
    return float(np.clip(np.mean(smap[inner]), 0.0, 1.0))


def dice(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total


def otsu_threshold(x, bins=256):
    """Threshold maximizing the between-class variance of a ``bins`` histogram.

    The returned value is the upper edge of the last bin in the low class, so
    ``x >= t`` selects the high class.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    lo, hi = x.min(), x.max()
    if lo == hi:
        raise ParameterError("Otsu threshold undefined for a constant volume")
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    p = counts / counts.sum()
    w0 = np.cumsum(p)[:-1]
    w1 = 1.0 - w0
    m = np.cumsum(p * centers)
    mu0 = m[:-1] / np.where(w0 > 0, w0, 1)
    mu1 = (m[-1] - m[:-1]) / np.where(w1 > 0, w1, 1)
    between = w0 * w1 * (mu0 - mu1) ** 2
    between[(w0 == 0) | (w1 == 0)] = -1.0
    k = int(np.argmax(between))
    return float(edges[k + 1])


def threshold_segment(x, method="otsu", threshold=None):
    """Binary mask ``x >= t`` with ``t`` fixed or chosen by Otsu's method."""
    x = np.asarray(x, dtype=np.float64)
    if method == "fixed":
        if threshold is None:
            raise ParameterError("fixed segmentation needs a threshold")
        t = float(threshold)
    elif method == "otsu":
        t = otsu_threshold(x)
    else:
        raise ParameterError(f"unknown segmentation method {method!r}")
    return x >= t


def dilate(mask, iterations=1):
    """Dilation with the 6-connected structuring element."""
    st = ndimage.generate_binary_structure(3, 1)
    return ndimage.binary_dilation(mask, structure=st, iterations=iterations)


def evaluation_mask(ref, mode="otsu-dilate1"):
    """Foreground mask used as the metric domain."""
    if mode == "all":
        return np.ones(np.shape(ref), dtype=bool)
    if mode == "otsu":
        return threshold_segment(ref, "otsu")
    if mode == "otsu-dilate1":
        return dilate(threshold_segment(ref, "otsu"), 1)
    raise ParameterError(f"unknown mask mode {mode!r}")


def evaluate(ref, test, mask_mode="otsu-dilate1", segment=True, runtime_s=0.0, params=None):
    """Full metric report of ``test`` against ``ref``.

    Dice compares ``ref >= t`` with ``test >= t`` for the Otsu threshold ``t``
    of the reference.
    """
    ref, test = _pair(ref, test)
    mask = evaluation_mask(ref, mask_mode)
    d = None
    if segment:
        t = otsu_threshold(ref)
        d = dice(ref >= t, test >= t)
    p = {"mask_mode": mask_mode, "peak": "ref full-volume range",
         "ssim_window": f"gaussian sigma={SSIM_SIGMA} radius={SSIM_RADIUS}"}
    p.update(params or {})
    return MetricReport(
        psnr_db=psnr(ref, test, mask),
        ssi=ssi(ref, test, mask),
        dice=d,
        runtime_s=float(runtime_s),
        params=p,
    )
