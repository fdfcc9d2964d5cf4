"""Binarity and certificate checks, image metrics and the interpolation baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .kernels import build_kernel
from .sampling import MeasurementSet, measure_matrix

INF_PSNR = "inf"


@dataclass
class BinarityReport:
    is_bilevel: bool
    low_level: float
    high_level: float
    mid_fraction: float
    is_mcsmp_certified: bool = False

    def to_dict(self):
        return asdict(self)


def binarity_report(I, eps: float = 0.05, cap: float = 0.01) -> BinarityReport:
    """Fraction of cells farther than ``eps`` from both levels ``{0, max(I)}``.

    ``eps`` is measured relative to the high level.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    I = np.asarray(I, dtype=float)
    low, high = 0.0, float(I.max())
    if high <= 0:
        return BinarityReport(True, low, high, 0.0)
    u = (I - low) / (high - low)
    mid = float(np.mean(np.minimum(u, 1.0 - u) > eps))
    return BinarityReport(mid <= cap, low, high, mid)


def mcsmp_test(I, meas: MeasurementSet, eps: float = 1e-3) -> bool:
    """Certificate for a binary maximal solution: ``max(I) <= 1`` and some pixel reads 1."""
    I = np.asarray(I, dtype=float)
    return bool(I.max() <= 1.0 + eps and np.any(meas.values >= 1.0 - eps))


def mse(I, ref) -> float:
    I, ref = np.asarray(I, dtype=float), np.asarray(ref, dtype=float)
    if I.shape != ref.shape:
        raise ValueError(f"shape mismatch {I.shape} vs {ref.shape}")
    return float(np.mean((I - ref) ** 2))


def psnr(I, ref, peak: float = 1.0):
    """Peak signal-to-noise ratio in dB; identical inputs give the ``"inf"`` sentinel."""
    e = mse(I, ref)
    if e == 0:
        return INF_PSNR
    return 10.0 * math.log10(peak**2 / e)


def measurement_psnr(I, meas: MeasurementSet, peak: float = 1.0):
    """PSNR between the measurements of ``I`` and the observed ``meas``."""
    kernel = build_kernel(meas.family, meas.m, np.asarray(I).shape[0])
    return psnr(measure_matrix(np.asarray(I, dtype=float), kernel), meas.values, peak)


def threshold(I, level: float = 0.5) -> np.ndarray:
    return (np.asarray(I) >= level).astype(float)


def baseline_interpolate(meas: MeasurementSet, N: int) -> np.ndarray:
    """Bilinear interpolation of the pixel lattice (pixel centres) up to ``N x N``.

    Values beyond the outermost pixel centres are held constant.
    """
    m = meas.m
    centers = (np.arange(m) + 0.5) / m
    grid = (np.arange(N) + 0.5) / N
    if m == 1:
        return np.full((N, N), float(meas.values[0, 0]))
    interp = RegularGridInterpolator((centers, centers), meas.values, method="linear")
    q = np.clip(grid, centers[0], centers[-1])
    R, C = np.meshgrid(q, q, indexing="ij")
    return interp(np.stack([R.ravel(), C.ravel()], axis=1)).reshape(N, N)


def pixel_mismatch(I, ref, level: float = 0.5) -> float:
    return float(np.mean(threshold(I, level) != threshold(ref, level)))
