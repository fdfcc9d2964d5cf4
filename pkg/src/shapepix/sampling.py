"""Forward measurement operator and its adjoint."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import Kernel, KernelError, KernelFamily, build_kernel
from .shapes import rasterize


@dataclass(eq=False)
class MeasurementSet:
    """``m x m`` pixel values together with the kernel family that produced them.

    ``values`` is kept as a matrix (row ``i``, column ``j``); ``flat`` gives the
    vertical raster scan ``k = j * m + i``.
    """

    values: np.ndarray
    family: KernelFamily = field(default_factory=KernelFamily)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            m = int(round(np.sqrt(v.size)))
            if m * m != v.size:
                raise ValueError("flat measurement vector length is not a square")
            v = v.reshape(m, m, order="F")
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("measurements must form a square m x m grid")
        self.values = v
        if isinstance(self.family, (str, dict)):
            self.family = KernelFamily.from_dict(self.family)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> float:
        return 1.0 / self.m

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel(order="F")

    def kernel(self, N: int) -> Kernel:
        return build_kernel(self.family, self.m, N)

    def scaled(self, c: float) -> "MeasurementSet":
        return MeasurementSet(self.values * c, self.family)


def _check(kernel: Kernel, I):
    I = np.asarray(I, dtype=float)
    if I.shape != (kernel.N, kernel.N):
        raise ValueError(f"raster shape {I.shape} does not match kernel N={kernel.N}")
    return I


def measure(I, kernel: Kernel) -> MeasurementSet:
    """``d_k = sum(patch_k * I)`` for every pixel."""
    I = _check(kernel, I)
    W = kernel.weights1d
    return MeasurementSet(W @ I @ W.T, kernel.family)


def measure_matrix(I, kernel: Kernel) -> np.ndarray:
    W = kernel.weights1d
    return W @ I @ W.T


def apply_adjoint(y, kernel: Kernel) -> np.ndarray:
    """``sum_k y_k * patch_k``; ``y`` is a flat vector (vertical scan) or an ``m x m`` matrix."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        if y.size != kernel.m**2:
            raise ValueError(f"expected {kernel.m**2} values, got {y.size}")
        y = y.reshape(kernel.m, kernel.m, order="F")
    if y.shape != (kernel.m, kernel.m):
        raise ValueError(f"expected an {kernel.m}x{kernel.m} array, got {y.shape}")
    W = kernel.weights1d
    return W.T @ y @ W


def sample_shape(shape, family, m: int, N: int, oversample: int = 3,
                 supersample: int = 4) -> MeasurementSet:
    """Measure a shape on a raster ``oversample`` times finer than ``N``."""
    if isinstance(family, (str, dict)):
        family = KernelFamily.from_dict(family)
    if int(N) < 4 * int(m):
        raise KernelError(f"raster side N={N} must be at least 4*m={4 * int(m)}")
    fine = int(N) * int(oversample)
    raster = rasterize(shape, fine, supersample)
    return measure(raster, build_kernel(family, m, fine))
