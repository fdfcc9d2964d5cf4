"""B-spline point-spread functions and their per-pixel sampling weights.

Every kernel used here is a tensor product of a centered cardinal B-spline,
so the sampling weights of pixel ``(i, j)`` factor as ``outer(w[i], w[j])``
where ``w`` is an ``m x N`` matrix of 1D weights.  Storing the 1D factor is
all that is needed to apply the measurement operator as ``W @ I @ W.T``.

Pixel ``(i, j)`` (row ``i``, column ``j``, zero based) is centred at
``((j + 1/2) T, (i + 1/2) T)`` in raster coordinates with ``T = 1/m``.
The flat index of that pixel is ``k = j * m + i`` (column-major, i.e. a
vertical raster scan).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

FAMILIES = {"box": 0, "bilinear": 1, "biquadratic": 2}


class KernelError(ValueError):
    """Invalid kernel description or incompatible raster resolution."""


def eval_bspline1d(degree, x):
    """Centered cardinal B-spline of degree 0, 1 or 2.

    The box spline is taken as 1 on the closed interval [-1/2, 1/2].
    """
    if degree not in (0, 1, 2):
        raise KernelError(f"unsupported B-spline degree {degree!r}")
    x = np.abs(np.asarray(x, dtype=float))
    if degree == 0:
        out = np.where(x <= 0.5, 1.0, 0.0)
    elif degree == 1:
        out = np.clip(1.0 - x, 0.0, None)
    else:
        out = np.where(x <= 0.5, 0.75 - x**2,
                       np.where(x <= 1.5, 0.5 * (1.5 - x) ** 2, 0.0))
    return out if out.ndim else float(out)


def bspline_cumulative(degree, x):
    """Integral of the centered B-spline from -inf to ``x``."""
    x = np.asarray(x, dtype=float)
    if degree == 0:
        return np.clip(x + 0.5, 0.0, 1.0)
    if degree == 1:
        xc = np.clip(x, -1.0, 1.0)
        return np.where(xc < 0.0, 0.5 * (xc + 1.0) ** 2, 1.0 - 0.5 * (1.0 - xc) ** 2)
    if degree == 2:
        xc = np.clip(x, -1.5, 1.5)
        left = (xc + 1.5) ** 3 / 6.0
        mid = 1.0 / 6.0 + 0.75 * (xc + 0.5) - (xc**3 + 0.125) / 3.0
        right = 1.0 - (1.5 - xc) ** 3 / 6.0
        return np.where(xc < -0.5, left, np.where(xc <= 0.5, mid, right))
    raise KernelError(f"unsupported B-spline degree {degree!r}")


@dataclass(frozen=True)
class KernelFamily:
    family: str = "box"
    dilation: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}; "
                              f"expected one of {sorted(FAMILIES)}")
        if not self.dilation > 0:
            raise KernelError("kernel dilation must be positive")

    @property
    def degree(self) -> int:
        return FAMILIES[self.family]

    @property
    def support_width(self) -> float:
        """Support of the 1D kernel in units of the pixel pitch."""
        return (self.degree + 1) * self.dilation

    def to_dict(self) -> dict:
        return {"family": self.family, "dilation": self.dilation}

    @classmethod
    def from_dict(cls, data) -> "KernelFamily":
        if isinstance(data, str):
            return cls(data)
        return cls(data.get("family", "box"), float(data.get("dilation", 1.0)))


@dataclass(frozen=True, eq=False)
class Kernel:
    """Normalized sampling weights of an ``m x m`` pixel grid on an ``N x N`` raster."""

    family: KernelFamily
    m: int
    N: int
    weights1d: np.ndarray = field(repr=False)

    @property
    def T(self) -> float:
        return 1.0 / self.m

    def pixel(self, k: int) -> Tuple[int, int]:
        """(row, column) of flat pixel index ``k``."""
        j, i = divmod(int(k), self.m)
        return i, j

    def index(self, i: int, j: int) -> int:
        return int(j) * self.m + int(i)

    def patch(self, k: int) -> np.ndarray:
        i, j = self.pixel(k)
        return np.outer(self.weights1d[i], self.weights1d[j])

    def support(self, k: int) -> Tuple[slice, slice]:
        """Bounding box (row slice, column slice) of patch ``k``."""
        i, j = self.pixel(k)
        return self._span(i), self._span(j)

    def _span(self, i: int) -> slice:
        nz = np.flatnonzero(self.weights1d[i] > 0)
        return slice(int(nz[0]), int(nz[-1]) + 1)

    def stride(self) -> int:
        """Smallest pixel offset whose 1D supports never share a raster cell."""
        spans = [self._span(i) for i in range(self.m)]
        for s in range(1, self.m + 1):
            if all(spans[i].stop <= spans[i + s].start for i in range(self.m - s)):
                return s
        return self.m

    def gram1d(self) -> np.ndarray:
        return self.weights1d @ self.weights1d.T

    def to_dict(self) -> dict:
        return {**self.family.to_dict(), "m": self.m}

    def export_patch_csv(self, k: int, path) -> None:
        rows, cols = self.support(k)
        block = self.patch(k)[rows, cols]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "weight"])
            for r in range(block.shape[0]):
                for c in range(block.shape[1]):
                    writer.writerow([rows.start + r, cols.start + c, repr(float(block[r, c]))])


def weights_1d(family: KernelFamily, m: int, N: int) -> np.ndarray:
    """Cell-integrated, row-normalized 1D weights, shape ``(m, N)``."""
    edges = np.arange(N + 1) / N
    centers = (np.arange(m) + 0.5) / m
    scale = family.dilation / m
    t = (edges[None, :] - centers[:, None]) / scale
    cum = bspline_cumulative(family.degree, t)
    w = np.diff(cum, axis=1)
    w[w < 1e-15] = 0.0
    return w / w.sum(axis=1, keepdims=True)


def build_kernel(family, m: int, N: int) -> Kernel:
    """Rasterize the tensor-product kernel of every pixel onto an ``N x N`` grid."""
    if isinstance(family, (str, dict)):
        family = KernelFamily.from_dict(family)
    m, N = int(m), int(N)
    if m < 1:
        raise KernelError("pixel grid side m must be positive")
    if N < 4 * m:
        raise KernelError(f"raster side N={N} must be at least 4*m={4 * m}")
    w = weights_1d(family, m, N)
    w.setflags(write=False)
    return Kernel(family, m, N, w)
