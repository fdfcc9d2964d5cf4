"""Dual ball projection and primal consistency projection (POCS)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .kernels import Kernel
from .sampling import MeasurementSet


def project_ball(z, g=1.0):
    """Rescale every 2-vector of ``z`` whose length exceeds ``g`` back onto the sphere."""
    z = np.asarray(z, dtype=float)
    norm = np.sqrt(z[..., 0] ** 2 + z[..., 1] ** 2)
    scale = np.minimum(1.0, np.divide(g, norm, out=np.ones_like(norm), where=norm > g))
    return z * scale[..., None]


def project_hyperplane(I, patch, d):
    """Nearest point of ``{J : <J, patch> = d}``."""
    patch = np.asarray(patch, dtype=float)
    nrm2 = float(np.sum(patch * patch))
    if nrm2 == 0.0:
        raise ValueError("cannot project onto the hyperplane of a zero patch")
    return I + ((d - float(np.sum(I * patch))) / nrm2) * patch


@dataclass(eq=False)
class ConsistencyProblem:
    """Non-negative rasters on ``mask`` reproducing ``meas`` through ``kernel``."""

    meas: MeasurementSet
    kernel: Kernel
    mask: np.ndarray
    gram_rcond: float = 1e-12
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.meas.m != self.kernel.m:
            raise ValueError("measurement grid and kernel grid differ")
        if self.mask.shape != (self.kernel.N, self.kernel.N):
            raise ValueError("mask shape does not match the raster")

    @property
    def mask_float(self):
        if "maskf" not in self._cache:
            self._cache["maskf"] = None if self.mask.all() else self.mask.astype(float)
        return self._cache["maskf"]

    @property
    def D(self) -> np.ndarray:
        return self.meas.values

    def forward(self, I) -> np.ndarray:
        """Measurement matrix ``W I W^T`` of a raster."""
        W = self.kernel.weights1d
        return W @ I @ W.T

    def adjoint(self, y) -> np.ndarray:
        """``W^T y W``, the raster ``sum_k y_k patch_k``."""
        W = self.kernel.weights1d
        return W.T @ y @ W

    def residual(self, I) -> float:
        return float(np.max(np.abs(self.forward(I) - self.D)))

    def gram_pinv(self) -> np.ndarray:
        if "ginv" not in self._cache:
            G = self.kernel.gram1d()
            evals, evecs = np.linalg.eigh(G)
            keep = evals > self.gram_rcond * evals.max()
            inv = np.where(keep, 1.0 / np.where(keep, evals, 1.0), 0.0)
            self._cache["ginv"] = (evecs * inv) @ evecs.T
        return self._cache["ginv"]

    def colour_classes(self):
        """Pixel subsets whose patches have pairwise disjoint supports."""
        if "classes" not in self._cache:
            s = self.kernel.stride()
            self._cache["classes"] = [(a, b) for a in range(s) for b in range(s)]
            self._cache["stride"] = s
        return self._cache["stride"], self._cache["classes"]


@dataclass
class ProjectionResult:
    image: np.ndarray
    residual: float
    sweeps: int
    converged: bool


def _clamp(I, maskf):
    np.maximum(I, 0.0, out=I)
    if maskf is not None:
        I *= maskf
    return I


def _affine_step(I, prob: "ConsistencyProblem", R, order=None):
    Ginv = prob.gram_pinv()
    I += prob.adjoint(Ginv @ R @ Ginv)
    return I


def _cyclic_sweep(I, prob: "ConsistencyProblem", R=None, order=None):
    W = prob.kernel.weights1d
    D = prob.D
    norms = np.sum(W * W, axis=1)
    s, classes = prob.colour_classes()
    if order is not None:
        classes = [classes[c] for c in order]
    for a, b in classes:
        rows = np.arange(a, prob.kernel.m, s)
        cols = np.arange(b, prob.kernel.m, s)
        Wr, Wc = W[rows], W[cols]
        Rc = D[np.ix_(rows, cols)] - Wr @ I @ Wc.T
        Rc /= np.outer(norms[rows], norms[cols])
        I += Wr.T @ Rc @ Wc
    return I


_METHODS = {"block": _affine_step, "cyclic": _cyclic_sweep}


def project_consistency(I, prob: ConsistencyProblem, tol: float = 1e-6,
                        max_sweeps: int = 50, method: str = "block",
                        order: Optional[list] = None) -> ProjectionResult:
    """Alternate measurement-hyperplane projections with clamping to ``I >= 0`` on the mask.

    ``method="block"`` projects onto all hyperplanes at once (exact, through the
    separable Gram matrix); ``method="cyclic"`` visits the hyperplanes one
    colour class at a time, a class holding pixels with disjoint patch
    supports, optionally in a custom class ``order``.  Stops once the largest
    measurement residual is at most ``tol``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if method not in _METHODS:
        raise ValueError(f"unknown projection method {method!r}")
    step = _METHODS[method]
    maskf = prob.mask_float
    I = _clamp(np.array(I, dtype=float), maskf)
    R = prob.D - prob.forward(I)
    res = float(np.max(np.abs(R)))
    sweeps = 0
    while res > tol and sweeps < max_sweeps:
        step(I, prob, R, order)
        _clamp(I, maskf)
        R = prob.D - prob.forward(I)
        res = float(np.max(np.abs(R)))
        sweeps += 1
    return ProjectionResult(I, res, sweeps, res <= tol)


def project_nearest(x, prob: ConsistencyProblem, y=None, tol: float = 1e-6,
                    max_steps: int = 50, newton: bool = False):
    """Euclidean projection of ``x`` onto the consistency set, through its dual.

    The nearest point has the form ``max(x + A^T y, 0)`` on the mask, with
    ``A`` the measurement operator and ``y`` one multiplier per pixel.
    ``y`` maximizes the concave dual; by default it is found by
    Gram-preconditioned ascent, which is Dykstra's alternating projection
    written in multiplier form.  ``newton=True`` takes damped semismooth
    Newton steps instead, solved by preconditioned conjugate gradients, which
    pays off when many pixels sit at zero.  Passing the previous ``y``
    warm-starts either method.  Returns the result and ``y``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    Ginv = prob.gram_pinv()
    maskf = prob.mask_float
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(prob.D) if y is None else np.array(y, dtype=float)

    def primal(y):
        return _clamp(x + prob.adjoint(y), maskf)

    I = primal(y)
    R = prob.D - prob.forward(I)
    res = float(np.max(np.abs(R)))
    steps = 0
    if newton:
        return _newton(x, prob, y, I, R, res, tol, max_steps, primal)
    while res > tol and steps < max_steps:
        y += Ginv @ R @ Ginv
        I = primal(y)
        R = prob.D - prob.forward(I)
        res = float(np.max(np.abs(R)))
        steps += 1
    return ProjectionResult(I, res, steps, res <= tol), y


DENSE_NEWTON_MAX = 4096


def _dense_hessian(W, active):
    """Matrix of ``v -> A (active * A^T v)`` on flattened ``m x m`` arrays."""
    m = W.shape[0]
    Q = (W[:, None, :] * W[None, :, :]).reshape(m * m, -1)
    H = Q @ active @ Q.T
    return H.reshape(m, m, m, m).transpose(0, 2, 1, 3).reshape(m * m, m * m)


def _newton(x, prob, y, I, R, res, tol, max_steps, primal, cg_iters=50, patience=20):
    D = prob.D
    G = prob.kernel.gram1d()
    Ginv = prob.gram_pinv()
    W = prob.kernel.weights1d
    dense = D.size <= DENSE_NEWTON_MAX

    def dual(I, y):
        return -0.5 * float(np.sum(I * I)) + float(np.sum(y * D))

    def solve(active, rhs, damping):
        if dense:
            H = _dense_hessian(W, active)
            H += damping * np.trace(H) / len(H) * np.eye(len(H))
            try:
                return linalg.solve(H, rhs.ravel(), assume_a="pos").reshape(rhs.shape)
            except (linalg.LinAlgError, ValueError):
                return None

        def hess(v):
            return prob.forward(active * prob.adjoint(v)) + damping * (G @ v @ G)

        return _pcg(hess, rhs, lambda r: Ginv @ r @ Ginv / (1.0 + damping),
                    min(0.1, np.sqrt(np.linalg.norm(rhs))), cg_iters)

    phi = dual(I, y)
    best = (res, I, y)
    damping = 1e-8 if dense else 1e-2
    floor = 1e-12 if dense else 1e-10
    steps = stale = 0
    while res > tol and steps < max_steps and stale < patience:
        active = (I > 0).astype(float)
        while True:
            delta = solve(active, R, damping)
            if delta is not None:
                y_new = y + delta
                I_new = primal(y_new)
                phi_new = dual(I_new, y_new)
                if phi_new >= phi + 1e-4 * float(np.sum(R * delta)):
                    break
            damping *= 10.0
            if damping > 1e8:
                return ProjectionResult(best[1], best[0], steps, best[0] <= tol), best[2]
        y, I, phi = y_new, I_new, phi_new
        damping = max(damping / 10.0, floor)
        R = D - prob.forward(I)
        res = float(np.max(np.abs(R)))
        steps += 1
        if res < best[0]:
            best, stale = (res, I, y), 0
        else:
            stale += 1
    return ProjectionResult(best[1], best[0], steps, best[0] <= tol), best[2]


def _pcg(apply, b, precond, rtol, max_iter):
    """Preconditioned conjugate gradients on matrices under the Frobenius product."""
    xk = np.zeros_like(b)
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    stop = rtol * np.linalg.norm(b)
    for _ in range(max_iter):
        Ap = apply(p)
        pAp = float(np.sum(p * Ap))
        if pAp <= 0:
            break
        alpha = rz / pAp
        xk += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= stop:
            break
        z = precond(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return xk if np.any(xk) else precond(b)


def project_weighted_simplex(x, f, mask=None):
    """Exact projection onto ``{I >= 0, sum(f * I) = 1}`` (zero off ``mask``).

    The minimizer has the form ``max(x + mu f, 0)``; ``mu`` is located on the
    sorted breakpoints of this piecewise-linear constraint function.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    out = np.zeros_like(x)
    sel = mask & (f > 0)
    free = mask & ~(f > 0)
    out[free] = np.maximum(x[free], 0.0)
    xs, fs = x[sel], f[sel]
    if xs.size == 0:
        raise ValueError("constraint kernel vanishes on the domain")
    bp = -xs / fs
    order = np.argsort(bp)
    bp, xs, fs = bp[order], xs[order], fs[order]
    # On (bp[k], bp[k+1]) entries 0..k are active and the constraint is A[k] + mu * B[k].
    A = np.cumsum(fs * xs)
    B = np.cumsum(fs * fs)
    at_bp = A + B * bp
    k = int(np.searchsorted(at_bp, 1.0)) - 1
    mu = (1.0 - A[k]) / B[k]
    out_sel = np.maximum(x[sel] + mu * f[sel], 0.0)
    out[sel] = out_sel
    return out
