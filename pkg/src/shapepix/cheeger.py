"""Reduced domains, reduced kernels, generalized Cheeger problems and reducibility.

A generalized Cheeger problem minimizes total variation over non-negative
rasters ``I`` (zero off a domain mask) subject to the single constraint
``sum(f * I) = 1``.  Its minimizers are constant on their support up to
discretization, and the normalized indicator of any level set is again a
minimizer.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from . import _fused
from .calculus import edge_mask, tv
from .kernels import Kernel, KernelFamily, build_kernel
from .sampling import MeasurementSet
from .solver import SolverConfig, SolverReport, _edges, _weight
from .projections import ProjectionResult

SUPPORT_EPS = 1e-3

log = logging.getLogger(__name__)


class CheegerError(ValueError):
    pass


@dataclass(eq=False)
class ReducedProblem:
    """Reduced domain (``mask``) and active pixel indices (vertical scan order)."""

    mask: np.ndarray
    active: np.ndarray

    @property
    def rho(self) -> int:
        return int(self.active.size)


def reduced_domain(meas: MeasurementSet, kernel: Optional[Kernel] = None, N: int = None) -> ReducedProblem:
    """Remove the support of every zero-measurement kernel from the unit square."""
    if kernel is None:
        kernel = meas.kernel(N)
    W = kernel.weights1d
    zero = (meas.values <= 0).astype(float)
    supp = (W > 0).astype(float)
    # cell (r, c) is covered by zero pixel (i, j) iff W[i, r] > 0 and W[j, c] > 0
    hit = supp.T @ zero @ supp
    return ReducedProblem(hit == 0, np.flatnonzero(meas.flat > 0))


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    """Convex weights over the active pixels."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise CheegerError("simplex weights must be a non-empty vector")
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
            raise CheegerError("simplex weights must be non-negative and sum to one")
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, w) -> "SimplexWeights":
        w = np.clip(np.asarray(w, dtype=float), 0.0, None)
        s = w.sum()
        if s <= 0:
            raise CheegerError("cannot normalize an all-zero weight vector")
        w = w / s
        # exact unit sum
        w[np.argmax(w)] += 1.0 - w.sum()
        return cls(w)

    def __len__(self):
        return self.values.size

    def tolist(self):
        return [float(x) for x in self.values]


def _lambda_matrix(m, active, lam) -> np.ndarray:
    L = np.zeros(m * m)
    L[active] = lam
    return L.reshape(m, m, order="F")


def reduced_kernel(meas: MeasurementSet, kernel: Kernel, reduced: ReducedProblem,
                   lam) -> np.ndarray:
    """``sum(lam_k f_{a_k}) / sum(lam_k d_{a_k})`` restricted to the reduced domain."""
    if reduced.rho < 1:
        raise CheegerError("no active measurements")
    lam = lam.values if isinstance(lam, SimplexWeights) else np.asarray(lam, dtype=float)
    if lam.size != reduced.rho:
        raise CheegerError(f"expected {reduced.rho} weights, got {lam.size}")
    denom = float(np.dot(lam, meas.flat[reduced.active]))
    if not denom > 0:
        raise CheegerError("reduced kernel normalization vanished")
    W = kernel.weights1d
    f = W.T @ _lambda_matrix(kernel.m, reduced.active, lam) @ W / denom
    f[~reduced.mask] = 0.0
    return f


class _WeightedSimplexProjector:
    """Exact projection onto ``{I >= 0 on mask, I = 0 off mask, sum(f I) = 1}``.

    The multiplier of the last constraint is found by Newton's method on the
    convex, increasing, piecewise-linear constraint function, warm-started at
    the previous multiplier.
    """

    def __init__(self, f, mask):
        self.mask = np.ascontiguousarray(mask, dtype=bool)
        self.f = np.ascontiguousarray(np.where(self.mask, f, 0.0))
        if not np.any(self.f > 0):
            raise CheegerError("constraint kernel vanishes on the domain")
        self.mu = 0.0
        self.steps = 0

    def __call__(self, x) -> ProjectionResult:
        x = np.ascontiguousarray(x, dtype=float)
        mu, steps = _fused.simplex_newton(x, self.f, self.mu, 200)
        if steps < 0:
            # no active entry at the warm start: restart right of every breakpoint
            sel = self.f > 0
            mu0 = float(np.max(-x[sel] / self.f[sel])) + 1.0 / float(np.sum(self.f**2))
            mu, steps = _fused.simplex_newton(x, self.f, mu0, 200)
        self.mu = mu
        self.steps += steps
        out = np.empty_like(x)
        _fused.simplex_apply(x, self.f, self.mask, mu, out)
        return ProjectionResult(out, abs(float(np.sum(self.f * out)) - 1.0), 1, True)


def cheeger_config(**overrides) -> SolverConfig:
    base = dict(tau0=0.05, sigma0=2.4, max_iters=3000, rel_change_tol=1e-6, pocs_tol=1e-9,
                free_boundary=True, closed=True)
    base.update(overrides)
    return SolverConfig(**base)


def solve_cheeger(f, mask=None, N: int = None, cfg: Optional[SolverConfig] = None,
                  I0=None, zeta0=None) -> SolverReport:
    """Minimize TV over ``{I >= 0, sum(f I) = 1}`` on ``mask``.

    With ``cfg.closed`` the image is extended by zero outside the unit square,
    so the outer border contributes to the perimeter.  Differences crossing
    the border of ``mask`` inside the square are dropped when
    ``cfg.free_boundary`` is set.  ``zeta0`` and the returned dual live on the
    padded grid when ``cfg.closed`` is set.
    """
    f = np.asarray(f, dtype=float)
    if N is not None and f.shape != (N, N):
        raise CheegerError("kernel raster does not match N")
    if mask is None:
        mask = np.ones(f.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not np.any(mask & (f > 0)):
        raise CheegerError("infeasible: the constraint kernel vanishes on the domain")
    cfg = cfg or cheeger_config()
    closed = cfg.closed
    if I0 is None:
        I0 = mask / float(np.sum(f * mask))
    I0 = np.asarray(I0, dtype=float)
    edges = edge_mask(mask) if cfg.free_boundary else None
    if closed:
        f = np.pad(f, 1)
        I0 = np.pad(I0, 1)
        inside = np.pad(mask, 1)
        if cfg.free_boundary:
            # the padding counts as domain for the edge mask, so jumps to it are kept
            edges = edge_mask(np.pad(mask, 1, constant_values=True))
        mask = inside
    project = _WeightedSimplexProjector(f, mask)
    I0 = project(I0).image
    rep = _run_fused(I0, project, cfg, edges, zeta0)
    if closed:
        rep.image = rep.image[1:-1, 1:-1]
    return rep


def _run_fused(I0, project, cfg: SolverConfig, edges, zeta0) -> SolverReport:
    """Primal-dual loop for the single-constraint problem, compiled in blocks.

    The stopping rule is checked every ``cfg.record_every`` iterations.
    """
    t0 = time.perf_counter()
    I = np.array(I0, dtype=float)
    shape = I.shape
    g = _weight(cfg.g, shape)
    e = _edges(edges, shape)
    zeta = np.zeros(shape + (2,)) if zeta0 is None else np.array(zeta0, dtype=float)
    Ibar = I.copy()
    tau, sigma, mu = cfg.tau0, cfg.sigma0, project.mu
    f = project.f
    rep = SolverReport(I, 0)
    it = 0
    converged = False
    while it < cfg.max_iters:
        n = min(cfg.record_every, cfg.max_iters - it)
        tau, sigma, mu, change = _fused.cheeger_iterations(
            I, zeta, Ibar, f, project.mask, g, e, tau, sigma, mu, n, cfg.accel)
        it += n
        res = abs(float(np.sum(f * I)) - 1.0)
        rep.tv_history.append(_fused.tv_value(I, g, e))
        rep.residual_history.append(res)
        if change <= cfg.rel_change_tol * max(np.linalg.norm(I), 1e-300) and res <= cfg.pocs_tol:
            converged = True
            break
    rep.iterations = it
    rep.residual = rep.residual_history[-1] if rep.residual_history else 0.0
    rep.converged = converged
    rep.dual = zeta
    rep.wall_time = time.perf_counter() - t0
    return rep


def maximal_support(I, eps: float = SUPPORT_EPS) -> np.ndarray:
    """Support of a computed minimizer: cells above ``eps * max(I)``."""
    I = np.asarray(I, dtype=float)
    return I > eps * I.max()


def normalized_indicator(S, f) -> np.ndarray:
    """``chi_S / sum(f chi_S)``."""
    S = np.asarray(S, dtype=float)
    mass = float(np.sum(f * S))
    if mass <= 0:
        raise CheegerError("level set carries no kernel mass")
    return S / mass


def domain_tv(I, mask=None, free_boundary=True, closed=True) -> float:
    """Total variation of ``I`` under the boundary conventions of :func:`solve_cheeger`."""
    I = np.asarray(I, dtype=float)
    if mask is None:
        mask = np.ones(I.shape, dtype=bool)
    if closed:
        I = np.pad(I, 1)
        mask = np.pad(mask, 1, constant_values=True)
    return tv(I, mask=mask if free_boundary else None)


def cheeger_ratio(I, f, mask=None, free_boundary=True, closed=True) -> float:
    """``TV(I) / sum(f I)`` in grid units, measured as :func:`solve_cheeger` does."""
    I = np.asarray(I, dtype=float)
    return domain_tv(I, mask, free_boundary, closed) / float(np.sum(f * I))


def level_set_minimizers(I, f, levels):
    """Normalized indicators of ``{I >= mu}`` for each ``mu`` in ``levels``."""
    return [normalized_indicator(I >= mu, f) for mu in levels]


# ---------------------------------------------------------------------------
# reducibility


@dataclass
class ReducibilityReport:
    """Outcome of :func:`check_reducible`.

    ``facet_margins[k]`` is the worst ``d_k - v_k`` over samples with
    ``lambda_k = 0``; ``all_margins[k]`` the worst over every sample.  Keys are
    pixel scan indices.
    """

    reducible: str
    violating_lambda: Optional[List[float]] = None
    violating_index: Optional[int] = None
    facet_margins: Dict[int, float] = field(default_factory=dict)
    all_margins: Dict[int, float] = field(default_factory=dict)
    k1: List[int] = field(default_factory=list)
    k2: List[int] = field(default_factory=list)
    near_equality: List[int] = field(default_factory=list)
    samples_used: int = 0
    unconverged_solves: int = 0
    tol: float = 0.0

    @property
    def margins(self) -> Dict[int, float]:
        return self.facet_margins

    def to_dict(self) -> dict:
        return {
            "reducible": self.reducible,
            "violating_lambda": self.violating_lambda,
            "violating_index": self.violating_index,
            "facet_margins": {str(k): float(v) for k, v in self.facet_margins.items()},
            "all_margins": {str(k): float(v) for k, v in self.all_margins.items()},
            "k1": self.k1,
            "k2": self.k2,
            "near_equality": self.near_equality,
            "samples_used": self.samples_used,
            "unconverged_solves": self.unconverged_solves,
            "tol": self.tol,
        }


def simplex_grid(n: int, density: int) -> np.ndarray:
    """All points of the simplex in ``R^n`` whose coordinates are multiples of ``1/density``."""
    pts = []
    for bars in itertools.combinations(range(density + n - 1), n - 1):
        prev = -1
        comp = []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(density + n - 2 - prev)
        pts.append(comp)
    return np.asarray(pts, dtype=float).reshape(-1, n) / density


def lambda_samples(rho: int, density: int, n_interior: int = 0, seed: int = 0) -> np.ndarray:
    """Facet grid points (at least one zero weight) plus Dirichlet(1) interior draws."""
    if rho == 1:
        return np.ones((1, 1))
    grid = simplex_grid(rho, density)
    facet = grid[np.any(grid == 0, axis=1)]
    rng = np.random.default_rng(seed)
    inner = rng.dirichlet(np.ones(rho), size=n_interior) if n_interior else np.empty((0, rho))
    return np.vstack([facet, inner])


class CheegerOracle:
    """Maps convex weights to a Cheeger minimizer and the measurements it produces.

    Each solve runs in chunks of ``chunk`` iterations and stops once no
    measurement moves by more than ``v_tol`` across a chunk (or after
    ``cfg.max_iters``).  Consecutive solves are warm-started from the
    previous solution.  ``mode="raw"`` measures the normalized minimizer
    itself; ``mode="support"`` measures the normalized indicator of its
    support above ``support_eps * max``.
    """

    def __init__(self, meas: MeasurementSet, N: int, cfg: Optional[SolverConfig] = None,
                 mode: str = "raw", support_eps: float = SUPPORT_EPS, warm_start: bool = True,
                 chunk: int = 100, v_tol: float = 1e-4):
        if mode not in ("raw", "support"):
            raise CheegerError(f"unknown measurement mode {mode!r}")
        self.meas = meas
        self.kernel = meas.kernel(N)
        self.reduced = reduced_domain(meas, self.kernel)
        self.cfg = cfg or cheeger_config(tau0=0.1, sigma0=1.2, max_iters=5000)
        self.mode = mode
        self.support_eps = support_eps
        self.warm_start = warm_start
        self.chunk = chunk
        self.v_tol = v_tol
        self._warm = None
        self.unconverged = 0
        self.infeasible = 0
        self.solves = 0
        self.iterations = 0

    @property
    def d(self) -> np.ndarray:
        return self.meas.flat[self.reduced.active]

    def measurements(self, I) -> np.ndarray:
        W = self.kernel.weights1d
        return (W @ I @ W.T).ravel(order="F")[self.reduced.active]

    def solve(self, lam, watch=None) -> SolverReport:
        """Solve for ``lam``; the stopping test looks at the measurements in ``watch`` only."""
        lam = np.asarray(lam.values if isinstance(lam, SimplexWeights) else lam, dtype=float)
        f = reduced_kernel(self.meas, self.kernel, self.reduced, lam)
        I, z = self._warm if (self.warm_start and self._warm is not None) else (None, None)
        step_cfg = replace(self.cfg, max_iters=self.chunk, rel_change_tol=0.0)
        watch = np.arange(lam.size) if watch is None or len(watch) == 0 else np.asarray(watch)
        total, prev, settled = 0, None, False
        while total < self.cfg.max_iters:
            rep = solve_cheeger(f, self.reduced.mask, cfg=step_cfg, I0=I, zeta0=z)
            I, z = rep.image, rep.dual
            total += rep.iterations
            v = self.measurements(self._measured(I, f))[watch]
            if prev is not None and np.max(np.abs(v - prev)) <= self.v_tol:
                settled = True
                break
            prev = v
        rep.iterations = total
        rep.converged = settled and rep.residual <= self.cfg.pocs_tol
        rep.kernel_raster = f
        self._warm = (I, z)
        self.solves += 1
        self.iterations += total
        if not rep.converged:
            self.unconverged += 1
        if rep.residual > self.cfg.pocs_tol:
            self.infeasible += 1
        return rep

    def _measured(self, I, f):
        if self.mode == "raw":
            return I
        return normalized_indicator(maximal_support(I, self.support_eps), f)

    def v(self, lam, watch=None) -> np.ndarray:
        rep = self.solve(lam, watch)
        return self.measurements(self._measured(rep.image, rep.kernel_raster))


def check_reducible(meas: MeasurementSet, N: int = 200, density: int = 9, tol: float = 1e-2,
                    cfg: Optional[SolverConfig] = None, cap: int = 16, n_interior: int = None,
                    seed: int = 0, **oracle_kw) -> ReducibilityReport:
    """Search the simplex for a violation of the reducibility inequalities.

    Every active pixel must satisfy the strict inequality on the facet where
    its own weight is zero (and then joins ``k1``) or the non-strict one at
    every sample (``k2``).  A facet margin below ``-tol`` violates both, so
    the answer is ``"no"`` with that witness.  ``"yes"`` means no violation
    was found at this sampling density; pixels whose facet margin lies in
    ``[-tol, 0]`` cannot be told apart from equality at this resolution and
    are listed in ``near_equality``.  ``"undetermined"`` flags Cheeger solves
    that missed their constraint.
    """
    oracle = CheegerOracle(meas, N, cfg, **oracle_kw)
    rho = oracle.reduced.rho
    if rho == 0:
        return ReducibilityReport("yes", tol=tol)
    if rho > cap:
        raise CheegerError(f"{rho} active pixels exceed the reducibility cap of {cap}")
    d = oracle.d
    if n_interior is None:
        n_interior = 2 * rho
    samples = lambda_samples(rho, density, n_interior, seed)
    facet = np.full(rho, np.inf)
    every = np.full(rho, np.inf)
    witness = {}
    for n, lam in enumerate(samples):
        before = oracle.iterations
        v = oracle.v(lam, watch=np.flatnonzero(lam == 0))
        log.debug("sample %d/%d lam=%s v=%s iters=%d", n + 1, len(samples),
                  np.round(lam, 3), np.round(v, 4), oracle.iterations - before)
        marg = d - v
        every = np.minimum(every, marg)
        for k in np.flatnonzero(lam == 0):
            if marg[k] < facet[k]:
                facet[k] = marg[k]
                witness[k] = lam
    active = oracle.reduced.active
    report = ReducibilityReport("yes", samples_used=len(samples),
                                unconverged_solves=oracle.unconverged, tol=tol)
    report.facet_margins = {int(active[k]): float(facet[k]) for k in range(rho) if np.isfinite(facet[k])}
    report.all_margins = {int(active[k]): float(every[k]) for k in range(rho)}
    worst = int(np.argmin(facet))
    if facet[worst] < -tol:
        report.reducible = "no"
        report.violating_index = int(active[worst])
        report.violating_lambda = [float(x) for x in witness[worst]]
        return report
    for k in range(rho):
        if facet[k] > 0:
            report.k1.append(int(active[k]))
        elif every[k] >= -tol:
            report.k2.append(int(active[k]))
        else:
            report.near_equality.append(int(active[k]))
    if oracle.infeasible:
        report.reducible = "undetermined"
    return report


@dataclass
class LambdaStarResult:
    weights: SimplexWeights
    v: np.ndarray
    residual: float
    found: bool
    iterations: int
    solution: Optional[SolverReport] = None

    def to_dict(self) -> dict:
        return {"lambda": self.weights.tolist(), "v": [float(x) for x in self.v],
                "residual": self.residual, "found": self.found, "iterations": self.iterations}


def find_lambda_star(meas: MeasurementSet, N: int = 60, cfg: Optional[SolverConfig] = None,
                     tol: float = 1e-4, max_iter: int = 80, depth: int = 6,
                     restarts: int = 1, v_tol: float = 1e-6, start=None,
                     seed: int = 0) -> LambdaStarResult:
    """Search the simplex for weights whose Cheeger solution reproduces every measurement.

    Fixed-point iteration ``log lam <- log lam + log(d / v(lam))`` (then
    renormalized), accelerated by Anderson mixing over the last ``depth``
    iterates.  The map from weights to measurements is badly conditioned
    and plain multiplicative updates crawl.  The mixing history is dropped
    whenever the residual jumps above four times the best one seen, and the
    iteration resumes from the best weights.  After ``max_iter`` evaluations
    without reaching ``tol`` the search restarts from a random interior
    point.  Consecutive Cheeger solves are warm-started.
    """
    cfg = cfg or cheeger_config(tau0=0.1, sigma0=1.2, max_iters=20000)
    oracle = CheegerOracle(meas, N, cfg, v_tol=v_tol)
    rho = oracle.reduced.rho
    if rho == 0:
        raise CheegerError("no active measurements")
    d = oracle.d
    rng = np.random.default_rng(seed)
    best = None
    total = 0

    def normalize(u):
        w = np.exp(u - u.max())
        return np.log(np.maximum(w / w.sum(), 1e-12))

    start = np.full(rho, 1.0 / rho) if start is None else SimplexWeights.normalized(start).values
    u = normalize(np.log(np.maximum(start, 1e-12)))
    for attempt in range(restarts + 1):
        hist_u, hist_g = [], []
        best_u = best_g = None
        for _ in range(max_iter if rho > 1 else 1):
            lam = np.exp(u)
            rep = oracle.solve(lam)
            v = oracle.measurements(rep.image)
            res = float(np.max(np.abs(v - d)))
            total += 1
            log.debug("lambda* attempt %d eval %d residual %.3g", attempt, total, res)
            g = np.log(d / np.maximum(v, 1e-12))
            if best is None or res < best.residual:
                best = LambdaStarResult(SimplexWeights.normalized(lam), v, res, res <= tol, total, rep)
            if best_u is None or res <= best.residual:
                best_u, best_g = u, g
            if res <= tol:
                best.iterations = total
                return best
            if res > 4.0 * best.residual:
                hist_u, hist_g = [], []
                u, g = best_u, best_g
            hist_u = (hist_u + [u])[-depth:]
            hist_g = (hist_g + [g])[-depth:]
            step = g
            if len(hist_u) > 1:
                dG = np.diff(hist_g, axis=0).T
                dU = np.diff(hist_u, axis=0).T
                gamma = np.linalg.lstsq(dG, g, rcond=1e-10)[0]
                step = g - (dU + dG) @ gamma
            u = normalize(u + step)
        if rho == 1:
            break
        u = normalize(np.log(rng.dirichlet(np.ones(rho))))
    best.iterations = total
    return best


# ---------------------------------------------------------------------------
# 2x2 reducibility thresholds

@dataclass
class BoundaryTables:
    family: KernelFamily
    grid: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    N: int
    density: int


def facet_sup(family, values2x2, excluded: int, N: int, density: int,
              cfg: Optional[SolverConfig] = None) -> float:
    """Largest measurement the excluded pixel sees from Cheeger solutions on its facet.

    The excluded pixel's own value never enters the reduced kernel on that
    facet, so this supremum is the reducibility threshold for it.
    """
    meas = MeasurementSet(np.asarray(values2x2, dtype=float), family)
    oracle = CheegerOracle(meas, N, cfg)
    active = list(oracle.reduced.active)
    if excluded not in active:
        raise CheegerError("excluded pixel must be active")
    pos = active.index(excluded)
    others = [i for i in range(len(active)) if i != pos]
    best = 0.0
    for sub in simplex_grid(len(others), density):
        lam = np.zeros(len(active))
        lam[others] = sub
        best = max(best, float(oracle.v(lam)[pos]))
    return best


def reducibility_boundary_sweep(family, grid: int = 4, N: int = 64, density: int = 4,
                                cfg: Optional[SolverConfig] = None) -> BoundaryTables:
    """Sample the 2x2 thresholds ``Y`` and ``Z`` on ``{1/grid, ..., 1}^2``.

    Layout ``[[d1, d3], [d2, d4]]`` with ``d4 = 1`` the largest value.
    ``Z(a, b)`` bounds ``d1`` given ``d2 = a, d3 = b``; ``Y(a, b)`` bounds
    ``d2`` given ``d1 = a, d3 = b``.
    """
    if isinstance(family, (str, dict)):
        family = KernelFamily.from_dict(family)
    if grid > 32:
        raise CheegerError("grid is limited to 32 points per axis")
    vals = np.arange(1, grid + 1) / grid
    Y = np.zeros((grid, grid))
    Z = np.zeros((grid, grid))
    probe = 0.5
    for ia, a in enumerate(vals):
        for ib, b in enumerate(vals):
            # flat index order: d1 (0), d2 (1), d3 (2), d4 (3)
            Z[ia, ib] = facet_sup(family, [[probe, b], [a, 1.0]], 0, N, density, cfg)
            Y[ia, ib] = facet_sup(family, [[a, b], [probe, 1.0]], 1, N, density, cfg)
    return BoundaryTables(family, vals, Y, Z, N, density)
