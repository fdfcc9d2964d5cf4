"""Accelerated primal-dual minimization of total variation over consistent images.

Each iteration performs a projected dual ascent on ``zeta``, a projected
primal descent on ``I`` and an extrapolation step::

    zeta <- P_ball(zeta + sigma * grad(Ibar))
    I+   <- P_C(I + tau * div(zeta))
    Ibar <- I+ + theta * (I+ - I)

With ``accel=True`` the steps follow ``theta = 1/sqrt(1 + 4 tau)``,
``tau <- theta tau``, ``sigma <- sigma / theta``; otherwise ``theta = 1``.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import _fused
from .calculus import edge_mask
from .projections import (ConsistencyProblem, ProjectionResult, project_consistency,
                          project_nearest)
from .kernels import Kernel
from .sampling import MeasurementSet, apply_adjoint


class SolverError(RuntimeError):
    pass


PROJECTIONS = ("nearest", "block", "cyclic")


@dataclass
class SolverConfig:
    tau0: float = 0.35
    sigma0: float = 0.35
    max_iters: int = 5000
    rel_change_tol: float = 1e-6
    pocs_tol: float = 1e-6
    pocs_max_sweeps: int = 5
    final_max_sweeps: int = 5000
    accel: bool = False
    projection: str = "nearest"
    free_boundary: bool = False
    closed: bool = True
    record_every: int = 10
    g: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.tau0 > 0 and self.sigma0 > 0):
            raise ValueError("step sizes must be positive")
        if self.tau0 * self.sigma0 * 8.0 >= 1.0:
            raise ValueError("step sizes violate tau0 * sigma0 * 8 < 1")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")
        if self.g is not None and np.any(np.asarray(self.g) <= 0):
            raise ValueError("TV weight g must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["g"] = None if self.g is None else "array"
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__ and k != "g"}
        return cls(**known)


@dataclass
class SolverReport:
    image: np.ndarray
    iterations: int
    tv_history: List[float] = field(default_factory=list)
    residual_history: List[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    residual: float = float("nan")
    unconverged_projections: int = 0
    dual: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def objective(self) -> float:
        return self.tv_history[-1]

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "wall_time": self.wall_time,
            "residual": self.residual,
            "tv": self.tv_history[-1] if self.tv_history else None,
            "min_value": float(self.image.min()),
            "max_value": float(self.image.max()),
            "unconverged_projections": self.unconverged_projections,
            "tv_history": [float(v) for v in self.tv_history],
            "residual_history": [float(v) for v in self.residual_history],
        }


@dataclass
class PDState:
    I: np.ndarray
    zeta: np.ndarray
    Ibar: np.ndarray
    tau: float
    sigma: float


def _weight(g, shape):
    if g is None:
        return np.ones(shape)
    return np.ascontiguousarray(np.broadcast_to(np.asarray(g, dtype=float), shape))


def _edges(edges, shape):
    if edges is None:
        return np.ones(shape + (2,))
    return np.ascontiguousarray(edges, dtype=float)


def primal_dual_step(state: PDState, project: Callable[[np.ndarray], ProjectionResult],
                     g=None, accel: bool = False, edges=None, _prepared=False):
    """Advance ``state`` by one iteration; returns ``(new_state, projection_result)``.

    ``edges`` restricts the dual variable to difference terms inside a domain mask.
    """
    shape = state.I.shape
    if not _prepared:
        g = _weight(g, shape)
        edges = _edges(edges, shape)
    zeta = state.zeta.copy()
    _fused.dual_update(zeta, state.Ibar, state.sigma, g, edges)
    moved = np.empty(shape)
    _fused.primal_update(state.I, zeta, state.tau, moved)
    proj = project(moved)
    I_new = proj.image
    if accel:
        theta = 1.0 / math.sqrt(1.0 + 4.0 * state.tau)
        tau, sigma = theta * state.tau, state.sigma / theta
    else:
        theta, tau, sigma = 1.0, state.tau, state.sigma
    Ibar = np.empty(shape)
    _fused.extrapolate(I_new, state.I, theta, Ibar)
    return PDState(I_new, zeta, Ibar, tau, sigma), proj


def run_primal_dual(I0, project, cfg: SolverConfig, residual: Callable[[np.ndarray], float],
                    edges=None, zeta0=None, final_project=None) -> SolverReport:
    """Iterate :func:`primal_dual_step` until the relative primal change and the
    measurement residual are both below tolerance, or ``max_iters`` is hit.

    When ``final_project`` is given the loop stops on the relative change
    alone and the residual is judged after the final projection.
    """
    t0 = time.perf_counter()
    I0 = np.array(I0, dtype=float)
    shape = I0.shape
    g = _weight(cfg.g, shape)
    e = _edges(edges, shape)
    zeta = np.zeros(shape + (2,)) if zeta0 is None else np.array(zeta0, dtype=float)
    state = PDState(I0, zeta, I0.copy(), cfg.tau0, cfg.sigma0)
    report = SolverReport(I0, 0)
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        prev = state.I
        state, proj = primal_dual_step(state, project, g, cfg.accel, e, _prepared=True)
        if not proj.converged:
            report.unconverged_projections += 1
        if it % cfg.record_every == 0:
            report.tv_history.append(_fused.tv_value(state.I, g, e))
            report.residual_history.append(proj.residual)
        num = np.linalg.norm(state.I - prev)
        den = np.linalg.norm(state.I)
        # with a final exact projection the loop only has to settle
        consistent = final_project is not None or proj.residual <= cfg.pocs_tol
        if num <= cfg.rel_change_tol * max(den, 1e-300) and consistent:
            converged = True
            break
    I = state.I
    if final_project is not None:
        I = final_project(I).image
    res = residual(I)
    report.image = I
    report.dual = state.zeta
    report.iterations = it
    report.residual = res
    report.converged = bool(converged and res <= cfg.pocs_tol)
    report.tv_history.append(_fused.tv_value(I, g, e))
    report.residual_history.append(res)
    report.wall_time = time.perf_counter() - t0
    return report


def initial_guess(meas: MeasurementSet, kernel, mask):
    """Back-projected measurements scaled to peak 1, zero off the mask."""
    I0 = apply_adjoint(meas.values, kernel)
    top = I0.max()
    if top > 0:
        I0 = np.clip(I0 / top, 0.0, 1.0)
    I0[~mask] = 0.0
    return I0


def _padded_kernel(kernel: Kernel) -> Kernel:
    W = np.pad(kernel.weights1d, ((0, 0), (1, 1)))
    W.setflags(write=False)
    return Kernel(kernel.family, kernel.m, kernel.N + 2, W)


def _projectors(prob: ConsistencyProblem, cfg: SolverConfig):
    if cfg.projection != "nearest":
        def project(X):
            return project_consistency(X, prob, cfg.pocs_tol, cfg.pocs_max_sweeps, cfg.projection)

        def final(X):
            return project_consistency(X, prob, cfg.pocs_tol, cfg.final_max_sweeps, cfg.projection)
        return project, final

    state = {"y": None}

    def nearest(X, steps, newton=False):
        res, state["y"] = project_nearest(X, prob, state["y"], cfg.pocs_tol, steps, newton)
        return res

    return (lambda X: nearest(X, cfg.pocs_max_sweeps),
            lambda X: nearest(X, cfg.final_max_sweeps, newton=True))


def reconstruct(meas: MeasurementSet, N: int, cfg: Optional[SolverConfig] = None,
                I0=None) -> SolverReport:
    """Minimize total variation over non-negative rasters consistent with ``meas``.

    ``cfg.closed`` extends the image by zero outside the unit square so that
    mass touching the border pays for the jump; ``cfg.free_boundary`` drops
    differences that cross the border of the reduced domain.
    """
    from .cheeger import reduced_domain

    cfg = cfg or SolverConfig()
    kernel = meas.kernel(N)
    reduced = reduced_domain(meas, kernel)
    if reduced.rho == 0:
        return SolverReport(np.zeros((N, N)), 0, [0.0], [0.0], True, 0.0, 0.0)
    if I0 is None:
        I0 = initial_guess(meas, kernel, reduced.mask)
    mask = reduced.mask
    edges = edge_mask(mask) if cfg.free_boundary else None
    if cfg.closed:
        kernel = _padded_kernel(kernel)
        I0 = np.pad(np.asarray(I0, dtype=float), 1)
        if cfg.free_boundary:
            edges = edge_mask(np.pad(mask, 1, constant_values=True))
        mask = np.pad(mask, 1)
    prob = ConsistencyProblem(meas, kernel, mask)

    project, final = _projectors(prob, cfg)

    rep = run_primal_dual(I0, project, cfg, prob.residual, edges=edges, final_project=final)
    if cfg.closed:
        rep.image = rep.image[1:-1, 1:-1]
    return rep
