import cvxpy as cp
import numpy as np
import pytest

from shapepix import MeasurementSet, build_kernel, measure
from shapepix.projections import (ConsistencyProblem, project_ball, project_consistency,
                                  project_hyperplane, project_nearest, project_weighted_simplex)
from shapepix.shapes import Circle, rasterize


def test_ball_projection():
    z = np.array([[[0.3, 0.4], [3.0, 4.0]]])
    out = project_ball(z)
    np.testing.assert_allclose(out[0, 0], [0.3, 0.4])
    np.testing.assert_allclose(out[0, 1], [0.6, 0.8])
    np.testing.assert_allclose(project_ball(z, 10.0), z)


def test_hyperplane_projection():
    k = build_kernel("box", 2, 8)
    patch = k.patch(0)
    out = project_hyperplane(np.zeros((8, 8)), patch, 1.0)
    np.testing.assert_allclose(out[:4, :4], 1.0)
    assert np.all(out[4:] == 0) and np.all(out[:, 4:] == 0)
    I = np.full((8, 8), 0.7)
    np.testing.assert_allclose(project_hyperplane(I, patch, 0.7), I)
    with pytest.raises(ValueError):
        project_hyperplane(I, np.zeros((8, 8)), 1.0)


def _problem(family="bilinear", m=4, N=24, seed=0):
    truth = rasterize(Circle((0.45, 0.55), 0.3), N)
    k = build_kernel(family, m, N)
    meas = measure(truth, k)
    return truth, ConsistencyProblem(meas, k, np.ones((N, N), dtype=bool))


@pytest.mark.parametrize("method", ["block", "cyclic"])
def test_feasible_input_unchanged(method):
    truth, prob = _problem()
    res = project_consistency(truth.copy(), prob, 1e-10, 10, method)
    assert res.converged
    np.testing.assert_allclose(res.image, truth, atol=1e-10)


@pytest.mark.parametrize("method", ["block", "cyclic"])
def test_perturbed_truth_reaches_tolerance(method):
    truth, prob = _problem()
    rng = np.random.default_rng(3)
    noisy = np.clip(truth + 0.2 * rng.standard_normal(truth.shape), 0, 1)
    res = project_consistency(noisy, prob, 1e-6, 5000, method)
    assert res.converged and res.residual <= 1e-6
    assert res.image.min() >= 0


def test_zero_measurements_give_zero_raster():
    k = build_kernel("box", 2, 8)
    prob = ConsistencyProblem(MeasurementSet(np.zeros((2, 2))), k, np.zeros((8, 8), dtype=bool))
    res = project_consistency(np.random.default_rng(0).random((8, 8)), prob)
    assert np.all(res.image == 0.0)


def _qp_projections(x, prob):
    """Projections of ``x`` from two conic/QP solvers, each with its objective."""
    W = prob.kernel.weights1d
    out = []
    for solver, kw in [(cp.CLARABEL, {}),
                       (cp.OSQP, dict(eps_abs=1e-12, eps_rel=1e-12, max_iter=200000))]:
        X = cp.Variable(x.shape)
        cp.Problem(cp.Minimize(cp.sum_squares(X - x)),
                   [W @ X @ W.T == prob.D, X >= 0]).solve(solver=solver, **kw)
        P = np.maximum(X.value, 0)
        if np.max(np.abs(W @ P @ W.T - prob.D)) < 1e-7:
            out.append((float(np.sum((P - x) ** 2)), P))
    return out


@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
@pytest.mark.parametrize("spread, newton, tol", [(0.05, False, 1e-7), (0.05, True, 1e-9),
                                                 (1.0, False, 1e-9), (1.0, True, 1e-9)])
def test_nearest_point_beats_qp_solvers(spread, newton, tol):
    truth, prob = _problem("bilinear", 4, 16)
    x = truth + spread * np.random.default_rng(5).standard_normal(truth.shape)
    res, y = project_nearest(x, prob, tol=tol, max_steps=200000, newton=newton)
    assert res.converged and res.image.min() >= 0
    ours = float(np.sum((res.image - x) ** 2))
    refs = _qp_projections(x, prob)
    assert refs
    for obj, P in refs:
        # for the exact projection every feasible P obeys |P - proj|^2 <= obj(P) - obj(proj)
        assert ours <= obj + 1e-7
        assert np.sum((P - res.image) ** 2) <= obj - ours + 1e-7


def test_nearest_point_warm_start_keeps_answer():
    truth, prob = _problem("box", 4, 16)
    x = truth + 0.1
    res, y = project_nearest(x, prob, tol=1e-10, max_steps=5000)
    again, _ = project_nearest(x, prob, y, tol=1e-10, max_steps=5)
    assert again.sweeps <= 1
    np.testing.assert_allclose(again.image, res.image, atol=1e-9)


def test_weighted_simplex_projection_matches_qp_solver():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((6, 6))
    f = rng.random((6, 6))
    mask = np.ones((6, 6), dtype=bool)
    mask[0] = False
    X = cp.Variable((6, 6))
    cp.Problem(cp.Minimize(cp.sum_squares(X - x)),
               [cp.sum(cp.multiply(f, X)) == 1, X >= 0, X[0] == 0]).solve(solver=cp.CLARABEL)
    out = project_weighted_simplex(x, f, mask)
    np.testing.assert_allclose(out, X.value, atol=1e-6)
    assert np.sum(f * out) == pytest.approx(1.0)
