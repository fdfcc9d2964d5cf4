import numpy as np
import pytest

from shapepix import (Circle, MeasurementSet, SolverConfig, build_kernel, measure, pixel_mismatch,
                      rasterize, reconstruct)
from shapepix.calculus import edge_mask, tv
from shapepix.projections import ConsistencyProblem, project_nearest
from shapepix.solver import PDState, primal_dual_step, run_primal_dual

N, M = 64, 8


@pytest.fixture(scope="module")
def circle_case():
    truth = rasterize(Circle((0.48, 0.52), 0.3), N)
    meas = measure(truth, build_kernel("box", M, N))
    return truth, meas, reconstruct(meas, N)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tau0=0.5, sigma0=0.5)
    with pytest.raises(ValueError):
        SolverConfig(projection="random")
    with pytest.raises(ValueError):
        SolverConfig(tau0=-1.0)
    cfg = SolverConfig(tau0=0.05, sigma0=2.4, accel=True)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg


def test_zero_measurements_give_zero_image():
    rep = reconstruct(MeasurementSet(np.zeros((4, 4))), 32)
    assert rep.iterations == 0 and rep.converged
    assert np.all(rep.image == 0.0)


def test_converged_solve_is_consistent(circle_case):
    truth, meas, rep = circle_case
    assert rep.converged
    assert rep.residual <= 1e-6
    assert rep.image.min() >= 0.0
    assert pixel_mismatch(rep.image, truth) < 0.01


def test_objective_not_above_feasible_alternative(circle_case):
    truth, meas, rep = circle_case
    # the truth raster is itself consistent, so it is a feasible comparison image
    assert tv(rep.image) <= tv(truth) * (1 + 1e-3)


def test_report_serializes(circle_case):
    d = circle_case[2].to_dict()
    assert d["converged"] and d["min_value"] >= 0
    assert len(d["tv_history"]) == len(d["residual_history"])


@pytest.mark.parametrize("projection", ["block", "cyclic"])
def test_pocs_projections_reach_same_image(circle_case, projection):
    truth, meas, rep = circle_case
    other = reconstruct(meas, N, SolverConfig(projection=projection, max_iters=3000))
    assert other.residual <= 1e-6
    assert tv(other.image) == pytest.approx(tv(rep.image), rel=5e-3)


def test_accelerated_schedule_stays_feasible(circle_case):
    truth, meas, rep = circle_case
    acc = reconstruct(meas, N, SolverConfig(accel=True))
    assert acc.residual <= 1e-6 and acc.image.min() >= 0
    assert tv(acc.image) == pytest.approx(tv(rep.image), rel=0.01)


def _problem(values, family="box", n=16):
    meas = MeasurementSet(np.asarray(values, dtype=float), family)
    k = meas.kernel(n)
    from shapepix.cheeger import reduced_domain
    mask = reduced_domain(meas, k).mask
    return meas, ConsistencyProblem(meas, k, mask), mask


def _projector(prob):
    def project(X):
        return project_nearest(X, prob, tol=1e-12, max_steps=100, newton=True)[0]
    return project


@pytest.mark.parametrize("values", [np.ones((2, 2)), [[1.0, 1.0], [0.0, 0.0]]])
def test_binary_optimum_is_a_fixed_point(values):
    meas, prob, mask = _problem(values)
    I0 = mask.astype(float)
    edges = edge_mask(mask).astype(float)
    state = PDState(I0.copy(), np.zeros((16, 16, 2)), I0.copy(), 0.35, 0.35)
    for _ in range(5):
        state, _ = primal_dual_step(state, _projector(prob), edges=edges)
    np.testing.assert_allclose(state.I, I0, atol=1e-8)


def test_dual_stays_in_ball():
    rng = np.random.default_rng(0)
    meas, prob, mask = _problem(rng.random((4, 4)), "bilinear", 32)
    g = 0.5 + rng.random((32, 32))
    state = PDState(rng.random((32, 32)), np.zeros((32, 32, 2)), rng.random((32, 32)), 0.35, 0.35)
    for _ in range(30):
        state, _ = primal_dual_step(state, _projector(prob), g=g)
        norm = np.hypot(state.zeta[..., 0], state.zeta[..., 1])
        assert np.all(norm <= g + 1e-12)


def test_run_reports_unconverged_without_raising():
    meas, prob, mask = _problem(np.random.default_rng(1).random((4, 4)), "bilinear", 32)
    rep = run_primal_dual(np.zeros((32, 32)), _projector(prob), SolverConfig(max_iters=3),
                          prob.residual)
    assert rep.iterations == 3 and not rep.converged
