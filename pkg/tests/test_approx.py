import numpy as np
import pytest

from fwdim.approx import KernelSettings, NnSettings, PolySettings, approximate_im
from fwdim.errors import ValidationError
from fwdim.kernel import KernelSpec
from fwdim.neural_net import TrainConfig
from fwdim.portfolio import ForwardContract, NettingSet, value_netting_set
from fwdim.regression import NormalScaler, StudentTScaler
from fwdim.sde import GBM, build_time_grid, simulate_paths

GRID = build_time_grid(1.0, 0.25)
MODEL = GBM(100.0, 0.0, 0.2)
NS = NettingSet([ForwardContract(100.0, 1.0)])


@pytest.fixture(scope="module")
def world():
    cube = simulate_paths(MODEL, GRID, 4000, seed=1)
    return cube, value_netting_set(NS, cube, MODEL)


SETTINGS = {
    "poly": PolySettings(2),
    "kernel": KernelSettings(KernelSpec(), 1),
    "nn": NnSettings((8, 8), TrainConfig(epochs=40)),
}


@pytest.mark.parametrize("method", list(SETTINGS))
def test_surface_shape_and_sign(world, method):
    _, values = world
    res = approximate_im(method, values, GRID, NormalScaler(0.99), SETTINGS[method])
    assert res.surface.im.shape == (4000, 4)
    assert np.all(res.surface.im >= 0)
    assert res.surface.n_inner == 0
    assert len(res.steps) == 4


def test_first_step_uses_sample_mean(world):
    _, values = world
    res = approximate_im("poly", values, GRID, NormalScaler(0.99), PolySettings(2))
    pnl = values[:, 1] - values[:, 0]
    expected = np.sqrt(np.mean(pnl**2)) * NormalScaler(0.99).factor()
    np.testing.assert_allclose(res.surface.im[:, 0], expected, rtol=1e-14)
    assert res.steps[0].artifact["degenerate_regressor"]


def test_spot_regressor_matches_value_regressor_for_forward(world):
    # a forward is affine in spot, so both regressors span the same quadratics
    cube, values = world
    a = approximate_im("poly", values, GRID, NormalScaler(0.99), PolySettings(2))
    b = approximate_im(
        "poly", values, GRID, NormalScaler(0.99), PolySettings(2), regressor=cube.values[:, 0::2, 0]
    )
    np.testing.assert_allclose(a.surface.im, b.surface.im, rtol=1e-9)


def test_student_t_scaler_scales_surface(world):
    _, values = world
    a = approximate_im("poly", values, GRID, NormalScaler(0.99), PolySettings(2))
    t = StudentTScaler(0.99, 4.0)
    b = approximate_im("poly", values, GRID, t, PolySettings(2))
    np.testing.assert_allclose(
        b.surface.im, a.surface.im * t.factor() / NormalScaler(0.99).factor(), rtol=1e-14
    )


@pytest.mark.parametrize("method", list(SETTINGS))
def test_threads_do_not_change_result(world, method):
    _, values = world
    a = approximate_im(method, values, GRID, NormalScaler(0.99), SETTINGS[method], threads=1)
    b = approximate_im(method, values, GRID, NormalScaler(0.99), SETTINGS[method], threads=3)
    np.testing.assert_array_equal(a.surface.im, b.surface.im)


def test_unknown_method(world):
    with pytest.raises(ValidationError):
        approximate_im("svm", world[1], GRID, NormalScaler(0.99), None)
