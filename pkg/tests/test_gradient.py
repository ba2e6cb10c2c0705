import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import STUDY_PARAMS, STUDY_SPACE, prior_mean_sample
from monorgp.gradient import TestGrid, build_operator, gradient_prior_cov, predict_gradient
from monorgp.kernel import InputSpace, KernelParams
from monorgp.rgp import RGP
from oracles import fd_kernel_hessian, fd_mean_gradient


@pytest.fixture(scope="module")
def study_model():
    return RGP(STUDY_SPACE, STUDY_PARAMS)


def test_test_grid_spans_basis_box():
    tg = TestGrid.build(STUDY_SPACE, (5, 5))
    np.testing.assert_allclose(tg.points[:5, 0], [0, 2.25, 4.5, 6.75, 9])
    np.testing.assert_allclose(tg.physical[0], STUDY_SPACE.lower)
    np.testing.assert_allclose(tg.physical[-1], STUDY_SPACE.upper)


def test_single_point_test_axis_sits_in_the_middle():
    tg = TestGrid.build(STUDY_SPACE, (1, 3))
    np.testing.assert_allclose(tg.points[:, 0], 4.5)


def test_operator_shapes(study_model):
    op = build_operator(study_model, TestGrid.build(STUDY_SPACE, (5, 5)))
    assert op.H.shape == (50, 100) and op.R.shape == (50, 50) and op.n_test == 25 and op.ndim == 2


def test_grid_mismatch_rejected(study_model):
    other = InputSpace((-2.0, -1.0), (4.0, 4.0), (5, 5))
    with pytest.raises(ValueError):
        build_operator(study_model, TestGrid.build(other, (3, 3)))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_mean_matches_finite_differences(study_model, seed):
    model = study_model.copy()
    tg = TestGrid.build(STUDY_SPACE, (10, 10))
    op = build_operator(model, tg)
    model.mu = prior_mean_sample(model, np.random.default_rng(seed))
    fd = fd_mean_gradient(model, tg.physical, 1e-3)
    np.testing.assert_allclose(op.H @ model.mu, fd, rtol=1e-6)


def test_prior_gradient_covariance_matches_kernel_hessian(study_model):
    tg = TestGrid.build(STUDY_SPACE, (4, 4))
    R = gradient_prior_cov(tg, study_model)
    fd = fd_kernel_hessian(STUDY_SPACE, STUDY_PARAMS, tg.physical)
    scale = np.sqrt(np.outer(np.diag(R), np.diag(R)))
    assert np.max(np.abs(R - fd) / scale) < 1e-5


def test_cross_block_sign_is_negative_product_of_offsets(study_model):
    # two points offset along both axes: the mixed derivative covariance is negative
    tg = TestGrid.build(STUDY_SPACE, (2, 2))
    R = gradient_prior_cov(tg, study_model)
    fd = fd_kernel_hessian(STUDY_SPACE, STUDY_PARAMS, tg.physical, h=1e-4)
    assert np.sign(R[0, 4 + 3]) == np.sign(fd[0, 7])


def test_fresh_gradient_covariance_is_prior(study_model):
    op = build_operator(study_model, TestGrid.build(STUDY_SPACE, (5, 5)))
    pred = predict_gradient(op, study_model)
    assert np.array_equal(pred.mean, np.zeros(50))
    np.testing.assert_allclose(pred.cov, op.R, rtol=1e-9, atol=1e-9 * np.abs(op.R).max())


def test_residual_covariance_is_psd(study_model):
    for res in ((5, 5), (10, 10)):
        op = build_operator(study_model, TestGrid.build(STUDY_SPACE, res))
        assert np.array_equal(op.R_ges, op.R_ges.T)
        assert np.linalg.eigvalsh(op.R_ges).min() >= -1e-8 * np.trace(op.R_ges)


def test_csv_export(tmp_path, study_model):
    op = build_operator(study_model, TestGrid.build(STUDY_SPACE, (3, 3)))
    paths = op.to_csv(tmp_path)
    assert [p.name for p in paths] == ["H_m.csv", "R_m.csv", "R_m_ges.csv"]
    np.testing.assert_array_equal(np.loadtxt(paths[0], delimiter=","), op.H)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), n1=st.integers(3, 6), length=st.floats(0.5, 3.0))
def test_1d_gradient_matches_finite_differences(seed, n1, length):
    sp = InputSpace((0.0,), (3.0,), (n1,))
    m = RGP(sp, KernelParams(2.0, length))
    tg = TestGrid.build(sp, (7,))
    op = build_operator(m, tg)
    m.mu = prior_mean_sample(m, np.random.default_rng(seed))
    fd = fd_mean_gradient(m, tg.physical, 1e-3)
    # the mean is a sum of kernels with O(|mu|) weights: compare against that scale
    scale = np.abs(m.solve_k(m.mu)).sum() * 2.0**2 + 1.0
    assert np.max(np.abs(op.H @ m.mu - fd)) <= 1e-6 * scale
