import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrasobol.errors import (
    EmptySet,
    FitFailure,
    LeverageOne,
    NumericalBreakdown,
    RankDeficient,
    UnderDetermined,
    ZeroVariance,
)
from lrasobol.ortho_poly import design_matrix, truncation_set
from lrasobol.regression import (
    ErrorReport,
    corrected_loo,
    empirical_error_rel,
    empirical_variance,
    generalization_error_rel,
    hat_diagonal,
    info_trace,
    kfold_cv,
    kfold_partition,
    lar_path,
    loo_error,
    ols_solve,
    semi_norm,
)


def brute_force_loo(A, y):
    errs = []
    for i in range(len(y)):
        keep = np.arange(len(y)) != i
        c = np.linalg.solve(A[keep].T @ A[keep], A[keep].T @ y[keep])
        errs.append((y[i] - A[i] @ c) ** 2)
    return float(np.mean(errs))


def test_ols_identity_and_span():
    y = np.array([1.0, -2.0, 3.5])
    assert np.allclose(ols_solve(np.eye(3), y), y)
    rng = np.random.default_rng(0)
    A = rng.normal(size=(20, 4))
    c = rng.normal(size=4)
    assert np.max(np.abs(A @ ols_solve(A, A @ c) - A @ c)) < 1e-10


def test_ols_matches_normal_equations_and_residual_orthogonal():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(50, 10))
    y = rng.normal(size=50)
    c = ols_solve(A, y)
    assert np.allclose(c, np.linalg.solve(A.T @ A, A.T @ y), atol=1e-8)
    r = y - A @ c
    assert np.max(np.abs(A.T @ r)) / (np.linalg.norm(A, 2) * np.linalg.norm(r)) < 1e-10


def test_ols_errors():
    with pytest.raises(UnderDetermined):
        ols_solve(np.ones((2, 3)), np.ones(2))
    A = np.column_stack([np.ones(5), np.ones(5)])
    with pytest.raises(RankDeficient):
        ols_solve(A, np.arange(5.0))


def test_semi_norm():
    assert semi_norm(np.zeros(4)) == 0
    assert semi_norm([3, 4]) == pytest.approx(np.sqrt(12.5))
    assert semi_norm([-2.5] * 7) == pytest.approx(2.5)
    with pytest.raises(EmptySet):
        semi_norm([])


def test_empirical_error():
    y = np.array([1.0, 3.0, 2.0, 7.0])
    assert empirical_error_rel(y, y) == 0
    n = len(y)
    # brute force: mean squared deviation over the unbiased variance = (N - 1) / N
    brute = np.mean((y - y.mean()) ** 2) / (np.sum((y - y.mean()) ** 2) / (n - 1))
    assert empirical_error_rel(np.full(n, y.mean()), y) == pytest.approx(brute)
    assert brute == pytest.approx((n - 1) / n)
    with pytest.raises(ZeroVariance):
        empirical_variance(np.ones(3))


def test_generalization_error():
    rng = np.random.default_rng(2)
    y = rng.normal(size=1000)
    assert generalization_error_rel(y, y) == 0
    assert generalization_error_rel(np.full_like(y, y.mean()), y) == pytest.approx(1.0, abs=0.01)
    noise = rng.normal(size=1000)
    errs = [generalization_error_rel(y + e * noise, y) for e in (0.01, 0.1, 1.0)]
    assert errs[0] < errs[1] < errs[2]


def test_loo_hand_example():
    A = np.ones((2, 1))
    y = np.array([0.0, 2.0])
    assert np.allclose(hat_diagonal(A), 0.5)
    assert loo_error(A, y) == pytest.approx(4.0)


def test_loo_matches_brute_force():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(30, 5))
    y = rng.normal(size=30)
    assert loo_error(A, y) == pytest.approx(brute_force_loo(A, y), rel=1e-8)


def test_loo_leverage_one():
    with pytest.raises(LeverageOne):
        loo_error(np.eye(4), np.arange(4.0))


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_loo_identity_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(12, 41))
    p = int(rng.integers(1, 11))
    A = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    assert loo_error(A, y) == pytest.approx(brute_force_loo(A, y), rel=1e-8)


def test_corrected_loo():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    e = loo_error(A, y, relative=True)
    assert corrected_loo(e, 30, 4, A) > e
    with pytest.raises(UnderDetermined):
        corrected_loo(e, 4, 4, A[:4])


def test_corrected_loo_factor_large_n():
    rng = np.random.default_rng(5)
    n = 10**5
    u = rng.uniform(-1, 1, (n, 2))
    A = design_matrix(truncation_set(2, 2), u, ("legendre", "legendre"))
    factor = corrected_loo(1.0, n, A.shape[1], A)
    assert abs(factor - 1.0) < 1e-3
    assert info_trace(A, "normalized") == pytest.approx(A.shape[1], rel=0.05)


def test_kfold_partition():
    folds = kfold_partition(10, 3, seed=0)
    assert sorted(len(f) for f in folds) == [3, 3, 4]
    assert sorted(np.concatenate(folds).tolist()) == list(range(10))
    assert all(np.array_equal(a, b) for a, b in zip(folds, kfold_partition(10, 3, seed=0)))


def _ols_fit(A_train, y_train):
    c = ols_solve(A_train, y_train)
    return lambda A_test: A_test @ c


def test_kfold_exact_interpolant_and_loo_limit():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(20, 3))
    y = A @ np.array([1.0, -2.0, 0.5])
    assert kfold_cv(_ols_fit, A, y, 4) < 1e-20
    y = y + rng.normal(size=20)
    loo_rel = brute_force_loo(A, y) / empirical_variance(y)
    assert kfold_cv(_ols_fit, A, y, 20) == pytest.approx(loo_rel, rel=1e-10)


def test_kfold_failure_carries_fold():
    def bad(A, y):
        raise RankDeficient("boom")

    with pytest.raises(FitFailure) as info:
        kfold_cv(bad, np.ones((6, 1)), np.arange(6.0), 3)
    assert info.value.fold == 0


def test_lar_dominant_predictor():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(40, 5))
    y = 5 * A[:, 2] + 1e-3 * rng.normal(size=40)
    assert lar_path(A, y, 3)[0] == [2]


def test_lar_orthonormal_design_order():
    rng = np.random.default_rng(8)
    q, _ = np.linalg.qr(rng.normal(size=(60, 8)))
    q = q - q.mean(axis=0)
    q, _ = np.linalg.qr(q)
    y = rng.normal(size=60)
    path = lar_path(q, y, 8)
    expected = list(np.argsort(-np.abs(q.T @ (y - y.mean()))))
    assert path[-1] == expected
    assert all(path[k] == path[-1][: k + 1] for k in range(len(path)))


def test_lar_matches_sklearn_prefix():
    sklearn = pytest.importorskip("sklearn.linear_model")
    rng = np.random.default_rng(9)
    A = rng.normal(size=(50, 20))
    y = A[:, :5] @ rng.normal(size=5) + 0.1 * rng.normal(size=50)
    Xc = A - A.mean(0)
    Xc /= np.linalg.norm(Xc, axis=0)
    _, active, _ = sklearn.lars_path(Xc, y - y.mean(), method="lar", max_iter=15)
    assert lar_path(A, y, 15)[-1] == list(active)[:15]


def test_lar_empty_and_breakdown():
    assert lar_path(np.ones((5, 2)), np.arange(5.0), 0) == []
    x = np.arange(6.0)
    A = np.column_stack([x, x])
    assert len(lar_path(A, x**2, 2, on_breakdown="truncate")) == 1
    with pytest.raises(NumericalBreakdown):
        lar_path(A, x**2, 2, on_breakdown="raise")


def test_error_report_round_trip():
    r = ErrorReport(err_empirical_rel=0.1, err_cv_k_rel=0.2)
    assert ErrorReport.from_dict(r.to_dict()) == r
