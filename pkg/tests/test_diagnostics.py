import numpy as np
import pytest
from scipy import stats

from lsmkit.diagnostics import betainc_reg, ols_regression, t_two_sided_p, vif

from conftest import make_table

sm = pytest.importorskip("statsmodels.api")
smo = pytest.importorskip("statsmodels.stats.outliers_influence")


def _collinear_table(rng, n=300):
    a = rng.standard_normal(n)
    b = 0.9 * a + 0.3 * rng.standard_normal(n)
    c = rng.standard_normal(n)
    y = (a + c + rng.standard_normal(n) > 0).astype(int)
    return make_table(np.column_stack([a, b, c]), y)


def test_vif_matches_statsmodels(rng):
    t = _collinear_table(rng)
    ours = vif(t).vif
    design = sm.add_constant(t.rows)
    ref = [smo.variance_inflation_factor(design, j + 1) for j in range(t.f)]
    np.testing.assert_allclose(ours, ref, rtol=1e-9)


def test_vif_flags_and_singularity(rng):
    t = _collinear_table(rng)
    b = t.rows[:, 0] * 0.999 + 1e-3 * rng.standard_normal(t.n)
    strong = make_table(np.column_stack([t.rows, b]), t.labels)
    assert "F1" in vif(strong).flagged and "F4" in vif(strong).flagged
    dep = make_table(np.column_stack([t.rows, t.rows[:, 0] + t.rows[:, 2]]), t.labels)
    with pytest.raises(ValueError, match="F1.*F3.*F4"):
        vif(dep)
    with pytest.raises(ValueError, match="F2"):
        vif(make_table(np.column_stack([t.rows[:, 0], np.ones(t.n)]), t.labels))


def test_ols_matches_statsmodels(rng):
    t = _collinear_table(rng)
    rep = ols_regression(t)
    fit = sm.OLS(t.labels.astype(float), sm.add_constant(t.rows)).fit()
    np.testing.assert_allclose(rep.coefficient, fit.params, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(rep.standard_error, fit.bse, rtol=1e-9)
    np.testing.assert_allclose(rep.t_statistic, fit.tvalues, rtol=1e-9)
    np.testing.assert_allclose(rep.p_value, fit.pvalues, rtol=1e-7, atol=1e-14)
    assert rep.terms[0] == "Intercept"


def test_t_p_values_against_scipy():
    for t, dof in [(0.0, 5), (1.3, 3), (-2.7, 40), (8.0, 200), (0.02, 1), (25.0, 1000)]:
        assert t_two_sided_p(t, dof) == pytest.approx(2 * stats.t.sf(abs(t), dof), rel=1e-9, abs=1e-300)
    for a, b, x in [(0.5, 0.5, 0.3), (2, 7, 0.1), (30, 0.5, 0.99)]:
        assert betainc_reg(a, b, x) == pytest.approx(stats.beta.cdf(x, a, b), rel=1e-10)


def test_ols_perfect_fit_reports_zero_p(rng):
    X = rng.standard_normal((20, 2))
    y = 1 + X @ [2.0, -1.0]
    rep = ols_regression(make_table(X), labels=y)
    np.testing.assert_allclose(rep.coefficient, [1, 2, -1], atol=1e-10)
    assert rep.degenerate and np.all(rep.p_value == 0)


def test_ols_rank_deficient_and_small_n(rng):
    X = rng.standard_normal((30, 2))
    X = np.column_stack([X, X.sum(axis=1)])
    with pytest.raises(ValueError, match="rank-deficient"):
        ols_regression(make_table(X, (X[:, 0] > 0).astype(int)))
    with pytest.raises(ValueError, match="more rows"):
        ols_regression(make_table(X[:4], [0, 1, 0, 1]))


def test_csv_layout(tmp_path, rng):
    t = _collinear_table(rng)
    ols_regression(t).write_csv(tmp_path / "o.csv")
    vif(t).write_csv(tmp_path / "v.csv")
    assert (tmp_path / "o.csv").read_text().splitlines()[0] == ",Coefficient,Standard Error,t-statistic,P-value"
    assert (tmp_path / "v.csv").read_text().splitlines()[0] == "Factor,VIF,flagged"
