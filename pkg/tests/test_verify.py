import json
import math

import numpy as np
import pytest

from semilogconcave import constants as C
from semilogconcave import model as M
from semilogconcave import verify as V
from semilogconcave.sde import IntegratorConfig, ParticleCloud, simulate


@pytest.fixture(scope="module")
def ou_cloud():
    b = simulate(M.ou_spec(2.0), [0.0], IntegratorConfig(h=1e-2, T=3.0, N=4000, seed=3), [3.0])
    return b.cloud(0)


def test_default_library_has_twenty_functions():
    lib = V.default_test_functions(3)
    assert len(lib) == 20
    x = np.random.default_rng(0).normal(size=(5, 3))
    for tf in lib:
        assert tf.f(x).shape == (5,)
        assert tf.grad(x).shape == (5, 3)
        # gradient against central differences
        eps = 1e-6
        fd = np.stack([(tf.f(x + eps * e) - tf.f(x - eps * e)) / (2 * eps) for e in np.eye(3)], axis=1)
        np.testing.assert_allclose(tf.grad(x), fd, atol=1e-6)


def test_bootstrap_stderr_of_mean():
    x = np.random.default_rng(1).normal(size=2000)
    se = V.bootstrap_stderr(lambda idx: float(x[idx].mean()), x.size, B=400)
    assert se == pytest.approx(1 / math.sqrt(2000), rel=0.15)
    assert V.bootstrap_stderr(lambda idx: 0.0, 1) == 0.0


def test_entropy_jackknife_of_constant_is_zero():
    assert V._entropy_jackknife(np.full(10, 2.0)) == pytest.approx(0.0, abs=1e-14)


def test_poincare_passes_on_gaussian_marginal(ou_cloud):
    res = V.check_poincare(ou_cloud, C.poincare_flow(2.0, 1.0, 3.0))
    assert res.passed and res.notes.startswith("necessary-condition")
    assert len(res.series) == 20


def test_poincare_fails_with_too_small_constant(ou_cloud):
    res = V.check_poincare(ou_cloud, 0.1)
    assert not res.passed


def test_logsobolev_passes(ou_cloud):
    assert V.check_logsobolev(ou_cloud, C.logsobolev_flow(2.0, 3.0)).passed


def test_constant_function_gives_zero_variance(ou_cloud):
    res = V.check_poincare(ou_cloud, 1.0, testfns=[V.constant_function(3.0)])
    assert res.empirical == pytest.approx(0.0, abs=1e-20) and res.passed


def test_empty_cloud_rejected():
    with pytest.raises(ValueError):
        V.check_poincare(np.zeros((0, 1)), 1.0)


def test_w_contraction_ou():
    res = V.check_w_contraction(M.ou_spec(2.0), [1.0], [0.0], [0.0, 0.5, 1.0],
                                IntegratorConfig(h=1e-3, T=1.0, N=200, seed=1))
    assert res.passed
    emp = [r["empirical"] for r in res.series]
    np.testing.assert_allclose(emp, [(1 - 1e-3) ** k for k in (0, 500, 1000)], rtol=1e-12)


def test_w_contraction_needs_K():
    spec = M.gradient_diffusion(M.make_potential("polynomial", {"terms": [([2], 1.0)]}), 1)
    with pytest.raises(ValueError, match="K"):
        V.check_w_contraction(spec, [1.0], [0.0], [1.0], IntegratorConfig(h=0.1, T=1.0, N=2))


@pytest.mark.parametrize("form,m", [("strong", None), ("squared", None), ("interpolated", 3.0)])
def test_gradient_commutation_forms(form, m):
    tf = V.default_test_functions(1)[10]
    res = V.check_gradient_commutation(M.ou_spec(2.0), tf.f, tf.grad, [0.3], 1.0,
                                       IntegratorConfig(h=1e-2, T=1.0, N=2000, seed=2), form=form, m=m)
    assert res.passed


def test_gradient_commutation_identity_at_zero():
    tf = V.default_test_functions(1)[15]
    res = V.check_gradient_commutation(M.ou_spec(2.0), tf.f, tf.grad, [0.3], 0.0,
                                       IntegratorConfig(h=1e-2, T=1.0, N=10, seed=2))
    assert res.passed
    assert res.empirical == pytest.approx(res.bound, rel=2e-6)


def test_gradient_commutation_rejects_bad_form():
    tf = V.default_test_functions(1)[0]
    with pytest.raises(ValueError):
        V.check_gradient_commutation(M.ou_spec(2.0), tf.f, tf.grad, [0.0], 1.0,
                                     IntegratorConfig(h=0.1, T=1.0, N=2), form="interpolated", m=1.0)


@pytest.mark.parametrize("mean_shift,ratio", [(0.1, 1.0), (1.0, 1.0), (3.0, 1.0), (0.5, 2.0), (0.0, 0.3)])
def test_t2_closed_form(mean_shift, ratio):
    res = V.check_t2(M.ou_spec(2.0), math.inf, [mean_shift], ratio)
    assert res.passed
    if ratio == 1.0:
        assert res.details["W2_half"] == pytest.approx(mean_shift**2 / 2, rel=1e-14)
        assert res.details["H"] * res.details["C_T"] == pytest.approx(mean_shift**2, rel=1e-14)


def test_t2_needs_ou():
    with pytest.raises(ValueError):
        V.check_t2(M.gradient_diffusion(M.double_well(), 1), 1.0, [1.0])


@pytest.mark.parametrize("kind", ["P", "LS"])
def test_convolution_exact(kind):
    res = V.check_convolution(kind, 1.0, 2.0, 0.3, alpha=0.5)
    assert res.passed and res.stderr == 0.0


def test_variance_decay_corrected_and_stated():
    tf = V.default_test_functions(1)[10]
    cfg = IntegratorConfig(h=1e-2, T=1.0, N=1000, seed=4)
    res = V.check_variance_entropy_decay(M.ou_spec(2.0), tf.f, tf.grad, [0.0, 0.5, 1.0], cfg)
    assert res.passed
    assert all(r["stated_bound"] == pytest.approx(r["bound"] / 2) for r in res.series)
    assert "stated_form_ratio" in res.details


def test_entropy_decay_needs_positive_function():
    tf = V.default_test_functions(1)[0]
    with pytest.raises(ValueError, match="positive"):
        V.check_variance_entropy_decay(M.ou_spec(2.0), tf.f, tf.grad, [0.0, 0.5],
                                       IntegratorConfig(h=1e-1, T=1.0, N=50, seed=4), kind="entropy", burn_in=1.0)


def test_coupling_time_tail_brownian():
    res = V.check_coupling_time_tail(M.brownian_spec(1), [0.5], [-0.5], [0.25, 1.0],
                                     IntegratorConfig(h=1e-3, T=1.0, N=2000, seed=5))
    assert res.passed
    for row in res.series:
        assert abs(row["empirical"] - row["reference_exact"]) <= 3 * row["stderr"] + 0.02


def test_coupling_time_tail_ou_reference():
    res = V.check_coupling_time_tail(M.ou_spec(2.0), [0.5], [-0.5], [0.5, 1.0],
                                     IntegratorConfig(h=1e-3, T=1.0, N=2000, seed=5), reference="ou")
    assert res.passed


def test_eberle_w1_double_well():
    spec = M.gradient_diffusion(M.double_well(), 1)
    rate = C.eberle_rate(M.double_well().analytic_kappa(1))
    res = V.check_eberle_w1(spec, [1.0], [-1.0], [0.0, 1.0, 2.0], IntegratorConfig(h=1e-2, T=2.0, N=1000, seed=6),
                            rate=rate)
    assert res.passed
    assert res.details["R0"] == pytest.approx(2.0)


def test_polynomial_decay_quartic():
    spec = M.gradient_diffusion(M.power(2.0), 1)
    res = V.check_polynomial_decay(spec, [2.0], [-1.0], [0.0, 0.5, 1.0, 2.0],
                                   IntegratorConfig(h=1e-3, T=2.0, N=100, seed=8))
    assert res.passed


def test_polynomial_decay_needs_beta():
    with pytest.raises(ValueError, match="beta"):
        V.check_polynomial_decay(M.ou_spec(1.0), [1.0], [0.0], [1.0], IntegratorConfig(h=0.1, T=1.0, N=2))


def test_mckean_contraction_rate():
    ms = M.builtin_mckean(M.quadratic(1.0), M.quadratic(0.25), 1)
    res = V.check_mckean_contraction(ms, lambda g, n: g.normal(size=(n, 1)) + 2, lambda g, n: g.normal(size=(n, 1)) - 2,
                                     np.linspace(0, 2, 11), IntegratorConfig(h=1e-2, T=2.0, N=500, seed=7))
    assert res.passed and res.sense == "ge"
    assert res.details["relative_error"] < 0.15


def test_mckean_nonpositive_rate_not_applicable():
    ms = M.builtin_mckean(M.zero_potential(), M.quadratic(-0.5), 1)
    res = V.check_mckean_contraction(ms, [0.0], [1.0], [0.0, 1.0], IntegratorConfig(h=0.1, T=1.0, N=4))
    assert res.passed is None and not res.asserted


def test_kinetic_contraction_reported_only():
    res = V.check_kinetic_contraction(M.quadratic(1.0), 0.0, [1.0, 0.0], [0.0, 0.0], np.linspace(0, 3, 7),
                                      IntegratorConfig(h=1e-2, T=3.0, N=50, seed=9))
    assert res.passed is None and not res.asserted
    assert res.details["K_search"] == pytest.approx(0.98876, abs=1e-4)


def test_ou_exponential_moment_closed_form():
    # a -> 0 gives 1; d = 1, x0 = 0, s^2 = (1 - e^{-2t})/2
    assert V.ou_exponential_moment(2.0, [0.0], 1.0, 0.0) == 1.0
    s2 = (1 - math.exp(-2.0)) / 2
    assert V.ou_exponential_moment(2.0, [0.0], 1.0, 0.3) == pytest.approx((1 - 0.6 * s2) ** -0.5)
    assert V.ou_exponential_moment(2.0, [0.0], 1.0, 10.0) == math.inf


def test_exponential_moment_check_with_calibrated_rate():
    Ce = V.calibrate_exponential_moment_rate(2.0, [0.5], np.linspace(0, 2, 21))
    res = V.check_exponential_moment(M.ou_spec(2.0), [0.5], Ce + 0.5, [0.0, 1.0, 2.0],
                                     IntegratorConfig(h=1e-2, T=2.0, N=2000, seed=10))
    assert res.passed


def test_results_serialize(tmp_path, ou_cloud):
    res = V.check_poincare(ou_cloud, 1.0)
    json.dumps(res.to_dict())
    res.write_series(tmp_path / "s.csv")
    head = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert head == "t,empirical,bound,stderr,passed"


def test_stderr_floor_positive():
    cloud = ParticleCloud(np.zeros((50, 1)), 0.0, 0.1, 0)
    res = V.check_poincare(cloud, 1.0, testfns=V.default_test_functions(1)[:5])
    assert all(r["stderr"] > 0 for r in res.series)
