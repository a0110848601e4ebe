import math

import pytest

import dualgate


def test_gaussian_np_and_holder():
    pair = dualgate.DistributionPair.unit_gaussian(1.0)
    assert dualgate.optimal_alpha(1.0) == pytest.approx(3.0)
    assert dualgate.holder_constant(pair, 3.0) == pytest.approx(math.e, rel=1e-12)
    tpr = dualgate.np_tpr(pair, 1e-6)
    assert tpr == pytest.approx(dualgate.normal_cdf(dualgate.normal_quantile(1e-6) + 1.0), rel=1e-12)
    assert tpr <= dualgate.holder_per_step(pair, 3.0, 1e-6)


def test_ceilings():
    pair = dualgate.DistributionPair.unit_gaussian(1.0)
    assert dualgate.exact_ceiling(pair, 1000, 1.0) == pytest.approx(18.3, rel=5e-3)
    assert dualgate.holder_jensen_ceiling(pair, 1000, 1.0, 3.0) == pytest.approx(27.2, rel=1e-2)
    assert dualgate.mi_finite_horizon(1.0, 100, 2.0) == pytest.approx(21.0)
    with pytest.raises(ValueError):
        dualgate.exact_ceiling(pair, 10, 20.0)


def test_counting_and_direct_sum():
    pair = dualgate.DistributionPair.unit_gaussian(1.0)
    value, err = dualgate.counting_bound(pair, 0.1, 2.0)
    lo, hi = dualgate.direct_np_sum(pair, 0.1, 2.0, 3000)
    assert lo <= hi <= value
    assert err < 1e-8 * value
    with pytest.raises(ArithmeticError):
        dualgate.counting_bound(dualgate.DistributionPair.laplace(), 0.1, 2.0)


def test_ball_and_coverage():
    cert = dualgate.toy_certificate(0, 5.0, 1)
    assert cert["d"] == 10 == len(cert["theta0"])
    assert cert["radius_r"] == cert["margin_m"] / cert["lipschitz_L"]
    sigma = dualgate.sigma_star(240, 0.02, 0.286)
    assert dualgate.coverage_tpr(240, 0.02, sigma) == pytest.approx(0.286, abs=1e-9)


def test_transformer_table():
    rows = dualgate.transformer_table()
    steps = [r[3] for r in rows]
    assert steps[0] == pytest.approx(11.6)
    assert all(s >= 2 for s in steps) and steps == sorted(steps, reverse=True)


def test_run_experiment(tmp_path):
    summary = dualgate.run("starvation", {"horizon": 200}, seed=3, out_dir=str(tmp_path))
    assert summary["passed"]
    assert (tmp_path / "manifest.json").exists()
    with pytest.raises(ValueError):
        dualgate.run("starvation", {"bogus": 1})
