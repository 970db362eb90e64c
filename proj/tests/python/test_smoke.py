import math

import numpy as np
import pytest

import ntkmmd



def test_forward_and_gradient_agree_with_finite_differences():
    p = ntkmmd.init_params(4, [16], "softplus", False, 3)
    x = np.array([0.3, -1.0, 0.5, 2.0])
    g = ntkmmd.param_gradient(p, x)
    theta = p.trainable()
    assert g.shape == theta.shape
    for i in range(0, theta.size, 7):
        t = theta.copy()
        t[i] += 1e-5
        p.set_trainable(t)
        up = ntkmmd.forward(p, x)
        t[i] -= 2e-5
        p.set_trainable(t)
        down = ntkmmd.forward(p, x)
        p.set_trainable(theta)
        assert g[i] == pytest.approx((up - down) / 2e-5, rel=1e-6, abs=1e-9)


def test_ntk_gram_matches_pairs():
    p = ntkmmd.init_params(3, [32], seed=5)
    a = np.random.default_rng(0).standard_normal((4, 3))
    k = ntkmmd.ntk_gram(p, a, a)
    assert np.allclose(k, k.T)
    assert k[0, 1] == pytest.approx(ntkmmd.ntk_pair(p, a[0], a[1]), rel=1e-10)
    assert ntkmmd.ntk_analytic2(p, a[0], a[1]) == pytest.approx(k[0, 1], rel=1e-10)


def test_median_bandwidth_and_mmd():
    assert ntkmmd.median_bandwidth(np.array([[0.0], [1.0], [3.0]])) == 2.0
    x = np.random.default_rng(1).standard_normal((10, 2))
    assert ntkmmd.mmd2_biased(1.0, x, x) == 0.0
    assert ntkmmd.mmd2_unbiased(1.0, x, x + 3.0) > 0.0


def test_thresholds():
    assert ntkmmd.theoretical_threshold("thm1", 0.05, 0.5, 400, 1.0) == pytest.approx(1.6947, rel=1e-4)
    assert ntkmmd.theoretical_threshold("thm3", 0.05, 0.25, 400, 1.0) == pytest.approx(2.3684, rel=1e-4)
    with pytest.raises(ValueError):
        ntkmmd.theoretical_threshold("thm1", 0.05, 2.0, 400, 1.0)


def test_quantile():
    assert ntkmmd.empirical_quantile(list(range(1, 101)), 0.95) == 96


def test_generate_and_run_test():
    x, y = ntkmmd.generate("cov_shift", 0.5, 10, 60, 60, 7)
    assert x.shape == (60, 10)
    out = ntkmmd.run_test(x, y, method="ntk_net", seed=2, n_boot=100, hidden_widths=[64])
    assert out["method"] == "ntk_net"
    assert len(out["bootstrap"]["null_samples"]) == 100
    same = ntkmmd.run_test(x, x, method="ntk_exact", seed=2, n_boot=100, hidden_widths=[64], calibration="test_only")
    assert same["statistic"] == 0.0
    assert not same["reject"]
    again = ntkmmd.run_test(x, y, method="ntk_net", seed=2, n_boot=100, hidden_widths=[64])
    assert again == out


def test_t_net_training():
    p = ntkmmd.init_params(3, [32], seed=1)
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((10, 3)), rng.standard_normal((10, 3)) + 1.0
    t, final = ntkmmd.train_t_net(p, x, y, x, y, learning_rate=0.1, order_seed=3)
    assert t > 0.0
    assert not np.array_equal(final.trainable(), p.trainable())


def test_hotelling():
    s = 1.0 / math.sqrt(2.0)
    x = np.array([[1.0 - s], [1.0 + s]])
    y = np.array([[-s], [s]])
    assert ntkmmd.hotelling_t2(x, y) == pytest.approx(1.0)


def test_power_and_scan():
    power, (lo, hi) = ntkmmd.estimate_power("mean_shift", 2.0, 3, 20, 20, method="gaussian_mmd", n_run=10, seed=1, n_boot=50)
    assert lo <= power <= hi
    series = np.random.default_rng(3).standard_normal((100, 2))
    times, values, alarm = ntkmmd.scan(series, window=20, stride=5, pilot_end=40, statistic="gaussian_mmd", threshold=10.0)
    assert times[0] == 60
    assert len(values) == len(times)
    assert alarm is None


def test_cli_entry():
    code, out, err = ntkmmd.cli(["thresholds", "--variant", "thm1", "--alpha", "0.05", "--c", "0.5", "--n", "400", "--nu", "1"])
    assert code == 0
    assert float(out) == pytest.approx(1.6947, rel=1e-4)
    code, _, err = ntkmmd.cli(["test", "--seed", "1"])
    assert code == 1
