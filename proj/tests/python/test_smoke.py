"""Smoke tests for the python bindings."""

import math

import pytest

import ashdp


def test_datasets_and_truth():
    data = ashdp.CategoricalDataset(d=8, values=[2, 8, 4, 8, 2])
    f = ashdp.true_frequencies(data)
    assert f == [0, 0.4, 0, 0.2, 0, 0, 0, 0.4]

    kv = ashdp.KVDataset(d=2, records=[[(1, 1.0), (2, 0.0)], [(2, 1.0)]])
    phi, psi = ashdp.true_kv_statistics(kv)
    assert phi == [0.5, 1.0]
    assert psi == [1.0, 0.5]


def test_synth_determinism():
    a = ashdp.synth_zipf(200, 20, 1.2, 7)
    b = ashdp.synth_zipf(200, 20, 1.2, 7)
    assert a.values == b.values


def test_calibration_and_certification():
    eps = 0.5
    dist = ashdp.calibrate_offset(eps, 0.0, 1.0 - math.exp(-eps))
    assert ashdp.certify_dp(dist, 1.0 - math.exp(-eps), eps) <= 1e-15

    dist2 = ashdp.calibrate_offset(0.5, 5e-13, 1.0)
    assert 54.0 <= dist2.mean <= 216.0


def test_noiseless_protocols_are_exact():
    data = ashdp.CategoricalDataset(d=4, values=[1, 1, 2, 3])
    zero = ashdp.make_distribution("point", k=0)
    out = ashdp.lnf_run(data, zero)
    assert out["estimates"] == [0.5, 0.25, 0.25, 0.0]
    assert out["transcript"]["one_round"]

    fme = ashdp.fme_run(data, zero, zero, alpha=1.0, l=4, b=4)
    est = dict(zip(fme["lambda"], fme["estimates"]))
    truth = ashdp.true_frequencies(data)
    for item, value in est.items():
        assert value == pytest.approx(truth[item - 1])
    assert fme["transcript"]["one_round"]


def test_kv_run_noiseless():
    kv = ashdp.KVDataset(d=2, records=[[(1, 1.0)], [(1, -1.0)]])
    zero = ashdp.make_distribution("point", k=0)
    out = ashdp.kv_run(kv, zero, zero, kappa=1, alpha=1.0, l=2, b=2)
    est = dict(zip(out["lambda"], zip(out["phi"], out["psi"])))
    assert est[1][0] == pytest.approx(1.0)
    assert est[1][1] == pytest.approx(0.0)


def test_predictors():
    assert ashdp.hypothesis_error_bound(0.0, 0.0) == pytest.approx(0.5)
    assert ashdp.hypothesis_error_bound(5.0, 0.0) == pytest.approx(0.0067, abs=1e-4)
    assert ashdp.amplify(8.3, 9e5, 1e-12) == pytest.approx(8.3)
    assert ashdp.amplify(8.3, 1e6, 1e-12) == pytest.approx(1.1, abs=0.1)
    assert ashdp.l_policy(10000, 1000000) == 100
    # Collusion robustness bookkeeping.
    assert ashdp.actual_epsilon("fme", 10**6, 10**5, 0.1) == 0.1


def test_grr_debias():
    data = ashdp.CategoricalDataset(d=3, values=[1] * 50)
    out = ashdp.pure_grr_run(data, 30.0)
    assert out["estimates"][0] == pytest.approx(1.0, abs=1e-6)
