import math

import numpy as np
import pytest

from oksample.correction import compute_metrics
from oksample.flr import FlrConfig
from oksample.mixture import EMConfig, GaussianMixture
from oksample.simlab import (
    ExperimentConfig,
    LognormalLaw,
    NoncentralTLaw,
    builtin_settings,
    chisq_null_check,
    generate_dataset,
    normal_mixture,
    order_consistency_check,
    run_experiment,
    synthetic_study,
)

QUICK = ExperimentConfig(flr=FlrConfig.desk(grid_size=10), n_perm=199)


def test_setting_examples():
    s = builtin_settings()
    assert s["1.2"].is_null
    assert s["1.5"].case_density == normal_mixture((0.2, -1, 1), (0.8, 3, 1))
    assert not s["1.3"].is_null and not s["1.4"].is_null and not s["1.5"].is_null
    assert not s["2.1"].is_null and not s["1.1"].is_null
    assert s["1.1"].case_density == normal_mixture((0.2, 0, 1), (0.8, 2, 1))
    assert s["2.1"].control_densities[0] == normal_mixture((1.0, 0, 1))
    assert s["3.1"].is_null and not s["3.2"].is_null
    # the intended reading makes 1.1 and 2.1 null
    alt = builtin_settings(reading="intended")
    assert alt["1.1"].is_null and alt["2.1"].is_null and not alt["2.2"].is_null
    assert len(s) == 11 and all(sp.K == 54 and sp.N == 100 for sp in s.values())


def test_setting1_control_split():
    ctrl = builtin_settings()["1.3"].control_densities
    assert ctrl[:10] == (normal_mixture((0.2, 0, 1), (0.8, 1, 1)),) * 10
    assert ctrl[10:] == (normal_mixture((0.4, 0, 1), (0.6, 1, 1)),) * 44


def test_dataset_deterministic_and_controls_shared_within_block():
    s = builtin_settings(N=50, K=6)
    y1, x1 = generate_dataset(s["1.3"], 5)
    y2, x2 = generate_dataset(s["1.3"], 5)
    np.testing.assert_array_equal(y1, y2)
    assert all(np.array_equal(a, b) for a, b in zip(x1, x2))
    _, x3 = generate_dataset(s["1.5"], 5)
    assert all(np.array_equal(a, b) for a, b in zip(x1, x3))
    y4, _ = generate_dataset(s["1.3"], 6)
    assert not np.array_equal(y1, y4)
    assert y1.size == 50 and len(x1) == 6


def test_setting1_control_means_at_large_n():
    spec = builtin_settings(N=100_000, K=12)["1.2"]
    _, xs = generate_dataset(spec, 1)
    # both laws have unit-variance components, so the mixture variance is 1 + w(1-w)
    for k, x in enumerate(xs):
        mean = 0.8 if k < 10 else 0.6
        sd = math.sqrt(1 + (0.16 if k < 10 else 0.24))
        assert abs(x.mean() - mean) < 5 * sd / math.sqrt(x.size)


def test_lognormal_median_and_t_mean():
    rng = np.random.default_rng(2)
    x = LognormalLaw(0.5).sample(200_000, rng)
    assert np.median(x) == pytest.approx(math.exp(0.5), rel=0.01)
    t = NoncentralTLaw(5, 2).sample(400_000, rng)
    assert t.mean() == pytest.approx(NoncentralTLaw(5, 2).mean(), rel=0.02)


def test_run_experiment_rows_and_rates_recomputable():
    rows, summary = run_experiment(["1.2", "1.5"], ["PAD", "ADM"], replicates=3, N=40, K=12,
                                   root_seed=4, config=QUICK)
    assert len(rows) == 2 * 3 * 2
    assert [r.setting for r in rows[:6]] == ["1.2"] * 6
    for sid in ("1.2", "1.5"):
        for m in ("PAD", "ADM"):
            ps = [r.p for r in rows if r.setting == sid and r.method == m]
            assert summary.rejection_rates[sid][m] == np.mean(np.array(ps) <= 0.05)
    # K > 10 so the majority law, and thus case 1.2, is among the controls
    rej = [r.p <= 0.05 for r in rows if r.method == "PAD"]
    truth = [r.setting == "1.5" for r in rows if r.method == "PAD"]
    assert summary.metrics["1"]["PAD"] == compute_metrics(rej, truth)


def test_replicates_are_independent_of_run_length():
    a, _ = run_experiment(["1.5"], ["PAD"], replicates=2, N=30, K=4, root_seed=9, config=QUICK)
    b, _ = run_experiment(["1.5"], ["PAD"], replicates=3, N=30, K=4, root_seed=9, config=QUICK)
    assert a == b[:2]


def test_flr_methods_share_one_analysis():
    rows, _ = run_experiment(["1.5"], ["FLR", "CFLR"], replicates=1, N=60, K=5, root_seed=1, config=QUICK)
    assert [r.method for r in rows] == ["FLR", "CFLR"]
    assert all(0 <= r.p <= 1 for r in rows)


def test_zero_replicates():
    rows, summary = run_experiment(["1.1"], ["PAD"], replicates=0, N=30, K=4, config=QUICK)
    assert rows == [] and summary.rejection_rates == {} and summary.metrics == {}


def test_bad_inputs():
    with pytest.raises(ValueError):
        run_experiment(["9.9"], ["PAD"], 1)
    with pytest.raises(ValueError):
        run_experiment(["1.1"], ["XYZ"], 1)
    with pytest.raises(ValueError):
        builtin_settings(reading="other")


def test_chisq_null_check():
    assert chisq_null_check(2, 300, 200, seed=1) > 0.01
    assert chisq_null_check(5, 300, 200, seed=1) < 0.01
    with pytest.raises(ValueError):
        chisq_null_check(2, 300, 1)


def test_order_consistency():
    fast = EMConfig(restarts=2)
    two = GaussianMixture([0.5, 0.5], [0.0, 5.0], [1.0, 1.0])
    assert order_consistency_check(two, [1000], 10, seed=3, p_max=4, config=fast)[1000] >= 0.9
    one = GaussianMixture.normal(0.0, 1.0)
    assert order_consistency_check(one, [500], 10, seed=3, p_max=4, config=fast)[500] >= 0.9


def test_synthetic_study_shapes():
    case, controls = synthetic_study("1.5", 3, [2], N=20, K=4, seed=0)
    assert case.values.shape == (3, 20) and len(controls) == 4
    assert case.values[1].mean() > case.values[0].mean()
