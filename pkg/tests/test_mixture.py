import numpy as np
import pytest

from sonclust.core import InputError
from sonclust.mixture import (
    INFEASIBLE_WINDOW,
    MixtureModel,
    component_sets,
    default_epsilon,
    lambda_lower_bound,
    lambda_upper_bound,
    run_recovery_experiment,
    sample_mixture,
    separation_bound,
)
from sonclust.special import chi2_cdf


def two_blob(sep=10.0, sigma=1.0):
    return MixtureModel([[0.0, 0.0], [sep, 0.0]], [sigma, sigma], [0.5, 0.5])


class TestModel:
    @pytest.mark.parametrize("kwargs", [
        dict(means=[[0.0]], sigmas=[0.0], weights=[1.0]),
        dict(means=[[0.0]], sigmas=[1.0], weights=[0.9]),
        dict(means=[[0.0], [1.0]], sigmas=[1.0], weights=[0.5, 0.5]),
        dict(means=[[0.0], [1.0]], sigmas=[1.0, 1.0], weights=[1.5, -0.5]),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InputError):
            MixtureModel(**kwargs)


class TestSampling:
    def test_empty(self):
        ds, labels = sample_mixture(two_blob(), 0, seed=1)
        assert ds.n == 0 and len(labels) == 0

    def test_mean_estimate(self):
        model = MixtureModel([[0.0, 0.0]], [1.0], [1.0])
        ds, _ = sample_mixture(model, 1000, seed=7)
        assert np.all(np.abs(ds.points.mean(axis=0)) < 0.1)

    def test_deterministic(self):
        a, la = sample_mixture(two_blob(), 50, seed=3)
        b, lb = sample_mixture(two_blob(), 50, seed=3)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(la, lb)

    def test_labels_follow_weights(self):
        model = MixtureModel([[0.0], [5.0], [9.0]], [1, 1, 1], [0.2, 0.3, 0.5])
        _, labels = sample_mixture(model, 20000, seed=2)
        freq = np.bincount(labels, minlength=3) / 20000
        np.testing.assert_allclose(freq, [0.2, 0.3, 0.5], atol=0.015)

    def test_spread_matches_sigma(self):
        model = MixtureModel([[0.0, 0.0, 0.0]], [2.0], [1.0])
        ds, _ = sample_mixture(model, 20000, seed=4)
        np.testing.assert_allclose(ds.points.std(axis=0), 2.0, rtol=0.03)

    def test_odd_deviate_count(self):
        model = MixtureModel([[0.0, 0.0, 0.0]], [1.0], [1.0])
        ds, _ = sample_mixture(model, 3, seed=0)
        assert ds.points.shape == (3, 3)


class TestBounds:
    def test_lower_bound_example(self):
        assert lambda_lower_bound(two_blob(), 0, 2.0, 0.1, 100) == pytest.approx(
            4 / ((0.86466472 * 0.5 - 0.1) * 100), rel=1e-7)
        assert lambda_lower_bound(two_blob(), 0, 2.0, 0.1, 100) == pytest.approx(0.1203620, abs=1e-6)

    def test_lower_bound_single_component(self):
        model = MixtureModel([[0.0, 0.0]], [2.0], [1.0])
        assert lambda_lower_bound(model, 0, 2.0, 0.0, 1) == pytest.approx(9.25215, abs=1e-5)

    def test_lower_bound_blows_up_near_limit(self):
        mass = chi2_cdf(2.0, 2) * 0.5
        vals = [lambda_lower_bound(two_blob(), 0, 2.0, mass * f, 100) for f in (0.5, 0.9, 0.99, 0.999)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        with pytest.raises(InputError):
            lambda_lower_bound(two_blob(), 0, 2.0, mass, 100)

    def test_upper_bound(self):
        assert lambda_upper_bound(two_blob(), 101) == pytest.approx(0.05)
        same = MixtureModel([[1.0, 1.0], [1.0, 1.0]], [1, 1], [0.5, 0.5])
        assert lambda_upper_bound(same, 10) == 0.0

    def test_upper_bound_minimum_pair(self):
        # pair distances 10, 6, 8
        model = MixtureModel([[0.0, 0.0], [6.0, 0.0], [6.0, 8.0]], [1, 1, 1], [0.3, 0.3, 0.4])
        assert lambda_upper_bound(model, 2) == pytest.approx(3.0)

    def test_upper_bound_needs_two_components(self):
        with pytest.raises(InputError):
            lambda_upper_bound(MixtureModel([[0.0]], [1.0], [1.0]), 10)

    def test_separation_bound(self):
        assert separation_bound(two_blob()) == pytest.approx(32 / (0.99966454 * 0.5), rel=1e-7)
        assert separation_bound(two_blob()) == pytest.approx(64.0215, abs=1e-4)

    def test_separation_monotone_and_linear(self):
        lo_w = MixtureModel([[0.0, 0.0], [9.0, 0.0]], [1, 1], [0.2, 0.8])
        assert separation_bound(lo_w) > separation_bound(two_blob())
        assert separation_bound(two_blob(sigma=2.0)) == pytest.approx(2 * separation_bound(two_blob()))

    def test_default_epsilon(self):
        assert default_epsilon(two_blob()) == pytest.approx((1 - np.exp(-8)) * 0.25)


class TestExperiment:
    def test_component_sets_follow_definition(self):
        model = two_blob()
        pts = np.array([[0.5, 0.0], [3.0, 0.0], [10.0, 1.9], [5.0, 0.0]])
        sets = component_sets(pts, model, 2.0)
        assert [list(s) for s in sets] == [[0], [2]]

    def test_zero_lambda_is_incoherent(self):
        reports = run_recovery_experiment(two_blob(), 30, 2.0, 0.1, 0.0, trials=2, seed=5)
        for r in reports:
            for size, ok in zip(r.v_sizes, r.coherent):
                assert ok == (size < 2)

    def test_huge_lambda_single_cluster(self):
        reports = run_recovery_experiment(two_blob(), 30, 2.0, 0.1, 100.0, trials=1, seed=5)
        r = reports[0]
        assert r.n_clusters == 1 and all(r.coherent)
        assert not r.distinct[0][1] and not r.recovered

    def test_empty_window_reported(self):
        # separation 10 is far below the bound, so the midpoint window is empty
        reports = run_recovery_experiment(two_blob(), 100, 4.0, trials=2, seed=0)
        assert [r.status for r in reports] == [INFEASIBLE_WINDOW] * 2
        assert not any(r.recovered for r in reports)

    def test_translation_invariance(self):
        model = MixtureModel([[0.0, 0.0], [30.0, 0.0]], [1, 1], [0.5, 0.5])
        base = run_recovery_experiment(model, 40, 2.0, 0.1, 0.4, trials=1, seed=9)[0]
        moved = run_recovery_experiment(model.translated([100.0, -50.0]), 40, 2.0, 0.1, 0.4,
                                        trials=1, seed=9)[0]
        assert vars(base) == vars(moved)

    def test_seeds_per_trial(self):
        reports = run_recovery_experiment(two_blob(sep=40.0), 20, 2.0, 0.1, 0.5, trials=3, seed=10)
        assert [r.seed for r in reports] == [10, 11, 12]
