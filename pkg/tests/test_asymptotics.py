import math

import numpy as np
import pytest

from threadlik import (
    DegreeCurve,
    ModelSpec,
    correction_cap,
    degree_bound_sequences,
    monte_carlo_degree_mean,
    tail_exponent,
    write_comparison_csv,
)


class TestCorrectionCap:
    def test_values(self):
        assert correction_cap(0.5) == pytest.approx(math.e)
        assert correction_cap(0.9) == pytest.approx(math.exp(9.0))

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, tau):
        with pytest.raises(ValueError):
            correction_cap(tau)


def bounds_ref(alpha, tau, beta, k, t_max):
    """Direct per-step recursion, multiplying factors one at a time."""
    shift = tau / (1.0 - tau)
    lower, upper = [1.0], [1.0]
    correction = 1.0
    for t in range(k, t_max):
        den = 2.0 * alpha * t + beta - 2.0 * alpha
        num = den + alpha
        lower.append(lower[-1] * (num + shift) / (den + shift))
        c = math.exp(tau ** (t - k + 1) / den)
        upper.append(upper[-1] * (num / den) * c)
        correction *= c
    return np.array(lower), np.array(upper), correction


class TestDegreeBounds:
    @pytest.mark.parametrize(
        "alpha,tau,beta,k,t_max",
        [
            (0.31, 0.98, 10.9, 2, 400),
            (1.0, 0.5, 0.0, 5, 300),
            (0.05, 0.9, 3.0, 10, 600),
        ],
    )
    def test_matches_stepwise_recursion(self, alpha, tau, beta, k, t_max):
        b = degree_bound_sequences(alpha, tau, beta, k, t_max)
        lo, up, corr = bounds_ref(alpha, tau, beta, k, t_max)
        assert b.t[0] == k and b.t[-1] == t_max
        np.testing.assert_allclose(b.lower, lo, rtol=1e-10)
        np.testing.assert_allclose(b.upper, up, rtol=1e-10)
        assert b.correction == pytest.approx(corr, rel=1e-10)

    def test_envelope_ordering(self):
        b = degree_bound_sequences(0.5, 0.8, 2.0, 3, 2000)
        assert b.lower[0] == 1.0 and b.upper[0] == 1.0
        assert np.all(np.diff(b.lower) > 0)
        assert np.all(b.upper >= b.lower)
        assert 1.0 < b.correction <= correction_cap(0.8)

    def test_scaled_lower_stabilizes(self):
        b = degree_bound_sequences(1.0, 0.6, 1.0, 10, 20000)
        scaled = b.scaled_lower
        half = np.searchsorted(b.t, 10000)
        assert abs(scaled[-1] / scaled[half] - 1.0) < 0.02
        # raw sequence keeps sqrt growth, so it has no such plateau
        assert b.lower[-1] / b.lower[half] > 1.3

    def test_value_at(self):
        b = degree_bound_sequences(0.5, 0.8, 2.0, 3, 50)
        lo, up = b.value_at([3, 10, 50])
        assert lo[0] == 1.0 and up[0] == 1.0
        assert lo[2] == b.lower[-1] and up[2] == b.upper[-1]
        with pytest.raises(ValueError):
            b.value_at([2])
        with pytest.raises(ValueError):
            b.value_at([51])

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(alpha=0.0),
            dict(tau=0.0),
            dict(tau=1.0),
            dict(beta=-1.0),
            dict(k=1),
            dict(t_max=4),
        ],
    )
    def test_domain(self, kwargs):
        args = dict(alpha=0.5, tau=0.8, beta=2.0, k=5, t_max=100)
        args.update(kwargs)
        with pytest.raises(ValueError):
            degree_bound_sequences(**args)


class TestMonteCarloDegreeMean:
    def test_uniform_attachment_harmonic_mean(self):
        # with phi constant the expected degree is 1 + sum_{s=k}^{t-1} 1/s
        spec = ModelSpec.full(0.0, 1.0, 0.0)
        k, t_max = 5, 200
        curve = monte_carlo_degree_mean(spec, k, t_max, replicates=3000, rng_seed=4)
        want = np.array(
            [1.0 + sum(1.0 / s for s in range(k, t)) for t in curve.t]
        )
        half = curve.ci_high - curve.mean
        assert np.all(np.abs(curve.mean - want) <= np.maximum(2.0 * half, 0.02))

    def test_degree_at_birth_is_one(self):
        spec = ModelSpec.no_bias(1.0, 0.5)
        curve = monte_carlo_degree_mean(spec, 7, 100, replicates=50, rng_seed=1)
        assert curve.t[0] == 7
        assert curve.mean[0] == 1.0
        assert curve.ci_low[0] == curve.ci_high[0] == 1.0

    def test_sqrt_growth_in_the_node_index(self):
        # doubling k should divide the mean by about sqrt(2)
        spec = ModelSpec.no_bias(1.0, 0.5)
        t_max, reps = 1500, 2000
        grid = [t_max]
        a = monte_carlo_degree_mean(spec, 6, t_max, reps, rng_seed=2, t_grid=grid)
        b = monte_carlo_degree_mean(spec, 12, t_max, reps, rng_seed=3, t_grid=grid)
        ratio = a.mean[-1] / b.mean[-1]
        assert ratio == pytest.approx(math.sqrt(2.0), rel=0.10)

    def test_mean_sits_inside_the_envelopes(self):
        alpha, tau, beta, k, t_max = 0.5, 0.8, 1.0, 10, 2000
        bounds = degree_bound_sequences(alpha, tau, beta, k, t_max)
        curve = monte_carlo_degree_mean(
            ModelSpec.full(alpha, tau, beta), k, t_max, replicates=1500, rng_seed=9
        )
        lo, up = bounds.value_at(curve.t)
        ok = (curve.ci_high >= lo) & (curve.ci_low <= up)
        assert ok.mean() >= 0.95

    def test_deterministic_and_worker_independent(self):
        spec = ModelSpec.no_tau(0.4, 2.0)
        kwargs = dict(rng_seed=11, t_grid=[4, 20, 80])
        a = monte_carlo_degree_mean(spec, 4, 80, 40, **kwargs)
        b = monte_carlo_degree_mean(spec, 4, 80, 40, **kwargs)
        c = monte_carlo_degree_mean(spec, 4, 80, 40, jobs=2, **kwargs)
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.mean, c.mean)
        np.testing.assert_array_equal(a.ci_low, c.ci_low)

    def test_validation(self):
        spec = ModelSpec.no_bias(1.0, 0.5)
        with pytest.raises(ValueError):
            monte_carlo_degree_mean(spec, 1, 50, 10)
        with pytest.raises(ValueError):
            monte_carlo_degree_mean(spec, 5, 4, 10)
        with pytest.raises(ValueError):
            monte_carlo_degree_mean(spec, 5, 50, 0)
        with pytest.raises(ValueError):
            monte_carlo_degree_mean(spec, 5, 50, 10, t_grid=[3])


class TestTailExponent:
    def test_recovers_an_exact_power_law(self):
        table = {x: x ** -2.0 for x in range(1, 60)}
        est = tail_exponent(table, x_min=5)
        assert est.slope == pytest.approx(-2.0, abs=1e-9)
        assert est.n_points == len([x for x in table if x >= 5])
        assert est.x_min == 5

    def test_accepts_pair_iterables(self):
        pairs = [(x, x ** -1.5) for x in range(1, 30)]
        est = tail_exponent(pairs, x_min=2)
        assert est.slope == pytest.approx(-1.5, abs=1e-9)

    def test_zero_mass_points_are_ignored(self):
        table = {x: x ** -2.0 for x in range(1, 30)}
        table.update({100: 0.0, 200: 0.0})
        est = tail_exponent(table, x_min=1)
        assert est.n_points == 29

    def test_short_tail_rejected(self):
        with pytest.raises(ValueError, match="at least 10"):
            tail_exponent({x: x ** -2.0 for x in range(1, 8)}, x_min=1)


class TestWriteComparisonCsv:
    def test_joined_table(self, tmp_path):
        bounds = degree_bound_sequences(0.5, 0.8, 1.0, 4, 120)
        curve = monte_carlo_degree_mean(
            ModelSpec.full(0.5, 0.8, 1.0), 4, 120, replicates=30, rng_seed=0
        )
        path = tmp_path / "joined.csv"
        write_comparison_csv(path, bounds, curve)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,lower,upper,empirical_mean,ci_low,ci_high"
        assert len(lines) == len(curve.t) + 1
        first = lines[1].split(",")
        assert int(first[0]) == 4
        assert float(first[1]) == 1.0

    def test_node_index_mismatch_rejected(self, tmp_path):
        bounds = degree_bound_sequences(0.5, 0.8, 1.0, 4, 50)
        stub = DegreeCurve(
            k=5,
            replicates=1,
            t=np.array([5, 10]),
            mean=np.ones(2),
            ci_low=np.ones(2),
            ci_high=np.ones(2),
        )
        with pytest.raises(ValueError, match="different node"):
            write_comparison_csv(tmp_path / "x.csv", bounds, stub)
