import math

import numpy as np
import pytest
import scipy.stats

from threadlik import (
    FitConfig,
    ModelSpec,
    anova_tukey,
    compare_models,
    likelihood_ratio_test,
)
from threadlik.attractiveness import Variant
from threadlik.estimation import FitResult

_MID_FREE = {
    Variant.FM: (0.3, 0.9, 2.0),
    Variant.NO_ALPHA: (0.9, 2.0),
    Variant.NO_TAU: (0.3, 2.0),
    Variant.NO_BIAS: (0.3, 0.9),
}


def make_fit(variant, nll, node_count=5000):
    variant = Variant.parse(variant)
    return FitResult(
        variant=variant,
        spec=ModelSpec.from_free_values(variant, _MID_FREE[variant]),
        neg_log_lik=nll,
        converged=True,
        node_count=node_count,
        restarts=(),
    )


class TestLikelihoodRatioTest:
    def test_statistic_and_p_value(self):
        row = likelihood_ratio_test(make_fit("fm", 1000.0), make_fit("no-alpha", 1003.0))
        assert row.reduced == "no-alpha"
        assert row.statistic == pytest.approx(6.0)
        assert row.df == 1
        assert row.p_value == pytest.approx(float(scipy.stats.chi2.sf(6.0, 1)))
        assert row.boundary is True

    def test_role_validation(self):
        with pytest.raises(ValueError, match="full model"):
            likelihood_ratio_test(make_fit("no-tau", 1.0), make_fit("no-alpha", 2.0))
        with pytest.raises(ValueError, match="reduced"):
            likelihood_ratio_test(make_fit("fm", 1.0), make_fit("fm", 2.0))

    def test_different_data_rejected(self):
        with pytest.raises(ValueError, match="node counts"):
            likelihood_ratio_test(
                make_fit("fm", 1.0, node_count=10), make_fit("no-bias", 2.0, node_count=11)
            )

    def test_nesting_violation_raises(self):
        with pytest.raises(ValueError, match="nesting violated"):
            likelihood_ratio_test(make_fit("fm", 1000.0), make_fit("no-tau", 999.0))

    def test_roundoff_negatives_clamp_to_zero(self):
        row = likelihood_ratio_test(
            make_fit("fm", 1000.0), make_fit("no-tau", 1000.0 - 1e-8)
        )
        assert row.statistic == 0.0
        assert row.p_value == 1.0


def toy_groups(seed=0, k=4, n=25, scale=1.0, shift=0.0):
    rng = np.random.default_rng(seed)
    return {
        f"g{i}": rng.normal(i * scale, 1.0, size=n) + shift for i in range(k)
    }


class TestAnova:
    def test_matches_scipy_f_oneway(self):
        groups = toy_groups(seed=11, scale=0.4)
        report = anova_tukey(groups)
        want = scipy.stats.f_oneway(*groups.values())
        assert report.anova.f_stat == pytest.approx(want.statistic, rel=1e-12)
        assert report.anova.p_value == pytest.approx(want.pvalue, rel=1e-9)
        assert report.anova.n_groups == 4
        assert report.anova.replicates_per_group == 25
        assert report.anova.df_within == 4 * 24

    def test_exact_tie_of_constant_groups(self):
        report = anova_tukey({"a": [3.0, 3.0], "b": [3.0, 3.0]})
        assert report.anova.f_stat == 0.0
        assert report.anova.p_value == 1.0
        assert not report.tukey[0].significant

    def test_perfect_separation_of_constant_groups(self):
        report = anova_tukey({"a": [1.0, 1.0], "b": [2.0, 2.0]})
        assert math.isinf(report.anova.f_stat)
        assert report.anova.p_value == 0.0
        assert report.tukey[0].significant

    def test_validation(self):
        with pytest.raises(ValueError, match="two groups"):
            anova_tukey({"a": [1.0, 2.0]})
        with pytest.raises(ValueError, match="equal replicate counts"):
            anova_tukey({"a": [1.0, 2.0], "b": [1.0]})
        with pytest.raises(ValueError, match="two replicates"):
            anova_tukey({"a": [1.0], "b": [2.0]})
        with pytest.raises(ValueError, match="finite"):
            anova_tukey({"a": [1.0, math.nan], "b": [1.0, 2.0]})


class TestTukey:
    def test_margin_matches_direct_computation(self):
        groups = toy_groups(seed=3, scale=0.7)
        report = anova_tukey(groups)
        a = report.anova
        q = scipy.stats.studentized_range.ppf(0.95, a.n_groups, a.df_within)
        margin = q * math.sqrt(a.ms_within / a.replicates_per_group)
        means = {name: float(np.mean(v)) for name, v in groups.items()}
        rows = {row.pair: row for row in report.tukey}
        assert len(rows) == 6
        for (na, nb), row in rows.items():
            diff = means[na] - means[nb]
            assert row.mean_difference == pytest.approx(diff, rel=1e-12)
            assert row.interval[0] == pytest.approx(diff - margin, rel=1e-12)
            assert row.interval[1] == pytest.approx(diff + margin, rel=1e-12)

    def test_three_equivalent_verdicts(self):
        # scale chosen so some pairs separate and some do not
        report = anova_tukey(toy_groups(seed=5, k=4, n=10, scale=0.9))
        ranges = {r.variant: r for r in report.range_plot}
        verdicts = set()
        for row in report.tukey:
            lo, hi = row.interval
            excludes_zero = lo > 0.0 or hi < 0.0
            ra, rb = ranges[row.pair[0]], ranges[row.pair[1]]
            disjoint = ra.high < rb.low or rb.high < ra.low
            assert row.significant == excludes_zero == disjoint
            verdicts.add(row.significant)
        assert verdicts == {True, False}

    def test_shift_invariance(self):
        base = anova_tukey(toy_groups(seed=9))
        shifted = anova_tukey(toy_groups(seed=9, shift=250.0))
        assert shifted.anova.f_stat == pytest.approx(base.anova.f_stat, rel=1e-9)
        for r0, r1 in zip(base.tukey, shifted.tukey):
            assert r1.mean_difference == pytest.approx(r0.mean_difference, abs=1e-9)
            assert r1.significant == r0.significant
        for r0, r1 in zip(base.range_plot, shifted.range_plot):
            assert r1.mean - r0.mean == pytest.approx(250.0, abs=1e-9)

    def test_custom_level_widens_interval(self):
        groups = toy_groups(seed=2)
        loose = anova_tukey(groups, level=0.05)
        tight = anova_tukey(groups, level=0.001)
        for r5, r1 in zip(loose.tukey, tight.tukey):
            assert r1.interval[0] < r5.interval[0]
            assert r1.interval[1] > r5.interval[1]


@pytest.fixture(scope="module")
def outcome(small_corpus):
    cfg = FitConfig(restarts=2, rng_seed=3, bootstrap_replicates=12)
    return compare_models(small_corpus, cfg)


class TestCompareModels:
    def test_all_sections_populated(self, outcome):
        report, fits = outcome
        assert [r.reduced for r in report.lrt] == ["no-alpha", "no-tau", "no-bias"]
        assert all(r.statistic >= 0.0 for r in report.lrt)
        assert set(fits) == {"fm", "no-alpha", "no-tau", "no-bias"}
        assert report.anova is not None
        assert report.anova.n_groups == 4
        assert 2 <= report.anova.replicates_per_group <= 12
        assert len(report.tukey) == 6
        assert {r.variant for r in report.range_plot} == set(fits)

    def test_full_model_dominates(self, outcome):
        report, fits = outcome
        means = {r.variant: r.mean for r in report.range_plot}
        for name in ("no-alpha", "no-tau", "no-bias"):
            assert means["fm"] <= means[name] + 1e-9
            for pf, pr in zip(fits["fm"].replicates, fits[name].replicates):
                if math.isfinite(pf.neg_log_lik) and math.isfinite(pr.neg_log_lik):
                    assert pf.neg_log_lik <= pr.neg_log_lik + 1e-6

    def test_serialization(self, outcome, tmp_path):
        report, _ = outcome
        blob = report.to_json_dict()
        assert set(blob) == {"lrt", "tukey", "range_plot", "anova"}
        assert len(blob["lrt"]) == 3
        paths = report.export_csv(tmp_path, stem="cmp")
        assert {p.name for p in paths} == {
            "cmp_lrt.csv",
            "cmp_anova.csv",
            "cmp_tukey.csv",
            "cmp_range.csv",
        }
        lines = (tmp_path / "cmp_lrt.csv").read_text().strip().splitlines()
        assert lines[0] == "reduced,statistic,df,p_value,boundary"
        assert len(lines) == 4
