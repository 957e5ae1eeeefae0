"""Statistical comparison of the four model variants on one dataset.

Two complementary views: likelihood-ratio tests of each reduced variant
against the full model (chi-squared with 1 degree of freedom, since every
reduction pins exactly one parameter), and a one-way ANOVA plus Tukey
honestly-significant-difference analysis over the per-variant bootstrap
likelihood replicates.  The range-plot table places each variant at its
mean negative log-likelihood with a half-interval of
q * sqrt(MS_within / n) / 2, so two variants' intervals overlap exactly
when Tukey declares them not significantly different.

Every reduction pins its parameter at the edge of the admissible range
(alpha = 0, beta = 0, or tau at the top of its interval), where the
chi-squared reference for the LRT is approximate and conservative; rows
carry a ``boundary`` flag as a reminder rather than adjusting the p-value.
"""

from __future__ import annotations

import csv
import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .attractiveness import Variant
from .estimation import FitConfig, FitResult, bootstrap_fit_nested
from .likelihood import FlatSteps
from .thread_core import ThreadDataset

__all__ = [
    "LRTRow",
    "AnovaResult",
    "TukeyRow",
    "RangeRow",
    "ComparisonReport",
    "likelihood_ratio_test",
    "anova_tukey",
    "compare_models",
]

_NESTING_SLACK = 1e-6
_VARIANT_ORDER = (Variant.FM, Variant.NO_ALPHA, Variant.NO_TAU, Variant.NO_BIAS)


@dataclass(frozen=True)
class LRTRow:
    """Likelihood-ratio test of one reduced variant against the full model."""

    reduced: str
    statistic: float
    df: int
    p_value: float
    boundary: bool


@dataclass(frozen=True)
class AnovaResult:
    """One-way ANOVA over per-variant replicate likelihoods."""

    f_stat: float
    p_value: float
    n_groups: int
    replicates_per_group: int
    ms_within: float
    df_within: int


@dataclass(frozen=True)
class TukeyRow:
    """One pairwise Tukey comparison at the 5% family-wise level."""

    pair: tuple[str, str]
    mean_difference: float
    interval: tuple[float, float]
    significant: bool


@dataclass(frozen=True)
class RangeRow:
    """One variant's position in the range plot."""

    variant: str
    mean: float
    low: float
    high: float


@dataclass(frozen=True)
class ComparisonReport:
    """All comparison tables; sections are empty when not computed."""

    lrt: tuple[LRTRow, ...] = ()
    anova: AnovaResult | None = None
    tukey: tuple[TukeyRow, ...] = ()
    range_plot: tuple[RangeRow, ...] = ()

    def to_json_dict(self) -> dict:
        out: dict = {
            "lrt": [
                {
                    "reduced": r.reduced,
                    "statistic": r.statistic,
                    "df": r.df,
                    "p_value": r.p_value,
                    "boundary": r.boundary,
                }
                for r in self.lrt
            ],
            "tukey": [
                {
                    "pair": list(r.pair),
                    "mean_difference": r.mean_difference,
                    "interval": list(r.interval),
                    "significant": r.significant,
                }
                for r in self.tukey
            ],
            "range_plot": [
                {"variant": r.variant, "mean": r.mean, "low": r.low, "high": r.high}
                for r in self.range_plot
            ],
        }
        if self.anova is not None:
            out["anova"] = {
                "f_stat": self.anova.f_stat,
                "p_value": self.anova.p_value,
                "n_groups": self.anova.n_groups,
                "replicates_per_group": self.anova.replicates_per_group,
                "ms_within": self.anova.ms_within,
                "df_within": self.anova.df_within,
            }
        return out

    def export_csv(self, directory, stem: str = "compare") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []

        def table(name: str, header: list[str], rows: list[list]) -> None:
            path = directory / f"{stem}_{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(rows)
            written.append(path)

        if self.lrt:
            table(
                "lrt",
                ["reduced", "statistic", "df", "p_value", "boundary"],
                [[r.reduced, r.statistic, r.df, r.p_value, int(r.boundary)] for r in self.lrt],
            )
        if self.anova is not None:
            a = self.anova
            table(
                "anova",
                ["f_stat", "p_value", "n_groups", "replicates_per_group", "ms_within", "df_within"],
                [[a.f_stat, a.p_value, a.n_groups, a.replicates_per_group, a.ms_within, a.df_within]],
            )
        if self.tukey:
            table(
                "tukey",
                ["variant_a", "variant_b", "mean_difference", "low", "high", "significant"],
                [
                    [r.pair[0], r.pair[1], r.mean_difference, r.interval[0], r.interval[1], int(r.significant)]
                    for r in self.tukey
                ],
            )
        if self.range_plot:
            table(
                "range",
                ["variant", "mean", "low", "high"],
                [[r.variant, r.mean, r.low, r.high] for r in self.range_plot],
            )
        return written


def likelihood_ratio_test(fit_full: FitResult, fit_reduced: FitResult) -> LRTRow:
    """Test one reduced variant against the full model on the same data.

    D = 2 * (loglik_full - loglik_reduced), referred to chi-squared with
    one degree of freedom.  A D below -1e-6 means the reduced fit beat the
    model that contains it, which can only be an optimizer failure.
    """
    if fit_full.variant is not Variant.FM:
        raise ValueError("fit_full must be the full model")
    if fit_reduced.variant is Variant.FM:
        raise ValueError("fit_reduced must be a reduced variant")
    if fit_full.node_count != fit_reduced.node_count:
        raise ValueError("fits compare different datasets (node counts differ)")
    d = 2.0 * (fit_reduced.neg_log_lik - fit_full.neg_log_lik)
    if d < -_NESTING_SLACK:
        raise ValueError(
            f"nesting violated: reduced model beat the full model by {-d / 2:.3g} "
            "in log-likelihood; refit with more restarts"
        )
    d = max(d, 0.0)
    return LRTRow(
        reduced=fit_reduced.variant.value,
        statistic=d,
        df=1,
        p_value=float(stats.chi2.sf(d, 1)),
        boundary=True,
    )


def _anova_stats(groups: Mapping[str, np.ndarray]) -> tuple[AnovaResult, dict[str, float]]:
    names = list(groups)
    k = len(names)
    if k < 2:
        raise ValueError("need at least two groups")
    arrays = {name: np.asarray(groups[name], dtype=np.float64) for name in names}
    n = len(arrays[names[0]])
    if any(len(a) != n for a in arrays.values()):
        raise ValueError("groups must have equal replicate counts")
    if n < 2:
        raise ValueError("need at least two replicates per group")
    if any(not np.all(np.isfinite(a)) for a in arrays.values()):
        raise ValueError("replicate values must be finite")

    means = {name: float(a.mean()) for name, a in arrays.items()}
    grand = float(np.mean([a.mean() for a in arrays.values()]))
    ss_between = n * sum((m - grand) ** 2 for m in means.values())
    ss_within = sum(float(((a - a.mean()) ** 2).sum()) for a in arrays.values())
    df_between = k - 1
    df_within = k * (n - 1)
    ms_within = ss_within / df_within
    if ss_within == 0.0:
        # perfectly constant groups: exact tie or perfect separation
        f_stat = 0.0 if ss_between == 0.0 else math.inf
        p_value = 1.0 if ss_between == 0.0 else 0.0
    else:
        f_stat = (ss_between / df_between) / ms_within
        p_value = float(stats.f.sf(f_stat, df_between, df_within))
    result = AnovaResult(
        f_stat=float(f_stat),
        p_value=p_value,
        n_groups=k,
        replicates_per_group=n,
        ms_within=float(ms_within),
        df_within=df_within,
    )
    return result, means


def anova_tukey(
    replicate_values: Mapping[str, Sequence[float]], level: float = 0.05
) -> ComparisonReport:
    """ANOVA + Tukey range analysis over per-variant replicate values.

    Group order follows the mapping's iteration order.  The Tukey interval
    for a pair is its mean difference plus or minus
    q * sqrt(MS_within / n); the range-plot rows split that margin evenly
    so interval overlap reproduces the pairwise verdicts.
    """
    anova, means = _anova_stats(
        {name: np.asarray(v, dtype=np.float64) for name, v in replicate_values.items()}
    )
    n = anova.replicates_per_group
    if anova.ms_within > 0.0:
        q_crit = float(stats.studentized_range.ppf(1.0 - level, anova.n_groups, anova.df_within))
        margin = q_crit * math.sqrt(anova.ms_within / n)
    else:
        margin = 0.0
    tukey = []
    for a, b in itertools.combinations(means, 2):
        diff = means[a] - means[b]
        tukey.append(
            TukeyRow(
                pair=(a, b),
                mean_difference=diff,
                interval=(diff - margin, diff + margin),
                significant=bool(abs(diff) > margin),
            )
        )
    range_rows = tuple(
        RangeRow(variant=name, mean=m, low=m - margin / 2.0, high=m + margin / 2.0)
        for name, m in means.items()
    )
    return ComparisonReport(anova=anova, tukey=tuple(tukey), range_plot=range_rows)


def compare_models(
    data: ThreadDataset | FlatSteps,
    config: FitConfig | None = None,
    jobs: int = 1,
) -> tuple[ComparisonReport, dict[str, FitResult]]:
    """Fit and bootstrap all four variants, then run both comparisons.

    Bootstrap resamples are index-paired across variants, and within each
    replicate the full model's fit folds in the reduced optima, so the
    full model's likelihood is at least as good as every reduced variant's
    replicate by replicate and therefore also in the mean.  A replicate
    with a non-finite likelihood in any variant (possible only for
    degenerate resamples) is dropped from every variant to keep the groups
    equal-sized.
    """
    config = config or FitConfig()
    flat = data if isinstance(data, FlatSteps) else FlatSteps.from_dataset(data)
    fits = bootstrap_fit_nested(flat, config, jobs=jobs, variants=_VARIANT_ORDER)
    lrt = tuple(
        likelihood_ratio_test(fits[Variant.FM.value], fits[variant.value])
        for variant in _VARIANT_ORDER[1:]
    )
    matrix = np.column_stack(
        [[r.neg_log_lik for r in fits[v.value].replicates] for v in _VARIANT_ORDER]
    )
    keep = np.all(np.isfinite(matrix), axis=1)
    groups = {
        v.value: matrix[keep, i] for i, v in enumerate(_VARIANT_ORDER)
    }
    report = anova_tukey(groups)
    return replace(report, lrt=lrt), fits
