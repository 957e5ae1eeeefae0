"""Likelihood analysis of preferential-attachment discussion threads.

A thread is a growing tree encoded by its parent vector: node t + 1
attaches to node pi_t with probability proportional to
alpha * degree + tau^(recency) + beta * [target is root].  The package
fits that model and its three single-constraint reductions by maximum
likelihood, quantifies fit spread by bootstrap, compares variants by
likelihood-ratio and Tukey range analysis, samples synthetic corpora,
and reproduces the structural and asymptotic degree analyses.

Numerical kernels run on a compiled extension when available; set
THREADLIK_PURE_PYTHON=1 to force the portable lane.  ``kernel_lane()``
reports which one is active.
"""

from ._kernels import IMPL as _KERNEL_IMPL
from .attractiveness import (
    ModelSpec,
    StepContext,
    Variant,
    normalizer,
    phi,
    phi_vector,
    step_probabilities,
)
from .asymptotics import (
    DegreeBounds,
    DegreeCurve,
    TailEstimate,
    correction_cap,
    degree_bound_sequences,
    monte_carlo_degree_mean,
    tail_exponent,
    write_comparison_csv,
)
from .dataset_io import IngestResult, read_dataset, write_dataset
from .estimation import (
    FitConfig,
    FitResult,
    ResidualTable,
    bootstrap_fit,
    bootstrap_fit_nested,
    fit,
    fit_nested,
    residual_experiment,
)
from .generator import (
    GenConfig,
    exact_shape_distribution,
    generate_dataset,
    generate_thread,
    lognormal_size_histogram,
)
from .likelihood import (
    FlatSteps,
    GradientResult,
    LikelihoodValue,
    gradient,
    neg_log_likelihood,
)
from .metrics import (
    EvolutionTrace,
    StructureReport,
    compare_reports,
    evolution_trace,
    structure_report,
    total_variation,
)
from .model_compare import (
    ComparisonReport,
    anova_tukey,
    compare_models,
    likelihood_ratio_test,
)
from .thread_core import ParentVector, ThreadDataset, degrees, depths, subtree_sizes

__version__ = "0.1.0"

__all__ = [
    "ModelSpec",
    "StepContext",
    "Variant",
    "normalizer",
    "phi",
    "phi_vector",
    "step_probabilities",
    "DegreeBounds",
    "DegreeCurve",
    "TailEstimate",
    "correction_cap",
    "degree_bound_sequences",
    "monte_carlo_degree_mean",
    "tail_exponent",
    "write_comparison_csv",
    "IngestResult",
    "read_dataset",
    "write_dataset",
    "FitConfig",
    "FitResult",
    "ResidualTable",
    "bootstrap_fit",
    "bootstrap_fit_nested",
    "fit",
    "fit_nested",
    "residual_experiment",
    "GenConfig",
    "exact_shape_distribution",
    "generate_dataset",
    "generate_thread",
    "lognormal_size_histogram",
    "FlatSteps",
    "GradientResult",
    "LikelihoodValue",
    "gradient",
    "neg_log_likelihood",
    "EvolutionTrace",
    "StructureReport",
    "compare_reports",
    "evolution_trace",
    "structure_report",
    "total_variation",
    "ComparisonReport",
    "anova_tukey",
    "compare_models",
    "likelihood_ratio_test",
    "ParentVector",
    "ThreadDataset",
    "degrees",
    "depths",
    "subtree_sizes",
    "kernel_lane",
    "__version__",
]


def kernel_lane() -> str:
    """Which kernel implementation is active: "compiled" or "pure"."""
    return _KERNEL_IMPL
