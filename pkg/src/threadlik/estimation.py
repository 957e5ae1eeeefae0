"""Maximum-likelihood fitting, bootstrap spread estimation, and the
parameter-recovery experiment.

Fitting minimizes the negative log-likelihood in unconstrained coordinates
a = log(alpha), c = logit(tau), b = log(beta) with bound-constrained
quasi-Newton descent (L-BFGS-B) fed the analytic gradient; a restart whose
gradient evaluation is flagged non-finite falls back to Nelder-Mead
simplex search.  Initial points are drawn uniformly from PARAM_BOX and the
restart with the best final objective wins, so fitted parameters always
respect the constraints alpha, beta >= 0 and tau in (0, 1] exactly.

Seed-derivation rule: every random stream is
``SeedSequence(rng_seed, spawn_key=...)`` with fixed keys — restarts
(10,), plain-fit subsampling (11,), bootstrap replicate r indices (20, r)
and restarts (21, r), recovery experiment (30|31|32, variant, N, e).
Results are therefore deterministic in ``rng_seed`` alone and independent
of worker count or scheduling.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from . import _kernels as kernels
from .attractiveness import ModelSpec, Variant
from .generator import GenConfig, generate_dataset, lognormal_size_histogram
from .likelihood import (
    COORD_BOUND,
    FlatSteps,
    coords_to_params,
    grad_to_coords,
    params_to_coords,
)
from .thread_core import ThreadDataset

__all__ = [
    "PARAM_BOX",
    "FitConfig",
    "FitResult",
    "RestartRecord",
    "ReplicateRecord",
    "ResidualRow",
    "ResidualTable",
    "fit",
    "fit_nested",
    "bootstrap_fit",
    "bootstrap_fit_nested",
    "residual_experiment",
]

# box for random initial points and for the recovery experiment's true
# parameter draws; tau below 0.5 is documented as hard to estimate and the
# observed beta range tops out near e^2.39 ~ 11
PARAM_BOX: Mapping[str, tuple[float, float]] = {
    "alpha": (0.0, 1.0),
    "tau": (0.5, 1.0),
    "beta": (0.0, 15.0),
}

_GRAD_TOL = 1e-6  # gradient infinity-norm stopping threshold, coordinate scale
_INIT_FLOOR = 1e-3  # keeps log coordinates of fresh initial points finite
_TAU_INIT_CAP = 1.0 - 1e-6
# first-stage coordinate box: alpha, beta in [e^-6, e^6] ~ [0.0025, 403] and
# tau in [0.0025, 0.9975] cover every optimum the model can distinguish from
# a limit at realistic data sizes, while leaving the saturated shelves at
# more extreme values outside the first search
_STAGE_BOUND = 6.0

# The likelihood can be bimodal: on data with a strong root or recency
# component, a reduced variant that lacks the matching term grows a second
# basin in which another term absorbs the signal (for example tau -> 0 with
# large alpha imitates pure degree attachment).  Random initial points all
# drain into whichever basin owns their region, so each fit also scores a
# fixed parameter grid straddling the known basins and promotes the best
# few points to full optimizer runs.
_GRID_ALPHA = (0.05, 0.5, 5.0)
_GRID_TAU = (0.3, 0.9, 0.99)
_GRID_BETA = (0.5, 5.0)
_N_GRID_STARTS = 2

_VARIANT_INDEX = {
    Variant.FM: 0,
    Variant.NO_ALPHA: 1,
    Variant.NO_TAU: 2,
    Variant.NO_BIAS: 3,
}


@dataclass(frozen=True)
class FitConfig:
    """Knobs shared by fitting, bootstrap, and the recovery experiment.

    ``tol`` is the absolute objective-change convergence threshold;
    ``sample_size`` is the bootstrap resample size N (also subsamples a
    plain fit when smaller than the dataset).
    """

    restarts: int = 5
    bootstrap_replicates: int = 100
    sample_size: int | None = None
    rng_seed: int = 0
    tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.bootstrap_replicates < 1:
            raise ValueError("bootstrap_replicates must be >= 1")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")


@dataclass(frozen=True)
class RestartRecord:
    """One optimizer run: where it started, where it ended."""

    index: int
    init_params: tuple[float, ...]
    params: tuple[float, ...]
    neg_log_lik: float
    converged: bool
    n_iter: int
    method: str
    message: str


@dataclass(frozen=True)
class ReplicateRecord:
    """One bootstrap resample's fitted point."""

    replicate: int
    variant: str
    alpha: float
    tau: float
    beta: float
    neg_log_lik: float
    converged: bool


@dataclass(frozen=True)
class FitResult:
    """Best-of-restarts fit, optionally with its bootstrap replicate table."""

    variant: Variant
    spec: ModelSpec
    neg_log_lik: float
    converged: bool
    node_count: int
    restarts: tuple[RestartRecord, ...]
    replicates: tuple[ReplicateRecord, ...] | None = None
    replicate_summary: dict | None = None

    def replicates_to_csv(self, path) -> None:
        if self.replicates is None:
            raise ValueError("no replicate table; run bootstrap_fit")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replicate", "variant", "alpha", "tau", "beta", "neg_log_lik", "converged"])
            for r in self.replicates:
                w.writerow([r.replicate, r.variant, r.alpha, r.tau, r.beta, r.neg_log_lik, int(r.converged)])

    def summary_dict(self) -> dict:
        out = {
            "variant": self.variant.value,
            "alpha": self.spec.alpha,
            "tau": self.spec.tau,
            "beta": self.spec.beta,
            "log_beta": self.spec.log_beta if self.spec.beta > 0 else None,
            "neg_log_lik": self.neg_log_lik,
            "neg_log_lik_per_node": self.neg_log_lik / self.node_count if self.node_count else None,
            "converged": self.converged,
            "node_count": self.node_count,
            "restarts": [
                {
                    "index": r.index,
                    "init_params": list(r.init_params),
                    "params": list(r.params),
                    "neg_log_lik": r.neg_log_lik,
                    "converged": r.converged,
                    "n_iter": r.n_iter,
                    "method": r.method,
                    "message": r.message,
                }
                for r in self.restarts
            ],
        }
        if self.replicate_summary is not None:
            out["bootstrap"] = self.replicate_summary
        return out


def _objective(flat: FlatSteps, variant: Variant):
    """Return fun(x) -> (nll, grad in coords) plus a clamp-event cell."""
    clamp_seen = [0]

    def fun(x):
        spec = coords_to_params(variant, x)
        nll, ga, gt, gb, n_clamped = kernels.nll_grad(
            flat.cnt, flat.age, flat.isroot, flat.t_counts,
            spec.alpha, spec.tau, spec.beta, True,
        )
        if n_clamped:
            clamp_seen[0] += n_clamped
        return nll, grad_to_coords(spec, ga, gt, gb)

    return fun, clamp_seen


def _draw_initial(variant: Variant, rng: np.random.Generator) -> tuple[float, ...]:
    values = []
    for name in variant.free_params:
        v = rng.uniform(*PARAM_BOX[name])
        if name in ("alpha", "beta"):
            v = max(v, _INIT_FLOOR)
        else:
            v = min(max(v, 0.5), _TAU_INIT_CAP)
        values.append(v)
    return tuple(values)


def _grid_initials(flat: FlatSteps, variant: Variant) -> list[tuple[float, ...]]:
    axes = {"alpha": _GRID_ALPHA, "tau": _GRID_TAU, "beta": _GRID_BETA}
    scored = []
    for values in itertools.product(*(axes[name] for name in variant.free_params)):
        spec = ModelSpec.from_free_values(variant, values)
        nll, *_ = kernels.nll_grad(
            flat.cnt, flat.age, flat.isroot, flat.t_counts,
            spec.alpha, spec.tau, spec.beta, False,
        )
        if math.isfinite(nll):
            scored.append((nll, values))
    scored.sort(key=lambda pair: pair[0])
    return [values for _, values in scored[:_N_GRID_STARTS]]


def _run_restart(flat: FlatSteps, variant: Variant, init: tuple[float, ...],
                 config: FitConfig, index: int) -> RestartRecord:
    fun, _ = _objective(flat, variant)
    spec0 = ModelSpec.from_free_values(variant, init)
    x0 = np.clip(
        params_to_coords(variant, spec0.alpha, spec0.tau, spec0.beta),
        -_STAGE_BOUND, _STAGE_BOUND,
    )

    res = None
    method = "l-bfgs-b"
    n_iter = 0
    converged = False
    f0, g0 = fun(x0)
    if math.isfinite(f0) and np.all(np.isfinite(g0)):
        ftol = max(config.tol / max(1.0, abs(f0)), 2.3e-16)
        # the objective and its gradient both scale with the corpus node
        # count, so the gradient test must too; an absolute threshold is
        # unreachable on large corpora (line searches stall at machine
        # precision of f first) and trivial on tiny ones
        gtol = _GRAD_TOL * max(1.0, abs(f0))
        options = {"maxiter": config.max_iter, "ftol": ftol, "gtol": gtol}
        # Stage one searches a moderate box.  The first quasi-Newton step
        # from a high-gradient start can jump straight onto a saturated
        # shelf of the likelihood (parameters so extreme the model stops
        # responding to them) whose gradient passes the convergence test
        # even though a far better interior optimum exists; the tight box
        # keeps that shelf out of reach until curvature is learned.  Stage
        # two restarts from the stage-one solution with the full box, so
        # genuinely boundary-seeking fits still get there, now along an
        # informed direction.
        prev_fun = math.inf
        for bound in (_STAGE_BOUND, COORD_BOUND):
            bounds = [(-bound, bound)] * len(x0)
            try:
                res = scipy.optimize.minimize(
                    fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                    options=options,
                )
            except (FloatingPointError, OverflowError, np.linalg.LinAlgError):
                res = None
                break
            if not (math.isfinite(res.fun) and np.all(np.isfinite(res.x))):
                res = None
                break
            n_iter += int(res.nit)
            x0 = np.clip(res.x, -bound, bound)
            # a stage that stalls without improving on an already converged
            # point (typically a first line search that cannot beat machine
            # precision) does not revoke convergence
            stalled = res.fun >= prev_fun - max(config.tol, ftol * abs(prev_fun))
            converged = bool(res.success) or (converged and stalled)
            prev_fun = float(res.fun)
    if res is None:
        # gradient flagged or quasi-Newton blew up: derivative-free rescue
        method = "nelder-mead"
        res = scipy.optimize.minimize(
            lambda x: fun(x)[0], x0, method="Nelder-Mead",
            bounds=[(-COORD_BOUND, COORD_BOUND)] * len(x0),
            options={"maxiter": 400 * len(x0), "fatol": config.tol, "xatol": 1e-8},
        )
        n_iter = int(res.nit)
        converged = bool(res.success)
    if not converged and math.isfinite(float(res.fun)):
        # a line search can abort at the optimum once f-improvements fall
        # under machine precision; accept stationarity at likelihood scale
        grad = res.jac if method == "l-bfgs-b" else fun(np.asarray(res.x))[1]
        grad = np.asarray(grad, dtype=np.float64)
        if np.all(np.isfinite(grad)):
            converged = bool(
                np.max(np.abs(grad)) <= _GRAD_TOL * max(1.0, abs(float(res.fun)))
            )
    spec = coords_to_params(variant, res.x)
    return RestartRecord(
        index=index,
        init_params=init,
        params=spec.free_values,
        neg_log_lik=float(res.fun),
        converged=converged,
        n_iter=n_iter,
        method=method,
        message=str(res.message),
    )


def _fit_flat(flat: FlatSteps, variant: Variant, config: FitConfig,
              ss: np.random.SeedSequence, warn: bool = True) -> FitResult:
    if flat.n_steps == 0:
        raise ValueError(
            "degenerate dataset: no thread exceeds 2 nodes, the likelihood is constant"
        )
    rng = np.random.Generator(np.random.PCG64(ss))
    inits = _grid_initials(flat, variant)
    inits += [_draw_initial(variant, rng) for _ in range(config.restarts)]
    records = [
        _run_restart(flat, variant, init, config, r) for r, init in enumerate(inits)
    ]
    best_nll = min(rec.neg_log_lik for rec in records)
    # among essentially tied optima, prefer one the optimizer certified
    best = min(
        (rec for rec in records if rec.neg_log_lik <= best_nll + 1e-6),
        key=lambda rec: (not rec.converged, rec.neg_log_lik),
    )
    if warn and not best.converged:
        warnings.warn(
            f"{variant.value} fit did not converge within {config.max_iter} iterations",
            stacklevel=3,
        )
    return FitResult(
        variant=variant,
        spec=ModelSpec.from_free_values(variant, best.params),
        neg_log_lik=best.neg_log_lik,
        converged=best.converged,
        node_count=flat.n_steps,
        restarts=tuple(records),
    )


def _maybe_subsample(flat: FlatSteps, config: FitConfig) -> FlatSteps:
    if config.sample_size is not None and config.sample_size < flat.n_threads:
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(config.rng_seed, spawn_key=(11,)))
        )
        idx = np.sort(rng.choice(flat.n_threads, size=config.sample_size, replace=False))
        return flat.subset(idx)
    return flat


def fit(data: ThreadDataset | FlatSteps, variant: Variant | str,
        config: FitConfig | None = None) -> FitResult:
    """Best-of-restarts maximum-likelihood fit of one variant.

    With ``config.sample_size`` below the dataset's thread count, a seeded
    subsample (without replacement) is fitted instead of the full data.
    """
    variant = Variant.parse(variant) if isinstance(variant, str) else Variant(variant)
    config = config or FitConfig()
    flat = data if isinstance(data, FlatSteps) else FlatSteps.from_dataset(data)
    flat = _maybe_subsample(flat, config)
    return _fit_flat(flat, variant, config, np.random.SeedSequence(config.rng_seed, spawn_key=(10,)))


def _adopt_reduced_optimum(full: FitResult, reduced: Sequence[FitResult]) -> FitResult:
    """Take a reduced variant's optimum as the full fit when it is better.

    Every pinned value (alpha = 0, tau = 1, beta = 0) is an admissible
    full-model parameter, so a reduced optimum is also a full-model point
    with the same likelihood.  Folding the reduced optima into the
    full model's candidate set makes the nesting inequality
    nll(full) <= nll(reduced) exact by construction instead of depending
    on the optimizer finding the boundary on its own.
    """
    best = min(reduced, key=lambda fr: fr.neg_log_lik, default=None)
    if best is None or best.neg_log_lik >= full.neg_log_lik:
        return full
    spec = ModelSpec.full(best.spec.alpha, best.spec.tau, best.spec.beta)
    record = RestartRecord(
        index=len(full.restarts),
        init_params=spec.free_values,
        params=spec.free_values,
        neg_log_lik=best.neg_log_lik,
        converged=best.converged,
        n_iter=0,
        method=f"adopted:{best.variant.value}",
        message="reduced-variant optimum taken as a full-model point",
    )
    return replace(
        full,
        spec=spec,
        neg_log_lik=best.neg_log_lik,
        converged=best.converged,
        restarts=full.restarts + (record,),
    )


def _fit_nested_flat(flat: FlatSteps, variants: Sequence[Variant], config: FitConfig,
                     ss_key: tuple, warn: bool = True) -> dict[str, FitResult]:
    seed = config.rng_seed
    results = {
        v.value: _fit_flat(flat, v, config, np.random.SeedSequence(seed, spawn_key=ss_key),
                           warn=warn)
        for v in variants
    }
    if Variant.FM.value in results:
        reduced = [fr for name, fr in results.items() if name != Variant.FM.value]
        results[Variant.FM.value] = _adopt_reduced_optimum(results[Variant.FM.value], reduced)
    return results


def fit_nested(data: ThreadDataset | FlatSteps,
               config: FitConfig | None = None,
               variants: Sequence[Variant | str] = tuple(_VARIANT_INDEX)) -> dict[str, FitResult]:
    """Fit several variants jointly so the nesting inequality holds exactly.

    Each variant gets the same treatment as :func:`fit`; afterwards, if any
    reduced optimum beats the full model's, the full result is replaced by
    that point (recorded as an extra restart).  Returns a dict keyed by
    variant value.
    """
    config = config or FitConfig()
    parsed = tuple(
        Variant.parse(v) if isinstance(v, str) else Variant(v) for v in variants
    )
    if len(set(parsed)) != len(parsed):
        raise ValueError("duplicate variants")
    flat = data if isinstance(data, FlatSteps) else FlatSteps.from_dataset(data)
    flat = _maybe_subsample(flat, config)
    return _fit_nested_flat(flat, parsed, config, (10,))


def _replicate_summary(replicates: Sequence[ReplicateRecord], variant: Variant) -> dict:
    converged = [r for r in replicates if r.converged]
    out: dict = {"n_replicates": len(replicates), "n_converged": len(converged)}
    if not converged:
        return out
    mean: dict[str, float] = {}
    std: dict[str, float] = {}

    def put(name: str, values: np.ndarray) -> None:
        mean[name] = float(values.mean())
        std[name] = float(values.std(ddof=1)) if len(values) > 1 else 0.0

    for name in variant.free_params:
        put(name, np.asarray([getattr(r, name) for r in converged]))
    if "beta" in variant.free_params:
        put("log_beta", np.log([r.beta for r in converged]))
    put("neg_log_lik", np.asarray([r.neg_log_lik for r in converged]))
    out["mean"] = mean
    out["std"] = std
    return out


_BOOT_STATE: dict = {}


def _boot_init(arrays, variant_value, config, n_threads):
    _BOOT_STATE["flat"] = FlatSteps(*arrays)
    _BOOT_STATE["variant"] = Variant(variant_value)
    _BOOT_STATE["config"] = config
    _BOOT_STATE["n_threads"] = n_threads


def _boot_replicate(r: int) -> tuple:
    flat: FlatSteps = _BOOT_STATE["flat"]
    variant: Variant = _BOOT_STATE["variant"]
    config: FitConfig = _BOOT_STATE["config"]
    n_threads: int = _BOOT_STATE["n_threads"]
    n = config.sample_size or n_threads
    seed = config.rng_seed
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(20, r))))
    idx = rng.integers(0, n_threads, size=n)
    sub = flat.subset(idx)
    if sub.n_steps == 0:
        return (r, variant.value, math.nan, math.nan, math.nan, math.nan, False)
    fr = _fit_flat(sub, variant, config, np.random.SeedSequence(seed, spawn_key=(21, r)), warn=False)
    return (r, variant.value, fr.spec.alpha, fr.spec.tau, fr.spec.beta, fr.neg_log_lik, fr.converged)


def bootstrap_fit(data: ThreadDataset | FlatSteps, variant: Variant | str,
                  config: FitConfig | None = None, jobs: int = 1) -> FitResult:
    """Thread-level resampling bootstrap around a full-data fit.

    Each replicate draws ``sample_size`` threads with replacement (same
    index streams for every variant, so per-replicate likelihoods are
    paired across variants), fits independently, and lands in the
    replicate table; the summary reports means and standard deviations
    over converged replicates.
    """
    variant = Variant.parse(variant) if isinstance(variant, str) else Variant(variant)
    config = config or FitConfig()
    flat = data if isinstance(data, FlatSteps) else FlatSteps.from_dataset(data)
    full = _fit_flat(flat, variant, config,
                     np.random.SeedSequence(config.rng_seed, spawn_key=(10,)))
    arrays = (flat.cnt, flat.age, flat.isroot, flat.tt, flat.t_counts, flat.step_offsets)
    indices = range(config.bootstrap_replicates)
    if jobs > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_boot_init,
            initargs=(arrays, variant.value, config, flat.n_threads),
        ) as pool:
            raw = list(pool.map(_boot_replicate, indices, chunksize=4))
    else:
        _boot_init(arrays, variant.value, config, flat.n_threads)
        raw = [_boot_replicate(r) for r in indices]
        _BOOT_STATE.clear()
    replicates = tuple(ReplicateRecord(*row) for row in raw)
    return replace(
        full,
        replicates=replicates,
        replicate_summary=_replicate_summary(replicates, variant),
    )


def _nested_boot_init(arrays, variant_values, config, n_threads):
    _BOOT_STATE["flat"] = FlatSteps(*arrays)
    _BOOT_STATE["variants"] = tuple(Variant(v) for v in variant_values)
    _BOOT_STATE["config"] = config
    _BOOT_STATE["n_threads"] = n_threads


def _nested_boot_replicate(r: int) -> tuple:
    flat: FlatSteps = _BOOT_STATE["flat"]
    variants: tuple[Variant, ...] = _BOOT_STATE["variants"]
    config: FitConfig = _BOOT_STATE["config"]
    n_threads: int = _BOOT_STATE["n_threads"]
    n = config.sample_size or n_threads
    seed = config.rng_seed
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(20, r))))
    idx = rng.integers(0, n_threads, size=n)
    sub = flat.subset(idx)
    if sub.n_steps == 0:
        return tuple(
            (r, v.value, math.nan, math.nan, math.nan, math.nan, False) for v in variants
        )
    results = _fit_nested_flat(sub, variants, config, (21, r), warn=False)
    return tuple(
        (r, v.value, fr.spec.alpha, fr.spec.tau, fr.spec.beta, fr.neg_log_lik, fr.converged)
        for v in variants
        for fr in (results[v.value],)
    )


def bootstrap_fit_nested(data: ThreadDataset | FlatSteps,
                         config: FitConfig | None = None, jobs: int = 1,
                         variants: Sequence[Variant | str] = tuple(_VARIANT_INDEX),
                         ) -> dict[str, FitResult]:
    """Paired bootstrap across variants with the nesting inequality enforced.

    Replicate r draws one shared thread index stream for all variants, so
    per-replicate likelihoods are directly comparable, and each replicate's
    full-model fit folds in the reduced optima the way :func:`fit_nested`
    does.  A reduced variant's result is bit-identical to what
    :func:`bootstrap_fit` would return for it alone.
    """
    config = config or FitConfig()
    parsed = tuple(Variant.parse(v) if isinstance(v, str) else Variant(v) for v in variants)
    if len(set(parsed)) != len(parsed):
        raise ValueError("duplicate variants")
    flat = data if isinstance(data, FlatSteps) else FlatSteps.from_dataset(data)
    full = _fit_nested_flat(flat, parsed, config, (10,))
    arrays = (flat.cnt, flat.age, flat.isroot, flat.tt, flat.t_counts, flat.step_offsets)
    variant_values = tuple(v.value for v in parsed)
    indices = range(config.bootstrap_replicates)
    if jobs > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_nested_boot_init,
            initargs=(arrays, variant_values, config, flat.n_threads),
        ) as pool:
            raw = list(pool.map(_nested_boot_replicate, indices))
    else:
        _nested_boot_init(arrays, variant_values, config, flat.n_threads)
        raw = [_nested_boot_replicate(r) for r in indices]
        _BOOT_STATE.clear()
    out: dict[str, FitResult] = {}
    for j, v in enumerate(parsed):
        replicates = tuple(ReplicateRecord(*rows[j]) for rows in raw)
        out[v.value] = replace(
            full[v.value],
            replicates=replicates,
            replicate_summary=_replicate_summary(replicates, v),
        )
    return out


@dataclass(frozen=True)
class ResidualRow:
    """One (true value, estimate) pair from the recovery experiment."""

    variant: str
    n_threads: int
    experiment: int
    param: str
    theta_star: float
    theta_hat: float
    residual: float
    converged: bool


@dataclass(frozen=True)
class ResidualTable:
    """Recovery-experiment results with quantile helpers."""

    rows: tuple[ResidualRow, ...]

    def residuals(self, variant: str, n_threads: int, param: str) -> np.ndarray:
        return np.asarray(
            [
                r.residual
                for r in self.rows
                if r.variant == variant and r.n_threads == n_threads and r.param == param
            ]
        )

    def groups(self) -> list[tuple[str, int, str]]:
        seen: dict[tuple[str, int, str], None] = {}
        for r in self.rows:
            seen.setdefault((r.variant, r.n_threads, r.param), None)
        return list(seen)

    def median(self, variant: str, n_threads: int, param: str) -> float:
        return float(np.median(self.residuals(variant, n_threads, param)))

    def spread(self, variant: str, n_threads: int, param: str) -> float:
        """Interquartile range of the residuals (robust to fit outliers)."""
        res = self.residuals(variant, n_threads, param)
        lo, hi = np.percentile(res, [25.0, 75.0])
        return float(hi - lo)

    def quantile_rows(self, qs: Sequence[float] = (0.05, 0.25, 0.5, 0.75, 0.95)) -> list[dict]:
        out = []
        for variant, n, param in self.groups():
            res = self.residuals(variant, n, param)
            row = {"variant": variant, "n_threads": n, "param": param, "n_experiments": len(res)}
            for q in qs:
                row[f"q{int(round(q * 100)):02d}"] = float(np.percentile(res, q * 100.0))
            out.append(row)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["variant", "n_threads", "experiment", "param",
                 "theta_star", "theta_hat", "residual", "converged"]
            )
            for r in self.rows:
                w.writerow(
                    [r.variant, r.n_threads, r.experiment, r.param,
                     r.theta_star, r.theta_hat, r.residual, int(r.converged)]
                )


def _residual_worker(args) -> list[tuple]:
    variant_value, n_threads, experiment, config, hist = args
    variant = Variant(variant_value)
    vi = _VARIANT_INDEX[variant]
    seed = config.rng_seed
    key = (vi, n_threads, experiment)
    prng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(30,) + key))
    )
    star = dict(zip(variant.free_params, _draw_star(variant, prng)))
    spec_star = ModelSpec.from_free_values(variant, [star[n] for n in variant.free_params])
    gen_seed = int(
        np.random.SeedSequence(seed, spawn_key=(31,) + key).generate_state(1, np.uint64)[0]
    )
    data = generate_dataset(
        spec_star, GenConfig(count=n_threads, rng_seed=gen_seed, size_histogram=hist)
    )
    flat = FlatSteps.from_dataset(data)
    rows = []
    if flat.n_steps == 0:
        for name in variant.free_params:
            rows.append((variant.value, n_threads, experiment, name,
                         star[name], math.nan, math.nan, False))
        return rows
    fr = _fit_flat(flat, variant, config,
                   np.random.SeedSequence(seed, spawn_key=(32,) + key), warn=False)
    for name in variant.free_params:
        hat = getattr(fr.spec, name)
        rows.append((variant.value, n_threads, experiment, name,
                     star[name], hat, star[name] - hat, fr.converged))
    if "beta" in variant.free_params and star["beta"] > 0:
        ls, lh = math.log(star["beta"]), math.log(fr.spec.beta)
        rows.append((variant.value, n_threads, experiment, "log_beta",
                     ls, lh, ls - lh, fr.converged))
    return rows


def _draw_star(variant: Variant, rng: np.random.Generator) -> tuple[float, ...]:
    return tuple(rng.uniform(*PARAM_BOX[name]) for name in variant.free_params)


def residual_experiment(
    variant: Variant | str,
    n_experiments: int,
    thread_counts: Sequence[int],
    *,
    config: FitConfig | None = None,
    size_histogram: Mapping[int, float] | None = None,
    jobs: int = 1,
) -> ResidualTable:
    """Generate-at-known-truth, refit, and tabulate theta* - theta_hat.

    For every thread count N and experiment index, the true point is drawn
    uniformly from PARAM_BOX (pinned parameters stay at their constraint),
    N threads are generated with sizes from ``size_histogram`` (default: a
    log-normal surrogate with mean size 50), and the same variant is
    refitted.  Rows cover each free parameter plus log_beta.
    """
    variant = Variant.parse(variant) if isinstance(variant, str) else Variant(variant)
    config = config or FitConfig()
    if n_experiments < 1:
        raise ValueError("n_experiments must be >= 1")
    hist = size_histogram if size_histogram is not None else lognormal_size_histogram(50.0, 1.0)
    tasks = [
        (variant.value, int(n), e, config, dict(hist))
        for n in thread_counts
        for e in range(n_experiments)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_residual_worker, tasks, chunksize=1))
    else:
        chunks = [_residual_worker(t) for t in tasks]
    rows = tuple(ResidualRow(*row) for chunk in chunks for row in chunk)
    return ResidualTable(rows=rows)
