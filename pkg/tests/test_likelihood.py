import math

import numpy as np
import pytest

import helpers
from threadlik import (
    FlatSteps,
    GenConfig,
    ModelSpec,
    ThreadDataset,
    Variant,
    generate_dataset,
    gradient,
    neg_log_likelihood,
)
from threadlik.likelihood import coords_to_params, grad_to_coords, params_to_coords
from threadlik._kernels import nll_grad


def spec_for(variant, rng):
    alpha = 0.0 if variant is Variant.NO_ALPHA else rng.uniform(0.05, 2.0)
    tau = 1.0 if variant is Variant.NO_TAU else rng.uniform(0.55, 0.995)
    beta = 0.0 if variant is Variant.NO_BIAS else rng.uniform(0.3, 10.0)
    return ModelSpec(variant, alpha=alpha, tau=tau, beta=beta)


class TestFlatSteps:
    def test_step_count_excludes_forced_entries(self, hand_dataset, hand_threads):
        flat = FlatSteps.from_dataset(hand_dataset)
        assert flat.n_threads == len(hand_threads)
        assert flat.n_steps == sum(max(len(t) - 1, 0) for t in hand_threads)

    def test_flattening_is_cached_on_the_dataset(self, hand_dataset):
        assert FlatSteps.from_dataset(hand_dataset) is FlatSteps.from_dataset(hand_dataset)


class TestNegLogLikelihood:
    def test_two_node_thread_has_probability_one(self):
        # the only entry is forced, so the likelihood carries no terms
        val = neg_log_likelihood(ThreadDataset([[1]]), ModelSpec.full(0.3, 0.9, 2.0))
        assert val.neg_log_lik == 0.0
        assert val.node_count == 0
        assert math.isnan(val.per_node)

    def test_hand_example(self):
        # p(pi_2 = 1) under alpha 1, tau 0.5, beta 2: phi (3.25, 1.5)
        val = neg_log_likelihood(ThreadDataset([[1, 1]]), ModelSpec.full(1.0, 0.5, 2.0))
        assert val.neg_log_lik == pytest.approx(-math.log(3.25 / 4.75), rel=1e-15)
        assert val.node_count == 1

    def test_matches_reference_for_every_variant(self, hand_dataset, hand_threads, rng):
        for variant in Variant:
            spec = spec_for(variant, rng)
            val = neg_log_likelihood(hand_dataset, spec)
            expected = helpers.dataset_nll_ref(spec.alpha, spec.tau, spec.beta, hand_threads)
            assert val.neg_log_lik == pytest.approx(expected, rel=1e-12)
            assert val.clamped_terms == 0

    def test_nonnegative_on_random_corpora(self, rng):
        hist = {2: 0.3, 4: 0.4, 9: 0.3}
        for seed in range(4):
            spec = spec_for(list(Variant)[seed], rng)
            data = generate_dataset(spec, GenConfig(count=150, rng_seed=seed, size_histogram=hist))
            for variant in Variant:
                probe = spec_for(variant, rng)
                assert neg_log_likelihood(data, probe).neg_log_lik >= 0.0

    def test_additive_over_threads(self, small_corpus, slashdot_spec):
        left = small_corpus.subset(range(0, 120))
        right = small_corpus.subset(range(120, small_corpus.n_threads))
        total = neg_log_likelihood(small_corpus, slashdot_spec).neg_log_lik
        parts = (
            neg_log_likelihood(left, slashdot_spec).neg_log_lik
            + neg_log_likelihood(right, slashdot_spec).neg_log_lik
        )
        assert total == pytest.approx(parts, rel=1e-12)

    def test_per_thread_breakdown(self, small_corpus, slashdot_spec):
        val = neg_log_likelihood(small_corpus, slashdot_spec, per_thread=True)
        assert val.per_thread is not None
        assert len(val.per_thread) == small_corpus.n_threads
        assert val.per_thread.sum() == pytest.approx(val.neg_log_lik, rel=1e-12)
        assert (val.per_thread >= -1e-12).all()

    def test_clamp_sentinel_on_absurd_parameters(self):
        # a reply to a long-dead node under pure fast-decaying novelty
        data = ThreadDataset([[1] + [1] * 800 + [2]], validate=False)
        val = neg_log_likelihood(data, ModelSpec.no_alpha(1e-3, 0.0))
        assert val.clamped_terms > 0
        assert np.isfinite(val.neg_log_lik)


class TestCoordinates:
    def test_round_trip_every_variant(self, rng):
        for variant in Variant:
            spec = spec_for(variant, rng)
            coords = params_to_coords(variant, spec.alpha, spec.tau, spec.beta)
            assert len(coords) == len(variant.free_params)
            back = coords_to_params(variant, coords)
            assert back.alpha == pytest.approx(spec.alpha, rel=1e-12)
            assert back.tau == pytest.approx(spec.tau, rel=1e-12)
            assert back.beta == pytest.approx(spec.beta, rel=1e-12)
            assert back.variant is variant

    def test_chain_rule_factors(self):
        spec = ModelSpec.full(0.4, 0.8, 3.0)
        g = grad_to_coords(spec, 1.0, 1.0, 1.0)
        assert g[0] == pytest.approx(0.4)          # d alpha / d log-alpha
        assert g[1] == pytest.approx(0.8 * 0.2)    # d tau / d logit-tau
        assert g[2] == pytest.approx(3.0)          # d beta / d log-beta


class TestGradient:
    def test_matches_finite_differences_at_random_points(self):
        # 100 random (dataset, parameter point) pairs, all variants; the
        # fine step checks the gradient vector as a whole, the coarser one
        # each component (a tiny component drowns in roundoff at h = 1e-6)
        rng = np.random.default_rng(99)
        hist = {2: 0.2, 3: 0.2, 6: 0.3, 15: 0.3}
        variants = list(Variant)
        worst_vector = 0.0
        worst_component = 0.0
        for case in range(100):
            variant = variants[case % 4]
            truth = spec_for(variant, rng)
            data = generate_dataset(
                truth, GenConfig(count=30, rng_seed=1000 + case, size_histogram=hist)
            )
            flat = FlatSteps.from_dataset(data)
            point = spec_for(variant, rng)
            res = gradient(flat, point)
            coords = params_to_coords(variant, point.alpha, point.tau, point.beta)

            def fd_vector(h):
                out = np.empty(len(coords))
                for i in range(len(coords)):
                    up, dn = coords.copy(), coords.copy()
                    up[i] += h
                    dn[i] -= h
                    out[i] = (
                        neg_log_likelihood(flat, coords_to_params(variant, up)).neg_log_lik
                        - neg_log_likelihood(flat, coords_to_params(variant, dn)).neg_log_lik
                    ) / (2 * h)
                return out

            fine = fd_vector(1e-6)
            worst_vector = max(
                worst_vector,
                float(np.linalg.norm(res.grad - fine) / np.linalg.norm(res.grad)),
            )
            coarse = fd_vector(1e-4)
            rel = np.abs(res.grad - coarse) / np.maximum(
                np.maximum(np.abs(res.grad), np.abs(coarse)), 1e-12
            )
            worst_component = max(worst_component, float(rel.max()))
        assert worst_vector < 1e-5
        assert worst_component < 1e-5

    def test_gradient_components_follow_free_param_order(self, small_corpus):
        full = gradient(small_corpus, ModelSpec.full(0.4, 0.9, 3.0))
        nb = gradient(small_corpus, ModelSpec.no_bias(0.4, 0.9))
        assert len(full.grad) == 3
        assert len(nb.grad) == 2

    def test_clamped_evaluations_are_flagged(self):
        data = ThreadDataset([[1] + [1] * 800 + [2]], validate=False)
        res = gradient(data, ModelSpec.no_alpha(1e-3, 0.0))
        assert res.flagged

    def test_boundary_alpha_score_centers_at_zero(self):
        # data generated at alpha* = 0: the natural-parameter derivative
        # with respect to alpha at the truth must vanish in expectation
        truth = ModelSpec.no_alpha(0.9, 4.0)
        hist = {2: 0.25, 4: 0.5, 10: 0.25}
        scores = []
        for rep in range(100):
            data = generate_dataset(truth, GenConfig(count=80, rng_seed=rep, size_histogram=hist))
            flat = FlatSteps.from_dataset(data)
            _nll, d_alpha, _dt, _db, _nc = nll_grad(
                flat.cnt, flat.age, flat.isroot, flat.t_counts, 0.0, 0.9, 4.0, True
            )
            scores.append(d_alpha)
        scores = np.asarray(scores)
        sem = scores.std(ddof=1) / math.sqrt(len(scores))
        assert scores.mean() >= -4.0 * sem


class TestOptimumDiagnostics:
    def test_gradient_small_at_fitted_optimum(self, small_corpus):
        from threadlik import FitConfig, fit

        res = fit(small_corpus, "fm", FitConfig(restarts=2, rng_seed=3))
        g = gradient(small_corpus, res.spec)
        scale = max(1.0, abs(res.neg_log_lik))
        assert np.abs(g.grad).max() < 1e-4 * scale
