"""Constraint construction, prior offsets, degeneracy, dimension reduction."""

import numpy as np
import pytest

import bayesbound as bb
from bayesbound.constraints import HalfSpace, HalfSpaceSet
from bayesbound.model import gaussian_tail
from conftest import random_model, random_spd


class TestBuild:
    def test_hand_derived_binary_case(self):
        model = bb.GaussianClassModel.from_arrays(
            [[-1.0], [1.0]], [[1.0]], [0.5, 0.5]
        )
        hs = bb.build_constraints(model, 1, 1.0)
        assert len(hs.constraints) == 1
        (h,) = hs.constraints
        assert h.normal == pytest.approx(np.array([4.0]))
        assert h.offset == pytest.approx(4.0)
        # probability Phi(c/||a||) = Phi(1) must match 1 - closed-form error
        assert 1.0 - gaussian_tail(h.offset / np.linalg.norm(h.normal)) == pytest.approx(
            1.0 - model.binary_closed_form(1.0), abs=1e-14
        )

    def test_coincident_means_tie_break(self):
        model = bb.GaussianClassModel.from_arrays(
            np.zeros((3, 2)), np.eye(2), np.full(3, 1 / 3)
        )
        k0 = bb.build_constraints(model, 0, 1.0)
        assert not k0.forced_empty and len(k0.constraints) == 0  # probability 1
        for k in (1, 2):
            assert bb.build_constraints(model, k, 1.0).forced_empty

    def test_uniform_priors_reduce_to_pure_distance_offsets(self):
        rng = np.random.default_rng(7)
        model = random_model(4, 6, rng, spd_cov=True)
        for k in range(4):
            hs = bb.build_constraints(model, k, 1.7)
            for h in hs.constraints:
                b_tilde = 0.25 * np.linalg.norm(h.normal) ** 2
                assert h.offset == pytest.approx(b_tilde / 1.7, rel=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_norm_squared_equals_four_b_tilde(self, seed):
        rng = np.random.default_rng(seed)
        cov = random_spd(5, rng)
        means = rng.standard_normal((4, 5))
        model = bb.GaussianClassModel.from_arrays(means, cov, np.full(4, 0.25))
        inv = np.linalg.inv(cov)
        for k in range(4):
            hs = bb.build_constraints(model, k, 1.0)
            others = [j for j in range(4) if j != k]
            for h, j in zip(hs.constraints, others):
                diff = means[k] - means[j]
                b_tilde = diff @ inv @ diff  # independent dense route
                assert 0.25 * np.linalg.norm(h.normal) ** 2 == pytest.approx(
                    b_tilde, rel=1e-9
                )

    def test_prior_offset_formula(self):
        rng = np.random.default_rng(17)
        priors = np.array([0.1, 0.6, 0.3])
        means = rng.standard_normal((3, 4))
        model = bb.GaussianClassModel.from_arrays(means, np.eye(4), priors)
        tau = 0.8
        hs = bb.build_constraints(model, 1, tau)
        others = [0, 2]
        for h, j in zip(hs.constraints, others):
            diff = means[1] - means[j]
            expected = np.dot(diff, diff) / tau + 2 * tau * np.log(priors[1] / priors[j])
            assert h.offset == pytest.approx(expected, rel=1e-12)

    def test_origin_feasible_for_uniform_priors(self):
        rng = np.random.default_rng(27)
        for tau in (0.3, 1.0, 5.0):
            model = random_model(5, 3, rng, spd_cov=True)
            for k in range(5):
                hs = bb.build_constraints(model, k, tau)
                assert all(h.offset >= 0 for h in hs.constraints)
                assert hs.contains(np.zeros(3))

    def test_offsets_shrink_with_temperature(self):
        rng = np.random.default_rng(37)
        model = random_model(3, 4, rng)
        low = bb.build_constraints(model, 0, 0.5)
        high = bb.build_constraints(model, 0, 2.0)
        for a, b in zip(low.constraints, high.constraints):
            assert a.offset > b.offset > 0

    def test_zero_prior_classes(self):
        model = bb.GaussianClassModel.from_arrays(
            [[0.0], [2.0], [4.0]], [[1.0]], [0.5, 0.5, 0.0]
        )
        # the zero-prior competitor imposes no constraint
        assert len(bb.build_constraints(model, 0, 1.0).constraints) == 1
        # the zero-prior class never wins
        assert bb.build_constraints(model, 2, 1.0).forced_empty

    def test_class_index_validated(self):
        model = bb.GaussianClassModel.from_arrays([[0.0]], [[1.0]], [1.0])
        with pytest.raises(ValueError, match="out of range"):
            bb.build_constraints(model, 1, 1.0)


class TestReduceDimension:
    def test_axis_aligned_constraints(self):
        d = 784
        cons = tuple(
            HalfSpace(normal=3.0 * np.eye(d)[i], offset=float(i)) for i in range(5)
        )
        hs = HalfSpaceSet(dim=d, constraints=cons)
        red = bb.reduce_dimension(hs)
        assert red.dim == 5
        for h_old, h_new in zip(hs.constraints, red.constraints):
            # scaled standard basis vectors: one nonzero entry, same length
            assert np.sum(np.abs(h_new.normal) > 1e-12) == 1
            assert np.linalg.norm(h_new.normal) == pytest.approx(3.0)
            assert h_new.offset == h_old.offset

    def test_single_constraint_keeps_half_space_probability(self):
        rng = np.random.default_rng(47)
        a = rng.standard_normal(784)
        hs = HalfSpaceSet(dim=784, constraints=(HalfSpace(normal=a, offset=1.3),))
        red = bb.reduce_dimension(hs)
        assert red.dim == 1
        ratio_full = 1.3 / np.linalg.norm(a)
        ratio_red = 1.3 / np.linalg.norm(red.constraints[0].normal)
        assert ratio_red == pytest.approx(ratio_full, rel=1e-12)

    def test_duplicate_normals_collapse_rank(self):
        a = np.array([1.0, 2.0, 0.0, 0.0])
        hs = HalfSpaceSet(
            dim=4,
            constraints=(
                HalfSpace(normal=a, offset=0.5),
                HalfSpace(normal=2 * a, offset=1.5),
            ),
        )
        assert bb.reduce_dimension(hs).dim == 1

    def test_membership_preserved(self):
        rng = np.random.default_rng(57)
        model = random_model(4, 30, rng, spd_cov=True)
        hs = bb.build_constraints(model, 2, 1.0)
        red, basis = bb.reduce_dimension(hs, return_basis=True)
        pts = rng.standard_normal((1000, 30)) * 1.5
        full_in = hs.contains(pts)
        red_in = red.contains(pts @ basis)
        assert np.array_equal(full_in, red_in)

    def test_trivial_sets_pass_through(self):
        empty = HalfSpaceSet(dim=3)
        assert bb.reduce_dimension(empty) is empty
        forced = HalfSpaceSet(dim=3, forced_empty=True)
        assert bb.reduce_dimension(forced) is forced

    def test_probability_unchanged_under_reduction(self):
        rng = np.random.default_rng(67)
        model = random_model(4, 100, rng)
        hs = bb.build_constraints(model, 0, 1.0)
        config = bb.HdrConfig(seed=3, repeats=6)
        full = bb.estimate_polytope_probability(hs, config)
        red = bb.estimate_polytope_probability(bb.reduce_dimension(hs), config)
        band = 3 * np.hypot(full.stderr, red.stderr)
        assert abs(full.p - red.p) <= band
