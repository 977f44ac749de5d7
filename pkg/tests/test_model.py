"""Model file loading, densities, sampling, classification, closed form."""

import json
import struct

import numpy as np
import pytest

import bayesbound as bb
from bayesbound.model import gaussian_tail
from conftest import random_model, random_spd

# frozen oracles (mpmath, 50 digits)
HALF_LOG_2PI = 0.9189385332046727
BINARY_ERR_SQRT2_TAU1 = 0.23975006109347673  # 1 - Phi(sqrt(2)/2)
LOG_BINARY_ERR_SQRT2_TAU005 = -103.57303620540484  # log Phi(-sqrt(2)/0.1)
TAIL_AT_1 = 0.15865525393145705  # 1 - Phi(1)


def binary_1d_bytes(priors=(0.5, 0.5)) -> bytes:
    # built by hand against the format description, independent of the writer
    header = struct.pack("<4sIIIB", b"GCM1", 1, 2, 1, 0)
    doubles = np.array([*priors, -1.0, 1.0, 1.0], dtype="<f8")
    return header + doubles.tobytes()


class TestLoad:
    def test_trivial_binary_file(self, tmp_path):
        path = tmp_path / "m.gcm"
        path.write_bytes(binary_1d_bytes())
        model = bb.load_model(path)
        assert model.num_classes == 2 and model.dim == 1
        assert model.chol == pytest.approx(np.array([[1.0]]))
        assert model.means.tolist() == [[-1.0], [1.0]]

    def test_priors_must_normalize(self):
        with pytest.raises(bb.ModelFormatError, match="priors do not sum to 1"):
            bb.load_model(binary_1d_bytes(priors=(0.7, 0.4)))

    def test_negative_prior_rejected(self):
        with pytest.raises(bb.ModelFormatError, match="nonnegative"):
            bb.load_model(binary_1d_bytes(priors=(1.2, -0.2)))

    def test_chol_reconstructs_covariance(self):
        rng = np.random.default_rng(11)
        cov = random_spd(4, rng)
        model = bb.GaussianClassModel.from_arrays(
            rng.standard_normal((3, 4)), cov, np.full(3, 1 / 3)
        )
        assert np.max(np.abs(model.chol @ model.chol.T - cov)) <= 1e-10

    def test_binary_roundtrip_exact(self):
        rng = np.random.default_rng(5)
        model = random_model(3, 4, rng, spd_cov=True, priors=np.array([0.2, 0.3, 0.5]))
        again = bb.load_model(bb.model_to_bytes(model))
        assert np.array_equal(again.means, model.means)
        assert np.array_equal(again.cov, model.cov)
        assert np.array_equal(again.priors, model.priors)

    def test_json_twin_roundtrip_exact(self):
        rng = np.random.default_rng(6)
        model = random_model(2, 3, rng, spd_cov=True)
        again = bb.model_from_json(bb.model_to_json(model))
        assert np.array_equal(again.means, model.means)
        assert np.array_equal(again.cov, model.cov)

    def test_json_file_accepted(self, tmp_path):
        doc = {
            "k": 2, "d": 1, "cov_kind": 2,
            "priors": [0.5, 0.5], "means": [[-1.0], [1.0]], "cov": [1.0],
        }
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        model = bb.load_model(path)
        assert model.dim == 1 and model.cov[0, 0] == 1.0

    def test_json_size_limit(self):
        doc = json.dumps({"k": 1, "d": 1, "pad": "x" * (1 << 20)}).encode()
        with pytest.raises(bb.ModelFormatError, match="1 MiB"):
            bb.load_model(doc)

    def test_diag_and_scalar_covariance_kinds(self):
        header = struct.pack("<4sIIIB", b"GCM1", 1, 1, 3, 1)
        blob = header + np.array([1.0, 0, 0, 0, 2.0, 3.0, 4.0], dtype="<f8").tobytes()
        model = bb.load_model(blob)
        assert np.array_equal(model.cov, np.diag([2.0, 3.0, 4.0]))

        header = struct.pack("<4sIIIB", b"GCM1", 1, 1, 3, 2)
        blob = header + np.array([1.0, 0, 0, 0, 2.5], dtype="<f8").tobytes()
        model = bb.load_model(blob)
        assert np.array_equal(model.cov, 2.5 * np.eye(3))

    def test_malformed_files_rejected(self):
        with pytest.raises(bb.ModelFormatError, match="magic|not a GCM"):
            bb.load_model(b"BAD!" + b"\0" * 64)
        with pytest.raises(bb.ModelFormatError, match="length"):
            bb.load_model(binary_1d_bytes()[:-8])
        header = struct.pack("<4sIIIB", b"GCM1", 1, 1, 1, 7)
        with pytest.raises(bb.ModelFormatError, match="covariance kind"):
            bb.load_model(header + b"\0" * 16)
        header = struct.pack("<4sIIIB", b"GCM1", 9, 1, 1, 0)
        with pytest.raises(bb.ModelFormatError, match="version"):
            bb.load_model(header + b"\0" * 16)

    def test_indefinite_covariance_rejected(self):
        cov = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(bb.ModelFormatError, match="positive definite"):
            bb.GaussianClassModel.from_arrays(np.zeros((1, 2)), cov, [1.0])

    def test_jitter_accepts_borderline(self):
        v = np.array([1.0, 2.0])
        cov = np.outer(v, v)  # PSD, singular: needs the jitter ladder
        model = bb.GaussianClassModel.from_arrays(np.zeros((1, 2)), cov, [1.0])
        assert np.all(np.isfinite(model.chol))

    def test_asymmetric_covariance_rejected(self):
        cov = np.array([[1.0, 0.5], [0.1, 1.0]])
        with pytest.raises(bb.ModelFormatError, match="symmetric"):
            bb.GaussianClassModel.from_arrays(np.zeros((1, 2)), cov, [1.0])


class TestLogDensity:
    def test_standard_normal_origin(self):
        model = bb.GaussianClassModel.from_arrays([[0.0]], [[1.0]], [1.0])
        assert model.log_density(0, np.array([0.0]), 1.0) == pytest.approx(
            -HALF_LOG_2PI, abs=1e-12
        )

    def test_two_dim_at_mean(self):
        model = bb.GaussianClassModel.from_arrays(
            [[0.3, -0.7]], np.eye(2), [1.0]
        )
        val = model.log_density(0, np.array([0.3, -0.7]), 1.0)
        assert val == pytest.approx(-2 * HALF_LOG_2PI, abs=1e-12)

    def test_matches_dense_formula(self):
        rng = np.random.default_rng(21)
        cov = random_spd(3, rng)
        model = bb.GaussianClassModel.from_arrays(
            rng.standard_normal((2, 3)), cov, [0.4, 0.6]
        )
        for tau in (0.7, 1.0, 2.3):
            scaled = tau * tau * cov
            inv = np.linalg.inv(scaled)
            _, logdet = np.linalg.slogdet(scaled)
            for _ in range(20):
                x = rng.standard_normal(3) * 3
                diff = x - model.means[1]
                expected = -0.5 * (3 * np.log(2 * np.pi) + logdet + diff @ inv @ diff)
                assert model.log_density(1, x, tau) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("dim,tau", [(1, 1.0), (1, 0.5), (2, 1.3)])
    def test_density_integrates_to_one(self, dim, tau):
        rng = np.random.default_rng(31 + dim)
        cov = random_spd(dim, rng, 0.5)
        model = bb.GaussianClassModel.from_arrays(
            rng.standard_normal((1, dim)), cov, [1.0]
        )
        half = 8 * tau * np.sqrt(np.max(np.linalg.eigvalsh(cov)))
        n = 801 if dim == 1 else 301
        axes = [np.linspace(model.means[0][i] - half, model.means[0][i] + half, n)
                for i in range(dim)]
        if dim == 1:
            dens = np.exp([model.log_density(0, np.array([x]), tau) for x in axes[0]])
            total = np.trapezoid(dens, axes[0])
        else:
            xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
            dens = np.exp(model.log_density(0, pts, tau)).reshape(n, n)
            total = np.trapezoid(np.trapezoid(dens, axes[1], axis=1), axes[0])
        assert total == pytest.approx(1.0, abs=1e-4)


class TestSample:
    def test_concentrates_at_mean_for_tiny_tau(self):
        rng = np.random.default_rng(41)
        model = random_model(3, 5, rng, spd_cov=True)
        x = model.sample(2, 1e-12, np.random.default_rng(0))
        assert np.max(np.abs(x - model.means[2])) <= 1e-9

    def test_variance_matches_temperature(self):
        model = bb.GaussianClassModel.from_arrays([[0.0]], [[1.0]], [1.0])
        draws = model.sample(0, 2.0, np.random.default_rng(7), size=1_000_000)
        assert 3.96 <= float(np.var(draws)) <= 4.04

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(51)
        model = random_model(2, 4, rng, spd_cov=True)
        a = model.sample(1, 1.5, np.random.default_rng(99), size=10)
        b = model.sample(1, 1.5, np.random.default_rng(99), size=10)
        assert np.array_equal(a, b)


class TestClassify:
    def test_nearer_mean_wins(self):
        model = bb.GaussianClassModel.from_arrays(
            [[-1.0], [1.0]], [[1.0]], [0.5, 0.5]
        )
        assert model.bayes_classify(np.array([0.5]), 1.0) == 1

    def test_tie_breaks_to_lowest_index(self):
        model = bb.GaussianClassModel.from_arrays(
            np.zeros((3, 2)), np.eye(2), np.full(3, 1 / 3)
        )
        rng = np.random.default_rng(61)
        for _ in range(10):
            assert model.bayes_classify(rng.standard_normal(2), 1.0) == 0

    def test_matches_dense_posteriors(self):
        rng = np.random.default_rng(71)
        cov = random_spd(8, rng)
        priors = rng.dirichlet(np.ones(4))
        model = bb.GaussianClassModel.from_arrays(
            rng.standard_normal((4, 8)), cov, priors
        )
        tau = 1.4
        scaled = tau * tau * cov
        inv = np.linalg.inv(scaled)
        _, logdet = np.linalg.slogdet(scaled)
        pts = rng.standard_normal((1000, 8)) * 2
        scores = np.empty((1000, 4))
        for j in range(4):
            diff = pts - model.means[j]
            quad = np.einsum("ni,ij,nj->n", diff, inv, diff)
            scores[:, j] = np.log(priors[j]) - 0.5 * (
                8 * np.log(2 * np.pi) + logdet + quad
            )
        assert np.array_equal(model.bayes_classify(pts, tau), np.argmax(scores, axis=1))

    def test_invariant_to_common_prior_scale(self):
        rng = np.random.default_rng(81)
        weights = np.array([3.0, 1.0, 6.0])
        m1 = bb.GaussianClassModel.from_arrays(
            rng.standard_normal((3, 4)), np.eye(4), weights / weights.sum()
        )
        m2 = bb.GaussianClassModel.from_arrays(
            m1.means, np.eye(4), (5 * weights) / (5 * weights).sum()
        )
        pts = rng.standard_normal((200, 4))
        assert np.array_equal(m1.bayes_classify(pts, 1.0), m2.bayes_classify(pts, 1.0))


class TestClosedForm:
    def test_coincident_means_give_half(self):
        model = bb.GaussianClassModel.from_arrays(
            np.zeros((2, 3)), np.eye(3), [0.5, 0.5]
        )
        assert model.binary_closed_form(1.0) == pytest.approx(0.5, abs=1e-15)

    def test_orthogonal_unit_means(self, binary_symmetric):
        assert binary_symmetric.binary_closed_form(1.0) == pytest.approx(
            BINARY_ERR_SQRT2_TAU1, abs=1e-12
        )

    def test_log_tail_value(self, binary_symmetric):
        log_err = binary_symmetric.binary_closed_form_log(0.05)
        assert log_err == pytest.approx(LOG_BINARY_ERR_SQRT2_TAU005, rel=1e-12)

    def test_strictly_increasing_in_tau(self, binary_symmetric):
        taus = np.geomspace(0.05, 20.0, 100)
        errs = [binary_symmetric.binary_closed_form(t) for t in taus]
        assert all(a < b for a, b in zip(errs, errs[1:]))
        assert errs[0] < 1e-40  # -> 0 as tau -> 0+

    def test_requires_two_uniform_classes(self):
        rng = np.random.default_rng(91)
        with pytest.raises(ValueError, match="2 classes"):
            random_model(3, 2, rng).binary_closed_form(1.0)
        skewed = bb.GaussianClassModel.from_arrays(
            [[0.0], [1.0]], [[1.0]], [0.3, 0.7]
        )
        with pytest.raises(ValueError, match="uniform"):
            skewed.binary_closed_form(1.0)

    def test_gaussian_tail_helper(self):
        assert gaussian_tail(1.0) == pytest.approx(TAIL_AT_1, abs=1e-14)

    def test_empirical_error_matches(self, binary_symmetric):
        n = 100_000
        rng = np.random.default_rng(101)
        y = rng.integers(0, 2, size=n)
        mistakes = 0
        for j in (0, 1):
            pts = binary_symmetric.sample(j, 1.0, rng, size=int(np.sum(y == j)))
            mistakes += int(np.sum(binary_symmetric.bayes_classify(pts, 1.0) != j))
        err = mistakes / n
        exact = binary_symmetric.binary_closed_form(1.0)
        assert abs(err - exact) <= 3 * np.sqrt(exact * (1 - exact) / n)
