import numpy as np
import pytest
from scipy.stats import kurtosis

from sepcore import matcore
from sepcore.errors import IncompatibleParameters
from sepcore.generators import (
    Construction,
    CoreModel,
    GammaStd,
    Gaussian,
    SamplerSpec,
    StudentT,
    draw_data,
    haar_orthogonal,
    make_rank_r_core,
    parse_distribution,
    partial_isotropy_core,
    predicted_spikes,
    preset_core,
    preset_spectrum,
    random_core,
    rank_feasible,
    rank_r_core_model,
    sample_covariance,
    shrink_core,
    shrunk_model,
)
from sepcore.matcore import Shape

from conftest import random_spd


class TestRankFeasible:
    def test_square_rank_two_is_zero_case(self):
        f = rank_feasible(20, 20, 2)
        assert f.feasible and f.case == "zero"
        assert Construction.SQUARE2 in f.constructions

    def test_ladder_case(self):
        f = rank_feasible(3, 2, 2)
        assert f.feasible and f.case == "gcd-square"
        assert f.constructions == (Construction.LADDER2,)

    def test_orthoblock_case(self):
        f = rank_feasible(4, 2, 2)
        assert f.feasible and f.case == "gcd-square"
        # (4, 2) is also a k=1, m=2 ladder, so both constructions apply
        assert Construction.ORTHOBLOCK in f.constructions

    def test_strict_case_has_no_construction(self):
        f = rank_feasible(2, 3, 5)
        assert f.feasible and f.case == "strict"
        assert f.constructions == ()

    def test_infeasible(self):
        f = rank_feasible(5, 3, 2)
        assert not f.feasible and f.case is None

    def test_square_rank_one(self):
        f = rank_feasible(20, 20, 1)
        assert f.feasible and f.case == "gcd-square"
        assert f.constructions == (Construction.ORTHOBLOCK,)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            rank_feasible(0, 2, 1)


def block_columns(a, p1, p2):
    return [a[:, i].reshape(p1, p2, order="F") for i in range(a.shape[1])]


class TestMakeRankRCore:
    CASES = [
        (4, 4, 2, Construction.SQUARE2),
        (3, 2, 2, Construction.LADDER2),
        (6, 4, 2, Construction.LADDER2),
        (4, 2, 2, Construction.ORTHOBLOCK),
        (4, 2, 2, Construction.LADDER2),
        (6, 2, 3, Construction.ORTHOBLOCK),
        (20, 20, 1, Construction.ORTHOBLOCK),
        (2, 4, 2, Construction.ORTHOBLOCK),  # transposed layout
        (2, 3, 2, Construction.LADDER2),     # transposed layout
    ]

    @pytest.mark.parametrize("p1,p2,r,construction", CASES)
    def test_partial_trace_identities(self, rng, p1, p2, r, construction):
        a = make_rank_r_core(p1, p2, r, construction, rng)
        assert a.shape == (p1 * p2, r)
        blocks = block_columns(a, p1, p2)
        sum1 = sum(b @ b.T for b in blocks)
        sum2 = sum(b.T @ b for b in blocks)
        assert np.allclose(sum1, p2 * np.eye(p1), atol=1e-9)
        assert np.allclose(sum2, p1 * np.eye(p2), atol=1e-9)
        assert np.linalg.matrix_rank(a) == r

    def test_orthoblock_trace(self, rng):
        a = make_rank_r_core(4, 2, 2, Construction.ORTHOBLOCK, rng)
        assert np.trace(a @ a.T) == pytest.approx(8.0, abs=1e-10)

    def test_ladder_columns_orthogonal(self, rng):
        a = make_rank_r_core(3, 2, 2, Construction.LADDER2, rng)
        assert abs(a[:, 0] @ a[:, 1]) < 1e-9

    def test_square_keeps_full_rank_across_seeds(self):
        # the inner rotation is rejected near +-I, which would collapse rank
        for seed in range(25):
            a = make_rank_r_core(3, 3, 2, Construction.SQUARE2, np.random.default_rng(seed))
            gram = a.T @ a
            assert np.linalg.det(gram) > 1e-6

    def test_reproducible_given_seed(self):
        a1 = make_rank_r_core(4, 2, 2, Construction.ORTHOBLOCK, np.random.default_rng(9))
        a2 = make_rank_r_core(4, 2, 2, Construction.ORTHOBLOCK, np.random.default_rng(9))
        assert np.array_equal(a1, a2)

    def test_incompatible_parameters(self, rng):
        with pytest.raises(IncompatibleParameters):
            make_rank_r_core(4, 3, 2, Construction.ORTHOBLOCK, rng)
        with pytest.raises(IncompatibleParameters):
            make_rank_r_core(4, 2, 2, Construction.SQUARE2, rng)
        with pytest.raises(IncompatibleParameters):
            make_rank_r_core(5, 3, 2, Construction.LADDER2, rng)


class TestPredictedSpikes:
    def test_orthoblock_closed_form(self, rng):
        a = make_rank_r_core(4, 2, 2, Construction.ORTHOBLOCK, rng)
        spikes = predicted_spikes(a, 0.5, Construction.ORTHOBLOCK)
        assert np.allclose(spikes[:2], 2.5)
        assert np.allclose(spikes[2:], 0.5)

    def test_lambda_one_gives_identity_spectrum(self, rng):
        a = make_rank_r_core(3, 2, 2, Construction.LADDER2, rng)
        assert np.allclose(predicted_spikes(a, 1.0, Construction.LADDER2), np.ones(6))

    @pytest.mark.parametrize("p1,p2,r,construction", TestMakeRankRCore.CASES)
    def test_matches_eigendecomposition(self, rng, p1, p2, r, construction):
        a = make_rank_r_core(p1, p2, r, construction, rng)
        lam = 0.35
        predicted = predicted_spikes(a, lam, construction)
        observed = np.linalg.eigvalsh(partial_isotropy_core(a, lam))[::-1]
        assert np.allclose(predicted, observed, atol=1e-8)

    def test_model_carries_spikes(self, rng):
        model = rank_r_core_model(4, 2, 2, 0.4, Construction.ORTHOBLOCK, rng)
        observed = np.linalg.eigvalsh(model.matrix)[::-1]
        assert np.allclose(model.predicted_spikes, observed, atol=1e-8)
        assert observed[0] >= 1.0 - 1e-8


class TestRearrangedSpectrumOfOrthoblockCores:
    @pytest.mark.parametrize("p1,p2,r,lam", [(4, 2, 2, 0.3), (6, 3, 2, 0.5), (6, 2, 3, 0.25)])
    def test_two_level_singular_values(self, rng, p1, p2, r, lam):
        a = make_rank_r_core(p1, p2, r, Construction.ORTHOBLOCK, rng)
        c = partial_isotropy_core(a, lam)
        sigma = matcore.singular_values(matcore.rearrange(c, Shape(p1, p2)))
        p = p1 * p2
        cutoff = min(p1, p2) ** 2
        assert sigma[0] == pytest.approx(np.sqrt(p), abs=1e-8)
        assert np.allclose(sigma[1:cutoff], (1 - lam) * np.sqrt(p), atol=1e-8)


class TestRandomCore:
    def test_equal_spectrum_gives_identity(self, rng):
        shape = Shape(2, 3)
        c = random_core(shape, np.full(6, 2.5), rng)
        assert np.allclose(c, np.eye(6), atol=1e-7)

    def test_core_constraints_and_trace(self, rng):
        shape = Shape(4, 2)
        c = random_core(shape, rng.uniform(0.5, 3.0, size=8), rng)
        assert np.trace(c) == pytest.approx(8.0, rel=1e-7)
        assert np.max(np.abs(matcore.partial_trace_1(c, shape) - shape.p2 * np.eye(4))) < 1e-7
        assert np.max(np.abs(matcore.partial_trace_2(c, shape) - shape.p1 * np.eye(2))) < 1e-7

    def test_rejects_bad_hint(self, rng):
        with pytest.raises(ValueError):
            random_core(Shape(2, 2), np.array([1.0, -1.0, 1.0, 1.0]), rng)

    @pytest.mark.slow
    def test_spiked_preset_top_eigenvalue(self):
        shape = Shape(16, 32)
        model = preset_core("c1", shape, np.random.default_rng(0))
        top = np.linalg.eigvalsh(model.matrix)[-1]
        assert top == pytest.approx(3.936, abs=0.3)

    def test_preset_spectra(self):
        s1 = preset_spectrum("c1", 8)
        assert list(s1) == [10.0, 4.0, 4.0, 4.0, 1.0, 1.0, 1.0, 1.0]
        s2 = preset_spectrum("c2", 8)
        assert list(s2) == [4.0, 3.0, 3.0, 3.0, 2.0, 2.0, 2.0, 2.0]
        with pytest.raises(ValueError):
            preset_spectrum("c3", 8)


class TestShrinkCore:
    def test_endpoints(self, rng):
        shape = Shape(2, 3)
        c = random_core(shape, rng.uniform(0.5, 2.0, size=6), rng)
        assert np.allclose(shrink_core(c, 0.0), np.eye(6))
        assert np.array_equal(shrink_core(c, 1.0), c)

    def test_partial_traces_preserved(self, rng):
        shape = Shape(2, 3)
        c = random_core(shape, rng.uniform(0.5, 2.0, size=6), rng)
        w = rng.uniform()
        cw = shrink_core(c, w)
        assert np.allclose(matcore.partial_trace_1(cw, shape), shape.p2 * np.eye(2), atol=1e-7)
        assert np.allclose(matcore.partial_trace_2(cw, shape), shape.p1 * np.eye(3), atol=1e-7)

    def test_shrunk_model_description(self, rng):
        model = preset_core("c2", Shape(2, 2), rng)
        assert "w=0.4" in shrunk_model(model, 0.4).description

    def test_rejects_out_of_range(self, rng):
        with pytest.raises(ValueError):
            shrink_core(np.eye(4), 1.5)


class TestCoreModelValidation:
    def test_rejects_non_core(self):
        with pytest.raises(ValueError):
            CoreModel(Shape(2, 2), np.diag([2.0, 1.0, 1.0, 1.0]), "bad")


class TestSamplers:
    def test_reproducible(self):
        spec = SamplerSpec(Gaussian(), seed=42)
        root = np.eye(6)
        s1 = sample_covariance(10, root, spec)
        s2 = sample_covariance(10, root, spec)
        assert np.array_equal(s1, s2)

    def test_requires_seed(self):
        with pytest.raises(ValueError):
            sample_covariance(10, np.eye(4), SamplerSpec(Gaussian()))

    def test_law_of_large_numbers(self):
        s = sample_covariance(20000, np.eye(4), SamplerSpec(Gaussian(), seed=7))
        assert np.max(np.abs(s - np.eye(4))) < 0.1

    def test_mean_matches_target(self, rng):
        # E[S] = Sigma checked against the Monte Carlo spread of 500 replicates
        sigma = random_spd(rng, 4, 0.5)
        root = matcore.sym_sqrt(sigma)
        reps = np.array([sample_covariance(8, root, SamplerSpec(Gaussian(), seed=1000 + j)) for j in range(500)])
        mean = reps.mean(axis=0)
        se = reps.std(axis=0, ddof=1) / np.sqrt(500)
        assert np.all(np.abs(mean - sigma) <= 3.0 * se + 1e-12)

    def test_gamma_standardized_moments(self):
        rng = np.random.default_rng(11)
        draws = draw_data(1_000_000, 1, GammaStd(4.0, 2.0), rng).ravel()
        assert abs(draws.mean()) < 0.01
        assert draws.var() == pytest.approx(1.0, abs=0.01)
        # excess kurtosis of Gamma(alpha) is 6/alpha
        assert kurtosis(draws, fisher=False) == pytest.approx(3 + 6 / 4.0, abs=0.1)

    def test_student_t_raw_variance(self):
        rng = np.random.default_rng(13)
        draws = draw_data(400_000, 1, StudentT(6.0), rng).ravel()
        assert draws.var() == pytest.approx(6.0 / 4.0, abs=0.05)

    def test_centering(self):
        spec = SamplerSpec(Gaussian(), seed=3, centered=True)
        s = sample_covariance(50, np.eye(3), spec)
        assert s.shape == (3, 3)
        with pytest.raises(ValueError):
            sample_covariance(1, np.eye(3), SamplerSpec(Gaussian(), seed=3, centered=True))

    def test_parse_distribution(self):
        assert parse_distribution("gaussian") == Gaussian()
        assert parse_distribution("gamma:4,2") == GammaStd(4.0, 2.0)
        assert parse_distribution("t:6") == StudentT(6.0)
        with pytest.raises(ValueError):
            parse_distribution("cauchy")
        assert parse_distribution("gamma:4,2").name == "gamma:4,2"


class TestHaar:
    def test_dim_one_is_sign(self, rng):
        vals = {float(haar_orthogonal(1, np.random.default_rng(s))[0, 0]) for s in range(20)}
        assert vals <= {1.0, -1.0}
        assert len(vals) == 2

    def test_orthogonality(self, rng):
        for dim in (2, 5, 9):
            o = haar_orthogonal(dim, rng)
            assert np.max(np.abs(o.T @ o - np.eye(dim))) < 1e-10

    def test_first_column_mean_is_zero(self):
        dim, reps = 3, 10_000
        rng = np.random.default_rng(23)
        acc = np.zeros(dim)
        for _ in range(reps):
            acc += haar_orthogonal(dim, rng)[:, 0]
        mean = acc / reps
        # column entries have variance 1/dim
        assert np.all(np.abs(mean) < 4.0 / np.sqrt(dim * reps))
