import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpb import specfun
from fracpb.errors import DomainError, NonConvergenceError, PoleError
from fracpb.specfun import MlParams, alpha_exp, gamma, matrix_ml, ml_series, mittag_leffler


def ml_oracle(a, b, z, dps=80):
    """Plain Taylor summation in extended precision."""
    with mp.workdps(dps):
        a, b, z = mp.mpf(a), mp.mpf(b), mp.mpf(z)
        total, k = mp.mpf(0), 0
        while True:
            term = z**k / mp.gamma(a * k + b)
            total += term
            k += 1
            if k > 5 and abs(term) < mp.mpf(10) ** -40 * max(1, abs(total)) and abs(z) ** k / mp.gamma(a * k + b) < 1:
                return float(total)


def expm_oracle(A, t, dps=40):
    with mp.workdps(dps):
        return np.array(mp.expm(mp.matrix(A.tolist()) * t).tolist(), dtype=float)


class TestGamma:
    def test_values(self):
        assert gamma(1) == 1
        assert gamma(5) == 24
        assert gamma(0.5) == pytest.approx(float(mp.sqrt(mp.pi)), rel=1e-15)

    def test_poles(self):
        for x in (0, -1, -7):
            with pytest.raises(PoleError):
                gamma(x)
        assert specfun.rgamma(-3) == 0.0

    def test_overflow(self):
        with pytest.raises(OverflowError):
            gamma(200)

    def test_accuracy(self):
        for x in np.linspace(0.1, 50, 97):
            assert gamma(x) == pytest.approx(float(mp.gamma(mp.mpf(x))), rel=1e-13)

    @given(st.floats(0.1, 30))
    def test_recurrence(self, x):
        assert gamma(x + 1) == pytest.approx(x * gamma(x), rel=1e-12)

    def test_ratio_past_overflow(self):
        assert specfun.gamma_ratio(200.5, 200.0) == pytest.approx(float(mp.gamma(200.5) / mp.gamma(200)), rel=1e-12)


class TestMittagLeffler:
    def test_exp(self):
        assert mittag_leffler(MlParams(1, 1), 1) == pytest.approx(math.e, rel=1e-12)

    def test_zero_argument(self):
        assert mittag_leffler(MlParams(0.5, 0.5), 0) == pytest.approx(0.5641895835477563, rel=1e-15)

    def test_extended_precision_oracle(self):
        # 200-term brute force at 50 digits
        with mp.workdps(50):
            ref = float(mp.fsum(mp.mpf(1) ** k / mp.gamma(mp.mpf(0.5) * k + 1) for k in range(200)))
        assert mittag_leffler(MlParams(0.5, 1), 1) == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize("a", [0.3, 0.5, 0.7, 1.0])
    @pytest.mark.parametrize("b", [0.5, 1.0])
    def test_accuracy_up_to_twenty(self, a, b):
        # |z| <= 20: error within 1e-10 of max(1, |E|) unless cancellation is flagged
        for z in np.linspace(-20, 20, 21):
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                try:
                    value = mittag_leffler(MlParams(a, b), z)
                except (NonConvergenceError, OverflowError):
                    continue
            if caught:
                assert issubclass(caught[0].category, RuntimeWarning)
                continue
            ref = ml_oracle(a, b, z)
            assert abs(value - ref) <= 1e-10 * max(1.0, abs(ref)), (z, value, ref)

    def test_cancellation_warns(self):
        with pytest.warns(RuntimeWarning, match="cancellation"):
            mittag_leffler(MlParams(1, 1), -20)

    @pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
    def test_tail_bound_covers_remainder(self, a):
        for z in np.linspace(-5, 5, 11):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                # alpha = 0.3 at |z| = 5 needs more than the default 1000 terms
                s = ml_series(MlParams(a, a), z, max_terms=5000)
            # remainder measured by a 10x longer summation in extended precision
            with mp.workdps(60):
                rem = abs(
                    mp.fsum(mp.mpf(z) ** k / mp.gamma(mp.mpf(a) * k + a) for k in range(s.terms, 10 * s.terms))
                )
            assert float(rem) <= s.tail_bound * (1 + 1e-12), z

    def test_term_cap(self):
        with pytest.raises(NonConvergenceError):
            mittag_leffler(MlParams(0.5, 1), 10.0, max_terms=20)

    def test_params_validated(self):
        with pytest.raises(DomainError):
            MlParams(0, 1)
        with pytest.raises(DomainError):
            MlParams(2.5, 1)
        with pytest.raises(DomainError):
            MlParams(0.5, 0)


class TestMatrixFunctions:
    def test_zero_matrix(self):
        assert matrix_ml(MlParams(0.5, 0.7), np.zeros((3, 3))) == pytest.approx(np.eye(3) / math.gamma(0.7))

    def test_diagonal_exp(self):
        M = np.diag([0.3, -1.2])
        assert matrix_ml(MlParams(1, 1), M) == pytest.approx(np.diag(np.exp([0.3, -1.2])), rel=1e-12)

    def test_nilpotent(self):
        M = np.array([[0.0, 1.0], [0.0, 0.0]])
        expected = np.array([[1 / math.gamma(0.5), 1.0], [0.0, 1 / math.gamma(0.5)]])
        assert matrix_ml(MlParams(0.5, 0.5), M) == pytest.approx(expected, rel=1e-14)
        assert alpha_exp(0.5, M, 1.0) == pytest.approx(expected, rel=1e-14)

    def test_alpha_one_is_expm(self):
        A = np.array([[0.4, -1.1], [0.7, 0.2]])
        assert alpha_exp(1.0, A, 0.8) == pytest.approx(expm_oracle(A, 0.8), rel=1e-12)

    def test_zero_generator(self):
        a, t = 0.4, 0.6
        assert alpha_exp(a, np.zeros((2, 2)), t) == pytest.approx(t ** (a - 1) / math.gamma(a) * np.eye(2))

    def test_singular_time_rejected(self):
        with pytest.raises(DomainError):
            alpha_exp(0.5, np.eye(2), 0.0)

    def test_matches_scaled_matrix_ml(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            A = rng.uniform(-1, 1, (3, 3))
            A *= 2 / np.max(np.abs(A))
            a = rng.choice([0.3, 0.5, 0.7, 0.9])
            t = rng.uniform(1e-3, 2)
            lhs = alpha_exp(a, A, t)
            rhs = t ** (a - 1) * matrix_ml(MlParams(a, a), A * t**a)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1, np.max(np.abs(rhs)))

    def test_non_square_rejected(self):
        with pytest.raises(DomainError):
            matrix_ml(MlParams(1, 1), np.ones((2, 3)))

    def test_gamma_hook_restored(self):
        with specfun.use_gamma(lambda x: 1.0):
            assert gamma(5) == 1.0
        assert gamma(5) == 24
