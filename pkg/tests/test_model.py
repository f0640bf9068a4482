"""Model core: composition, coefficient recursion, hierarchical prior."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sectorshare.errors import ValidationError
from sectorshare.model import (
    ParameterState,
    PriorConfig,
    compose_shares,
    invlogit,
    latent_curve,
    log_prior,
    logit,
    reconstruct_betas,
)

from conftest import reconstruct_naive


class TestComposeShares:
    def test_zero_latents(self):
        phi1, phi2, phi3 = compose_shares(0.0, 0.0)
        assert phi1 == pytest.approx(0.5, abs=1e-12)
        assert phi2 == pytest.approx(0.25, abs=1e-12)
        assert phi3 == pytest.approx(0.25, abs=1e-12)

    def test_known_shares(self):
        phi1, phi2, phi3 = compose_shares(logit(0.62), logit(0.7))
        assert phi1 == pytest.approx(0.62, abs=1e-9)
        assert phi2 == pytest.approx(0.266, abs=1e-9)
        assert phi3 == pytest.approx(0.114, abs=1e-9)

    def test_saturation_keeps_open_interval(self):
        for psi1 in (-800.0, 800.0):
            for psi2 in (-800.0, 800.0):
                phi = compose_shares(psi1, psi2)
                for p in phi:
                    assert 0.0 < p < 1.0
                assert sum(phi) == pytest.approx(1.0, abs=1e-12)

    @given(
        st.floats(-500, 500, allow_nan=False),
        st.floats(-500, 500, allow_nan=False),
    )
    @settings(max_examples=300, deadline=None)
    def test_closure_property(self, psi1, psi2):
        phi1, phi2, phi3 = compose_shares(psi1, psi2)
        assert 0.0 < phi1 < 1.0 and 0.0 < phi2 < 1.0 and 0.0 < phi3 < 1.0
        assert abs(phi1 + phi2 + phi3 - 1.0) < 1e-12

    def test_vectorized(self):
        psi = np.linspace(-5, 5, 11)
        phi1, phi2, phi3 = compose_shares(psi, -psi)
        np.testing.assert_allclose(phi1 + phi2 + phi3, 1.0, atol=1e-12)

    def test_invlogit_logit_roundtrip(self):
        p = np.array([0.01, 0.3, 0.5, 0.9, 0.999])
        np.testing.assert_allclose(invlogit(logit(p)), p, atol=1e-12)

    def test_logit_domain_errors(self):
        with pytest.raises(ValidationError):
            logit(np.array([0.0]))
        with pytest.raises(ValidationError):
            logit(np.array([1.0]))


class TestReconstructBetas:
    def test_zero_differences_give_constant(self):
        betas = reconstruct_betas(1.3, np.zeros(6), 3)
        np.testing.assert_array_equal(betas, np.full(7, 1.3))

    def test_small_hand_case(self):
        # reference in the middle: walk left subtracts, right adds
        betas = reconstruct_betas(1.0, np.array([0.5, 0.8]), 1)
        np.testing.assert_allclose(betas, [0.5, 1.0, 1.8])

    def test_two_coefficients(self):
        betas = reconstruct_betas(0.7, np.array([0.2]), 0)
        np.testing.assert_allclose(betas, [0.7, 0.9])

    def test_matches_naive_recursion_exactly(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            K = int(rng.integers(2, 16))
            k_star = int(rng.integers(0, K))
            alpha = float(rng.normal())
            deltas = rng.normal(size=K - 1)
            mine = reconstruct_betas(alpha, deltas, k_star)
            ref = reconstruct_naive(alpha, deltas, k_star)
            np.testing.assert_array_equal(mine, ref)

    def test_diff_inverts_exactly_on_dyadic_grid(self):
        # values on a dyadic grid make the additions exact, so first
        # differencing must recover the deltas bit for bit
        rng = np.random.default_rng(7)
        scale = 2.0**-20
        for _ in range(1000):
            K = int(rng.integers(2, 16))
            k_star = int(rng.integers(0, K))
            alpha = float(rng.integers(-(2**22), 2**22)) * scale
            deltas = rng.integers(-(2**22), 2**22, size=K - 1) * scale
            betas = reconstruct_betas(alpha, deltas, k_star)
            np.testing.assert_array_equal(np.diff(betas), deltas)
            assert betas[k_star] == alpha

    def test_bad_reference_errors(self):
        with pytest.raises(ValidationError):
            reconstruct_betas(0.0, np.zeros(3), 4)


class TestLatentCurve:
    def test_constant_coefficients_reproduce_constant(self):
        from sectorshare.basis import build_basis_set

        bs = build_basis_set(2015.0, window=(1990.0, 2025.0))
        psi = latent_curve(np.full(bs.n_basis, 2.2), bs.B_grid)
        np.testing.assert_allclose(psi, 2.2, atol=1e-12)

    def test_one_hot_extracts_column(self):
        B = np.random.default_rng(0).uniform(size=(8, 5))
        for k in range(5):
            betas = np.zeros(5)
            betas[k] = 1.0
            np.testing.assert_array_equal(latent_curve(betas, B), B[:, k])

    def test_matches_double_loop(self):
        rng = np.random.default_rng(5)
        B = rng.uniform(size=(6, 4))
        betas = rng.normal(size=4)
        expected = np.array(
            [sum(B[i, k] * betas[k] for k in range(4)) for i in range(6)]
        )
        np.testing.assert_allclose(latent_curve(betas, B), expected, atol=1e-12)

    def test_shape_mismatch_errors(self):
        with pytest.raises(ValidationError):
            latent_curve(np.zeros(3), np.zeros((5, 4)))


def _tiny_state(M=2, sd_delta=None, delta=None, rho_id=True):
    """One country, one region, one difference per country."""
    C, R, H = 1, 1, 1
    state = ParameterState(
        alpha=np.zeros((C, M, 2)),
        delta=np.zeros((C, 2, H, M)) if delta is None else delta,
        theta_r=np.zeros((R, M, 2)),
        theta_w=np.zeros((M, 2)),
        sd_alpha=np.array([1.0, 1.0]),
        sd_theta=np.array([1.0, 1.0]),
        sd_delta=np.full((M, 2), 1.0) if sd_delta is None else sd_delta,
        country_region=np.zeros(C, dtype=int),
        n_diff=np.ones(C, dtype=int),
    )
    rho = np.stack([np.eye(M), np.eye(M)]) if rho_id else None
    return state, rho


def _univariate_expected(state, prior):
    """Independent-methods expected log prior built from scipy pieces."""
    C, M, _ = state.alpha.shape
    lp = 0.0
    for s in range(2):
        for c in range(C):
            r = state.country_region[c]
            lp += stats.norm.logpdf(
                state.alpha[c, :, s], state.theta_r[r, :, s], state.sd_alpha[s]
            ).sum()
        lp += stats.norm.logpdf(
            state.theta_r[:, :, s], state.theta_w[None, :, s], state.sd_theta[s]
        ).sum()
        lp += stats.norm.logpdf(state.theta_w[:, s], 0.0, prior.theta_w_sd).sum()
        spreads = np.concatenate(
            [[state.sd_alpha[s]], [state.sd_theta[s]], state.sd_delta[:, s]]
        )
        lp += stats.halfcauchy.logpdf(spreads, scale=prior.cauchy_scale).sum()
        for c in range(C):
            for h in range(state.n_diff[c]):
                lp += stats.norm.logpdf(
                    state.delta[c, s, h, :], 0.0, state.sd_delta[:, s]
                ).sum()
    return float(lp)


class TestLogPrior:
    def test_identity_correlation_reduces_to_univariate(self):
        rng = np.random.default_rng(1)
        C, R, M, H = 3, 2, 4, 5
        state = ParameterState(
            alpha=rng.normal(size=(C, M, 2)),
            delta=rng.normal(scale=0.3, size=(C, 2, H, M)),
            theta_r=rng.normal(size=(R, M, 2)),
            theta_w=rng.normal(size=(M, 2)),
            sd_alpha=rng.uniform(0.3, 1.5, 2),
            sd_theta=rng.uniform(0.3, 1.5, 2),
            sd_delta=rng.uniform(0.1, 0.8, (M, 2)),
            country_region=np.array([0, 1, 1]),
            n_diff=np.array([5, 4, 3]),
        )
        prior = PriorConfig()
        rho = np.stack([np.eye(M), np.eye(M)])
        assert log_prior(state, rho, prior) == pytest.approx(
            _univariate_expected(state, prior), abs=1e-9
        )

    def test_correlated_pair_hand_value(self):
        # a centered bivariate term with unit spreads and correlation 0.5
        # contributes exactly -log(2 pi) - log(0.75) / 2
        state, _ = _tiny_state(M=2)
        prior = PriorConfig()
        rho_half = np.stack([np.array([[1.0, 0.5], [0.5, 1.0]]), np.eye(2)])
        rho_id = np.stack([np.eye(2), np.eye(2)])
        lp_half = log_prior(state, rho_half, prior)
        lp_id = log_prior(state, rho_id, prior)
        # at delta = 0 only the normalization differs
        assert lp_half - lp_id == pytest.approx(-0.5 * np.log(0.75), abs=1e-12)
        term_id = 2 * stats.norm.logpdf(0.0)  # the sector-1 term at identity
        expected_term = -np.log(2 * np.pi) - 0.5 * np.log(0.75)
        assert (lp_half - (lp_id - term_id)) == pytest.approx(
            expected_term, abs=1e-12
        )

    def test_doubling_spread_shifts_by_m_log_two(self):
        state, rho = _tiny_state(M=3)
        prior = PriorConfig()
        lp1 = log_prior(state, rho, prior)
        state2 = state.copy()
        state2.sd_delta = state.sd_delta * 2.0
        lp2 = log_prior(state2, rho, prior)
        # remove the half-Cauchy change to isolate the density terms
        hc_change = 2 * (
            stats.halfcauchy.logpdf(2.0).sum() * 3 - stats.halfcauchy.logpdf(1.0) * 3
        )
        n_vec_terms = 2  # one per sector (C=1, H=1)
        assert (lp2 - lp1) - hc_change == pytest.approx(
            -n_vec_terms * 3 * np.log(2.0), abs=1e-10
        )

    def test_method_permutation_invariance(self):
        rng = np.random.default_rng(9)
        C, R, M, H = 2, 1, 4, 3
        state = ParameterState(
            alpha=rng.normal(size=(C, M, 2)),
            delta=rng.normal(scale=0.4, size=(C, 2, H, M)),
            theta_r=rng.normal(size=(R, M, 2)),
            theta_w=rng.normal(size=(M, 2)),
            sd_alpha=rng.uniform(0.5, 1.2, 2),
            sd_theta=rng.uniform(0.5, 1.2, 2),
            sd_delta=rng.uniform(0.2, 0.9, (M, 2)),
            country_region=np.zeros(C, dtype=int),
            n_diff=np.array([3, 2]),
        )
        base = rng.uniform(-0.6, 0.6, size=(M, M))
        rho_s = np.eye(M) + 0.3 * (base + base.T) / 2
        np.fill_diagonal(rho_s, 1.0)
        rho = np.stack([rho_s, np.eye(M)])
        prior = PriorConfig()
        perm = np.array([2, 0, 3, 1])
        permuted = ParameterState(
            alpha=state.alpha[:, perm, :],
            delta=state.delta[:, :, :, perm],
            theta_r=state.theta_r[:, perm, :],
            theta_w=state.theta_w[perm, :],
            sd_alpha=state.sd_alpha,
            sd_theta=state.sd_theta,
            sd_delta=state.sd_delta[perm, :],
            country_region=state.country_region,
            n_diff=state.n_diff,
        )
        rho_perm = np.stack([rho[0][np.ix_(perm, perm)], rho[1][np.ix_(perm, perm)]])
        assert log_prior(permuted, rho_perm, prior) == pytest.approx(
            log_prior(state, rho, prior), abs=1e-12
        )

    def test_variance_mode_changes_only_spread_priors(self):
        state, rho = _tiny_state(M=2)
        lp_sd = log_prior(state, rho, PriorConfig(cauchy_on="sd"))
        lp_var = log_prior(state, rho, PriorConfig(cauchy_on="variance"))
        # spreads are all 1: HC(1) vs HC(1) + log 2, six spread parameters
        # per sector pair: sd_alpha, sd_theta, and M sd_delta entries
        n_spread = 2 * (2 + 2)
        expected = n_spread * np.log(2.0)
        assert lp_var - lp_sd == pytest.approx(expected, abs=1e-12)

    def test_rho_shape_validated(self):
        state, _ = _tiny_state(M=2)
        with pytest.raises(ValidationError, match="rho"):
            log_prior(state, np.eye(2), PriorConfig())


class TestParameterStateValidation:
    def test_negative_spread_rejected(self):
        with pytest.raises(ValidationError, match="positive"):
            ParameterState(
                alpha=np.zeros((1, 2, 2)),
                delta=np.zeros((1, 2, 1, 2)),
                theta_r=np.zeros((1, 2, 2)),
                theta_w=np.zeros((2, 2)),
                sd_alpha=np.array([1.0, -1.0]),
                sd_theta=np.ones(2),
                sd_delta=np.ones((2, 2)),
                country_region=np.zeros(1, dtype=int),
                n_diff=np.ones(1, dtype=int),
            )

    def test_region_index_out_of_range_rejected(self):
        with pytest.raises(ValidationError, match="country_region"):
            ParameterState(
                alpha=np.zeros((1, 2, 2)),
                delta=np.zeros((1, 2, 1, 2)),
                theta_r=np.zeros((1, 2, 2)),
                theta_w=np.zeros((2, 2)),
                sd_alpha=np.ones(2),
                sd_theta=np.ones(2),
                sd_delta=np.ones((2, 2)),
                country_region=np.array([3]),
                n_diff=np.ones(1, dtype=int),
            )

    def test_n_diff_beyond_padding_rejected(self):
        with pytest.raises(ValidationError, match="n_diff"):
            ParameterState(
                alpha=np.zeros((1, 2, 2)),
                delta=np.zeros((1, 2, 2, 2)),
                theta_r=np.zeros((1, 2, 2)),
                theta_w=np.zeros((2, 2)),
                sd_alpha=np.ones(2),
                sd_theta=np.ones(2),
                sd_delta=np.ones((2, 2)),
                country_region=np.zeros(1, dtype=int),
                n_diff=np.array([5]),
            )
