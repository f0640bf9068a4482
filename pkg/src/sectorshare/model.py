"""Latent-curve model core: composition, coefficient recursion, priors.

The supply share of one contraceptive method splits across three
sectors. Two latent curves on the logit scale drive the split: the
first gives the public-sector share directly, the second gives the
private-medical share of the remainder. The third sector is the
complement, so the three shares always compose to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ValidationError
from .kernels import SHARE_CLAMP

LOG_2PI = float(np.log(2.0 * np.pi))


def invlogit(x: np.ndarray) -> np.ndarray:
    """Numerically saturating inverse logit, clamped inside (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return np.clip(out, SHARE_CLAMP, 1.0 - SHARE_CLAMP)


def logit(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValidationError("logit requires values strictly inside (0, 1)")
    return np.log(p) - np.log1p(-p)


def compose_shares(psi1, psi2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map the two latent values to the three sector shares.

    Returns ``(phi1, phi2, phi3)`` where ``phi1`` is the public share,
    ``phi2`` the private-medical share of the remainder times the
    remainder, and ``phi3`` the complement. Each share is strictly
    inside (0, 1) and the triple sums to 1 within floating-point error
    for any finite inputs.
    """
    g1 = invlogit(psi1)
    g2 = invlogit(psi2)
    phi1 = g1
    phi2 = (1.0 - g1) * g2
    phi3 = (1.0 - g1) * (1.0 - g2)
    return phi1, phi2, phi3


def reconstruct_betas(alpha: float, deltas: np.ndarray, k_star: int) -> np.ndarray:
    """Spline coefficients from an anchored intercept and differences.

    ``deltas[h]`` is ``beta[h+1] - beta[h]``. The coefficient at
    ``k_star`` equals ``alpha``; the rest follow by walking the
    differences outward in both directions.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.ndim != 1:
        raise ValidationError("deltas must be one dimensional")
    K = len(deltas) + 1
    if not 0 <= k_star < K:
        raise ValidationError(f"reference index {k_star} outside [0, {K})")
    betas = np.empty(K)
    betas[k_star] = alpha
    for k in range(k_star - 1, -1, -1):
        betas[k] = betas[k + 1] - deltas[k]
    for k in range(k_star + 1, K):
        betas[k] = betas[k - 1] + deltas[k - 1]
    return betas


def latent_curve(betas: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Latent curve values ``B @ betas`` at the rows of ``B``."""
    betas = np.asarray(betas, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[1] != len(betas):
        raise ValidationError(
            f"basis matrix of shape {B.shape} does not match {len(betas)} coefficients"
        )
    return B @ betas


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the hierarchical prior.

    ``theta_w_sd`` is the standard deviation of the world-level means.
    ``cauchy_scale`` scales the half-Cauchy priors on the spread
    parameters; ``cauchy_on`` selects whether that prior sits on the
    standard deviation ("sd") or on the variance ("variance").
    """

    theta_w_sd: float = 10.0
    cauchy_scale: float = 1.0
    cauchy_on: str = "sd"

    def __post_init__(self):
        if self.theta_w_sd <= 0:
            raise ValidationError("theta_w_sd must be positive")
        if self.cauchy_scale <= 0:
            raise ValidationError("cauchy_scale must be positive")
        if self.cauchy_on not in ("sd", "variance"):
            raise ValidationError('cauchy_on must be "sd" or "variance"')


@dataclass
class ParameterState:
    """One full set of model parameters.

    Shapes: ``alpha`` (C, M, 2), ``delta`` (C, 2, Hmax, M) with only
    ``delta[c, :, :n_diff[c], :]`` meaningful, ``theta_r`` (R, M, 2),
    ``theta_w`` (M, 2), spreads ``sd_alpha`` (2,), ``sd_theta`` (2,),
    ``sd_delta`` (M, 2). ``country_region`` maps each country to its
    region; ``n_diff`` gives each country's difference count.
    """

    alpha: np.ndarray
    delta: np.ndarray
    theta_r: np.ndarray
    theta_w: np.ndarray
    sd_alpha: np.ndarray
    sd_theta: np.ndarray
    sd_delta: np.ndarray
    country_region: np.ndarray
    n_diff: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.delta = np.asarray(self.delta, dtype=np.float64)
        self.theta_r = np.asarray(self.theta_r, dtype=np.float64)
        self.theta_w = np.asarray(self.theta_w, dtype=np.float64)
        self.sd_alpha = np.asarray(self.sd_alpha, dtype=np.float64)
        self.sd_theta = np.asarray(self.sd_theta, dtype=np.float64)
        self.sd_delta = np.asarray(self.sd_delta, dtype=np.float64)
        self.country_region = np.asarray(self.country_region, dtype=np.int64)
        self.n_diff = np.asarray(self.n_diff, dtype=np.int64)
        C, M, two = self.alpha.shape
        if two != 2:
            raise ValidationError("alpha must have a trailing axis of size 2")
        if self.delta.shape[0] != C or self.delta.shape[1] != 2 or self.delta.shape[3] != M:
            raise ValidationError(f"delta shape {self.delta.shape} inconsistent with alpha")
        R = self.theta_r.shape[0]
        if self.theta_r.shape != (R, M, 2):
            raise ValidationError("theta_r must have shape (R, M, 2)")
        if self.theta_w.shape != (M, 2):
            raise ValidationError("theta_w must have shape (M, 2)")
        if self.sd_alpha.shape != (2,) or self.sd_theta.shape != (2,):
            raise ValidationError("sd_alpha and sd_theta must have shape (2,)")
        if self.sd_delta.shape != (M, 2):
            raise ValidationError("sd_delta must have shape (M, 2)")
        if self.country_region.shape != (C,):
            raise ValidationError("country_region must have shape (C,)")
        if np.any(self.country_region < 0) or np.any(self.country_region >= R):
            raise ValidationError("country_region entries outside [0, R)")
        if self.n_diff.shape != (C,):
            raise ValidationError("n_diff must have shape (C,)")
        if np.any(self.n_diff < 1) or np.any(self.n_diff > self.delta.shape[2]):
            raise ValidationError("n_diff entries outside [1, Hmax]")
        for name in ("sd_alpha", "sd_theta", "sd_delta"):
            if np.any(getattr(self, name) <= 0):
                raise ValidationError(f"{name} entries must be positive")

    @property
    def n_countries(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_methods(self) -> int:
        return self.alpha.shape[1]

    @property
    def n_regions(self) -> int:
        return self.theta_r.shape[0]

    def copy(self) -> "ParameterState":
        return ParameterState(
            alpha=self.alpha.copy(),
            delta=self.delta.copy(),
            theta_r=self.theta_r.copy(),
            theta_w=self.theta_w.copy(),
            sd_alpha=self.sd_alpha.copy(),
            sd_theta=self.sd_theta.copy(),
            sd_delta=self.sd_delta.copy(),
            country_region=self.country_region.copy(),
            n_diff=self.n_diff.copy(),
        )


def _half_cauchy_logpdf(x: np.ndarray, scale: float) -> np.ndarray:
    return np.log(2.0 / np.pi) - np.log(scale) - np.log1p((x / scale) ** 2)


def _normal_logpdf(x, mu, sd):
    z = (x - mu) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * LOG_2PI


def log_prior(
    state: ParameterState,
    rho: np.ndarray,
    prior: PriorConfig = PriorConfig(),
) -> float:
    """Joint log prior density of a parameter state.

    ``rho`` holds the two across-method correlation matrices of the
    latent-curve differences, shape (2, M, M). Each difference vector
    across methods is jointly normal with covariance built from the
    per-method spreads and the sector's correlation matrix.
    """
    C, M, _ = state.alpha.shape
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (2, M, M):
        raise ValidationError(f"rho must have shape (2, {M}, {M}), got {rho.shape}")

    lp = 0.0
    for s in range(2):
        mu_a = state.theta_r[state.country_region, :, s]
        lp += _normal_logpdf(state.alpha[:, :, s], mu_a, state.sd_alpha[s]).sum()
        lp += _normal_logpdf(
            state.theta_r[:, :, s], state.theta_w[None, :, s], state.sd_theta[s]
        ).sum()
        lp += _normal_logpdf(state.theta_w[:, s], 0.0, prior.theta_w_sd).sum()

        spreads = np.concatenate(
            [state.sd_alpha[s : s + 1], state.sd_theta[s : s + 1], state.sd_delta[:, s]]
        )
        if prior.cauchy_on == "sd":
            lp += _half_cauchy_logpdf(spreads, prior.cauchy_scale).sum()
        else:
            # prior placed on the variance, evaluated at sd via change of variables
            lp += (
                _half_cauchy_logpdf(spreads**2, prior.cauchy_scale)
                + np.log(2.0 * spreads)
            ).sum()

        sds = state.sd_delta[:, s]
        cf = cho_factor(rho[s], lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
        rows = [
            state.delta[c, s, h, :] / sds
            for c in range(C)
            for h in range(int(state.n_diff[c]))
        ]
        if rows:
            U = np.vstack(rows)
            quads = np.einsum("ij,ij->i", U, cho_solve(cf, U.T).T)
            n_terms = U.shape[0]
            lp += (
                -0.5 * n_terms * M * LOG_2PI
                - 0.5 * n_terms * logdet
                - n_terms * np.sum(np.log(sds))
                - 0.5 * quads.sum()
            )
    return float(lp)
