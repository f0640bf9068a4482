"""Two-stage estimation of across-method correlations.

Stage one fits the model with independent latent-curve differences.
The posterior medians of those differences, restricted to periods each
country's data can actually inform, feed a normalized Gram estimate of
how methods co-move. Stage three plugs the estimated correlation
matrices back in and refits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .basis import BasisSet
from .data import Dataset
from .errors import ValidationError
from .model import PriorConfig
from .sampler import (
    identity_correlations,
    PosteriorDraws,
    run_mcmc,
    SamplerConfig,
)

log = logging.getLogger(__name__)


def informed_mask(dataset: Dataset, bases: dict[int, BasisSet]) -> np.ndarray:
    """Which difference coordinates does each country's data inform?

    Entry (c, h) is True when the country has at least two distinct
    survey years and the h-th difference interval overlaps the span
    between the first and last survey. Countries with a single survey
    inform nothing: their differences are pure prior draws.
    """
    C = dataset.n_countries
    Hmax = max(bases[c].n_diff for c in range(C))
    mask = np.zeros((C, Hmax), dtype=bool)
    for c in range(C):
        first, last = dataset.data_period(c)
        if not last > first:
            continue
        for h, (lo, hi) in enumerate(bases[c].diff_intervals()):
            if lo <= last and hi >= first:
                mask[c, h] = True
    return mask


def extract_delta_medians(draws: PosteriorDraws) -> np.ndarray:
    """Posterior medians of the latent-curve differences, (C, 2, Hmax, M)."""
    return np.median(draws.delta_draws(), axis=0)


def estimate_correlations(
    medians: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Normalized Gram correlation of informed difference medians.

    For each sector, rows are the informed (country, interval) pairs
    and columns are methods; the estimate is the cosine similarity of
    method columns. A Gram matrix normalized this way is positive
    semidefinite by construction. Methods with no signal get zero
    off-diagonals and a unit diagonal.
    """
    if medians.ndim != 4 or medians.shape[1] != 2:
        raise ValidationError("medians must have shape (C, 2, Hmax, M)")
    C, _, Hmax, M = medians.shape
    if mask.shape != (C, Hmax):
        raise ValidationError(f"mask must have shape ({C}, {Hmax})")
    rho = np.empty((2, M, M))
    rows = np.flatnonzero(mask.reshape(-1))
    for s in range(2):
        X = medians[:, s, :, :].reshape(C * Hmax, M)[rows]
        if X.shape[0] == 0:
            log.warning(
                "no informed difference coordinates; correlation fixed at identity"
            )
            rho[s] = np.eye(M)
            continue
        G = X.T @ X
        norms = np.sqrt(np.diag(G))
        zero = norms == 0.0
        if np.any(zero):
            log.warning(
                "%d method(s) with zero informed signal in sector %d; "
                "their correlations are set to 0",
                int(zero.sum()),
                s + 1,
            )
        denom = np.outer(norms, norms)
        with np.errstate(invalid="ignore", divide="ignore"):
            R = np.where(denom > 0.0, G / np.where(denom == 0.0, 1.0, denom), 0.0)
        np.fill_diagonal(R, 1.0)
        rho[s] = R
    return rho


@dataclass
class TwoStageFit:
    """Everything produced by a two-stage fit."""

    stage1: PosteriorDraws
    rho_hat: np.ndarray
    mask: np.ndarray
    final: PosteriorDraws


def two_stage_fit(
    dataset: Dataset,
    bases: dict[int, BasisSet],
    prior: PriorConfig,
    cfg: SamplerConfig,
) -> TwoStageFit:
    """Fit with independent differences, estimate correlations, refit.

    Both stages run from the same seed-derived RNG streams, so a
    correlation estimate equal to the identity reproduces stage one
    draw for draw.
    """
    M = dataset.n_methods
    stage1 = run_mcmc(
        dataset, bases, identity_correlations(M), prior, cfg
    )
    medians = extract_delta_medians(stage1)
    mask = informed_mask(dataset, bases)
    rho_hat = estimate_correlations(medians, mask)
    final = run_mcmc(dataset, bases, rho_hat, prior, cfg)
    return TwoStageFit(stage1=stage1, rho_hat=rho_hat, mask=mask, final=final)
