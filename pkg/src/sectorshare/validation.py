"""Out-of-sample validation: hold out each country's latest survey.

Countries with at least two distinct survey years contribute their most
recent survey (all sectors, all methods) to the held-out set; the model
is refit on the remainder and scored against what it did not see.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .data import Dataset, SECTOR_LABELS
from .errors import ValidationError
from .model import PriorConfig
from .sampler import PosteriorDraws, SamplerConfig
from .variants import fit_variant, FitResult

log = logging.getLogger(__name__)

PI_LEVEL = 0.95
NOISE_STREAM = 99


def make_holdout_split(dataset: Dataset) -> tuple[Dataset, Dataset]:
    """Split off the most recent survey of every multi-survey country.

    Returns ``(train, held_out)`` datasets sharing the parent's label
    tables, so country and method indices remain comparable.
    """
    held = np.zeros(dataset.n_obs, dtype=bool)
    for c in range(dataset.n_countries):
        years = dataset.survey_years(c)
        if len(years) >= 2:
            held |= (dataset.country_idx == c) & (dataset.year == years[-1])
    if not held.any():
        raise ValidationError(
            "no country has two or more distinct survey years; nothing to hold out"
        )
    return dataset.subset(~held), dataset.subset(held)


@dataclass(frozen=True)
class HeldOutError:
    country: str
    method: str
    sector: str
    year: float
    observed: float
    predicted_median: float

    @property
    def error(self) -> float:
        """Observed minus predicted: positive means under-prediction."""
        return self.observed - self.predicted_median


def compute_errors(draws: PosteriorDraws, held_out: Dataset) -> list[HeldOutError]:
    """Prediction errors at every held-out observation.

    The prediction for a sector share is the posterior median of the
    share trajectory at the held-out year, including the complement
    sector.
    """
    errors = []
    for c in np.unique(held_out.country_idx):
        sel = np.flatnonzero(held_out.country_idx == c)
        years = held_out.year[sel]
        phi = draws.phi(int(c), np.unique(years))
        year_pos = {y: k for k, y in enumerate(np.unique(years))}
        med = np.median(phi, axis=0)
        for i in sel:
            t = year_pos[held_out.year[i]]
            m = int(held_out.method_idx[i])
            s = int(held_out.sector[i]) - 1
            errors.append(
                HeldOutError(
                    country=held_out.countries[c],
                    method=held_out.methods[m],
                    sector=SECTOR_LABELS[s],
                    year=float(held_out.year[i]),
                    observed=float(held_out.value[i]),
                    predicted_median=float(med[t, m, s]),
                )
            )
    return errors


def error_metrics(errors: list[HeldOutError]) -> dict:
    """Headline error metrics over a set of held-out predictions.

    All values are on the share scale (fractions, not percent).
    """
    if not errors:
        raise ValidationError("no held-out errors to summarize")
    e = np.array([r.error for r in errors])
    return {
        "n": len(errors),
        "rmse": float(np.sqrt(np.mean(e**2))),
        "mean_error": float(np.mean(e)),
        "median_abs_error": float(np.median(np.abs(e))),
    }


def _truncnorm_ppf(u: np.ndarray, mu: np.ndarray, sd: float) -> np.ndarray:
    """Inverse CDF of normal(mu, sd) truncated to (0, 1), elementwise."""
    lo = ndtr((0.0 - mu) / sd)
    hi = ndtr((1.0 - mu) / sd)
    p = np.clip(lo + u * (hi - lo), 1e-15, 1.0 - 1e-15)
    return mu + sd * ndtri(p)


@dataclass(frozen=True)
class CoverageReport:
    level: float
    mode: str
    n: int
    coverage_pct: float
    above_pct: float
    below_pct: float
    median_pi_width: float

    def __post_init__(self):
        total = self.coverage_pct + self.above_pct + self.below_pct
        if abs(total - 100.0) > 1e-9:
            raise ValidationError(
                f"coverage percentages sum to {total}, expected 100"
            )


def coverage_report(
    draws: PosteriorDraws,
    held_out: Dataset,
    *,
    mode: str = "predictive",
    level: float = PI_LEVEL,
) -> CoverageReport:
    """Interval coverage of held-out observations.

    ``predictive`` intervals add survey noise to each posterior share
    draw through the truncated-normal observation model, using the
    held-out row's own standard error; ``credible`` intervals use the
    bare share draws. Every held-out observation falls inside, above,
    or below its interval, so the three percentages sum to 100.
    """
    if mode not in ("predictive", "credible"):
        raise ValidationError('coverage mode must be "predictive" or "credible"')
    if not 0.5 < level < 1.0:
        raise ValidationError("interval level must be in (0.5, 1)")
    alpha = (1.0 - level) / 2.0
    rng = np.random.default_rng([draws.cfg.seed, NOISE_STREAM])
    inside = above = below = 0
    widths = []
    n = 0
    for c in np.unique(held_out.country_idx):
        sel = np.flatnonzero(held_out.country_idx == c)
        uyears = np.unique(held_out.year[sel])
        phi = draws.phi(int(c), uyears)
        year_pos = {y: k for k, y in enumerate(uyears)}
        for i in sel:
            t = year_pos[held_out.year[i]]
            m = int(held_out.method_idx[i])
            s = int(held_out.sector[i]) - 1
            shares = phi[:, t, m, s]
            if mode == "predictive":
                u = rng.random(len(shares))
                samples = _truncnorm_ppf(u, shares, float(held_out.se[i]))
            else:
                samples = shares
            lo, hi = np.quantile(samples, [alpha, 1.0 - alpha])
            y = float(held_out.value[i])
            if y < lo:
                below += 1
            elif y > hi:
                above += 1
            else:
                inside += 1
            widths.append(hi - lo)
            n += 1
    return CoverageReport(
        level=level,
        mode=mode,
        n=n,
        coverage_pct=100.0 * inside / n,
        above_pct=100.0 * above / n,
        below_pct=100.0 * below / n,
        median_pi_width=float(np.median(widths)),
    )


@dataclass
class ValidationReport:
    """Full out-of-sample scorecard for one variant."""

    variant: str
    n_held_out: int
    n_train: int
    overall: dict
    by_sector: dict[str, dict]
    coverage: CoverageReport
    errors: list[HeldOutError] = field(repr=False, default_factory=list)


def validate_variant(
    dataset: Dataset,
    variant: str,
    prior: PriorConfig,
    cfg: SamplerConfig,
    *,
    mode: str = "predictive",
    spacing: float | None = None,
) -> ValidationReport:
    """Refit on the training split and score the held-out surveys."""
    train, held_out = make_holdout_split(dataset)
    log.info(
        "holdout split: %d training rows, %d held-out rows",
        train.n_obs,
        held_out.n_obs,
    )
    fit: FitResult = fit_variant(variant, train, prior, cfg, spacing=spacing)
    errors = compute_errors(fit.draws, held_out)
    by_sector = {}
    for s_label in SECTOR_LABELS:
        sector_errors = [e for e in errors if e.sector == s_label]
        if sector_errors:
            by_sector[s_label] = error_metrics(sector_errors)
    return ValidationReport(
        variant=variant,
        n_held_out=held_out.n_obs,
        n_train=train.n_obs,
        overall=error_metrics(errors),
        by_sector=by_sector,
        coverage=coverage_report(fit.draws, held_out, mode=mode),
        errors=errors,
    )
