"""Synthetic dataset generation from the model's own hierarchy.

Used for calibration checks: draw true parameters from the prior
hierarchy (with reasonable spreads), build share trajectories, then
observe them at survey years through the truncated-normal error model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .basis import build_basis_set
from .data import Dataset, METHOD_LABELS, build_dataset, Observation
from .errors import ValidationError
from .model import ParameterState, compose_shares

REGION_POOL = (
    "Eastern Africa",
    "Western Africa",
    "Southern Asia",
    "Middle Africa",
    "South-eastern Asia",
)


@dataclass(frozen=True)
class SimConfig:
    """Controls for one synthetic dataset."""

    seed: int
    n_countries: int = 4
    n_regions: int = 2
    methods: tuple[str, ...] = METHOD_LABELS
    survey_years: tuple[float, ...] = (2005.0, 2011.0, 2017.0)
    se: float = 0.025
    window: tuple[float, float] = (1990.0, 2025.0)
    spacing: float = 3.5
    kind: str = "spline"
    sd_alpha: float = 0.5
    sd_theta: float = 0.4
    sd_delta: float = 0.25
    rho: np.ndarray | None = None
    theta_w_loc: tuple[float, float] = (-0.3, 0.3)
    curvature: float = 0.0

    def __post_init__(self):
        if self.n_countries < 1 or self.n_regions < 1:
            raise ValidationError("need at least one country and one region")
        if self.n_regions > self.n_countries:
            raise ValidationError("more regions than countries")
        if self.n_regions > len(REGION_POOL):
            raise ValidationError(f"at most {len(REGION_POOL)} regions supported")
        if len(self.survey_years) < 1:
            raise ValidationError("need at least one survey year")


@dataclass
class Simulation:
    """A synthetic dataset plus the truth that generated it."""

    dataset: Dataset
    truth: ParameterState
    rho: np.ndarray
    bases: dict
    config: SimConfig

    def true_shares(self, c: int, years: np.ndarray) -> np.ndarray:
        """True (T, M, 3) share trajectories for one country."""
        bs = self.bases[c]
        W = bs.design_rows(np.asarray(years, dtype=float))
        M = self.truth.n_methods
        out = np.empty((len(years), M, 3))
        H = int(self.truth.n_diff[c])
        for m in range(M):
            psi1 = self.truth.alpha[c, m, 0] + W @ self.truth.delta[c, 0, :H, m]
            psi2 = self.truth.alpha[c, m, 1] + W @ self.truth.delta[c, 1, :H, m]
            p1, p2, p3 = compose_shares(psi1, psi2)
            out[:, m, 0] = p1
            out[:, m, 1] = p2
            out[:, m, 2] = p3
        return out


def _truncnorm_draw(rng: np.random.Generator, mu: float, sd: float) -> float:
    """Inverse-CDF draw from normal(mu, sd) truncated to (0, 1)."""
    lo = ndtr((0.0 - mu) / sd)
    hi = ndtr((1.0 - mu) / sd)
    u = rng.uniform(lo, hi)
    u = min(max(u, 1e-15), 1.0 - 1e-15)
    return float(mu + sd * ndtri(u))


def simulate_dataset(cfg: SimConfig) -> Simulation:
    """Generate a dataset whose truth is known.

    Observations cover all three sectors at each survey year so the
    synthetic files exercise the same composition checks as real data.
    The third-sector value is the exact complement of the first two.
    """
    rng = np.random.default_rng([cfg.seed, 77])
    C = cfg.n_countries
    M = len(cfg.methods)
    R = cfg.n_regions

    countries = tuple(f"Simland {chr(ord('A') + i)}" for i in range(C))
    regions = tuple(REGION_POOL[r % len(REGION_POOL)] for r in range(R))
    country_region = np.array([i % R for i in range(C)], dtype=np.int64)

    recent = max(cfg.survey_years)
    bases = {
        c: build_basis_set(
            recent, kind=cfg.kind, window=cfg.window, spacing=cfg.spacing
        )
        for c in range(C)
    }
    Hmax = max(bases[c].n_diff for c in range(C))
    n_diff = np.array([bases[c].n_diff for c in range(C)], dtype=np.int64)

    if cfg.rho is None:
        rho = np.stack([np.eye(M), np.eye(M)])
    else:
        rho = np.asarray(cfg.rho, dtype=np.float64)
        if rho.shape != (2, M, M):
            raise ValidationError(f"rho must have shape (2, {M}, {M})")

    theta_w = np.stack(
        [
            rng.normal(cfg.theta_w_loc[0], 0.3, size=M),
            rng.normal(cfg.theta_w_loc[1], 0.3, size=M),
        ],
        axis=1,
    )
    theta_r = theta_w[None, :, :] + rng.normal(0.0, cfg.sd_theta, size=(R, M, 2))
    alpha = theta_r[country_region] + rng.normal(0.0, cfg.sd_alpha, size=(C, M, 2))

    chol = [np.linalg.cholesky(rho[s]) for s in range(2)]
    delta = np.zeros((C, 2, Hmax, M))
    for c in range(C):
        for s in range(2):
            for h in range(n_diff[c]):
                z = rng.standard_normal(M)
                delta[c, s, h, :] = cfg.sd_delta * (chol[s] @ z)
    if cfg.curvature != 0.0 and cfg.kind == "spline":
        # superimpose a deterministic bend so the truth is genuinely
        # nonlinear in time
        for c in range(C):
            H = n_diff[c]
            bend = np.sin(np.linspace(0.0, np.pi, H)) - 0.5
            for s in range(2):
                delta[c, s, :H, :] += cfg.curvature * bend[:, None]

    truth = ParameterState(
        alpha=alpha,
        delta=delta,
        theta_r=theta_r,
        theta_w=theta_w,
        sd_alpha=np.full(2, cfg.sd_alpha),
        sd_theta=np.full(2, cfg.sd_theta),
        sd_delta=np.full((M, 2), cfg.sd_delta),
        country_region=country_region,
        n_diff=n_diff,
    )

    observations = []
    for c in range(C):
        W = bases[c].design_rows(np.asarray(cfg.survey_years, dtype=float))
        for m in range(M):
            H = int(n_diff[c])
            psi1 = alpha[c, m, 0] + W @ delta[c, 0, :H, m]
            psi2 = alpha[c, m, 1] + W @ delta[c, 1, :H, m]
            p1, p2, _ = compose_shares(psi1, psi2)
            for t, year in enumerate(cfg.survey_years):
                while True:
                    y1 = _truncnorm_draw(rng, float(p1[t]), cfg.se)
                    y2 = _truncnorm_draw(rng, float(p2[t]), cfg.se)
                    if y1 + y2 < 0.995:
                        break
                y3 = 1.0 - y1 - y2
                for sector, value in ((1, y1), (2, y2), (3, y3)):
                    observations.append(
                        Observation(
                            country=countries[c],
                            region=regions[country_region[c]],
                            method=cfg.methods[m],
                            sector=sector,
                            year=float(year),
                            proportion=value,
                            se=cfg.se,
                        )
                    )

    dataset = build_dataset(observations, window=cfg.window)
    # rebuild bases keyed by the dataset's sorted country order
    order = {name: i for i, name in enumerate(dataset.countries)}
    bases_sorted = {}
    for c, name in enumerate(countries):
        bases_sorted[order[name]] = bases[c]
    # remap truth arrays to the dataset's country and region order
    perm = np.array([countries.index(name) for name in dataset.countries])
    region_perm = np.array([regions.index(name) for name in dataset.regions])
    inv_region = np.empty_like(region_perm)
    inv_region[region_perm] = np.arange(len(region_perm))
    truth = ParameterState(
        alpha=alpha[perm],
        delta=delta[perm],
        theta_r=theta_r[region_perm],
        theta_w=theta_w,
        sd_alpha=truth.sd_alpha,
        sd_theta=truth.sd_theta,
        sd_delta=truth.sd_delta,
        country_region=inv_region[country_region[perm]],
        n_diff=n_diff[perm],
    )
    if not np.array_equal(truth.country_region, dataset.country_region):
        raise AssertionError("region remapping between simulation and dataset broke")
    return Simulation(
        dataset=dataset, truth=truth, rho=rho, bases=bases_sorted, config=cfg
    )
