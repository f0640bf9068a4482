"""Convergence diagnostics and posterior summaries.

Implements the split potential-scale-reduction statistic and an
autocovariance-based effective sample size with the initial monotone
positive-sequence truncation, computed per parameter across chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

RHAT_FLAG = 1.05
ESS_FLAG = 100.0
QUANTILES = (0.025, 0.1, 0.5, 0.9, 0.975)
MIN_POOLED_DRAWS = 100


def split_chains(chains: np.ndarray) -> np.ndarray:
    """Split each chain in half, dropping the middle draw when odd."""
    chains = np.asarray(chains, dtype=np.float64)
    if chains.ndim != 2:
        raise ValidationError("chains must be a (n_chains, n_draws) array")
    n = chains.shape[1] // 2
    if n < 1:
        raise ValidationError("need at least 2 draws per chain to split")
    return np.concatenate([chains[:, :n], chains[:, -n:]], axis=0)


def rhat(chains: np.ndarray) -> float:
    """Split potential scale reduction factor.

    Values near 1 indicate the split half-chains agree in location and
    scale. Returns NaN for constant input.
    """
    halves = split_chains(chains)
    m, n = halves.shape
    means = halves.mean(axis=1)
    variances = halves.var(axis=1, ddof=1)
    W = variances.mean()
    B = n * means.var(ddof=1)
    if W == 0.0:
        return float("nan")
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance via FFT, matching the estimator Geyer uses."""
    n = len(x)
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real
    return acov / n


def ess(chains: np.ndarray) -> float:
    """Effective sample size from combined-chain autocorrelations.

    Chain autocovariances are averaged, converted to correlations
    against the pooled variance estimate, summed over pairs, and
    truncated where the pair sums stop being positive and monotone.
    Returns NaN for constant input.
    """
    halves = split_chains(chains)
    m, n = halves.shape
    if n < 4:
        return float("nan")
    acovs = np.stack([_autocovariance(halves[i]) for i in range(m)])
    chain_var = halves.var(axis=1, ddof=1)
    W = chain_var.mean()
    means = halves.mean(axis=1)
    B_over_n = means.var(ddof=1)
    var_plus = (n - 1) / n * W + B_over_n
    if var_plus == 0.0 or W == 0.0:
        return float("nan")
    rho = 1.0 - (W - acovs.mean(axis=0)) / var_plus

    # Geyer pairing: sums over (even, odd) lag pairs stay positive and
    # non-increasing for a reversible chain; truncate where that fails
    pair_sums = []
    k = 0
    while 2 * k + 1 < n:
        s = rho[2 * k] + rho[2 * k + 1]
        if s <= 0.0:
            break
        pair_sums.append(s)
        k += 1
    for k in range(1, len(pair_sums)):
        if pair_sums[k] > pair_sums[k - 1]:
            pair_sums[k] = pair_sums[k - 1]
    tau = max(-1.0 + 2.0 * sum(pair_sums), 1e-12)
    total = m * n
    return float(min(total / tau, total))


@dataclass(frozen=True)
class ParameterDiagnostics:
    name: str
    mean: float
    sd: float
    rhat: float
    ess: float
    accept_rate: float
    flags: tuple[str, ...]


def diagnose(draws) -> list[ParameterDiagnostics]:
    """Per-parameter convergence table for all sampled parameters.

    ``draws`` is a :class:`sectorshare.sampler.PosteriorDraws`. Flags:
    ``high_rhat`` above 1.05, ``low_ess`` below 100, ``constant`` for
    parameters whose draws never move.
    """
    names = draws.parameter_names()
    rates = draws.acceptance_rates()
    rows = []
    for j in draws.sampled_indices():
        chains = draws.draws[:, :, j]
        pooled = chains.reshape(-1)
        constant = np.all(pooled == pooled[0])
        r = rhat(chains) if not constant else float("nan")
        e = ess(chains) if not constant else float("nan")
        flags = []
        if constant:
            flags.append("constant")
        else:
            if not np.isfinite(r) or r > RHAT_FLAG:
                flags.append("high_rhat")
            if not np.isfinite(e) or e < ESS_FLAG:
                flags.append("low_ess")
        rows.append(
            ParameterDiagnostics(
                name=names[j],
                mean=float(pooled.mean()),
                sd=float(pooled.std(ddof=1)) if pooled.size > 1 else 0.0,
                rhat=r,
                ess=e,
                accept_rate=float(rates[j]),
                flags=tuple(flags),
            )
        )
    return rows


def worst_diagnostics(rows: list[ParameterDiagnostics]) -> dict:
    """Headline convergence numbers across a diagnostics table."""
    rhats = [r.rhat for r in rows if np.isfinite(r.rhat)]
    esses = [r.ess for r in rows if np.isfinite(r.ess)]
    return {
        "max_rhat": max(rhats) if rhats else float("nan"),
        "min_ess": min(esses) if esses else float("nan"),
        "n_flagged": sum(1 for r in rows if r.flags),
        "n_parameters": len(rows),
    }


def summarize(draws, countries: list[int] | None = None) -> list[dict]:
    """Posterior share summaries on the annual grid.

    One row per (country, method, sector, year) holding the posterior
    median and the 80% and 95% interval bounds of the share. All three
    sectors are reported, including the complement sector.
    """
    from .data import SECTOR_LABELS

    if draws.n_pooled < MIN_POOLED_DRAWS:
        raise ValidationError(
            f"need at least {MIN_POOLED_DRAWS} pooled draws to summarize, "
            f"have {draws.n_pooled}"
        )
    dataset = draws.dataset
    rows = []
    for c in countries if countries is not None else range(dataset.n_countries):
        years = draws.bases[c].year_grid
        phi = draws.phi(c)
        q = np.quantile(phi, QUANTILES, axis=0)
        for m in range(dataset.n_methods):
            for s in range(3):
                for t, year in enumerate(years):
                    rows.append(
                        {
                            "country": dataset.countries[c],
                            "method": dataset.methods[m],
                            "sector": SECTOR_LABELS[s],
                            "year": float(year),
                            "median": float(q[2, t, m, s]),
                            "lo80": float(q[1, t, m, s]),
                            "hi80": float(q[3, t, m, s]),
                            "lo95": float(q[0, t, m, s]),
                            "hi95": float(q[4, t, m, s]),
                        }
                    )
    return rows
