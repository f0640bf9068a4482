"""Posterior sampling: packing, initialization, and chain orchestration.

The sampler is an adaptive random-walk Metropolis-within-Gibbs kernel
over a flat parameter vector (see :mod:`sectorshare.kernels` for the
layout). Chains are independent units of work with their own RNG
streams derived from (seed, chain index), so results are reproducible
bit for bit regardless of how chains are scheduled.
"""

from __future__ import annotations

import concurrent.futures
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .basis import BasisSet
from .data import Dataset, SECTOR_LABELS
from .errors import NumericalError, ValidationError
from .kernels import (
    LAY_ALPHA,
    LAY_C,
    LAY_DELTA,
    LAY_HMAX,
    LAY_LSA,
    LAY_LSD,
    LAY_LST,
    LAY_M,
    LAY_P,
    LAY_R,
    LAY_TR,
    LAY_TW,
    RUN_BAD_INIT,
    RUN_OK,
)
from .model import ParameterState, PriorConfig, logit

log = logging.getLogger(__name__)

OBS_NUDGE = 1e-4
MODELED_SECTORS = ("public", "private_medical")


def truncnorm_logpdf(y, mu, sd):
    """Log density of normal(mu, sd) truncated to (0, 1) at y.

    Vectorized over broadcastable inputs. ``y`` must lie strictly
    inside (0, 1) and ``sd`` must be positive.
    """
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    if np.any(y <= 0.0) or np.any(y >= 1.0):
        raise ValidationError("truncated-normal density requires 0 < y < 1")
    if np.any(sd <= 0.0):
        raise ValidationError("truncated-normal density requires sd > 0")
    it = np.nditer([y, mu, sd, None])
    for yi, mi, si, out in it:
        out[...] = kernels.truncnorm_logpdf(float(yi), float(mi), float(si))
    result = it.operands[3]
    return float(result) if result.ndim == 0 else result


@dataclass(frozen=True)
class SamplerConfig:
    """MCMC controls.

    ``seed`` is mandatory: all chain streams, initial jitter, and any
    derived randomness are deterministic functions of it.
    """

    seed: int
    n_chains: int = 4
    n_warmup: int = 1000
    n_samples: int = 2000
    thin: int = 1
    target_accept_scalar: float = 0.44
    target_accept_block: float = 0.234
    block_delta_updates: bool = False
    n_threads: int = 1
    init_jitter_sd: float = 0.25
    initial_step: float = 0.5

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)):
            raise ValidationError("seed must be an integer")
        if self.n_chains < 2:
            raise ValidationError("at least 2 chains are required")
        if self.n_warmup < 0 or self.n_samples < 1:
            raise ValidationError("n_warmup must be >= 0 and n_samples >= 1")
        if self.thin < 1 or self.thin > self.n_samples:
            raise ValidationError("thin must be in [1, n_samples]")
        if not 0 < self.target_accept_scalar < 1:
            raise ValidationError("target_accept_scalar must be in (0, 1)")
        if not 0 < self.target_accept_block < 1:
            raise ValidationError("target_accept_block must be in (0, 1)")
        if self.n_threads < 1:
            raise ValidationError("n_threads must be >= 1")
        if self.n_samples // self.thin < 500:
            log.warning(
                "only %d retained draws per chain; summaries may be unstable",
                self.n_samples // self.thin,
            )

    @property
    def n_stored(self) -> int:
        return self.n_samples // self.thin


@dataclass
class PackedProblem:
    """Flat arrays consumed by the chain kernel."""

    lay: np.ndarray
    obs_c: np.ndarray
    obs_m: np.ndarray
    obs_s: np.ndarray
    obs_y: np.ndarray
    obs_se: np.ndarray
    obs_w: np.ndarray
    cm_ptr: np.ndarray
    cm_idx: np.ndarray
    co_ptr: np.ndarray
    co_idx: np.ndarray
    region: np.ndarray
    reg_ptr: np.ndarray
    reg_idx: np.ndarray
    Hc: np.ndarray
    rinv: np.ndarray
    rlogdet: np.ndarray
    rchol: np.ndarray
    rho: np.ndarray
    upd: np.ndarray
    param_names: list[str]
    n_nudged: int

    @property
    def n_params(self) -> int:
        return int(self.lay[LAY_P])


def _regularized_correlation(rho: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Clip tiny negative eigenvalues so the Cholesky factor exists."""
    rho = 0.5 * (rho + rho.T)
    vals, vecs = np.linalg.eigh(rho)
    if vals.min() >= floor:
        return rho
    vals = np.clip(vals, floor, None)
    fixed = (vecs * vals) @ vecs.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    np.fill_diagonal(fixed, 1.0)
    log.info("correlation matrix regularized (min eigenvalue below %g)", floor)
    return fixed


def identity_correlations(n_methods: int) -> np.ndarray:
    """Across-method correlation matrices fixed at the identity."""
    return np.stack([np.eye(n_methods), np.eye(n_methods)])


def pack(
    dataset: Dataset,
    bases: dict[int, BasisSet],
    rho: np.ndarray,
    prior: PriorConfig,
    update_mask: np.ndarray | None = None,
) -> PackedProblem:
    """Flatten the problem into kernel-ready arrays.

    Only sectors 1 and 2 enter the likelihood; the third sector is the
    complement and is reported, never fitted. Observations exactly at
    0 or 1 are nudged into the open interval (logged).
    """
    C = dataset.n_countries
    M = dataset.n_methods
    R = dataset.n_regions
    if set(bases) != set(range(C)):
        raise ValidationError("bases must cover every country index")
    Hc = np.array([bases[c].n_diff for c in range(C)], dtype=np.int64)
    Hmax = int(Hc.max())

    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (2, M, M):
        raise ValidationError(f"rho must have shape (2, {M}, {M}), got {rho.shape}")

    n_alpha = C * M * 2
    n_delta = C * 2 * Hmax * M
    n_tr = R * M * 2
    n_tw = M * 2
    off_alpha = 0
    off_delta = off_alpha + n_alpha
    off_tr = off_delta + n_delta
    off_tw = off_tr + n_tr
    off_lsa = off_tw + n_tw
    off_lst = off_lsa + 2
    off_lsd = off_lst + 2
    P = off_lsd + M * 2
    lay = np.array(
        [C, M, R, Hmax, off_alpha, off_delta, off_tr, off_tw, off_lsa, off_lst, off_lsd, P],
        dtype=np.int64,
    )

    eligible = np.flatnonzero(dataset.sector <= 2)
    if eligible.size == 0:
        raise ValidationError("no likelihood-eligible observations (sectors 1 and 2)")
    obs_c = dataset.country_idx[eligible].astype(np.int64)
    obs_m = dataset.method_idx[eligible].astype(np.int64)
    obs_s = (dataset.sector[eligible] - 1).astype(np.int64)
    obs_y = dataset.value[eligible].astype(np.float64).copy()
    obs_se = dataset.se[eligible].astype(np.float64)
    n_nudged = int(np.sum(obs_y <= 0.0) + np.sum(obs_y >= 1.0))
    if n_nudged:
        log.warning(
            "nudged %d boundary observation(s) into [%g, %g]",
            n_nudged,
            OBS_NUDGE,
            1.0 - OBS_NUDGE,
        )
        obs_y = np.clip(obs_y, OBS_NUDGE, 1.0 - OBS_NUDGE)

    obs_w = np.zeros((len(eligible), Hmax))
    years = dataset.year[eligible]
    for c in range(C):
        sel = obs_c == c
        if np.any(sel):
            obs_w[sel, : Hc[c]] = bases[c].design_rows(years[sel])

    order_cm = np.lexsort((np.arange(len(eligible)), obs_s, obs_m, obs_c))
    cm_idx = order_cm.astype(np.int64)
    cm_ptr = np.zeros(C * M + 1, dtype=np.int64)
    np.add.at(cm_ptr[1:], obs_c * M + obs_m, 1)
    cm_ptr = np.cumsum(cm_ptr)

    order_co = np.lexsort((np.arange(len(eligible)), obs_c))
    co_idx = order_co.astype(np.int64)
    co_ptr = np.zeros(C + 1, dtype=np.int64)
    np.add.at(co_ptr[1:], obs_c, 1)
    co_ptr = np.cumsum(co_ptr)

    region = dataset.country_region.astype(np.int64)
    reg_order = np.lexsort((np.arange(C), region))
    reg_idx = reg_order.astype(np.int64)
    reg_ptr = np.zeros(R + 1, dtype=np.int64)
    np.add.at(reg_ptr[1:], region, 1)
    reg_ptr = np.cumsum(reg_ptr)

    rinv = np.empty((2, M, M))
    rlogdet = np.empty(2)
    rchol = np.empty((2, M, M))
    rho_reg = np.empty_like(rho)
    for s in range(2):
        rc = _regularized_correlation(rho[s])
        rho_reg[s] = rc
        L = np.linalg.cholesky(rc)
        rchol[s] = L
        rinv[s] = np.linalg.inv(rc)
        rlogdet[s] = 2.0 * np.sum(np.log(np.diag(L)))

    upd = np.zeros(P, dtype=np.uint8)
    upd[:] = 0
    upd[off_alpha : off_alpha + n_alpha] = 1
    for c in range(C):
        for s in range(2):
            for h in range(Hc[c]):
                base = off_delta + ((c * 2 + s) * Hmax + h) * M
                upd[base : base + M] = 1
    upd[off_tr:P] = 1
    if update_mask is not None:
        update_mask = np.asarray(update_mask, dtype=bool)
        if update_mask.shape != (P,):
            raise ValidationError(f"update_mask must have shape ({P},)")
        upd = (upd.astype(bool) & update_mask).astype(np.uint8)

    names = [""] * P
    sec = MODELED_SECTORS
    for c in range(C):
        for m in range(M):
            for s in range(2):
                names[off_alpha + (c * M + m) * 2 + s] = (
                    f"alpha[{dataset.countries[c]},{dataset.methods[m]},{sec[s]}]"
                )
    for c in range(C):
        for s in range(2):
            for h in range(Hmax):
                for m in range(M):
                    names[off_delta + ((c * 2 + s) * Hmax + h) * M + m] = (
                        f"delta[{dataset.countries[c]},{sec[s]},{h},{dataset.methods[m]}]"
                    )
    for r in range(R):
        for m in range(M):
            for s in range(2):
                names[off_tr + (r * M + m) * 2 + s] = (
                    f"theta_r[{dataset.regions[r]},{dataset.methods[m]},{sec[s]}]"
                )
    for m in range(M):
        for s in range(2):
            names[off_tw + m * 2 + s] = f"theta_w[{dataset.methods[m]},{sec[s]}]"
    for s in range(2):
        names[off_lsa + s] = f"log_sd_alpha[{sec[s]}]"
        names[off_lst + s] = f"log_sd_theta[{sec[s]}]"
    for m in range(M):
        for s in range(2):
            names[off_lsd + m * 2 + s] = f"log_sd_delta[{dataset.methods[m]},{sec[s]}]"

    return PackedProblem(
        lay=lay,
        obs_c=obs_c,
        obs_m=obs_m,
        obs_s=obs_s,
        obs_y=obs_y,
        obs_se=obs_se,
        obs_w=obs_w,
        cm_ptr=cm_ptr,
        cm_idx=cm_idx,
        co_ptr=co_ptr,
        co_idx=co_idx,
        region=region,
        reg_ptr=reg_ptr,
        reg_idx=reg_idx,
        Hc=Hc,
        rinv=rinv,
        rlogdet=rlogdet,
        rchol=rchol,
        rho=rho_reg,
        upd=upd,
        param_names=names,
        n_nudged=n_nudged,
    )


def pack_state(packed: PackedProblem, state: ParameterState) -> np.ndarray:
    """Flatten a :class:`ParameterState` into the kernel layout."""
    lay = packed.lay
    C, M, R, Hmax = lay[LAY_C], lay[LAY_M], lay[LAY_R], lay[LAY_HMAX]
    if state.alpha.shape != (C, M, 2):
        raise ValidationError("state dimensions do not match the packed problem")
    theta = np.zeros(packed.n_params)
    theta[lay[LAY_ALPHA] : lay[LAY_ALPHA] + C * M * 2] = state.alpha.reshape(-1)
    delta = np.zeros((C, 2, Hmax, M))
    delta[:, :, : state.delta.shape[2], :] = state.delta
    theta[lay[LAY_DELTA] : lay[LAY_DELTA] + C * 2 * Hmax * M] = delta.reshape(-1)
    theta[lay[LAY_TR] : lay[LAY_TR] + R * M * 2] = state.theta_r.reshape(-1)
    theta[lay[LAY_TW] : lay[LAY_TW] + M * 2] = state.theta_w.reshape(-1)
    theta[lay[LAY_LSA] : lay[LAY_LSA] + 2] = np.log(state.sd_alpha)
    theta[lay[LAY_LST] : lay[LAY_LST] + 2] = np.log(state.sd_theta)
    theta[lay[LAY_LSD] : lay[LAY_LSD] + M * 2] = np.log(state.sd_delta).reshape(-1)
    return theta


def unpack_state(packed: PackedProblem, theta: np.ndarray) -> ParameterState:
    """Inverse of :func:`pack_state`."""
    lay = packed.lay
    C, M, R, Hmax = (
        int(lay[LAY_C]),
        int(lay[LAY_M]),
        int(lay[LAY_R]),
        int(lay[LAY_HMAX]),
    )
    return ParameterState(
        alpha=theta[lay[LAY_ALPHA] : lay[LAY_ALPHA] + C * M * 2].reshape(C, M, 2),
        delta=theta[lay[LAY_DELTA] : lay[LAY_DELTA] + C * 2 * Hmax * M].reshape(
            C, 2, Hmax, M
        ),
        theta_r=theta[lay[LAY_TR] : lay[LAY_TR] + R * M * 2].reshape(R, M, 2),
        theta_w=theta[lay[LAY_TW] : lay[LAY_TW] + M * 2].reshape(M, 2),
        sd_alpha=np.exp(theta[lay[LAY_LSA] : lay[LAY_LSA] + 2]),
        sd_theta=np.exp(theta[lay[LAY_LST] : lay[LAY_LST] + 2]),
        sd_delta=np.exp(theta[lay[LAY_LSD] : lay[LAY_LSD] + M * 2]).reshape(M, 2),
        country_region=packed.region.copy(),
        n_diff=packed.Hc.copy(),
    )


def log_likelihood(
    state: ParameterState, dataset: Dataset, bases: dict[int, BasisSet]
) -> float:
    """Total log likelihood of the modeled sectors given a state.

    Observation years are evaluated exactly, including fractional years
    between grid points.
    """
    packed = pack(dataset, bases, identity_correlations(dataset.n_methods), PriorConfig())
    theta = pack_state(packed, state)
    n = len(packed.obs_y)
    psi1 = np.zeros(n)
    psi2 = np.zeros(n)
    ll = np.zeros(n)
    total = kernels.refresh_caches(
        theta,
        packed.lay,
        packed.obs_c,
        packed.obs_m,
        packed.obs_s,
        packed.obs_y,
        packed.obs_se,
        packed.obs_w,
        psi1,
        psi2,
        ll,
    )
    return float(total)


def _empirical_alpha(dataset: Dataset) -> np.ndarray:
    """Latest-survey empirical logits per (country, method, sector)."""
    C, M = dataset.n_countries, dataset.n_methods
    alpha = np.full((C, M, 2), np.nan)
    for c in range(C):
        for m in range(M):
            sel = (dataset.country_idx == c) & (dataset.method_idx == m)
            if not np.any(sel):
                continue
            years = dataset.year[sel]
            sectors = dataset.sector[sel]
            values = dataset.value[sel]
            p = {}
            for s in (1, 2, 3):
                mask = sectors == s
                if np.any(mask):
                    latest = np.argmax(years[mask])
                    p[s] = values[mask][latest]
            if 1 in p:
                p1 = np.clip(p[1], OBS_NUDGE, 1.0 - OBS_NUDGE)
                alpha[c, m, 0] = logit(np.array(p1))
                if 2 in p:
                    q = p[2] / max(1.0 - p1, OBS_NUDGE)
                    q = np.clip(q, OBS_NUDGE, 1.0 - OBS_NUDGE)
                    alpha[c, m, 1] = logit(np.array(q))
    return alpha


def initial_theta(
    packed: PackedProblem,
    dataset: Dataset,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    override: ParameterState | None = None,
) -> np.ndarray:
    """Initial packed vector: empirical intercepts plus seeded jitter.

    Intercepts start at empirical logits of each country's most recent
    survey, falling back to regional means where a cell has no data.
    Differences start at zero and spreads at 0.3. Overdispersion comes
    from Gaussian jitter on every updatable entry.
    """
    lay = packed.lay
    C, M, R = int(lay[LAY_C]), int(lay[LAY_M]), int(lay[LAY_R])
    if override is not None:
        theta0 = pack_state(packed, override)
    else:
        alpha = _empirical_alpha(dataset)
        for s in range(2):
            for m in range(M):
                col = alpha[:, m, s]
                for r in range(R):
                    members = np.flatnonzero(packed.region == r)
                    have = members[~np.isnan(col[members])]
                    if have.size:
                        col[np.setdiff1d(members, have)] = col[have].mean()
                overall = col[~np.isnan(col)]
                col[np.isnan(col)] = overall.mean() if overall.size else 0.0
        theta_r = np.zeros((R, M, 2))
        for r in range(R):
            members = np.flatnonzero(packed.region == r)
            theta_r[r] = alpha[members].mean(axis=0)
        theta_w = theta_r.mean(axis=0)
        state = ParameterState(
            alpha=alpha,
            delta=np.zeros((C, 2, int(lay[LAY_HMAX]), M)),
            theta_r=theta_r,
            theta_w=theta_w,
            sd_alpha=np.full(2, 0.3),
            sd_theta=np.full(2, 0.3),
            sd_delta=np.full((M, 2), 0.3),
            country_region=packed.region.copy(),
            n_diff=packed.Hc.copy(),
        )
        theta0 = pack_state(packed, state)
    jitter = rng.standard_normal(packed.n_params) * cfg.init_jitter_sd
    theta0 = theta0 + jitter * packed.upd
    return theta0


@dataclass
class PosteriorDraws:
    """Posterior draws plus everything needed to interpret them.

    ``draws`` has shape (n_chains, n_stored, P) over the packed layout.
    Sector-share trajectories are derived on demand per country, never
    materialized wholesale.
    """

    packed: PackedProblem
    dataset: Dataset
    bases: dict[int, BasisSet]
    cfg: SamplerConfig
    prior: PriorConfig
    draws: np.ndarray
    lp: np.ndarray
    accept_count: np.ndarray
    proposal_count: np.ndarray
    block_accept_count: np.ndarray
    block_proposal_count: np.ndarray
    step_log: np.ndarray
    variant: str = "spline"

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_stored(self) -> int:
        return self.draws.shape[1]

    @property
    def n_pooled(self) -> int:
        return self.draws.shape[0] * self.draws.shape[1]

    def pooled(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[2])

    def parameter_names(self) -> list[str]:
        return self.packed.param_names

    def sampled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.packed.upd)

    def column(self, j: int) -> np.ndarray:
        """Pooled draws of one packed parameter."""
        return self.pooled()[:, j]

    def state_at(self, chain: int, draw: int) -> ParameterState:
        return unpack_state(self.packed, self.draws[chain, draw])

    def delta_draws(self) -> np.ndarray:
        """Pooled difference draws, shape (n_pooled, C, 2, Hmax, M)."""
        lay = self.packed.lay
        C, M, Hmax = int(lay[LAY_C]), int(lay[LAY_M]), int(lay[LAY_HMAX])
        off = int(lay[LAY_DELTA])
        block = self.pooled()[:, off : off + C * 2 * Hmax * M]
        return block.reshape(-1, C, 2, Hmax, M)

    def phi(self, c: int, years: np.ndarray | None = None) -> np.ndarray:
        """Sector-share draws for one country.

        Returns an array of shape (n_pooled, T, M, 3) over ``years``
        (the estimation grid when omitted).
        """
        bs = self.bases[c]
        W = bs.W_grid if years is None else bs.design_rows(np.asarray(years, dtype=float))
        lay = self.packed.lay
        pooled = self.pooled()
        out = np.empty((pooled.shape[0], W.shape[0], int(lay[LAY_M]), 3))
        kernels.phi_trajectories(
            pooled, lay, c, np.ascontiguousarray(W), int(self.packed.Hc[c]), out
        )
        return out

    def acceptance_rates(self) -> np.ndarray:
        """Post-warmup acceptance rate per sampled scalar parameter."""
        with np.errstate(invalid="ignore"):
            return np.where(
                self.proposal_count > 0,
                self.accept_count / np.maximum(self.proposal_count, 1),
                np.nan,
            )


def _chain_worker(args):
    (
        packed,
        dataset,
        cfg,
        prior,
        chain,
        override,
        draws,
        lp,
        acc,
        prop,
        bacc,
        bprop,
        step_log,
        bstep_log,
    ) = args
    rng = np.random.default_rng([cfg.seed, chain])
    theta0 = initial_theta(packed, dataset, cfg, rng, override)
    status = kernels.run_chain(
        theta0,
        packed.upd,
        packed.lay,
        packed.obs_c,
        packed.obs_m,
        packed.obs_s,
        packed.obs_y,
        packed.obs_se,
        packed.obs_w,
        packed.cm_ptr,
        packed.cm_idx,
        packed.co_ptr,
        packed.co_idx,
        packed.region,
        packed.reg_ptr,
        packed.reg_idx,
        packed.Hc,
        packed.rinv,
        packed.rlogdet,
        packed.rchol,
        float(prior.theta_w_sd),
        float(prior.cauchy_scale),
        0 if prior.cauchy_on == "sd" else 1,
        cfg.n_warmup,
        cfg.n_samples,
        cfg.thin,
        cfg.target_accept_scalar,
        cfg.target_accept_block,
        cfg.block_delta_updates,
        step_log,
        bstep_log,
        rng,
        draws,
        lp,
        acc,
        prop,
        bacc,
        bprop,
    )
    return chain, status, theta0


def run_mcmc(
    dataset: Dataset,
    bases: dict[int, BasisSet],
    rho: np.ndarray,
    prior: PriorConfig = PriorConfig(),
    cfg: SamplerConfig | None = None,
    update_mask: np.ndarray | None = None,
    initial_state: ParameterState | None = None,
) -> PosteriorDraws:
    """Run the adaptive Metropolis-within-Gibbs sampler.

    Returns stored draws for all chains. Raises
    :class:`NumericalError` when a chain starts from or reaches a
    non-finite posterior density.
    """
    if cfg is None:
        raise ValidationError("a SamplerConfig with an explicit seed is required")
    packed = pack(dataset, bases, rho, prior, update_mask)
    P = packed.n_params
    n_stored = cfg.n_stored
    lay = packed.lay
    n_block = int(lay[LAY_C]) * 2 * int(lay[LAY_HMAX])

    draws = np.zeros((cfg.n_chains, n_stored, P))
    lp = np.zeros((cfg.n_chains, n_stored))
    acc = np.zeros((cfg.n_chains, P), dtype=np.int64)
    prop = np.zeros((cfg.n_chains, P), dtype=np.int64)
    bacc = np.zeros((cfg.n_chains, n_block), dtype=np.int64)
    bprop = np.zeros((cfg.n_chains, n_block), dtype=np.int64)
    step_log = np.full((cfg.n_chains, P), math.log(cfg.initial_step))
    bstep_log = np.full((cfg.n_chains, n_block), math.log(cfg.initial_step))

    jobs = [
        (
            packed,
            dataset,
            cfg,
            prior,
            chain,
            initial_state,
            draws[chain],
            lp[chain],
            acc[chain],
            prop[chain],
            bacc[chain],
            bprop[chain],
            step_log[chain],
            bstep_log[chain],
        )
        for chain in range(cfg.n_chains)
    ]
    if cfg.n_threads > 1:
        with concurrent.futures.ThreadPoolExecutor(cfg.n_threads) as pool:
            results = list(pool.map(_chain_worker, jobs))
    else:
        results = [_chain_worker(job) for job in jobs]

    for chain, status, theta0 in results:
        if status == RUN_BAD_INIT:
            state = unpack_state(packed, theta0)
            raise NumericalError(
                f"chain {chain} started from a non-finite posterior; "
                f"initial intercept range [{state.alpha.min():.3f}, "
                f"{state.alpha.max():.3f}], spreads "
                f"sd_alpha={state.sd_alpha}, sd_delta rows={state.sd_delta.T}"
            )
        if status != RUN_OK:
            raise NumericalError(
                f"chain {chain} reached a non-finite posterior density mid-run"
            )

    variant = bases[0].kind if 0 in bases else "spline"
    return PosteriorDraws(
        packed=packed,
        dataset=dataset,
        bases=bases,
        cfg=cfg,
        prior=prior,
        draws=draws,
        lp=lp,
        accept_count=acc.sum(axis=0),
        proposal_count=prop.sum(axis=0),
        block_accept_count=bacc.sum(axis=0),
        block_proposal_count=bprop.sum(axis=0),
        step_log=step_log,
        variant=variant,
    )
