"""Hot numerical kernels, JIT compiled when numba is available.

Set ``SECTORSHARE_NO_NUMBA=1`` to run the identical code paths in pure
Python. Every function here uses scalar math and explicit loops only,
so both backends execute the same floating-point operations in the same
order and produce bit-identical results for a given RNG stream.

Packed problem layout
---------------------
The sampler flattens all parameters into one float64 vector::

    alpha[c, m, s]        intercepts, s in {0: public, 1: private medical}
    delta[c, s, h, m]     latent-curve differences, padded to h < Hmax
    theta_r[r, m, s]      regional intercept means
    theta_w[m, s]         world intercept means
    lsa[s], lst[s]        log sd of alpha around theta_r / theta_r around theta_w
    lsd[m, s]             log sd of the differences

Block offsets and dimensions travel in an int64 ``lay`` array; see
``LAY_*`` constants. Observations are packed in parallel arrays with a
per-(country, method) CSR index and a per-country CSR index.
"""

from __future__ import annotations

import math
import os

import numpy as np

SHARE_CLAMP = 1e-12
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
LOG_2PI = math.log(2.0 * math.pi)
INV_SQRT2 = 1.0 / math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)

# lay indices
LAY_C = 0
LAY_M = 1
LAY_R = 2
LAY_HMAX = 3
LAY_ALPHA = 4
LAY_DELTA = 5
LAY_TR = 6
LAY_TW = 7
LAY_LSA = 8
LAY_LST = 9
LAY_LSD = 10
LAY_P = 11

RUN_OK = 0
RUN_BAD_INIT = 1
RUN_NONFINITE = 2


def _numba_disabled() -> bool:
    return os.environ.get("SECTORSHARE_NO_NUMBA", "").strip().lower() not in (
        "",
        "0",
        "false",
        "no",
    )


NUMBA_ENABLED = False
if not _numba_disabled():
    try:
        from numba import njit as _numba_njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

if NUMBA_ENABLED:

    def njit(func):
        return _numba_njit(cache=True, nogil=True)(func)

else:

    def njit(func):
        return func


@njit
def invlogit(x):
    """Inverse logit clamped away from 0 and 1.

    The clamp saturates the exponential overflow region and keeps every
    composed share strictly inside (0, 1).
    """
    if x >= 0.0:
        p = 1.0 / (1.0 + math.exp(-x))
    else:
        e = math.exp(x)
        p = e / (1.0 + e)
    if p < SHARE_CLAMP:
        p = SHARE_CLAMP
    elif p > 1.0 - SHARE_CLAMP:
        p = 1.0 - SHARE_CLAMP
    return p


@njit
def erfcx_pos(x):
    """Scaled complementary error function exp(x*x) * erfc(x), x >= 0."""
    if x < 25.0:
        return math.erfc(x) * math.exp(x * x)
    # asymptotic series; relative error below 1e-12 for x >= 25
    q = 1.0 / (2.0 * x * x)
    s = 1.0 - q * (1.0 - 3.0 * q * (1.0 - 5.0 * q * (1.0 - 7.0 * q)))
    return s / (x * SQRT_PI)


@njit
def log_phi_interval(a, b):
    """log(Phi(b) - Phi(a)) for standardized bounds a < b, stable in the tails."""
    if b <= 0.0:
        t = a
        a = -b
        b = -t
    if a >= 0.0:
        # both bounds in the upper tail: Phi(b) - Phi(a) = Q(a) - Q(b)
        ra = 0.5 * erfcx_pos(a * INV_SQRT2)
        rb = 0.5 * erfcx_pos(b * INV_SQRT2)
        d = ra - rb * math.exp(0.5 * (a * a - b * b))
        if d <= 0.0:
            return -math.inf
        return math.log(d) - 0.5 * a * a
    # a < 0 < b: subtract both tail masses from 1
    pa = 0.5 * math.erfc(-a * INV_SQRT2)
    qb = 0.5 * math.erfc(b * INV_SQRT2)
    rest = pa + qb
    if rest >= 1.0:
        return -math.inf
    return math.log1p(-rest)


@njit
def truncnorm_logpdf(y, mu, sd):
    """Log density of a normal(mu, sd) truncated to (0, 1), at y in (0, 1)."""
    z = (y - mu) / sd
    a = -mu / sd
    b = (1.0 - mu) / sd
    return -0.5 * z * z - LOG_SQRT_2PI - math.log(sd) - log_phi_interval(a, b)


@njit
def idx_alpha(lay, c, m, s):
    return lay[LAY_ALPHA] + (c * lay[LAY_M] + m) * 2 + s


@njit
def idx_delta(lay, c, s, h, m):
    return lay[LAY_DELTA] + ((c * 2 + s) * lay[LAY_HMAX] + h) * lay[LAY_M] + m


@njit
def idx_tr(lay, r, m, s):
    return lay[LAY_TR] + (r * lay[LAY_M] + m) * 2 + s


@njit
def idx_tw(lay, m, s):
    return lay[LAY_TW] + m * 2 + s


@njit
def idx_lsa(lay, s):
    return lay[LAY_LSA] + s


@njit
def idx_lst(lay, s):
    return lay[LAY_LST] + s


@njit
def idx_lsd(lay, m, s):
    return lay[LAY_LSD] + m * 2 + s


@njit
def _obs_mu(s, psi1, psi2):
    """Observation mean share from the latent values of sectors 1 and 2."""
    g1 = invlogit(psi1)
    if s == 0:
        return g1
    return (1.0 - g1) * invlogit(psi2)


@njit
def _norm_lp(x, mu, sd):
    z = (x - mu) / sd
    return -0.5 * z * z - math.log(sd) - LOG_SQRT_2PI


@njit
def _half_cauchy_lp(x, scale):
    r = x / scale
    return math.log(2.0 / math.pi) - math.log(scale) - math.log1p(r * r)


@njit
def _lsd_prior(lsd, scale, mode):
    """Log prior of a log-sd parameter including the change of variables.

    mode 0 places the half-Cauchy on the sd, mode 1 on the variance.
    """
    sd = math.exp(lsd)
    if mode == 0:
        return _half_cauchy_lp(sd, scale) + lsd
    return _half_cauchy_lp(sd * sd, scale) + math.log(2.0) + 2.0 * lsd


@njit
def refresh_caches(
    theta, lay, obs_c, obs_m, obs_s, obs_y, obs_se, obs_w, psi1, psi2, ll
):
    """Recompute latent values and per-observation log likelihoods.

    Returns the total log likelihood. Called once per iteration so that
    incremental cache updates within a sweep cannot accumulate drift.
    """
    total = 0.0
    for i in range(obs_y.shape[0]):
        c = obs_c[i]
        m = obs_m[i]
        p1 = theta[idx_alpha(lay, c, m, 0)]
        for h in range(obs_w.shape[1]):
            w = obs_w[i, h]
            if w != 0.0:
                p1 += w * theta[idx_delta(lay, c, 0, h, m)]
        psi1[i] = p1
        if obs_s[i] == 1:
            p2 = theta[idx_alpha(lay, c, m, 1)]
            for h in range(obs_w.shape[1]):
                w = obs_w[i, h]
                if w != 0.0:
                    p2 += w * theta[idx_delta(lay, c, 1, h, m)]
            psi2[i] = p2
        else:
            psi2[i] = 0.0
        ll[i] = truncnorm_logpdf(obs_y[i], _obs_mu(obs_s[i], psi1[i], psi2[i]), obs_se[i])
        total += ll[i]
    return total


@njit
def log_prior_packed(
    theta, lay, region, reg_ptr, reg_idx, Hc, rinv, rlogdet,
    theta_w_sd, cauchy_scale, cauchy_mode,
):
    """Joint log prior of the packed parameter vector."""
    C = lay[LAY_C]
    M = lay[LAY_M]
    R = lay[LAY_R]
    lp = 0.0
    for s in range(2):
        sd_a = math.exp(theta[idx_lsa(lay, s)])
        sd_t = math.exp(theta[idx_lst(lay, s)])
        for c in range(C):
            r = region[c]
            for m in range(M):
                lp += _norm_lp(
                    theta[idx_alpha(lay, c, m, s)], theta[idx_tr(lay, r, m, s)], sd_a
                )
        for r in range(R):
            for m in range(M):
                lp += _norm_lp(
                    theta[idx_tr(lay, r, m, s)], theta[idx_tw(lay, m, s)], sd_t
                )
        for m in range(M):
            lp += _norm_lp(theta[idx_tw(lay, m, s)], 0.0, theta_w_sd)
        lp += _lsd_prior(theta[idx_lsa(lay, s)], cauchy_scale, cauchy_mode)
        lp += _lsd_prior(theta[idx_lst(lay, s)], cauchy_scale, cauchy_mode)
        for m in range(M):
            lp += _lsd_prior(theta[idx_lsd(lay, m, s)], cauchy_scale, cauchy_mode)
        # correlated difference vectors across methods
        sum_lsd = 0.0
        for m in range(M):
            sum_lsd += theta[idx_lsd(lay, m, s)]
        for c in range(C):
            for h in range(Hc[c]):
                quad = 0.0
                for mi in range(M):
                    ui = theta[idx_delta(lay, c, s, h, mi)] / math.exp(
                        theta[idx_lsd(lay, mi, s)]
                    )
                    for mj in range(M):
                        uj = theta[idx_delta(lay, c, s, h, mj)] / math.exp(
                            theta[idx_lsd(lay, mj, s)]
                        )
                        quad += ui * rinv[s, mi, mj] * uj
                lp += (
                    -0.5 * M * LOG_2PI
                    - 0.5 * rlogdet[s]
                    - sum_lsd
                    - 0.5 * quad
                )
    return lp


@njit
def _delta_quad(theta, lay, rinv, c, s, h, m_changed, new_val):
    """Quadratic form of one difference vector with one entry replaced.

    Passing ``m_changed = -1`` evaluates the current vector.
    """
    M = lay[LAY_M]
    quad = 0.0
    for mi in range(M):
        vi = theta[idx_delta(lay, c, s, h, mi)]
        if mi == m_changed:
            vi = new_val
        ui = vi / math.exp(theta[idx_lsd(lay, mi, s)])
        for mj in range(M):
            vj = theta[idx_delta(lay, c, s, h, mj)]
            if mj == m_changed:
                vj = new_val
            uj = vj / math.exp(theta[idx_lsd(lay, mj, s)])
            quad += ui * rinv[s, mi, mj] * uj
    return quad


@njit
def _accept_prob(dlp):
    if dlp >= 0.0:
        return 1.0
    if dlp < -700.0:
        return 0.0
    return math.exp(dlp)


@njit
def run_chain(
    theta0,
    upd,
    lay,
    obs_c,
    obs_m,
    obs_s,
    obs_y,
    obs_se,
    obs_w,
    cm_ptr,
    cm_idx,
    co_ptr,
    co_idx,
    region,
    reg_ptr,
    reg_idx,
    Hc,
    rinv,
    rlogdet,
    rchol,
    theta_w_sd,
    cauchy_scale,
    cauchy_mode,
    n_warmup,
    n_samples,
    thin,
    target_scalar,
    target_block,
    use_block,
    step_log,
    bstep_log,
    rng,
    draws_out,
    lp_out,
    acc_out,
    prop_out,
    bacc_out,
    bprop_out,
):
    """Adaptive random-walk Metropolis-within-Gibbs over one chain.

    Proposal scales adapt toward the target acceptance rates during
    warmup and are frozen afterwards. Stored draws and diagnostics are
    written into the preallocated output arrays. Returns RUN_OK on
    success or an error code on a non-finite posterior.
    """
    C = lay[LAY_C]
    M = lay[LAY_M]
    R = lay[LAY_R]
    Hmax = lay[LAY_HMAX]
    nobs = obs_y.shape[0]

    theta = theta0.copy()
    psi1 = np.zeros(nobs)
    psi2 = np.zeros(nobs)
    ll = np.zeros(nobs)
    new_ll = np.zeros(nobs)
    dv = np.zeros(M)
    z = np.zeros(M)

    total_ll = refresh_caches(
        theta, lay, obs_c, obs_m, obs_s, obs_y, obs_se, obs_w, psi1, psi2, ll
    )
    lp0 = log_prior_packed(
        theta, lay, region, reg_ptr, reg_idx, Hc, rinv, rlogdet,
        theta_w_sd, cauchy_scale, cauchy_mode,
    )
    if not math.isfinite(total_ll + lp0):
        return RUN_BAD_INIT

    n_iter = n_warmup + n_samples
    store_i = 0
    for it in range(n_iter):
        adapting = it < n_warmup
        gamma = (it + 1.0) ** (-0.6) if adapting else 0.0
        post = not adapting
        total_ll = refresh_caches(
            theta, lay, obs_c, obs_m, obs_s, obs_y, obs_se, obs_w, psi1, psi2, ll
        )
        if not math.isfinite(total_ll):
            return RUN_NONFINITE

        # ---- intercepts ----
        for c in range(C):
            for m in range(M):
                cm = c * M + m
                for s in range(2):
                    j = idx_alpha(lay, c, m, s)
                    if not upd[j]:
                        continue
                    d = math.exp(step_log[j]) * rng.standard_normal()
                    sd_a = math.exp(theta[idx_lsa(lay, s)])
                    tr = theta[idx_tr(lay, region[c], m, s)]
                    dlp = _norm_lp(theta[j] + d, tr, sd_a) - _norm_lp(
                        theta[j], tr, sd_a
                    )
                    for ptr in range(cm_ptr[cm], cm_ptr[cm + 1]):
                        i = cm_idx[ptr]
                        si = obs_s[i]
                        if s == 1 and si == 0:
                            continue
                        np1 = psi1[i] + (d if s == 0 else 0.0)
                        np2 = psi2[i] + (d if s == 1 else 0.0)
                        nl = truncnorm_logpdf(
                            obs_y[i], _obs_mu(si, np1, np2), obs_se[i]
                        )
                        new_ll[i] = nl
                        dlp += nl - ll[i]
                    ap = _accept_prob(dlp)
                    accepted = ap >= 1.0 or rng.random() < ap
                    if accepted:
                        theta[j] += d
                        for ptr in range(cm_ptr[cm], cm_ptr[cm + 1]):
                            i = cm_idx[ptr]
                            si = obs_s[i]
                            if s == 1 and si == 0:
                                continue
                            if s == 0:
                                psi1[i] += d
                            else:
                                psi2[i] += d
                            total_ll += new_ll[i] - ll[i]
                            ll[i] = new_ll[i]
                    if adapting:
                        step_log[j] += gamma * (ap - target_scalar)
                        if step_log[j] < -15.0:
                            step_log[j] = -15.0
                        elif step_log[j] > 5.0:
                            step_log[j] = 5.0
                    if post:
                        prop_out[j] += 1
                        if accepted:
                            acc_out[j] += 1

        # ---- latent-curve differences ----
        for c in range(C):
            for s in range(2):
                for h in range(Hc[c]):
                    if use_block:
                        q = (c * 2 + s) * Hmax + h
                        any_free = False
                        for m in range(M):
                            if upd[idx_delta(lay, c, s, h, m)]:
                                any_free = True
                            z[m] = rng.standard_normal()
                        if not any_free:
                            continue
                        scale = math.exp(bstep_log[q])
                        for m in range(M):
                            acc_m = 0.0
                            for mm in range(m + 1):
                                acc_m += rchol[s, m, mm] * z[mm]
                            step_m = (
                                scale * math.exp(theta[idx_lsd(lay, m, s)]) * acc_m
                            )
                            dv[m] = step_m if upd[idx_delta(lay, c, s, h, m)] else 0.0
                        quad_old = _delta_quad(theta, lay, rinv, c, s, h, -1, 0.0)
                        quad_new = 0.0
                        for mi in range(M):
                            ui = (
                                theta[idx_delta(lay, c, s, h, mi)] + dv[mi]
                            ) / math.exp(theta[idx_lsd(lay, mi, s)])
                            for mj in range(M):
                                uj = (
                                    theta[idx_delta(lay, c, s, h, mj)] + dv[mj]
                                ) / math.exp(theta[idx_lsd(lay, mj, s)])
                                quad_new += ui * rinv[s, mi, mj] * uj
                        dlp = -0.5 * (quad_new - quad_old)
                        for ptr in range(co_ptr[c], co_ptr[c + 1]):
                            i = co_idx[ptr]
                            si = obs_s[i]
                            if s == 1 and si == 0:
                                continue
                            w = obs_w[i, h]
                            if w == 0.0:
                                continue
                            dpsi = w * dv[obs_m[i]]
                            if dpsi == 0.0:
                                continue
                            np1 = psi1[i] + (dpsi if s == 0 else 0.0)
                            np2 = psi2[i] + (dpsi if s == 1 else 0.0)
                            nl = truncnorm_logpdf(
                                obs_y[i], _obs_mu(si, np1, np2), obs_se[i]
                            )
                            new_ll[i] = nl
                            dlp += nl - ll[i]
                        ap = _accept_prob(dlp)
                        accepted = ap >= 1.0 or rng.random() < ap
                        if accepted:
                            for m in range(M):
                                theta[idx_delta(lay, c, s, h, m)] += dv[m]
                            for ptr in range(co_ptr[c], co_ptr[c + 1]):
                                i = co_idx[ptr]
                                si = obs_s[i]
                                if s == 1 and si == 0:
                                    continue
                                w = obs_w[i, h]
                                if w == 0.0:
                                    continue
                                dpsi = w * dv[obs_m[i]]
                                if dpsi == 0.0:
                                    continue
                                if s == 0:
                                    psi1[i] += dpsi
                                else:
                                    psi2[i] += dpsi
                                total_ll += new_ll[i] - ll[i]
                                ll[i] = new_ll[i]
                        if adapting:
                            bstep_log[q] += gamma * (ap - target_block)
                            if bstep_log[q] < -15.0:
                                bstep_log[q] = -15.0
                            elif bstep_log[q] > 5.0:
                                bstep_log[q] = 5.0
                        if post:
                            bprop_out[q] += 1
                            if accepted:
                                bacc_out[q] += 1
                        continue
                    for m in range(M):
                        j = idx_delta(lay, c, s, h, m)
                        if not upd[j]:
                            continue
                        d = math.exp(step_log[j]) * rng.standard_normal()
                        quad_old = _delta_quad(theta, lay, rinv, c, s, h, -1, 0.0)
                        quad_new = _delta_quad(
                            theta, lay, rinv, c, s, h, m, theta[j] + d
                        )
                        dlp = -0.5 * (quad_new - quad_old)
                        cm = c * M + m
                        for ptr in range(cm_ptr[cm], cm_ptr[cm + 1]):
                            i = cm_idx[ptr]
                            si = obs_s[i]
                            if s == 1 and si == 0:
                                continue
                            w = obs_w[i, h]
                            if w == 0.0:
                                continue
                            dpsi = w * d
                            np1 = psi1[i] + (dpsi if s == 0 else 0.0)
                            np2 = psi2[i] + (dpsi if s == 1 else 0.0)
                            nl = truncnorm_logpdf(
                                obs_y[i], _obs_mu(si, np1, np2), obs_se[i]
                            )
                            new_ll[i] = nl
                            dlp += nl - ll[i]
                        ap = _accept_prob(dlp)
                        accepted = ap >= 1.0 or rng.random() < ap
                        if accepted:
                            theta[j] += d
                            for ptr in range(cm_ptr[cm], cm_ptr[cm + 1]):
                                i = cm_idx[ptr]
                                si = obs_s[i]
                                if s == 1 and si == 0:
                                    continue
                                w = obs_w[i, h]
                                if w == 0.0:
                                    continue
                                dpsi = w * d
                                if s == 0:
                                    psi1[i] += dpsi
                                else:
                                    psi2[i] += dpsi
                                total_ll += new_ll[i] - ll[i]
                                ll[i] = new_ll[i]
                        if adapting:
                            step_log[j] += gamma * (ap - target_scalar)
                            if step_log[j] < -15.0:
                                step_log[j] = -15.0
                            elif step_log[j] > 5.0:
                                step_log[j] = 5.0
                        if post:
                            prop_out[j] += 1
                            if accepted:
                                acc_out[j] += 1

        # ---- regional means ----
        for r in range(R):
            for m in range(M):
                for s in range(2):
                    j = idx_tr(lay, r, m, s)
                    if not upd[j]:
                        continue
                    d = math.exp(step_log[j]) * rng.standard_normal()
                    sd_t = math.exp(theta[idx_lst(lay, s)])
                    sd_a = math.exp(theta[idx_lsa(lay, s)])
                    tw = theta[idx_tw(lay, m, s)]
                    x = theta[j]
                    dlp = _norm_lp(x + d, tw, sd_t) - _norm_lp(x, tw, sd_t)
                    for ptr in range(reg_ptr[r], reg_ptr[r + 1]):
                        c = reg_idx[ptr]
                        a = theta[idx_alpha(lay, c, m, s)]
                        dlp += _norm_lp(a, x + d, sd_a) - _norm_lp(a, x, sd_a)
                    ap = _accept_prob(dlp)
                    accepted = ap >= 1.0 or rng.random() < ap
                    if accepted:
                        theta[j] += d
                    if adapting:
                        step_log[j] += gamma * (ap - target_scalar)
                    if post:
                        prop_out[j] += 1
                        if accepted:
                            acc_out[j] += 1

        # ---- world means ----
        for m in range(M):
            for s in range(2):
                j = idx_tw(lay, m, s)
                if not upd[j]:
                    continue
                d = math.exp(step_log[j]) * rng.standard_normal()
                sd_t = math.exp(theta[idx_lst(lay, s)])
                x = theta[j]
                dlp = _norm_lp(x + d, 0.0, theta_w_sd) - _norm_lp(x, 0.0, theta_w_sd)
                for r in range(R):
                    t = theta[idx_tr(lay, r, m, s)]
                    dlp += _norm_lp(t, x + d, sd_t) - _norm_lp(t, x, sd_t)
                ap = _accept_prob(dlp)
                accepted = ap >= 1.0 or rng.random() < ap
                if accepted:
                    theta[j] += d
                if adapting:
                    step_log[j] += gamma * (ap - target_scalar)
                if post:
                    prop_out[j] += 1
                    if accepted:
                        acc_out[j] += 1

        # ---- intercept spread ----
        for s in range(2):
            j = idx_lsa(lay, s)
            if not upd[j]:
                continue
            d = math.exp(step_log[j]) * rng.standard_normal()
            x = theta[j]
            dlp = _lsd_prior(x + d, cauchy_scale, cauchy_mode) - _lsd_prior(
                x, cauchy_scale, cauchy_mode
            )
            sd_old = math.exp(x)
            sd_new = math.exp(x + d)
            for c in range(C):
                r = region[c]
                for m in range(M):
                    a = theta[idx_alpha(lay, c, m, s)]
                    tr = theta[idx_tr(lay, r, m, s)]
                    dlp += _norm_lp(a, tr, sd_new) - _norm_lp(a, tr, sd_old)
            ap = _accept_prob(dlp)
            accepted = ap >= 1.0 or rng.random() < ap
            if accepted:
                theta[j] += d
            if adapting:
                step_log[j] += gamma * (ap - target_scalar)
            if post:
                prop_out[j] += 1
                if accepted:
                    acc_out[j] += 1

        # ---- regional spread ----
        for s in range(2):
            j = idx_lst(lay, s)
            if not upd[j]:
                continue
            d = math.exp(step_log[j]) * rng.standard_normal()
            x = theta[j]
            dlp = _lsd_prior(x + d, cauchy_scale, cauchy_mode) - _lsd_prior(
                x, cauchy_scale, cauchy_mode
            )
            sd_old = math.exp(x)
            sd_new = math.exp(x + d)
            for r in range(R):
                for m in range(M):
                    t = theta[idx_tr(lay, r, m, s)]
                    tw = theta[idx_tw(lay, m, s)]
                    dlp += _norm_lp(t, tw, sd_new) - _norm_lp(t, tw, sd_old)
            ap = _accept_prob(dlp)
            accepted = ap >= 1.0 or rng.random() < ap
            if accepted:
                theta[j] += d
            if adapting:
                step_log[j] += gamma * (ap - target_scalar)
            if post:
                prop_out[j] += 1
                if accepted:
                    acc_out[j] += 1

        # ---- difference spread per method ----
        for m in range(M):
            for s in range(2):
                j = idx_lsd(lay, m, s)
                if not upd[j]:
                    continue
                d = math.exp(step_log[j]) * rng.standard_normal()
                x = theta[j]
                dlp = _lsd_prior(x + d, cauchy_scale, cauchy_mode) - _lsd_prior(
                    x, cauchy_scale, cauchy_mode
                )
                # every difference vector in this sector sees the new scale
                n_terms = 0
                quad_sum_old = 0.0
                for c in range(C):
                    for h in range(Hc[c]):
                        n_terms += 1
                        quad_sum_old += _delta_quad(theta, lay, rinv, c, s, h, -1, 0.0)
                theta[j] = x + d
                quad_sum_new = 0.0
                for c in range(C):
                    for h in range(Hc[c]):
                        quad_sum_new += _delta_quad(theta, lay, rinv, c, s, h, -1, 0.0)
                theta[j] = x
                dlp += -n_terms * d - 0.5 * (quad_sum_new - quad_sum_old)
                ap = _accept_prob(dlp)
                accepted = ap >= 1.0 or rng.random() < ap
                if accepted:
                    theta[j] += d
                if adapting:
                    step_log[j] += gamma * (ap - target_scalar)
                if post:
                    prop_out[j] += 1
                    if accepted:
                        acc_out[j] += 1

        if post and (it - n_warmup) % thin == thin - 1:
            for p in range(theta.shape[0]):
                draws_out[store_i, p] = theta[p]
            lp_out[store_i] = total_ll + log_prior_packed(
                theta, lay, region, reg_ptr, reg_idx, Hc, rinv, rlogdet,
                theta_w_sd, cauchy_scale, cauchy_mode,
            )
            store_i += 1

    return RUN_OK


@njit
def phi_trajectories(draws, lay, c, W, Hc_c, out):
    """Sector shares on the year grid for one country, draw by draw.

    ``draws`` is (n_draws, P); ``W`` is the (T, Hmax) grid design of the
    country; ``out`` is (n_draws, T, M, 3). The third share is computed
    as the product complement so all three stay in (0, 1) and sum to 1.
    """
    M = lay[LAY_M]
    T = W.shape[0]
    for dd in range(draws.shape[0]):
        for m in range(M):
            a1 = draws[dd, idx_alpha(lay, c, m, 0)]
            a2 = draws[dd, idx_alpha(lay, c, m, 1)]
            for t in range(T):
                p1 = a1
                p2 = a2
                for h in range(Hc_c):
                    w = W[t, h]
                    if w != 0.0:
                        p1 += w * draws[dd, idx_delta(lay, c, 0, h, m)]
                        p2 += w * draws[dd, idx_delta(lay, c, 1, h, m)]
                g1 = invlogit(p1)
                g2 = invlogit(p2)
                out[dd, t, m, 0] = g1
                out[dd, t, m, 1] = (1.0 - g1) * g2
                out[dd, t, m, 2] = (1.0 - g1) * (1.0 - g2)
