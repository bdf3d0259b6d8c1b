# Compiled inner loops shared by simulation, likelihood and estimation.
#
# Kernels are passed as flat term tables (see model.kernel_tables): every
# exponential term is (target, source, alpha, beta) and every power-law entry
# is (target, source, u, v, w).  Exponential terms use the O(1) per-event
# decay recursion; power-law terms sum over all earlier source events.

import math

import numpy as np
from numba import njit

LOG_FLOOR = 1e-300
GENERIC_POW = 1 << 20


@njit(cache=True, inline="always")
def _power_code(a):
    """``2a`` when it is a small integer (fast path in ``_pow``), else a sentinel."""
    k2 = 2.0 * a
    if k2 == math.floor(k2) and abs(k2) <= 16.0:
        return int(k2)
    return GENERIC_POW


@njit(cache=True, inline="always")
def _pow(x, a, k2):
    """``x ** a`` for ``x > 0``; half-integer exponents avoid the libm call."""
    if k2 == GENERIC_POW:
        return x ** a
    m = abs(k2) // 2
    r = math.sqrt(x) if abs(k2) % 2 == 1 else 1.0
    for _ in range(m):
        r *= x
    return 1.0 / r if k2 < 0 else r


@njit(cache=True)
def scan(times, comps, horizon, baseline, excess, inv_c0,
         e_tgt, e_src, e_a, e_b, p_tgt, p_src, p_u, p_v, p_w):
    """Single pass over a (pooled, ordered) series.

    Returns ``(lam_own, lam_tot, integral, compens, log_sum, n_clamped)``:
    left-limit intensity of each event's own component, left-limit total
    intensity, per-component integral over ``[0, horizon]``, per-event
    compensator since the previous event of the same component (NaN for the
    first one), per-component sum of ``log lam_own`` and the number of
    intensities floored before the log.

    ``excess[m] * inv_c0[m]`` scales the decaying baseline correction
    ``sum_n G^{mn}(t)``; pass zeros for the constant-baseline model.
    """
    n = times.size
    M = baseline.size
    ne = e_a.size
    npl = p_u.size
    modified = False
    for m in range(M):
        if excess[m] != 0.0:
            modified = True

    state = np.zeros(ne)
    corr_e = np.ones(ne)  # exp(-beta t) at the previous grid time
    pl_prev = np.empty((npl, n))  # (t_prev - t_k + v)^(w+1)
    code_w = np.empty(npl, dtype=np.int64)
    code_w1 = np.empty(npl, dtype=np.int64)
    for j in range(npl):
        code_w[j] = _power_code(p_w[j])
        code_w1[j] = _power_code(p_w[j] + 1.0)

    lam_own = np.empty(n)
    lam_tot = np.empty(n)
    integral = np.zeros(M)
    acc = np.zeros(M)
    seen = np.zeros(M, dtype=np.bool_)
    compens = np.full(n, np.nan)
    log_sum = np.zeros(M)
    piece = np.zeros(M)
    lam = np.zeros(M)
    n_clamped = 0

    t_prev = 0.0
    for i in range(n + 1):
        t = times[i] if i < n else horizon
        dt = t - t_prev
        for m in range(M):
            piece[m] = baseline[m] * dt
            lam[m] = baseline[m]
        for j in range(ne):
            d = math.exp(-e_b[j] * dt)
            tg = e_tgt[j]
            piece[tg] += e_a[j] / e_b[j] * state[j] * (1.0 - d)
            state[j] *= d
            lam[tg] += e_a[j] * state[j]
            if modified:
                scale = excess[tg] * inv_c0[tg]
                new = corr_e[j] * d
                piece[tg] += scale * e_a[j] / e_b[j] * (corr_e[j] - new)
                corr_e[j] = new
                lam[tg] += scale * e_a[j] * new
        for j in range(npl):
            tg = p_tgt[j]
            src = p_src[j]
            u = p_u[j]
            v = p_v[j]
            w1 = p_w[j] + 1.0
            c1 = code_w1[j]
            cu = u / w1
            s_int = 0.0
            s_lam = 0.0
            for k in range(i):
                if comps[k] != src:
                    continue
                x = t - times[k] + v
                pw = _pow(x, w1, c1)
                s_int += pw - pl_prev[j, k]
                pl_prev[j, k] = pw
                s_lam += pw / x
            piece[tg] += cu * s_int
            lam[tg] += u * s_lam
            if modified:
                scale = excess[tg] * inv_c0[tg]
                piece[tg] += scale * cu * (_pow(t + v, w1, c1) - _pow(t_prev + v, w1, c1))
                lam[tg] += scale * u * _pow(t + v, p_w[j], code_w[j])
        for m in range(M):
            integral[m] += piece[m]
            acc[m] += piece[m]
        if i == n:
            break
        mi = comps[i]
        tot = 0.0
        for m in range(M):
            tot += lam[m]
        lo = lam[mi]
        if lo < LOG_FLOOR:
            lo = LOG_FLOOR
            n_clamped += 1
        lam_own[i] = lam[mi]
        lam_tot[i] = tot
        log_sum[mi] += math.log(lo)
        if seen[mi]:
            compens[i] = acc[mi]
        seen[mi] = True
        acc[mi] = 0.0
        for j in range(ne):
            if e_src[j] == mi:
                state[j] += 1.0
        for j in range(npl):
            pl_prev[j, i] = _pow(p_v[j], p_w[j] + 1.0, code_w1[j])
        t_prev = t
    return lam_own, lam_tot, integral, compens, log_sum, n_clamped


@njit(cache=True)
def first_crossing(times, comps, baseline, e_tgt, e_src, e_a, e_b,
                   p_tgt, p_src, p_u, p_v, p_w, threshold):
    """Index of the first event whose left-limit total intensity reaches ``threshold``; -1 if none."""
    n = times.size
    ne = e_a.size
    npl = p_u.size
    state = np.zeros(ne)
    base = 0.0
    for m in range(baseline.size):
        base += baseline[m]
    t_prev = 0.0
    for i in range(n):
        t = times[i]
        dt = t - t_prev
        tot = base
        for j in range(ne):
            state[j] *= math.exp(-e_b[j] * dt)
            tot += e_a[j] * state[j]
        for j in range(npl):
            s = 0.0
            cw = _power_code(p_w[j])
            for k in range(i):
                if comps[k] == p_src[j]:
                    s += _pow(t - times[k] + p_v[j], p_w[j], cw)
            tot += p_u[j] * s
        if tot >= threshold:
            return i
        mi = comps[i]
        for j in range(ne):
            if e_src[j] == mi:
                state[j] += 1.0
        t_prev = t
    return -1


@njit(cache=True)
def _intensities(lam, t, baseline, e_tgt, e_a, state, times, comps, n_acc,
                 p_tgt, p_src, p_u, p_v, p_w):
    M = baseline.size
    for m in range(M):
        lam[m] = baseline[m]
    for j in range(e_a.size):
        lam[e_tgt[j]] += e_a[j] * state[j]
    for j in range(p_u.size):
        s = 0.0
        cw = _power_code(p_w[j])
        for k in range(n_acc):
            if comps[k] == p_src[j]:
                s += _pow(t - times[k] + p_v[j], p_w[j], cw)
        lam[p_tgt[j]] += p_u[j] * s
    tot = 0.0
    for m in range(M):
        tot += lam[m]
    return tot


@njit(cache=True)
def thin(rng, horizon, baseline, e_tgt, e_src, e_a, e_b,
         p_tgt, p_src, p_u, p_v, p_w, capacity):
    """Ogata thinning on ``[0, horizon]``.

    The dominating rate is the total intensity just after the latest event or
    candidate, which bounds the intensity until the next event because every
    kernel is nonincreasing.  Returns ``(times, comps, n_candidates,
    n_bound_violations)``.
    """
    M = baseline.size
    ne = e_a.size
    cap = max(capacity, 16)
    times = np.empty(cap)
    comps = np.empty(cap, dtype=np.int64)
    state = np.zeros(ne)
    lam = np.zeros(M)
    n_acc = 0
    n_cand = 0
    n_viol = 0
    t = 0.0
    bound = _intensities(lam, t, baseline, e_tgt, e_a, state, times, comps, n_acc,
                         p_tgt, p_src, p_u, p_v, p_w)
    while True:
        s = t + rng.standard_exponential() / bound
        if s <= t:
            s = np.nextafter(t, np.inf)
        if s > horizon:
            break
        n_cand += 1
        dt = s - t
        for j in range(ne):
            state[j] *= math.exp(-e_b[j] * dt)
        t = s
        tot = _intensities(lam, t, baseline, e_tgt, e_a, state, times, comps, n_acc,
                           p_tgt, p_src, p_u, p_v, p_w)
        if tot > bound * (1.0 + 1e-12):
            n_viol += 1
        if rng.random() * bound <= tot:
            x = rng.random() * tot
            mi = M - 1
            c = 0.0
            for m in range(M):
                c += lam[m]
                if x < c:
                    mi = m
                    break
            if n_acc == cap:
                cap *= 2
                nt = np.empty(cap)
                nc = np.empty(cap, dtype=np.int64)
                nt[:n_acc] = times[:n_acc]
                nc[:n_acc] = comps[:n_acc]
                times = nt
                comps = nc
            times[n_acc] = t
            comps[n_acc] = mi
            n_acc += 1
            for j in range(ne):
                if e_src[j] == mi:
                    state[j] += 1.0
            bound = _intensities(lam, t, baseline, e_tgt, e_a, state, times, comps, n_acc,
                                 p_tgt, p_src, p_u, p_v, p_w)
        else:
            bound = tot
    return times[:n_acc].copy(), comps[:n_acc].copy(), n_cand, n_viol


@njit(cache=True)
def sumexp_loglik_grad(times, horizon, lam0, alphas, betas, modified):
    """Univariate sum-of-exponentials log-likelihood and its gradient.

    Gradient order is ``(lam0, alpha_1..alpha_P, beta_1..beta_P)``.  Returns
    ``(-inf, nan-grad, clamps)`` when the modified variant is requested for a
    non-stationary parameter set.
    """
    P = alphas.size
    N = times.size
    T = horizon
    grad = np.zeros(1 + 2 * P)
    nn = 0.0
    S = 0.0
    for j in range(P):
        nn += alphas[j] / betas[j]
        S += alphas[j]
    R = 0.0
    dR_l = 0.0
    dR_a = np.zeros(P)
    dR_b = np.zeros(P)
    if modified and S > 0.0:
        if nn >= 1.0:
            grad[:] = np.nan
            return -np.inf, grad, 0
        D = lam0 * nn / (1.0 - nn)
        dD_n = lam0 / (1.0 - nn) ** 2
        R = D / S
        dR_l = nn / ((1.0 - nn) * S)
        for j in range(P):
            dR_a[j] = dD_n / betas[j] / S - D / (S * S)
            dR_b[j] = -dD_n * alphas[j] / (betas[j] * betas[j]) / S

    A = np.zeros(P)
    B = np.zeros(P)
    g = np.ones(P)  # exp(-beta_j t_i)
    s_inv = 0.0
    s_A = np.zeros(P)
    s_B = np.zeros(P)
    s_E = 0.0
    s_g = np.zeros(P)
    s_tg = np.zeros(P)
    log_sum = 0.0
    clamps = 0
    t_prev = 0.0
    for i in range(N):
        t = times[i]
        dt = t - t_prev
        lam = lam0
        E = 0.0
        for j in range(P):
            d = math.exp(-betas[j] * dt)
            if i > 0:
                B[j] = d * (B[j] + dt * (A[j] + 1.0))
                A[j] = d * (A[j] + 1.0)
            g[j] *= d
            lam += alphas[j] * A[j]
            E += alphas[j] * g[j]
        lam += R * E
        if lam < LOG_FLOOR:
            lam = LOG_FLOOR
            clamps += 1
        log_sum += math.log(lam)
        inv = 1.0 / lam
        s_inv += inv
        s_E += E * inv
        for j in range(P):
            s_A[j] += A[j] * inv
            s_B[j] += B[j] * inv
            s_g[j] += g[j] * inv
            s_tg[j] += t * g[j] * inv
        t_prev = t

    ll = -lam0 * T + log_sum
    grad[0] = -T + s_inv + dR_l * s_E
    F = 0.0
    dF_a = np.zeros(P)
    dF_b = np.zeros(P)
    for j in range(P):
        a = alphas[j]
        b = betas[j]
        if N > 0:
            dt = T - times[N - 1]
            d = math.exp(-b * dt)
            AT = d * (A[j] + 1.0)
            BT = d * (B[j] + dt * (A[j] + 1.0))
        else:
            AT = 0.0
            BT = 0.0
        Q = N - AT
        ll -= a / b * Q
        grad[1 + j] += -Q / b + s_A[j]
        grad[1 + P + j] += a * Q / (b * b) - a / b * BT - a * s_B[j]
        eT = math.exp(-b * T)
        F += a / b * (1.0 - eT)
        dF_a[j] = (1.0 - eT) / b
        dF_b[j] = -a / (b * b) * (1.0 - eT) + a / b * T * eT
    if R != 0.0:
        ll -= R * F
        grad[0] -= dR_l * F
        for j in range(P):
            grad[1 + j] += -(dR_a[j] * F + R * dF_a[j]) + dR_a[j] * s_E + R * s_g[j]
            grad[1 + P + j] += -(dR_b[j] * F + R * dF_b[j]) + dR_b[j] * s_E - R * alphas[j] * s_tg[j]
    return ll, grad, clamps


@njit(cache=True)
def lag_pair_counts(bins, max_lag):
    """``S[k] = sum_i c_i c_{i+k}`` from sorted bin indices, without materialising the counts.

    Each ordered pair of events ``a < b`` whose bins differ by ``k`` adds one
    to ``S[k]`` (two to ``S[0]`` for distinct events sharing a bin, since
    ``c^2`` counts both orders; each event adds one to ``S[0]`` for itself).
    """
    n = bins.size
    S = np.zeros(max_lag + 1, dtype=np.int64)
    for a in range(n):
        S[0] += 1
        b = a + 1
        while b < n and bins[b] - bins[a] <= max_lag:
            k = bins[b] - bins[a]
            if k == 0:
                S[0] += 2
            else:
                S[k] += 1
            b += 1
    return S
