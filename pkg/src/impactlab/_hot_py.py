"""Pure-python/numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension is missing
(or when IMPACTLAB_PURE_PYTHON=1).  Function signatures and random-number
consumption order match ``_hot.pyx`` exactly; the Hawkes loop even uses
``math.exp``/``math.log`` scalars so accept/reject decisions are bit-identical
to the C version.
"""

from math import exp, log

import numpy as np

BACKEND_NAME = "pure"


def tim_path(table, types, fv):
    """Price path p[0..N] with p[t] = sum_{s<t} table[type_s, t-s] * fv[s].

    table[a, l] holds the lag-l kernel value for event type a; column 0 is
    ignored (lag zero never enters the sum).
    """
    table = np.asarray(table, dtype=np.float64)
    types = np.asarray(types, dtype=np.int64)
    fv = np.asarray(fv, dtype=np.float64)
    n = types.shape[0]
    p = np.zeros(n + 1)
    if n == 0 or table.shape[1] < 2:
        return p
    for a in range(table.shape[0]):
        mask = types == a
        if not mask.any():
            continue
        c = np.where(mask, fv, 0.0)
        p[1:] += np.convolve(c, table[a, 1:])[:n]
    return p


def hdim_deltas(g1, kappa, types, eps):
    """Per-event price increments of the history-dependent model.

    dp[t] = g1[pi_t] * eps[t] + sum_{s<t} kappa[pi_s, pi_t, t-s] * eps[s]
    """
    g1 = np.asarray(g1, dtype=np.float64)
    kappa = np.asarray(kappa, dtype=np.float64)
    types = np.asarray(types, dtype=np.int64)
    eps = np.asarray(eps, dtype=np.float64)
    n = types.shape[0]
    dp = g1[types] * eps
    if n == 0 or kappa.shape[2] < 2:
        return dp
    for a in range(kappa.shape[0]):
        c = np.where(types == a, eps, 0.0)
        if not c.any():
            continue
        for b in range(kappa.shape[1]):
            sel = types == b
            if not sel.any():
                continue
            conv = np.convolve(c, kappa[a, b, 1:])[: n - 1] if n > 1 else np.zeros(0)
            contrib = np.zeros(n)
            contrib[1:] = conv
            dp[sel] += contrib[sel]
    return dp


def _knuth_poisson(w, src):
    limit = exp(-w)
    k = 0
    p = 1.0
    while True:
        p *= src.next()
        if p <= limit:
            return k
        k += 1


def hawkes_thinning(mu, amps, betas, dirac, horizon, src, max_events):
    """Exact thinning for a multivariate Hawkes process with
    sums-of-exponentials kernels plus optional same-instant (Dirac) triggering.

    Between events the total intensity only decays, so the intensity at the
    last evaluation is a valid upper bound.  Draw order per candidate:
    waiting time, accept/reject, then component selection on acceptance.
    """
    d = len(mu)
    M = len(betas)
    mu_l = [float(v) for v in np.asarray(mu, dtype=np.float64)]
    A = np.asarray(amps, dtype=np.float64).tolist()
    B = [float(v) for v in np.asarray(betas, dtype=np.float64)]
    W = np.asarray(dirac, dtype=np.float64).tolist()
    has_dirac = any(w > 0.0 for row in W for w in row)
    S = [[0.0] * M for _ in range(d)]
    lam = [0.0] * d
    dec = [0.0] * M
    mu_sum = 0.0
    for j in range(d):
        mu_sum += mu_l[j]
    times = []
    comps = []
    t = 0.0
    while True:
        lam_tot = mu_sum
        for j in range(d):
            Sj = S[j]
            for m in range(M):
                lam_tot += Sj[m]
        if lam_tot <= 0.0:
            break
        wait = -log(src.next()) / lam_tot
        t_new = t + wait
        if t_new > horizon:
            break
        for m in range(M):
            dec[m] = exp(-B[m] * wait)
        lam_new = 0.0
        for j in range(d):
            s = mu_l[j]
            Sj = S[j]
            for m in range(M):
                Sj[m] *= dec[m]
                s += Sj[m]
            lam[j] = s
            lam_new += s
        u2 = src.next()
        if u2 * lam_tot <= lam_new:
            target = src.next() * lam_new
            cum = 0.0
            pick = d - 1
            for j in range(d):
                cum += lam[j]
                if target <= cum:
                    pick = j
                    break
            times.append(t_new)
            comps.append(pick)
            for i in range(d):
                Ai = A[i][pick]
                Si = S[i]
                for m in range(M):
                    Si[m] += Ai[m]
            if has_dirac:
                queue = [pick]
                qi = 0
                while qi < len(queue):
                    parent = queue[qi]
                    qi += 1
                    for i in range(d):
                        w = W[i][parent]
                        if w > 0.0:
                            for _ in range(_knuth_poisson(w, src)):
                                times.append(t_new)
                                comps.append(i)
                                for i2 in range(d):
                                    A2 = A[i2][i]
                                    S2 = S[i2]
                                    for m in range(M):
                                        S2[m] += A2[m]
                                queue.append(i)
                    if len(queue) > 100000:
                        raise RuntimeError("same-instant trigger cascade did not terminate")
            if len(times) > max_events:
                raise RuntimeError(f"event count exceeded max_events={max_events}")
        t = t_new
    return np.asarray(times, dtype=np.float64), np.asarray(comps, dtype=np.int64)


def llob_ftcs(phi, x, dx, dt, D, nu, lam, source, n_steps, mass_check=True):
    """Explicit FTCS step loop for the signed latent-liquidity density.

    phi is evolved in place; endpoints are Dirichlet (held fixed).  The
    metaorder source deposits source[k]*dt shares per step, split between the
    two cells bracketing the interpolated zero crossing of phi.

    Returns (prices, max_mass_violation, lost_step); lost_step is -1 unless
    the zero crossing disappeared at some step.
    """
    phi = np.asarray(phi, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    nx = phi.shape[0]
    coef = D / (dx * dx)
    prices = np.empty(n_steps + 1)
    max_viol = 0.0
    k = int(np.argmax(phi <= 0.0)) - 1 if (phi <= 0.0).any() else -1
    xi = x[1:-1]
    for step in range(n_steps + 1):
        # locate the sign change phi[k] > 0 >= phi[k+1], walking from the
        # previous bracket
        while k > 0 and phi[k] <= 0.0:
            k -= 1
        while k + 2 < nx and phi[k + 1] > 0.0:
            k += 1
        if k < 0 or k + 1 >= nx or not (phi[k] > 0.0 >= phi[k + 1]):
            return prices, max_viol, step
        p = x[k] + dx * phi[k] / (phi[k] - phi[k + 1])
        prices[step] = p
        if step == n_steps:
            break
        lap = (phi[2:] - 2.0 * phi[1:-1]) + phi[:-2]
        sgn = np.sign(p - xi)
        rhs = (coef * lap - nu * phi[1:-1]) + lam * sgn
        new = phi.copy()
        new[1:-1] = phi[1:-1] + dt * rhs
        m = source[step]
        if m != 0.0:
            amount = m * dt / dx
            w = (p - x[k]) / dx
            new[k] += amount * (1.0 - w)
            new[k + 1] += amount * w
        if mass_check:
            lhs = (new.sum() - phi.sum()) * dx
            flux = D * ((phi[-1] - phi[-2]) - (phi[1] - phi[0])) / dx
            cancel = nu * phi[1:-1].sum() * dx
            depos = lam * sgn.sum() * dx
            rhs_mass = dt * (flux - cancel + depos) + m * dt
            # normalize by gross turnover: the net terms cancel exactly on an
            # antisymmetric book and would leave a zero denominator
            gross = (
                abs(flux)
                + nu * np.abs(phi[1:-1]).sum() * dx
                + lam * np.abs(sgn).sum() * dx
                + abs(m)
            )
            scale = dt * gross + 1e-300
            viol = abs(lhs - rhs_mass) / scale
            if viol > max_viol:
                max_viol = viol
        phi[:] = new
    return prices, max_viol, -1


def selfconsistent_sweep(t, tm, w, r, y):
    """One undamped update of the self-consistent price trajectory.

    g[i] = sum_{j<i} w[i,j] * r[j] * exp(-(y[i]-ym[j])^2 / (4*(t[i]-tm[j])))

    where ym[j] is the midpoint value of y on segment j and w holds the
    exact integrals of the 1/sqrt diffusion kernel over each segment
    (zero where the segment is not in the past of t[i]).
    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ym = 0.5 * (y[:-1] + y[1:])
    dy = y[:, None] - ym[None, :]
    dts = t[:, None] - tm[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        e = np.exp(-(dy * dy) / (4.0 * dts))
    e = np.where(dts > 0.0, e, 0.0)
    g = (w * r * e).sum(axis=1)
    g[0] = 0.0
    return g
