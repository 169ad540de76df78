# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels.

Mirror of ``_hot_py``: same signatures, same arithmetic, same uniform-stream
consumption order.  See that module for the documented contracts.
"""

from libc.math cimport exp, fabs, log

import numpy as np

cimport numpy as cnp

BACKEND_NAME = "compiled"


def tim_path(table, types, fv):
    cdef double[:, ::1] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef cnp.int64_t[::1] ty = np.ascontiguousarray(types, dtype=np.int64)
    cdef double[::1] f = np.ascontiguousarray(fv, dtype=np.float64)
    cdef Py_ssize_t n = ty.shape[0]
    cdef Py_ssize_t L = tab.shape[1] - 1
    out = np.zeros(n + 1)
    cdef double[::1] p = out
    cdef Py_ssize_t s, l, lmax, a
    cdef double v
    if n == 0 or L < 1:
        return out
    for s in range(n):
        v = f[s]
        if v == 0.0:
            continue
        a = ty[s]
        lmax = n - s
        if lmax > L:
            lmax = L
        for l in range(1, lmax + 1):
            p[s + l] += tab[a, l] * v
    return out


def hdim_deltas(g1, kappa, types, eps):
    cdef double[::1] g = np.ascontiguousarray(g1, dtype=np.float64)
    cdef double[:, :, ::1] kap = np.ascontiguousarray(kappa, dtype=np.float64)
    cdef cnp.int64_t[::1] ty = np.ascontiguousarray(types, dtype=np.int64)
    cdef double[::1] e = np.ascontiguousarray(eps, dtype=np.float64)
    cdef Py_ssize_t n = ty.shape[0]
    cdef Py_ssize_t L = kap.shape[2] - 1
    out = np.empty(n)
    cdef double[::1] dp = out
    cdef Py_ssize_t t, l, lmax, b
    cdef double acc
    for t in range(n):
        b = ty[t]
        acc = g[b] * e[t]
        lmax = t if t < L else L
        for l in range(1, lmax + 1):
            acc += kap[ty[t - l], b, l] * e[t - l]
        dp[t] = acc
    return out


cdef int _knuth_poisson(double w, object src) except -1:
    cdef double limit = exp(-w)
    cdef double p = 1.0
    cdef int k = 0
    while True:
        p *= <double> src.next()
        if p <= limit:
            return k
        k += 1


def hawkes_thinning(mu, amps, betas, dirac, double horizon, object src, long max_events):
    cdef double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[:, :, ::1] A = np.ascontiguousarray(amps, dtype=np.float64)
    cdef double[::1] B = np.ascontiguousarray(betas, dtype=np.float64)
    cdef double[:, ::1] W = np.ascontiguousarray(dirac, dtype=np.float64)
    cdef Py_ssize_t d = mu_v.shape[0]
    cdef Py_ssize_t M = B.shape[0]
    cdef double[:, ::1] S = np.zeros((d, M))
    cdef double[::1] lam = np.zeros(d)
    cdef double[::1] dec = np.zeros(M)
    cdef bint has_dirac = False
    cdef Py_ssize_t i, j, m, pick, i2, qi, parent
    cdef long n_emitted = 0, nd, c
    cdef double mu_sum = 0.0, lam_tot, lam_new, wait, t_new, target, cum, t, s, w
    for i in range(d):
        for j in range(d):
            if W[i, j] > 0.0:
                has_dirac = True
    for j in range(d):
        mu_sum += mu_v[j]
    times = []
    comps = []
    t = 0.0
    while True:
        lam_tot = mu_sum
        for j in range(d):
            for m in range(M):
                lam_tot += S[j, m]
        if lam_tot <= 0.0:
            break
        wait = -log(<double> src.next()) / lam_tot
        t_new = t + wait
        if t_new > horizon:
            break
        for m in range(M):
            dec[m] = exp(-B[m] * wait)
        lam_new = 0.0
        for j in range(d):
            s = mu_v[j]
            for m in range(M):
                S[j, m] *= dec[m]
                s += S[j, m]
            lam[j] = s
            lam_new += s
        if (<double> src.next()) * lam_tot <= lam_new:
            target = (<double> src.next()) * lam_new
            cum = 0.0
            pick = d - 1
            for j in range(d):
                cum += lam[j]
                if target <= cum:
                    pick = j
                    break
            times.append(t_new)
            comps.append(pick)
            n_emitted += 1
            for i in range(d):
                for m in range(M):
                    S[i, m] += A[i, pick, m]
            if has_dirac:
                queue = [pick]
                qi = 0
                while qi < len(queue):
                    parent = <Py_ssize_t> queue[qi]
                    qi += 1
                    for i in range(d):
                        w = W[i, parent]
                        if w > 0.0:
                            nd = _knuth_poisson(w, src)
                            for c in range(nd):
                                times.append(t_new)
                                comps.append(i)
                                n_emitted += 1
                                for i2 in range(d):
                                    for m in range(M):
                                        S[i2, m] += A[i2, i, m]
                                queue.append(i)
                    if len(queue) > 100000:
                        raise RuntimeError("same-instant trigger cascade did not terminate")
            if n_emitted > max_events:
                raise RuntimeError(f"event count exceeded max_events={max_events}")
        t = t_new
    return np.asarray(times, dtype=np.float64), np.asarray(comps, dtype=np.int64)


def llob_ftcs(phi_arr, x_arr, double dx, double dt, double D, double nu,
              double lam, source_arr, Py_ssize_t n_steps, bint mass_check=True):
    cdef double[::1] phi = np.ascontiguousarray(phi_arr, dtype=np.float64)
    cdef double[::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[::1] source = np.ascontiguousarray(source_arr, dtype=np.float64)
    cdef Py_ssize_t nx = phi.shape[0]
    cdef double coef = D / (dx * dx)
    prices_out = np.empty(n_steps + 1)
    cdef double[::1] prices = prices_out
    new_arr = np.empty(nx)
    cdef double[::1] new = new_arr
    cdef double max_viol = 0.0
    cdef Py_ssize_t k = -1, step, i
    cdef double p, lap, sgn, rhs, m, amount, w, viol
    cdef double lhs, flux, cancel, depos, rhs_mass, scale, sum_old, sum_new
    cdef double sum_phi, sum_sgn, sum_phi_abs, sum_sgn_abs
    for i in range(nx):
        if phi[i] <= 0.0:
            k = i - 1
            break
    for step in range(n_steps + 1):
        while k > 0 and phi[k] <= 0.0:
            k -= 1
        while k + 2 < nx and phi[k + 1] > 0.0:
            k += 1
        if k < 0 or k + 1 >= nx or not (phi[k] > 0.0 >= phi[k + 1]):
            return prices_out, max_viol, step
        p = x[k] + dx * phi[k] / (phi[k] - phi[k + 1])
        prices[step] = p
        if step == n_steps:
            break
        sum_phi = 0.0
        sum_sgn = 0.0
        sum_phi_abs = 0.0
        sum_sgn_abs = 0.0
        new[0] = phi[0]
        new[nx - 1] = phi[nx - 1]
        for i in range(1, nx - 1):
            lap = (phi[i + 1] - 2.0 * phi[i]) + phi[i - 1]
            if p > x[i]:
                sgn = 1.0
            elif p < x[i]:
                sgn = -1.0
            else:
                sgn = 0.0
            rhs = (coef * lap - nu * phi[i]) + lam * sgn
            new[i] = phi[i] + dt * rhs
            sum_phi += phi[i]
            sum_sgn += sgn
            sum_phi_abs += fabs(phi[i])
            sum_sgn_abs += fabs(sgn)
        m = source[step]
        if m != 0.0:
            amount = m * dt / dx
            w = (p - x[k]) / dx
            new[k] += amount * (1.0 - w)
            new[k + 1] += amount * w
        if mass_check:
            sum_old = 0.0
            sum_new = 0.0
            for i in range(nx):
                sum_old += phi[i]
                sum_new += new[i]
            lhs = (sum_new - sum_old) * dx
            flux = D * ((phi[nx - 1] - phi[nx - 2]) - (phi[1] - phi[0])) / dx
            cancel = nu * sum_phi * dx
            depos = lam * sum_sgn * dx
            rhs_mass = dt * (flux - cancel + depos) + m * dt
            # normalize by gross turnover: the net terms cancel exactly on an
            # antisymmetric book and would leave a zero denominator
            scale = dt * (fabs(flux) + nu * sum_phi_abs * dx
                          + lam * sum_sgn_abs * dx + fabs(m)) + 1e-300
            viol = abs(lhs - rhs_mass) / scale
            if viol > max_viol:
                max_viol = viol
        for i in range(nx):
            phi[i] = new[i]
    return prices_out, max_viol, -1


def selfconsistent_sweep(t_arr, tm_arr, w_arr, r_arr, y_arr):
    cdef double[::1] t = np.ascontiguousarray(t_arr, dtype=np.float64)
    cdef double[::1] tm = np.ascontiguousarray(tm_arr, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(r_arr, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_arr, dtype=np.float64)
    cdef Py_ssize_t n = tm.shape[0]
    out = np.zeros(n + 1)
    cdef double[::1] g = out
    ym_arr = np.empty(n)
    cdef double[::1] ym = ym_arr
    cdef Py_ssize_t i, j
    cdef double acc, yi, ti, wv, dyv, dtv
    for j in range(n):
        ym[j] = 0.5 * (y[j] + y[j + 1])
    for i in range(1, n + 1):
        acc = 0.0
        yi = y[i]
        ti = t[i]
        for j in range(i):
            wv = w[i, j]
            if wv != 0.0:
                dyv = yi - ym[j]
                dtv = ti - tm[j]
                acc += wv * r[j] * exp(-(dyv * dyv) / (4.0 * dtv))
        g[i] = acc
    return out
