"""Loop-based numba implementations; same signatures as ``_numpy``."""

import numpy as np
from numba import njit

GOLDEN = 0.3819660112501051

_opts = dict(cache=True, nogil=True, fastmath=False)


@njit(**_opts)
def quad_form_rows(X, A):
    n, m = X.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(m):
            t = 0.0
            for k in range(m):
                t += A[j, k] * X[i, k]
            acc += X[i, j] * t
        out[i] = acc
    return out


@njit(**_opts)
def weighted_gram(X, w):
    n, m = X.shape
    M = np.zeros((m, m))
    for i in range(n):
        wi = w[i]
        if wi == 0.0:
            continue
        for j in range(m):
            xj = wi * X[i, j]
            for k in range(j, m):
                M[j, k] += xj * X[i, k]
    for j in range(m):
        for k in range(j + 1, m):
            M[k, j] = M[j, k]
    return M


@njit(**_opts)
def _radiochromic_grad_flat(y, alpha, beta, gamma):
    n = y.shape[0]
    dtheta = np.empty((n, 3))
    dy = np.empty(n)
    for i in range(n):
        yi = y[i]
        if yi > 0.0:
            yg = yi**gamma
            dtheta[i, 0] = yi
            dtheta[i, 1] = yg
            dtheta[i, 2] = beta * yg * np.log(yi)
            dy[i] = alpha + beta * gamma * yi ** (gamma - 1.0)
        else:
            # y <= 0 only reaches here as y == 0 (domain checks upstream)
            dtheta[i, 0] = yi
            dtheta[i, 1] = 0.0
            dtheta[i, 2] = 0.0
            dy[i] = alpha
    return dtheta, dy


def radiochromic_grad(y, alpha, beta, gamma):
    y = np.asarray(y, dtype=float)
    flat = np.ascontiguousarray(y.reshape(-1))
    dtheta, dy = _radiochromic_grad_flat(flat, float(alpha), float(beta), float(gamma))
    return dtheta.reshape(y.shape + (3,)), dy.reshape(y.shape)


@njit(**_opts)
def inv_equilibrated(M):
    m = M.shape[0]
    s = np.empty(m)
    for i in range(m):
        s[i] = 1.0 / np.sqrt(M[i, i])
    E = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            E[i, j] = 0.5 * (M[i, j] + M[j, i]) * s[i] * s[j]
    Ei = np.linalg.inv(E)
    out = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            out[i, j] = 0.5 * (Ei[i, j] + Ei[j, i]) * s[i] * s[j]
    return out


@njit(**_opts)
def _rank_one_mix(M, f, a):
    m = M.shape[0]
    out = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            out[i, j] = (1.0 - a) * M[i, j] + a * f[i] * f[j]
    return out


@njit(**_opts)
def _gi_value(M, G):
    v = quad_form_rows(G, inv_equilibrated(M))
    return v.max()


@njit(**_opts)
def _vi_value(M, A, length):
    Minv = inv_equilibrated(M)
    m = M.shape[0]
    t = 0.0
    for i in range(m):
        for j in range(m):
            t += Minv[i, j] * A[j, i]
    return t / length


@njit(**_opts)
def _line_search_gi(M, f, G, hi, iters):
    a, b = 0.0, hi
    c = a + GOLDEN * (b - a)
    d = b - GOLDEN * (b - a)
    fc = _gi_value(_rank_one_mix(M, f, c), G)
    fd = _gi_value(_rank_one_mix(M, f, d), G)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = a + GOLDEN * (b - a)
            fc = _gi_value(_rank_one_mix(M, f, c), G)
        else:
            a, c, fc = c, d, fd
            d = b - GOLDEN * (b - a)
            fd = _gi_value(_rank_one_mix(M, f, d), G)
    return 0.5 * (a + b)


@njit(**_opts)
def _line_search_vi(M, f, A, length, hi, iters):
    a, b = 0.0, hi
    c = a + GOLDEN * (b - a)
    d = b - GOLDEN * (b - a)
    fc = _vi_value(_rank_one_mix(M, f, c), A, length)
    fd = _vi_value(_rank_one_mix(M, f, d), A, length)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = a + GOLDEN * (b - a)
            fc = _vi_value(_rank_one_mix(M, f, c), A, length)
        else:
            a, c, fc = c, d, fd
            d = b - GOLDEN * (b - a)
            fd = _vi_value(_rank_one_mix(M, f, d), A, length)
    return 0.5 * (a + b)


@njit(**_opts)
def wynn_gi(F, G, w0, max_iter, window, rtol, line_search, refresh):
    w = w0.copy()
    M = weighted_gram(F, w)
    trace = np.empty(max_iter)
    best = np.inf
    w_best = w.copy()
    converged = False
    s = 0
    for s in range(1, max_iter + 1):
        v = quad_form_rows(G, inv_equilibrated(M))
        k = np.argmax(v)
        phi = v[k]
        if phi < best:
            best = phi
            w_best[:] = w
        trace[s - 1] = best
        if s > window and trace[s - 1 - window] - best < rtol * best:
            converged = True
            break
        if line_search:
            alpha = _line_search_gi(M, F[k], G, 0.5, 40)
        else:
            alpha = 1.0 / (s + 1)
        for i in range(w.shape[0]):
            w[i] *= 1.0 - alpha
        w[k] += alpha
        if s % refresh == 0:
            M = weighted_gram(F, w)
        else:
            M = _rank_one_mix(M, F[k], alpha)
    return w_best, w, s, best, trace[:s].copy(), converged


@njit(**_opts)
def wynn_vi(F, A, length, w0, max_iter, delta, line_search, refresh):
    w = w0.copy()
    M = weighted_gram(F, w)
    trace = np.empty(max_iter)
    converged = False
    bound = -np.inf
    phi = np.inf
    s = 0
    for s in range(1, max_iter + 1):
        Minv = inv_equilibrated(M)
        B = Minv @ A @ Minv
        phi = 0.0
        m = M.shape[0]
        for i in range(m):
            for j in range(m):
                phi += Minv[i, j] * A[j, i]
        phi /= length
        q = quad_form_rows(F, B)
        k = np.argmax(q)
        bound = 1.0 + (phi - q[k] / length) / phi
        trace[s - 1] = phi
        if bound >= delta:
            converged = True
            break
        if line_search:
            alpha = _line_search_vi(M, F[k], A, length, 0.5, 40)
        else:
            alpha = 1.0 / (s + 1)
        for i in range(w.shape[0]):
            w[i] *= 1.0 - alpha
        w[k] += alpha
        if s % refresh == 0:
            M = weighted_gram(F, w)
        else:
            M = _rank_one_mix(M, F[k], alpha)
    return w, s, bound, phi, trace[:s].copy(), converged
