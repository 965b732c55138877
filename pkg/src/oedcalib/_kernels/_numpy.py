"""Vectorised numpy implementations of the hot kernels."""

import numpy as np

GOLDEN = 0.3819660112501051


def quad_form_rows(X, A):
    return np.einsum("ij,jk,ik->i", X, A, X)


def weighted_gram(X, w):
    return (X * w[:, None]).T @ X


def radiochromic_grad(y, alpha, beta, gamma):
    """Columns of d mu / d theta and d mu / d y for mu = alpha*y + beta*y**gamma."""
    y = np.asarray(y, dtype=float)
    yg = y**gamma
    pos = y > 0
    logy = np.zeros_like(y)
    logy[pos] = np.log(y[pos])
    dtheta = np.empty(y.shape + (3,))
    dtheta[..., 0] = y
    dtheta[..., 1] = yg
    dtheta[..., 2] = beta * yg * logy
    dy = np.full_like(y, alpha)
    dy[pos] += beta * gamma * y[pos] ** (gamma - 1.0)
    return dtheta, dy


def inv_equilibrated(M):
    d = np.diag(M)
    s = 1.0 / np.sqrt(d)
    E = M * np.outer(s, s)
    inv = np.linalg.inv(0.5 * (E + E.T)) * np.outer(s, s)
    return 0.5 * (inv + inv.T)


def _gi_value(M, G):
    return np.max(quad_form_rows(G, inv_equilibrated(M)))


def _vi_value(M, A, length):
    return np.trace(inv_equilibrated(M) @ A) / length


def _line_search(fun, hi=0.5, iters=40):
    # golden section on [0, hi]
    a, b = 0.0, hi
    c = a + GOLDEN * (b - a)
    d = b - GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = a + GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = b - GOLDEN * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def wynn_gi(F, G, w0, max_iter, window, rtol, line_search, refresh):
    """Vertex-direction iteration toward the inverse-prediction variance maximiser.

    Returns ``(w_best, w_last, iterations, best_phi, trace, converged)``;
    ``trace`` holds the best-so-far criterion value per iteration.
    """
    w = w0.copy()
    M = weighted_gram(F, w)
    trace = np.empty(max_iter)
    best = np.inf
    w_best = w.copy()
    converged = False
    s = 0
    for s in range(1, max_iter + 1):
        v = quad_form_rows(G, inv_equilibrated(M))
        k = int(np.argmax(v))
        phi = v[k]
        if phi < best:
            best = phi
            w_best = w.copy()
        trace[s - 1] = best
        if s > window and trace[s - 1 - window] - best < rtol * best:
            converged = True
            break
        fk = np.outer(F[k], F[k])
        if line_search:
            alpha = _line_search(lambda a: _gi_value((1 - a) * M + a * fk, G))
        else:
            alpha = 1.0 / (s + 1)
        w *= 1.0 - alpha
        w[k] += alpha
        if s % refresh == 0:
            M = weighted_gram(F, w)
        else:
            M = (1.0 - alpha) * M + alpha * fk
    return w_best, w, s, best, trace[:s].copy(), converged


def wynn_vi(F, A, length, w0, max_iter, delta, line_search, refresh):
    """Vertex-direction iteration for the averaged inverse-prediction variance.

    Stops once the equivalence-theorem efficiency bound reaches ``delta``.
    Returns ``(w, iterations, bound, phi, trace, converged)``.
    """
    w = w0.copy()
    M = weighted_gram(F, w)
    trace = np.empty(max_iter)
    converged = False
    bound = -np.inf
    phi = np.inf
    s = 0
    for s in range(1, max_iter + 1):
        Minv = inv_equilibrated(M)
        phi = np.trace(Minv @ A) / length
        q = quad_form_rows(F, Minv @ A @ Minv) / length
        k = int(np.argmax(q))
        bound = 1.0 + (phi - q[k]) / phi
        trace[s - 1] = phi
        if bound >= delta:
            converged = True
            break
        fk = np.outer(F[k], F[k])
        if line_search:
            alpha = _line_search(lambda a: _vi_value((1 - a) * M + a * fk, A, length))
        else:
            alpha = 1.0 / (s + 1)
        w *= 1.0 - alpha
        w[k] += alpha
        if s % refresh == 0:
            M = weighted_gram(F, w)
        else:
            M = (1.0 - alpha) * M + alpha * fk
    return w, s, bound, phi, trace[:s].copy(), converged
