"""MINRES for symmetric (possibly indefinite) operators given as callables."""
import numpy as np


def minres(apply, b, x0=None, tol=1e-12, max_iter=1000):
    """Solve apply(x) = b by the Lanczos-based minimum residual method.

    ``tol`` is an absolute bound on the Euclidean residual norm. Returns
    ``(x, residual, iterations)`` where ``residual`` is recomputed from
    scratch, not the recurrence estimate.
    """
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r1 = b - apply(x) if x0 is not None else b.copy()
    beta1 = np.sqrt(r1 @ r1)
    if beta1 <= tol:
        return x, beta1, 0
    y = r1
    r2 = r1
    beta, oldb = beta1, 0.0
    dbar = epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros_like(b)
    w2 = np.zeros_like(b)
    itn = 0
    while itn < max_iter:
        itn += 1
        v = y / beta
        y = apply(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = v @ y
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        oldb, beta = beta, np.sqrt(y @ y)
        # previous rotation, then a new one to annihilate beta
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).tiny)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar
        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        if phibar <= tol or beta == 0.0:
            break
    r = b - apply(x)
    return x, float(np.sqrt(r @ r)), itn
