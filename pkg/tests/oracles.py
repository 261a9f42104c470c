"""Independent oracles used to freeze expected values.

Everything here deliberately avoids the library's solver paths: shares are
computed with plain (unshifted) arithmetic on small well-scaled instances,
and the root of S = s(delta) is found by a damped Newton iteration with an
analytic Jacobian.
"""

import numpy as np


def naive_shares(delta, mu, weights):
    """Plain mixed-logit shares, no overflow guards (small instances only)."""
    e = np.exp(delta[None, :] + mu)
    denom = 1.0 + e.sum(axis=1)
    s_ij = e / denom[:, None]
    return weights @ s_ij, float(weights @ (1.0 / denom)), s_ij


def share_jacobian(delta, mu, weights):
    """d log s_j / d delta_k for the mixed logit."""
    s_j, _, s_ij = naive_shares(delta, mu, weights)
    J = delta.size
    jac = np.empty((J, J))
    for j in range(J):
        for k in range(J):
            cross = float(np.sum(weights * s_ij[:, j] * s_ij[:, k]))
            own = float(np.sum(weights * s_ij[:, j])) if j == k else 0.0
            jac[j, k] = (own - cross) / s_j[j]
    return jac


def newton_invert(shares, mu, weights, tol=1e-13, max_iter=500):
    """Damped Newton on g(delta) = log s(delta) - log S."""
    S = np.asarray(shares, dtype=float)
    delta = np.log(S) - np.log(1.0 - S.sum())
    for _ in range(max_iter):
        s_j, _, _ = naive_shares(delta, mu, weights)
        g = np.log(s_j) - np.log(S)
        if np.max(np.abs(g)) < tol:
            return delta
        step = np.linalg.solve(share_jacobian(delta, mu, weights), g)
        lam = 1.0
        while lam > 1e-6:
            cand = delta - lam * step
            s_c, _, _ = naive_shares(cand, mu, weights)
            if np.all(s_c > 0) and np.max(np.abs(np.log(s_c) - np.log(S))) \
                    <= np.max(np.abs(g)):
                break
            lam *= 0.5
        delta = delta - lam * step
    raise RuntimeError("Newton oracle failed to converge")


def naive_nested_shares(delta, mu, weights, nest_of, rho):
    """Plain nested-logit shares (small instances only)."""
    I, J = mu.shape
    G = int(np.max(nest_of)) + 1
    iv = np.empty((I, G))
    for g in range(G):
        idx = np.flatnonzero(nest_of == g)
        iv[:, g] = (1.0 - rho[g]) * np.log(
            np.exp((delta[idx][None, :] + mu[:, idx]) / (1.0 - rho[g])).sum(axis=1))
    top = 1.0 + np.exp(iv).sum(axis=1)
    s_ij = np.empty((I, J))
    for j in range(J):
        g = nest_of[j]
        s_ij[:, j] = (np.exp((delta[j] + mu[:, j]) / (1.0 - rho[g]))
                      / np.exp(iv[:, g] / (1.0 - rho[g]))
                      * np.exp(iv[:, g]) / top)
    return weights @ s_ij, float(weights @ (1.0 / top))


def newton_invert_nested(shares, mu, weights, nest_of, rho, tol=1e-13,
                         max_iter=800):
    """Damped Newton with a finite-difference Jacobian for the nested model."""
    S = np.asarray(shares, dtype=float)
    J = S.size
    delta = np.log(S) - np.log(1.0 - S.sum())

    def g(d):
        s_j, _ = naive_nested_shares(d, mu, weights, nest_of, rho)
        return np.log(s_j) - np.log(S)

    for _ in range(max_iter):
        val = g(delta)
        if np.max(np.abs(val)) < tol:
            return delta
        jac = np.empty((J, J))
        h = 1e-7
        for k in range(J):
            dp = delta.copy()
            dp[k] += h
            dm = delta.copy()
            dm[k] -= h
            jac[:, k] = (g(dp) - g(dm)) / (2 * h)
        step = np.linalg.solve(jac, val)
        lam = 1.0
        while lam > 1e-6:
            if np.max(np.abs(g(delta - lam * step))) <= np.max(np.abs(val)):
                break
            lam *= 0.5
        delta = delta - lam * step
    raise RuntimeError("nested Newton oracle failed to converge")
