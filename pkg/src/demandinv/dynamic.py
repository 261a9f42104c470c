"""Inner loops for the perfectly-durable-goods dynamic model.

Consumers exit the market after a purchase; under perfect foresight the
market state is just the time index, with everything constant after the
terminal period T (V_{T+1} = V_T). Shares are conditional on the active
(non-owner) population, so sum_j S_jt + S_0t = 1 holds every period.

Algorithms:

* :func:`pf_solve` - the value-function algorithm: delta is recovered
  analytically from V each iteration, so only V is solved for.
* :func:`traditional_joint_solve` - joint (delta, V) updates in one loop.
* :func:`traditional_nested_solve` - inner value iteration per outer delta
  update, with optional hot starts.
* :func:`ivs_solve` - inclusive-value-sufficiency variant: a scalar state
  per type follows a fitted AR(1); expectations use Gauss-Hermite
  quadrature over a Chebyshev interpolant of V.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .accel import AccelConfig, FixedPointMap, solve
from .numerics import chebyshev_eval_rows, chebyshev_nodes, gauss_hermite, ols_ar1_rows
from .static_rcl import SCHEMA_VERSION

# Active fractions are floored at a tiny positive value: off the solution,
# 1 - sum_j ccp can dip below zero for extreme heterogeneity draws, which
# would poison the next period's weighted log-sum. Never binds at a solution.
PR0_FLOOR = 1e-12


@dataclass(frozen=True)
class DurableMarket:
    """Time-indexed conditional shares, mu, weights, and the discount factor.

    shares: (J, T); outside_shares: (T,); mu: (I, J, T); weights: (I,);
    pr0_init: (I,) initial non-owner fractions (defaults to ones).
    """

    shares: np.ndarray
    outside_shares: np.ndarray
    mu: np.ndarray
    weights: np.ndarray
    beta: float
    pr0_init: np.ndarray | None = None

    def __post_init__(self):
        shares = np.asarray(self.shares, dtype=float)
        outside = np.asarray(self.outside_shares, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if mu.ndim != 3:
            raise ValueError("mu must be I x J x T")
        I, J, T = mu.shape
        if shares.shape != (J, T) or outside.shape != (T,):
            raise ValueError("shares must be J x T and outside_shares length T")
        if weights.shape != (I,):
            raise ValueError("weights must have one entry per type")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if np.max(np.abs(shares.sum(axis=0) + outside - 1.0)) > 1e-12:
            raise ValueError("per-period shares + outside share must sum to 1")
        pr0 = (np.ones(I) if self.pr0_init is None
               else np.asarray(self.pr0_init, dtype=float))
        if pr0.shape != (I,) or np.any(pr0 < 0) or np.any(pr0 > 1):
            raise ValueError("pr0_init must be I fractions in [0, 1]")
        for name, arr in (("shares", shares), ("outside_shares", outside),
                          ("mu", mu), ("weights", weights), ("pr0_init", pr0)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "beta", float(self.beta))
        # time-major views for the hot loops
        object.__setattr__(self, "_mu_t", np.ascontiguousarray(mu.transpose(2, 0, 1)))
        object.__setattr__(self, "_logS_t", np.log(shares.T))
        object.__setattr__(self, "_logS0_t", np.log(outside))

    @property
    def horizon(self) -> int:
        return self.mu.shape[2]

    @property
    def n_types(self) -> int:
        return self.mu.shape[0]

    @property
    def n_products(self) -> int:
        return self.mu.shape[1]


@dataclass
class IvsState:
    """Final inclusive-value-sufficiency state: grid, values, AR(1) fits."""

    grid: np.ndarray
    v_data: np.ndarray
    v_grid: np.ndarray
    ar1_intercept: np.ndarray
    ar1_slope: np.ndarray
    ar1_sd: np.ndarray
    gh_order: int


@dataclass
class DurableSolution:
    value: np.ndarray  # (I, T)
    delta: np.ndarray  # (J, T)
    pr0: np.ndarray    # (I, T)
    ccp: np.ndarray    # (I, J, T) product choice probabilities
    dist: float        # sup-norm log-share audit at the solution
    ivs: IvsState | None = field(default=None, repr=False)

    @property
    def ccp_outside(self) -> np.ndarray:
        return 1.0 - self.ccp.sum(axis=1)


def _v_next(V: np.ndarray) -> np.ndarray:
    """V_{t+1} with the stationary terminal condition V_{T+1} = V_T."""
    return np.concatenate([V[:, 1:], V[:, -1:]], axis=1)


def _forward(V: np.ndarray, mkt: DurableMarket, want_ccp: bool = False):
    """Alg-step 1: sequential delta recovery and ownership propagation.

    Returns (delta (J,T), omega (I,T), pr0 (I,T), ccp or None). omega is
    each type's purchase inclusive value log sum_j exp(delta + mu).
    """
    I, J, T = mkt.n_types, mkt.n_products, mkt.horizon
    w = mkt.weights
    delta = np.empty((J, T))
    omega = np.empty((I, T))
    pr0 = np.empty((I, T))
    pr0[:, 0] = mkt.pr0_init
    ccp = np.empty((I, J, T)) if want_ccp else None
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for t in range(T):
            b = w * pr0[:, t]
            bn = b / b.sum()
            z = mkt._mu_t[t] - V[:, t][:, None]  # (I, J)
            m = z.max(axis=0)
            sm = (bn[:, None] * np.exp(z - m[None, :])).sum(axis=0)
            d_t = mkt._logS_t[t] - m - np.log(sm)
            delta[:, t] = d_t
            q = d_t[None, :] + z  # log ccp
            qm = q.max(axis=1)
            sq = np.exp(q - qm[:, None]).sum(axis=1)
            omega[:, t] = V[:, t] + qm + np.log(sq)
            if want_ccp:
                ccp[:, :, t] = np.exp(q)
            if t + 1 < T:
                buy = np.exp(qm + np.log(sq))
                pr0[:, t + 1] = np.maximum(pr0[:, t] * (1.0 - buy), PR0_FLOOR)
    return delta, omega, pr0, ccp


def pf_forward_pass(V, mkt: DurableMarket):
    """Public forward pass: (delta (J,T), ccp (I,J,T), pr0 (I,T)) at V."""
    V = np.asarray(V, dtype=float)
    delta, _, pr0, ccp = _forward(V, mkt, want_ccp=True)
    return delta, ccp, pr0


def _outside_hat(V: np.ndarray, mkt: DurableMarket, pr0: np.ndarray) -> np.ndarray:
    """Model conditional outside share per period, active-weighted."""
    b = mkt.weights[:, None] * pr0
    vn = _v_next(V)
    with np.errstate(over="ignore"):
        num = (b * np.exp(mkt.beta * vn - V)).sum(axis=0)
    return num / b.sum(axis=0)


def pf_value_update(V, delta, gamma: float, mkt: DurableMarket, pr0=None) -> np.ndarray:
    """One Bellman-style backup with the outside-share correction.

    V'_it = log(exp(beta*V_{i,t+1}) + sum_j exp(delta_jt + mu_ijt)
            * (s0t_hat/S0t)^gamma), with V_{T+1} = V_T.
    """
    V = np.asarray(V, dtype=float)
    delta = np.asarray(delta, dtype=float)
    omega = _omega_from_delta(delta, mkt)
    if gamma != 0.0:
        if pr0 is None:
            pr0 = _pr0_from(delta, V, mkt)
        s0_hat = _outside_hat(V, mkt, pr0)
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = gamma * (np.log(s0_hat) - mkt._logS0_t)
        omega = omega + corr[None, :]
    return np.logaddexp(mkt.beta * _v_next(V), omega)


def _omega_from_delta(delta: np.ndarray, mkt: DurableMarket) -> np.ndarray:
    """log sum_j exp(delta_jt + mu_ijt), shape (I, T)."""
    u = delta.T[:, None, :] + mkt._mu_t  # (T, I, J)
    m = u.max(axis=2)
    return (m + np.log(np.exp(u - m[:, :, None]).sum(axis=2))).T


def _pr0_from(delta: np.ndarray, V: np.ndarray, mkt: DurableMarket) -> np.ndarray:
    """Ownership path implied by the choice probabilities of (delta, V)."""
    I, T = mkt.n_types, mkt.horizon
    pr0 = np.empty((I, T))
    pr0[:, 0] = mkt.pr0_init
    with np.errstate(over="ignore"):
        for t in range(T - 1):
            q = delta[:, t][None, :] + mkt._mu_t[t] - V[:, t][:, None]
            buy = np.exp(q).sum(axis=1)
            pr0[:, t + 1] = np.maximum(pr0[:, t] * (1.0 - buy), PR0_FLOOR)
    return pr0


def _conditional_shares(ccp: np.ndarray, pr0: np.ndarray, weights: np.ndarray) -> np.ndarray:
    b = weights[:, None] * pr0  # (I, T)
    return np.einsum("it,ijt->jt", b, ccp) / b.sum(axis=0)[None, :]


def dynamic_dist(delta, V, mkt: DurableMarket) -> float:
    """sup |log S_jt - log s_jt(delta, V)| over products and periods."""
    delta = np.asarray(delta, dtype=float)
    V = np.asarray(V, dtype=float)
    pr0 = _pr0_from(delta, V, mkt)
    with np.errstate(over="ignore"):
        ccp = np.exp(delta[None, :, :] + mkt.mu - V[:, None, :])
    s = _conditional_shares(ccp, pr0, mkt.weights)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.log(mkt.shares) - np.log(s)
    return float(np.max(np.abs(gap)))


def bellman_residual(sol: DurableSolution, mkt: DurableMarket) -> float:
    """sup |V - Psi^{gamma=0}(V, delta)|: the plain Bellman audit."""
    V = sol.value
    resid = V - pf_value_update(V, sol.delta, 0.0, mkt)
    return float(np.max(np.abs(resid)))


def _assemble(V: np.ndarray, mkt: DurableMarket, ivs: IvsState | None = None) -> DurableSolution:
    delta, _, pr0, ccp = _forward(V, mkt, want_ccp=True)
    s = _conditional_shares(ccp, pr0, mkt.weights)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.log(mkt.shares) - np.log(s)
    dist = float(np.max(np.abs(gap)))
    return DurableSolution(value=V, delta=delta, pr0=pr0, ccp=ccp, dist=dist, ivs=ivs)


def _time_blocks(I: int, T: int) -> tuple[np.ndarray, ...]:
    """Index groups of the flattened (I, T) state, one group per period."""
    return tuple(np.arange(I) * T + t for t in range(T))


def pf_solve(mkt: DurableMarket, gamma: float, cfg: AccelConfig):
    """Perfect-foresight value-function algorithm: iterate V only.

    Each evaluation runs the forward delta/ownership pass and one corrected
    value backup. cfg.use_blocks turns on one spectral/SQUAREM step size
    per period (capped at 10 unless configured otherwise).
    """
    I, T = mkt.n_types, mkt.horizon
    shape = (I, T)

    def evaluate(x):
        V = x.reshape(shape)
        delta, omega, pr0, _ = _forward(V, mkt)
        if gamma != 0.0:
            s0_hat = _outside_hat(V, mkt, pr0)
            with np.errstate(divide="ignore", invalid="ignore"):
                omega = omega + gamma * (np.log(s0_hat) - mkt._logS0_t)[None, :]
        return np.logaddexp(mkt.beta * _v_next(V), omega).ravel()

    fp = FixedPointMap(evaluate, I * T, block_partition=_time_blocks(I, T))
    outcome = solve(fp, np.zeros(I * T), cfg)
    sol = _assemble(outcome.point.reshape(shape), mkt)
    return sol, outcome


def initial_delta_myopic(mkt: DurableMarket) -> np.ndarray:
    """Per-period homogeneous logit inversion log S_jt - log S_0t."""
    return np.log(mkt.shares) - np.log(mkt.outside_shares)[None, :]


def traditional_joint_solve(mkt: DurableMarket, gamma: float, phi: float,
                            cfg: AccelConfig):
    """One-loop joint update of (delta, V).

    delta gets the dampened share correction plus the gamma outside term;
    V gets a plain Bellman backup at the current delta. Terminates when
    both sup-norm changes pass the tolerance (single concatenated state).
    """
    I, J, T = mkt.n_types, mkt.n_products, mkt.horizon
    nd = J * T

    def evaluate(x):
        delta = x[:nd].reshape(J, T)
        V = x[nd:].reshape(I, T)
        pr0 = _pr0_from(delta, V, mkt)
        with np.errstate(over="ignore"):
            ccp = np.exp(delta[None, :, :] + mkt.mu - V[:, None, :])
        s = _conditional_shares(ccp, pr0, mkt.weights)
        with np.errstate(divide="ignore", invalid="ignore"):
            d_next = delta + phi * (np.log(mkt.shares) - np.log(s))
            if gamma != 0.0:
                s0 = 1.0 - s.sum(axis=0)
                d_next = d_next - gamma * (np.log(mkt.outside_shares) - np.log(s0))[None, :]
        v_next = np.logaddexp(mkt.beta * _v_next(V), _omega_from_delta(delta, mkt))
        return np.concatenate([d_next.ravel(), v_next.ravel()])

    x0 = np.concatenate([initial_delta_myopic(mkt).ravel(), np.zeros(I * T)])
    fp = FixedPointMap(evaluate, nd + I * T)
    outcome = solve(fp, x0, cfg)
    delta = outcome.point[:nd].reshape(J, T)
    V = outcome.point[nd:].reshape(I, T)
    pr0 = _pr0_from(delta, V, mkt)
    with np.errstate(over="ignore"):
        ccp = np.exp(delta[None, :, :] + mkt.mu - V[:, None, :])
    sol = DurableSolution(value=V, delta=delta, pr0=pr0, ccp=ccp,
                          dist=dynamic_dist(delta, V, mkt))
    return sol, outcome


def traditional_nested_solve(mkt: DurableMarket, gamma: float, phi: float,
                             inner_cfg: AccelConfig, outer_cfg: AccelConfig,
                             hot_start: bool = True):
    """Nested loops: solve V to tolerance for each outer delta update.

    Returns (solution, outer outcome, total inner value-backup evaluations).
    The outer evaluation count in the outcome counts delta-map applications.
    """
    I, J, T = mkt.n_types, mkt.n_products, mkt.horizon
    state = {"V": np.zeros((I, T)), "psi_evals": 0}

    def inner_solve(delta):
        omega = _omega_from_delta(delta, mkt)

        def backup(x):
            V = x.reshape(I, T)
            return np.logaddexp(mkt.beta * _v_next(V), omega).ravel()

        v0 = state["V"] if hot_start else np.zeros((I, T))
        fp = FixedPointMap(backup, I * T)
        res = solve(fp, v0.ravel(), inner_cfg)
        state["psi_evals"] += res.evaluations
        return res.point.reshape(I, T)

    def outer_evaluate(x):
        delta = x.reshape(J, T)
        V = inner_solve(delta)
        state["V"] = V
        pr0 = _pr0_from(delta, V, mkt)
        with np.errstate(over="ignore"):
            ccp = np.exp(delta[None, :, :] + mkt.mu - V[:, None, :])
        s = _conditional_shares(ccp, pr0, mkt.weights)
        with np.errstate(divide="ignore", invalid="ignore"):
            d_next = delta + phi * (np.log(mkt.shares) - np.log(s))
            if gamma != 0.0:
                s0 = 1.0 - s.sum(axis=0)
                d_next = d_next - gamma * (np.log(mkt.outside_shares) - np.log(s0))[None, :]
        return d_next.ravel()

    fp = FixedPointMap(outer_evaluate, J * T)
    outcome = solve(fp, initial_delta_myopic(mkt).ravel(), outer_cfg)
    delta = outcome.point.reshape(J, T)
    V = state["V"]
    pr0 = _pr0_from(delta, V, mkt)
    with np.errstate(over="ignore"):
        ccp = np.exp(delta[None, :, :] + mkt.mu - V[:, None, :])
    sol = DurableSolution(value=V, delta=delta, pr0=pr0, ccp=ccp,
                          dist=dynamic_dist(delta, V, mkt))
    return sol, outcome, state["psi_evals"]


# ---------------------------------------------------------------------------
# Inclusive value sufficiency


@dataclass(frozen=True)
class IvsGrid:
    n_nodes: int = 10
    lo: float = -20.0
    hi: float = 10.0
    gh_order: int = 5


def _cheb_fit_matrix(n: int) -> np.ndarray:
    """Matrix mapping values at increasing Chebyshev nodes to coefficients."""
    k = np.arange(n)
    theta = (2 * k + 1) * np.pi / (2 * n)
    m = np.arange(n)[:, None]
    M = (2.0 / n) * np.cos(m * theta[None, :])
    M[0] *= 0.5
    return M[:, ::-1]  # reorder columns for increasing node order


def ivs_solve(mkt: DurableMarket, gamma: float, grid: IvsGrid, cfg: AccelConfig):
    """Inclusive-value-sufficiency algorithm.

    The state vector stacks V at the (moving) data points omega_it and V at
    the fixed Chebyshev grid; each evaluation refits the per-type AR(1) on
    the implied inclusive values and integrates the interpolated V with
    Gauss-Hermite quadrature. Step sizes are scalar by design.
    """
    I, T = mkt.n_types, mkt.horizon
    N = grid.n_nodes
    nodes = chebyshev_nodes(N, grid.lo, grid.hi)
    fitmat = _cheb_fit_matrix(N)
    quad = gauss_hermite(grid.gh_order)
    ghx = quad.nodes * np.sqrt(2.0)
    ghw = quad.weights / np.sqrt(np.pi)
    nd = I * T

    def expectations(v_grid, theta0, theta1, sd, points):
        """E[V(omega')|omega] at per-type points (I, M) via quadrature."""
        coefs = v_grid @ fitmat.T  # (I, N)
        args = (theta0[:, None, None] + theta1[:, None, None] * points[:, :, None]
                + sd[:, None, None] * ghx[None, None, :])  # (I, M, Q)
        vals = chebyshev_eval_rows(coefs, args, grid.lo, grid.hi)
        return vals @ ghw

    def evaluate(x):
        v_data = x[:nd].reshape(I, T)
        v_grid = x[nd:].reshape(I, N)
        _, omega, pr0, _ = _forward(v_data, mkt)
        if not np.all(np.isfinite(omega)):
            return np.full_like(x, np.nan)
        theta0, theta1, sd = ols_ar1_rows(omega)
        e_data = expectations(v_grid, theta0, theta1, sd, omega)  # (I, T)
        e_grid = expectations(v_grid, theta0, theta1, sd,
                              np.broadcast_to(nodes, (I, N)))
        b = mkt.weights[:, None] * pr0
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            s0_hat = (b * np.exp(mkt.beta * e_data - v_data)).sum(axis=0) / b.sum(axis=0)
            omega_c = omega + gamma * (np.log(s0_hat) - mkt._logS0_t)[None, :] \
                if gamma != 0.0 else omega
        v_data_next = np.logaddexp(mkt.beta * e_data, omega_c)
        v_grid_next = np.logaddexp(mkt.beta * e_grid, nodes[None, :])
        return np.concatenate([v_data_next.ravel(), v_grid_next.ravel()])

    fp = FixedPointMap(evaluate, nd + I * N)
    outcome = solve(fp, np.zeros(nd + I * N), cfg)
    v_data = outcome.point[:nd].reshape(I, T)
    v_grid = outcome.point[nd:].reshape(I, N)
    _, omega, _, _ = _forward(v_data, mkt)
    theta0, theta1, sd = ols_ar1_rows(omega)
    state = IvsState(grid=nodes, v_data=v_data, v_grid=v_grid,
                     ar1_intercept=theta0, ar1_slope=theta1, ar1_sd=sd,
                     gh_order=grid.gh_order)
    sol = _assemble(v_data, mkt, ivs=state)
    return sol, outcome


# ---------------------------------------------------------------------------
# JSON fixtures


def durable_market_to_json(mkt: DurableMarket) -> str:
    T = mkt.horizon
    doc = {
        "schema_version": SCHEMA_VERSION,
        "T": T,
        "beta": mkt.beta,
        # t-major: one entry per period; shares conditional on active consumers
        "shares": mkt.shares.T.tolist(),
        "outside_shares": mkt.outside_shares.tolist(),
        "mu": [mkt.mu[:, :, t].tolist() for t in range(T)],
        "weights": mkt.weights.tolist(),
        "pr0_init": mkt.pr0_init.tolist(),
    }
    return json.dumps(doc)


def durable_market_from_json(text: str) -> DurableMarket:
    doc = json.loads(text)
    shares = np.array(doc["shares"], dtype=float).T
    mu = np.stack([np.array(m, dtype=float) for m in doc["mu"]], axis=2)
    return DurableMarket(
        shares=shares,
        outside_shares=np.array(doc["outside_shares"], dtype=float),
        mu=mu,
        weights=np.array(doc["weights"], dtype=float),
        beta=float(doc["beta"]),
        pr0_init=np.array(doc["pr0_init"], dtype=float),
    )
