"""Seeded data-generating processes for the benchmark suites.

All normal draws go through the inverse CDF applied to uniforms from
numpy's PCG64 stream, and per-replication streams derive from
SeedSequence([master_seed, replication]); both choices are documented so
other implementations can replicate the streams exactly.

The same simulation nodes generate the observed shares and build the
candidate-theta deviations, so the inner-loop solution is exactly
representable in every replication.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from .dynamic import DurableMarket, DurableSolution, _conditional_shares
from .rcnl import NestedMarket, nested_shares
from .static_rcl import StaticMarket, logit_shares

_SHARE_FLOOR = 1e-300


@dataclass(frozen=True)
class SeededRng:
    """Deterministic per-replication stream derived from (master seed, index)."""

    master_seed: int
    replication: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence([int(self.master_seed), int(self.replication)])
        return np.random.default_rng(seq)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeededRng):
        return rng.generator()
    return SeededRng(int(rng)).generator()


def normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals via the inverse CDF (portable across ports)."""
    u = np.clip(rng.random(shape), 1e-300, 1.0 - 1e-16)
    return ndtri(u)


@dataclass(frozen=True)
class StaticDgpParams:
    n_products: int = 25
    n_draws: int = 1000
    mean_coefs: tuple = (0.0, 1.5, 1.5, 0.5, -3.0)
    sd_coefs: tuple = (0.5, 0.5, 0.5, 0.5, 0.2)
    char_cov: tuple = ((1.0, -0.8, 0.3), (-0.8, 1.0, 0.3), (0.3, 0.3, 1.0))
    price_const: float = 3.0
    price_xi: float = 1.5
    price_shock_hi: float = 5.0


@dataclass(frozen=True)
class DynamicDgpParams:
    n_products: int = 25
    n_draws: int = 50
    horizon: int = 50
    beta: float = 0.99
    mean_coefs: tuple = (6.0, 1.0, 1.0, 0.5, 2.0)
    sd_coefs: tuple = (0.0, 0.5, 0.5, 0.0, 0.25)
    chi_sd: float = 0.5
    price_coefs: tuple = (1.0, 0.2, 0.2, 0.1, 1.0, 0.2, 0.7)  # g0,gx1,gx2,gx3,gz,gw,gxi
    price_cross: tuple = (0.1, 0.1, 0.1)
    z_init: float = 8.0
    z_const: float = 0.1
    z_rho: float = 0.95
    z_shock_sd: float = 0.1
    w_shock_sd: float = 1.0
    u_shock_sd: float = 0.01


@dataclass(frozen=True)
class StaticInstance:
    market: StaticMarket
    delta_true: np.ndarray
    theta_true: np.ndarray  # random-coefficient sds
    X: np.ndarray           # (J, 5) characteristics incl. intercept and price
    nodes: np.ndarray       # (I, 5) simulation draws
    redraws: int = 0

    def with_theta(self, theta) -> StaticMarket:
        """Market with candidate-theta deviations, same shares and nodes."""
        mu = (self.nodes * np.asarray(theta, dtype=float)) @ self.X.T
        return replace(self.market, mu=mu)


def _static_draw(p: StaticDgpParams, rng: np.random.Generator):
    J, I = p.n_products, p.n_draws
    L = np.linalg.cholesky(np.asarray(p.char_cov, dtype=float))
    x = normal(rng, (J, 3)) @ L.T
    xi = normal(rng, J)
    u = rng.random(J) * p.price_shock_hi
    price = p.price_const + p.price_xi * xi + u + x.sum(axis=1)
    X = np.column_stack([np.ones(J), x, price])
    delta = X @ np.asarray(p.mean_coefs, dtype=float) + xi
    nodes = normal(rng, (I, 5))
    mu = (nodes * np.asarray(p.sd_coefs, dtype=float)) @ X.T
    return X, delta, nodes, mu


def gen_static_market(p: StaticDgpParams, rng) -> StaticInstance:
    """One static replication: market data at the true parameters.

    Degenerate draws (any share below 1e-300) are redrawn from the same
    stream; the attempt count is recorded on the instance.
    """
    g = _as_rng(rng)
    redraws = 0
    while True:
        X, delta, nodes, mu = _static_draw(p, g)
        s_j, s_0, _ = logit_shares(delta, mu, np.full(p.n_draws, 1.0 / p.n_draws))
        if s_0 > _SHARE_FLOOR and np.all(s_j > _SHARE_FLOOR):
            break
        redraws += 1
    weights = np.full(p.n_draws, 1.0 / p.n_draws)
    market = StaticMarket(shares=s_j, outside_share=1.0 - s_j.sum(), mu=mu,
                          weights=weights)
    return StaticInstance(market=market, delta_true=delta,
                          theta_true=np.asarray(p.sd_coefs, dtype=float),
                          X=X, nodes=nodes, redraws=redraws)


@dataclass(frozen=True)
class NestedInstance:
    market: NestedMarket
    delta_true: np.ndarray
    theta_true: np.ndarray
    X: np.ndarray
    nodes: np.ndarray
    redraws: int = 0

    def with_theta(self, theta) -> NestedMarket:
        mu = (self.nodes * np.asarray(theta, dtype=float)) @ self.X.T
        base = replace(self.market.base, mu=mu)
        return NestedMarket(base=base, nest_of=self.market.nest_of,
                            rho=self.market.rho)


def gen_nested_market(p: StaticDgpParams, rng, n_nests: int = 3,
                      products_per_nest: int = 25, rho: float = 0.5) -> NestedInstance:
    """Static DGP plus a nest layout; observed shares from the nested model."""
    if p.n_products != n_nests * products_per_nest:
        p = replace(p, n_products=n_nests * products_per_nest)
    g = _as_rng(rng)
    nest_of = np.repeat(np.arange(n_nests), products_per_nest)
    groups = tuple(np.flatnonzero(nest_of == k) for k in range(n_nests))
    rho_vec = np.full(n_nests, float(rho))
    weights = np.full(p.n_draws, 1.0 / p.n_draws)
    redraws = 0
    while True:
        X, delta, nodes, mu = _static_draw(p, g)
        s_j, s_g, s_0, _ = nested_shares(delta, mu, weights, groups, rho_vec)
        if s_0 > _SHARE_FLOOR and np.all(s_j > _SHARE_FLOOR):
            break
        redraws += 1
    base = StaticMarket(shares=s_j, outside_share=1.0 - s_j.sum(), mu=mu,
                        weights=weights)
    market = NestedMarket(base=base, nest_of=nest_of, rho=rho_vec)
    return NestedInstance(market=market, delta_true=delta,
                          theta_true=np.asarray(p.sd_coefs, dtype=float),
                          X=X, nodes=nodes, redraws=redraws)


@dataclass(frozen=True)
class DynamicInstance:
    market: DurableMarket
    delta_true: np.ndarray   # (J, T)
    value_true: np.ndarray   # (I, T)
    theta_true: np.ndarray
    X: np.ndarray            # (T, J, 5)
    nodes: np.ndarray        # (I, 5)
    solution_true: DurableSolution | None = field(repr=False, default=None)
    redraws: int = 0

    def with_theta(self, theta) -> DurableMarket:
        mu = np.einsum("ik,tjk->ijt", self.nodes * np.asarray(theta, dtype=float),
                       self.X)
        return replace(self.market, mu=mu)


def _terminal_value(beta: float, omega_T: np.ndarray) -> np.ndarray:
    """Fixed point of v = log(exp(beta v) + exp(omega)); modulus < beta."""
    v = omega_T.copy()
    for _ in range(10000):
        v_new = np.logaddexp(beta * v, omega_T)
        if np.max(np.abs(v_new - v)) < 1e-15:
            return v_new
        v = v_new
    return v


def gen_dynamic_market(p: DynamicDgpParams, rng) -> DynamicInstance:
    """One durable-goods replication with the exact truth recorded.

    The true value function is solved by backward induction with the
    stationary terminal condition; observed shares are the implied
    conditional-on-active shares, so the inner-loop solution exists exactly.
    """
    g = _as_rng(rng)
    J, I, T, beta = p.n_products, p.n_draws, p.horizon, p.beta
    redraws = 0
    while True:
        chi = normal(g, (T, J, 3)) * p.chi_sd
        xi = normal(g, (T, J))
        w_shock = normal(g, (T, J)) * p.w_shock_sd
        u = normal(g, (T, J)) * p.u_shock_sd
        eta = normal(g, (T, J)) * p.z_shock_sd
        z = np.empty((T, J))
        z_prev = np.full(J, p.z_init)
        for t in range(T):
            z[t] = p.z_const + p.z_rho * z_prev + eta[t]
            z_prev = z[t]
        g0, gx1, gx2, gx3, gz, gw, gxi = p.price_coefs
        cross = chi.sum(axis=1, keepdims=True) - chi
        price = (g0 + chi @ np.array([gx1, gx2, gx3]) + gz * z + gw * w_shock
                 + gxi * xi - cross @ np.asarray(p.price_cross) + u)
        X = np.concatenate([np.ones((T, J, 1)), chi, -price[:, :, None]], axis=2)
        delta = (X @ np.asarray(p.mean_coefs, dtype=float) + xi).T  # (J, T)
        nodes = normal(g, (I, 5))
        mu = np.einsum("ik,tjk->ijt", nodes * np.asarray(p.sd_coefs, dtype=float), X)

        # true values: terminal stationarity, then backward induction
        util = delta[None, :, :] + mu  # (I, J, T)
        m = util.max(axis=1)
        omega = m + np.log(np.exp(util - m[:, None, :]).sum(axis=1))  # (I, T)
        V = np.empty((I, T))
        V[:, T - 1] = _terminal_value(beta, omega[:, T - 1])
        for t in range(T - 2, -1, -1):
            V[:, t] = np.logaddexp(beta * V[:, t + 1], omega[:, t])

        ccp = np.exp(util - V[:, None, :])
        v_next = np.concatenate([V[:, 1:], V[:, -1:]], axis=1)
        ccp0 = np.exp(beta * v_next - V)
        pr0 = np.empty((I, T))
        pr0[:, 0] = 1.0
        for t in range(T - 1):
            pr0[:, t + 1] = pr0[:, t] * ccp0[:, t]
        shares = _conditional_shares(ccp, pr0, np.full(I, 1.0 / I))  # (J, T)
        outside = 1.0 - shares.sum(axis=0)
        if np.all(shares > _SHARE_FLOOR) and np.all(outside > _SHARE_FLOOR):
            break
        redraws += 1

    market = DurableMarket(shares=shares, outside_shares=outside, mu=mu,
                           weights=np.full(I, 1.0 / I), beta=beta)
    with np.errstate(divide="ignore"):
        gap = np.log(shares) - np.log(_conditional_shares(ccp, pr0, market.weights))
    truth = DurableSolution(value=V, delta=delta, pr0=pr0, ccp=ccp,
                            dist=float(np.max(np.abs(gap))))
    return DynamicInstance(market=market, delta_true=delta, value_true=V,
                           theta_true=np.asarray(p.sd_coefs, dtype=float),
                           X=X, nodes=nodes, solution_true=truth, redraws=redraws)


def draw_theta(theta_true, rng) -> np.ndarray:
    """Candidate nonlinear parameters, componentwise U[0, 2*theta_true]."""
    g = _as_rng(rng)
    theta_true = np.asarray(theta_true, dtype=float)
    return g.random(theta_true.shape) * 2.0 * theta_true


def write_market_fixture(market, path) -> None:
    """Write any market type to a versioned JSON fixture file."""
    from .dynamic import durable_market_to_json
    from .rcnl import nested_market_to_json
    from .static_rcl import market_to_json

    if isinstance(market, DurableMarket):
        text = durable_market_to_json(market)
    elif isinstance(market, NestedMarket):
        text = nested_market_to_json(market)
    elif isinstance(market, StaticMarket):
        text = market_to_json(market)
    else:
        raise TypeError(f"unsupported market type {type(market).__name__}")
    with open(path, "w") as fh:
        fh.write(text)


def large_heterogeneity_market() -> tuple[StaticMarket, np.ndarray]:
    """The fixed two-type, two-product market with mu = 10 on the diagonal.

    Built from delta = (0, -1), mu = [[10, 0], [0, 10]], weights (0.1, 0.9);
    shares are the exact model shares at that delta. Returns (market, delta).
    """
    delta = np.array([0.0, -1.0])
    mu = np.array([[10.0, 0.0], [0.0, 10.0]])
    weights = np.array([0.1, 0.9])
    s_j, s_0, _ = logit_shares(delta, mu, weights)
    market = StaticMarket(shares=s_j, outside_share=1.0 - s_j.sum(), mu=mu,
                          weights=weights)
    return market, delta
