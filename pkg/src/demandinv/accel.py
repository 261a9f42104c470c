"""Generic fixed-point solver engine.

Solves x = Phi(x) by plain iteration, Anderson acceleration, the spectral
algorithm, or SQUAREM. The engine is agnostic about where the mapping comes
from; the demand modules wrap their share/value mappings in a
:class:`FixedPointMap` and hand it to :func:`solve`.

Evaluation counting is the primary performance metric: the ``evaluations``
field of :class:`SolveOutcome` counts every application of the mapping
(SQUAREM consumes two per outer step, everything else one per iteration).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import ls_minnorm

METHODS = ("plain", "anderson", "spectral", "squarem")
STEP_RULES = ("S1", "S2", "S3", "S3prime")

# Upper bound on per-block step sizes when none is configured explicitly;
# unbounded block steps occasionally spike above 100 and destabilize.
DEFAULT_BLOCK_STEP_CAP = 10.0


@dataclass(frozen=True)
class FixedPointMap:
    """A mapping x -> Phi(x) on R^dimension.

    ``block_partition``, when given, lists disjoint index groups covering
    0..dimension-1; spectral/SQUAREM then use one step size per group.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    dimension: int
    block_partition: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.block_partition is not None:
            idx = np.concatenate([np.asarray(g) for g in self.block_partition])
            if sorted(idx.tolist()) != list(range(self.dimension)):
                raise ValueError("block_partition must be disjoint and exhaustive")


@dataclass
class AccelConfig:
    """Solver configuration.

    tolerance is a sup-norm criterion on Phi(x) - x, which for plain
    iteration coincides with the change between successive iterates.
    """

    method: str = "plain"
    tolerance: float = 1e-13
    max_evaluations: int = 1000
    anderson_memory: int = 5
    step_size_rule: str = "S3"
    step_cap: float | None = None
    use_blocks: bool = False
    initial_alpha: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.step_size_rule not in STEP_RULES:
            raise ValueError(f"unknown step size rule {self.step_size_rule!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")
        if self.anderson_memory < 1:
            raise ValueError("anderson_memory must be >= 1")


@dataclass
class SolveOutcome:
    point: np.ndarray
    converged: bool
    evaluations: int
    termination: str  # "converged" | "max_evaluations" | "non_finite"
    final_residual: float
    residual_history: list[float] = field(default_factory=list)


def _supnorm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def spectral_alpha(s, y, rule: str = "S3", cap: float | None = None,
                   fallback: float = 1.0) -> float:
    """Step size from the last step s = x_n - x_{n-1} and residual change y.

    S1 = -s'y/y'y, S2 = -s's/s'y, S3 = ||s||/||y||, S3prime = sgn(s'y)||s||/||y||.
    Degenerate denominators fall back to ``fallback`` (the caller's
    initial alpha). ``cap`` is an upper bound, applied when configured.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        yy = float(y @ y)
        if yy == 0.0:
            return fallback
        if rule == "S1":
            alpha = -float(s @ y) / yy
        elif rule == "S2":
            sy = float(s @ y)
            if sy == 0.0:
                return fallback
            alpha = -float(s @ s) / sy
        elif rule == "S3":
            alpha = float(np.linalg.norm(s) / np.linalg.norm(y))
        elif rule == "S3prime":
            alpha = float(np.sign(s @ y) * np.linalg.norm(s) / np.linalg.norm(y))
        else:
            raise ValueError(f"unknown step size rule {rule!r}")
    if not np.isfinite(alpha):
        return fallback
    if cap is not None:
        alpha = min(alpha, cap)
    return alpha


def spectral_update(x, F, alpha, blocks=None) -> np.ndarray:
    """x + alpha*F, with per-block alphas when ``blocks`` is given."""
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    if blocks is None:
        return x + alpha * F
    out = x.copy()
    for group, a in zip(blocks, alpha):
        out[group] = x[group] + a * F[group]
    return out


def squarem_update(x, phix, phi2x, alpha, blocks=None) -> np.ndarray:
    """x + 2*alpha*s + alpha^2*y with s = Phi(x)-x, y = Phi2(x)-2Phi(x)+x."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(phix, dtype=float) - x
    y = np.asarray(phi2x, dtype=float) - 2.0 * np.asarray(phix, dtype=float) + x
    if blocks is None:
        return x + 2.0 * alpha * s + alpha**2 * y
    out = np.empty_like(x)
    for group, a in zip(blocks, alpha):
        out[group] = x[group] + 2.0 * a * s[group] + a**2 * y[group]
    return out


def anderson_weights(residual_history: Sequence[np.ndarray], m_n: int) -> np.ndarray:
    """Combination weights for the newest m_n+1 residuals, oldest first.

    Solves the unconstrained least squares in the residual differences and
    maps back to weights that sum to one. Near-collinear histories are
    handled by the minimum-norm solution, never rejected.
    """
    if m_n == 0:
        return np.array([1.0])
    fs = list(residual_history[-(m_n + 1):])
    F = np.stack([fs[k + 1] - fs[k] for k in range(m_n)], axis=1)
    gamma = ls_minnorm(F, fs[-1])
    w = np.empty(m_n + 1)
    w[0] = gamma[0]
    for k in range(1, m_n):
        w[k] = gamma[k] - gamma[k - 1]
    w[m_n] = 1.0 - gamma[m_n - 1]
    return w


def anderson_combine(residual_history: Sequence[np.ndarray],
                     point_history: Sequence[np.ndarray],
                     m_n: int) -> np.ndarray:
    """Combined next iterate from the newest m_n+1 mapped points.

    ``point_history`` holds the mapped images Phi(x) aligned with
    ``residual_history``; with m_n = 0 this degenerates to plain iteration.
    """
    w = anderson_weights(residual_history, m_n)
    pts = list(point_history[-(m_n + 1):])
    out = w[0] * pts[0]
    for k in range(1, len(w)):
        out = out + w[k] * pts[k]
    return out


def _block_alphas(s, y, blocks, rule, cap, fallback):
    return np.array([
        spectral_alpha(s[g], y[g], rule=rule, cap=cap, fallback=fallback)
        for g in blocks
    ])


def solve(fp_map: FixedPointMap, x0, cfg: AccelConfig) -> SolveOutcome:
    """Run the configured method until tolerance, budget, or a non-finite value."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (fp_map.dimension,):
        raise ValueError(f"x0 must have shape ({fp_map.dimension},)")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    if cfg.method == "plain":
        return _solve_plain(fp_map, x0, cfg)
    if cfg.method == "anderson":
        return _solve_anderson(fp_map, x0, cfg)
    if cfg.method == "spectral":
        return _solve_spectral(fp_map, x0, cfg)
    return _solve_squarem(fp_map, x0, cfg)


def _blocks_and_cap(fp_map, cfg):
    blocks = fp_map.block_partition if cfg.use_blocks else None
    cap = cfg.step_cap
    if blocks is not None and cap is None:
        cap = DEFAULT_BLOCK_STEP_CAP
    return blocks, cap


def _finish(point, converged, evals, termination, residual, history):
    return SolveOutcome(
        point=np.asarray(point, dtype=float),
        converged=converged,
        evaluations=evals,
        termination=termination,
        final_residual=residual,
        residual_history=history,
    )


def _solve_plain(fp_map, x0, cfg):
    x = x0
    evals = 0
    history: list[float] = []
    r = np.inf
    while evals < cfg.max_evaluations:
        fx = fp_map.evaluate(x)
        evals += 1
        if not np.all(np.isfinite(fx)):
            return _finish(x, False, evals, "non_finite", np.inf, history)
        r = _supnorm(fx - x)
        history.append(r)
        if r < cfg.tolerance:
            return _finish(fx, True, evals, "converged", r, history)
        x = fx
    return _finish(x, False, evals, "max_evaluations", r, history)


def _solve_anderson(fp_map, x0, cfg):
    m = cfg.anderson_memory
    x = x0
    history: list[float] = []
    f_hist: list[np.ndarray] = []
    g_hist: list[np.ndarray] = []

    g = fp_map.evaluate(x)
    evals = 1
    if not np.all(np.isfinite(g)):
        return _finish(x, False, evals, "non_finite", np.inf, history)
    f = g - x
    r = _supnorm(f)
    history.append(r)
    if r < cfg.tolerance:
        return _finish(g, True, evals, "converged", r, history)
    f_hist.append(f)
    g_hist.append(g)
    x = g  # first step is plain

    while evals < cfg.max_evaluations:
        g = fp_map.evaluate(x)
        evals += 1
        if not np.all(np.isfinite(g)):
            return _finish(x, False, evals, "non_finite", np.inf, history)
        f = g - x
        r = _supnorm(f)
        history.append(r)
        if r < cfg.tolerance:
            return _finish(g, True, evals, "converged", r, history)
        f_hist.append(f)
        g_hist.append(g)
        if len(f_hist) > m + 1:
            f_hist.pop(0)
            g_hist.pop(0)
        x = anderson_combine(f_hist, g_hist, len(f_hist) - 1)
        if not np.all(np.isfinite(x)):
            return _finish(g, False, evals, "non_finite", np.inf, history)
    return _finish(x, False, evals, "max_evaluations", r, history)


def _solve_spectral(fp_map, x0, cfg):
    blocks, cap = _blocks_and_cap(fp_map, cfg)
    x = x0
    x_prev = None
    F_prev = None
    evals = 0
    history: list[float] = []
    r = np.inf
    while evals < cfg.max_evaluations:
        g = fp_map.evaluate(x)
        evals += 1
        if not np.all(np.isfinite(g)):
            return _finish(x, False, evals, "non_finite", np.inf, history)
        F = g - x
        r = _supnorm(F)
        history.append(r)
        if r < cfg.tolerance:
            return _finish(g, True, evals, "converged", r, history)
        if x_prev is None:
            alpha = (np.full(len(blocks), cfg.initial_alpha)
                     if blocks is not None else cfg.initial_alpha)
        else:
            s = x - x_prev
            y = F - F_prev
            if blocks is None:
                alpha = spectral_alpha(s, y, rule=cfg.step_size_rule, cap=cap,
                                       fallback=cfg.initial_alpha)
            else:
                alpha = _block_alphas(s, y, blocks, cfg.step_size_rule, cap,
                                      cfg.initial_alpha)
        x_next = spectral_update(x, F, alpha, blocks=blocks)
        if not np.all(np.isfinite(x_next)):
            return _finish(g, False, evals, "non_finite", np.inf, history)
        x_prev, F_prev = x, F
        x = x_next
    return _finish(x, False, evals, "max_evaluations", r, history)


def _solve_squarem(fp_map, x0, cfg):
    blocks, cap = _blocks_and_cap(fp_map, cfg)
    x = x0
    evals = 0
    history: list[float] = []
    r = np.inf
    while evals < cfg.max_evaluations:
        g1 = fp_map.evaluate(x)
        evals += 1
        if not np.all(np.isfinite(g1)):
            return _finish(x, False, evals, "non_finite", np.inf, history)
        r = _supnorm(g1 - x)
        history.append(r)
        if r < cfg.tolerance:
            return _finish(g1, True, evals, "converged", r, history)
        if evals >= cfg.max_evaluations:
            break
        g2 = fp_map.evaluate(g1)
        evals += 1
        if not np.all(np.isfinite(g2)):
            return _finish(g1, False, evals, "non_finite", np.inf, history)
        s = g1 - x
        y = g2 - 2.0 * g1 + x
        # degenerate curvature: alpha = 1 reproduces the exact two-step Phi^2(x)
        if blocks is None:
            if float(y @ y) == 0.0:
                x = g2
                continue
            alpha = spectral_alpha(s, y, rule=cfg.step_size_rule, cap=cap,
                                   fallback=1.0)
        else:
            alpha = _block_alphas(s, y, blocks, cfg.step_size_rule, cap, 1.0)
        x = squarem_update(x, g1, g2, alpha, blocks=blocks)
        if not np.all(np.isfinite(x)):
            return _finish(g2, False, evals, "non_finite", np.inf, history)
    return _finish(x, False, evals, "max_evaluations", r, history)
