"""Latency minimization under a distortion target.

Alternates a particle-swarm search over the channel rates (cache split
fixed) with the closed-form cache split (rates fixed).
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .caching import delivery_latency
from .distortion import DistortionModel, distortion_surface
from .geometry import stream
from .params import LinkModel, OptimizationState

log = logging.getLogger(__name__)

# Slack allowed on the distortion target when judging a reported state.
FEASIBILITY_TOL = 1e-6


class InfeasibleTargetError(ValueError):
    pass


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 40
    max_iters: int = 200
    inertia: float = 0.7
    cognitive_coeff: float = 1.5
    social_coeff: float = 1.5
    penalty_weight: float = 1e3
    rate_bounds: tuple = (0.01, 12.0)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.rate_bounds
        if not 0 < lo < hi:
            raise ValueError("rate bounds must satisfy 0 < R_min < R_max")
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")
        if self.swarm_size < 1 or self.max_iters < 1:
            raise ValueError("swarm_size and max_iters must be positive")


def normalized_source_rates(layers):
    total = sum(layer.source_rate for layer in layers)
    return tuple(layer.source_rate / total for layer in layers)


def latency(rates, split, layers, system):
    """Delivery latency in seconds for the given rates and cache split."""
    specs = [
        replace(layer, channel_rate=r, cache_fraction=m) for layer, r, m in zip(layers, rates, split)
    ]
    return delivery_latency(specs, system)


def _latency_array(R1, R2, split, layers, system):
    scale = system.file_samples / system.bandwidth_hz * system.K
    out = 0.0
    for R, layer, m in zip((R1, R2), layers, split):
        out = out + scale * layer.source_rate * (1 - m) / (1 + system.K * m) / (R * layer.diversity)
    return out


def project_split(split, weights, mu):
    """Map a split onto ``{0 <= mu_i <= 1, sum_i mu_i w_i = mu}``.

    A coordinate outside the box is clamped and the other one re-solved from
    the equality; if that is still outside, the nearest feasible vertex wins.
    """
    m1, m2 = split
    w1, w2 = weights
    if 0.0 <= m1 <= 1.0 and 0.0 <= m2 <= 1.0:
        return m1, m2
    candidates = []
    for fixed in (0.0, 1.0):
        other = (mu - fixed * w1) / w2
        if 0.0 <= other <= 1.0:
            candidates.append((fixed, other))
        other = (mu - fixed * w2) / w1
        if 0.0 <= other <= 1.0:
            candidates.append((other, fixed))
    if not candidates:
        raise ValueError(f"no feasible split for mu={mu}")
    return min(candidates, key=lambda c: (c[0] - m1) ** 2 + (c[1] - m2) ** 2)


def cache_split_closed_form(R1, R2, layers, K, mu):
    """Stationary point of the partial Lagrangian, projected onto the box.

    With ``a_i = R^S_i / (R^C_i L_i)`` and ``w_i`` the normalized source
    rates, ``1 + K mu_i = (1 + K mu) sqrt(a_i / w_i) / sum_j sqrt(a_j w_j)``.
    """
    if not (R1 > 0 and R2 > 0):
        raise ValueError("rates must be positive")
    if not 0.0 <= mu <= 1.0 or K < 1:
        raise ValueError("need 0 <= mu <= 1 and K >= 1")
    w = normalized_source_rates(layers)
    a = [layer.source_rate / (R * layer.diversity) for layer, R in zip(layers, (R1, R2))]
    denom = sum(math.sqrt(ai * wi) for ai, wi in zip(a, w))
    ratios = [math.sqrt(ai / wi) / denom for ai, wi in zip(a, w)]
    # mu r + (r - 1)/K is (1/K)((1 + K mu) r - 1), exact when r == 1
    split = tuple(mu * r + (r - 1.0) / K for r in ratios)
    return project_split(split, w, mu)


@dataclass
class PsoResult:
    rates: tuple
    latency: float
    distortion: float
    history: list


def pso_minimize(objective, constraint, bounds, config, init=None):
    """Minimize ``objective(X)`` subject to ``constraint(X) <= 0`` over a box.

    Both callables map an ``(n, d)`` array of positions to ``(n,)`` values.
    Swarm guidance uses the quadratic penalty; personal and global bests only
    ever move to a feasible point once one has been seen, so the returned
    best is feasible whenever any particle was.  Returns the best position,
    its objective, its constraint value and the per-iteration leader history.
    """
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    rng = stream(config.seed, 0)
    n, d = config.swarm_size, lo.size
    X = lo + (hi - lo) * rng.random((n, d))
    if init is not None:
        init = np.atleast_2d(init)
        X[: init.shape[0]] = init
    V = (hi - lo) * (rng.random((n, d)) - 0.5) * 0.2

    def score(X):
        f = objective(X)
        g = constraint(X)
        viol = np.maximum(g, 0.0)
        return f, viol, f + config.penalty_weight * viol**2, g

    def better(f_new, v_new, p_new, f_old, v_old, p_old):
        feas_new, feas_old = v_new <= 0, v_old <= 0
        return np.where(
            feas_new & feas_old, f_new < f_old, np.where(feas_new != feas_old, feas_new, p_new < p_old)
        )

    def leader(f, v, p):
        # feasible points rank by objective ahead of infeasible ones ranked by penalty
        infeasible = v > 0
        return int(np.lexsort((np.where(infeasible, p, f), infeasible))[0])

    f, v, p, g = score(X)
    P, Pf, Pv, Pp, Pg = X.copy(), f, v, p, g
    history = []
    for _ in range(config.max_iters):
        g_idx = leader(Pf, Pv, Pp)
        G = P[g_idx]
        history.append((float(Pf[g_idx]), float(Pv[g_idx])))
        r1 = rng.random((n, d))
        r2 = rng.random((n, d))
        V = config.inertia * V + config.cognitive_coeff * r1 * (P - X) + config.social_coeff * r2 * (G - X)
        X = np.clip(X + V, lo, hi)
        f, v, p, g = score(X)
        upd = better(f, v, p, Pf, Pv, Pp)
        P[upd], Pf[upd], Pv[upd], Pp[upd], Pg[upd] = X[upd], f[upd], v[upd], p[upd], g[upd]
    g_idx = leader(Pf, Pv, Pp)
    history.append((float(Pf[g_idx]), float(Pv[g_idx])))
    return P[g_idx].copy(), float(Pf[g_idx]), float(Pg[g_idx]), history


def distortion_floor(layers, sigma2=1.0):
    return DistortionModel(tuple(layer.source_rate for layer in layers), sigma2).floor


def pso_minimize_rates(split, D0, system, layers, config=PsoConfig()):
    """Best channel rates for a fixed cache split subject to ``D <= D0``."""
    floor = distortion_floor(layers, system.sigma2)
    if not floor < D0:
        raise InfeasibleTargetError(f"target {D0} is not above the distortion floor {floor}")
    link = LinkModel.from_layers(system, layers)
    source_rates = tuple(layer.source_rate for layer in layers)

    def objective(X):
        return _latency_array(X[:, 0], X[:, 1], split, layers, system)

    def constraint(X):
        return distortion_surface(X[:, 0], X[:, 1], link, source_rates, system.sigma2) - D0

    lo, hi = config.rate_bounds
    best, f, g, history = pso_minimize(objective, constraint, ([lo, lo], [hi, hi]), config, init=[[lo, lo]])
    if g > 0:
        raise InfeasibleTargetError(f"no feasible rate pair found for D0={D0}")
    return PsoResult((float(best[0]), float(best[1])), f, g + D0, history)


@dataclass
class OptimizationResult:
    trace: list
    best: OptimizationState

    @property
    def best_latency_trace(self):
        out, best = [], math.inf
        for state in self.trace:
            best = min(best, state.latency)
            out.append(best)
        return out


def alternate_optimize(system, layers, D0, n_outer=10, config=PsoConfig(), rel_tol=1e-4, rate_step=None):
    """Alternating rate / cache-split search starting from the uniform split.

    ``rate_step`` replaces the PSO rate search when given; it receives the
    current split and returns ``(R1, R2)``.
    """
    mu, K = system.mu, system.K
    split = (mu, mu)
    link = LinkModel.from_layers(system, layers)
    source_rates = tuple(layer.source_rate for layer in layers)
    trace = []
    best = None
    prev_T = math.inf
    for it in range(1, n_outer + 1):
        if rate_step is None:
            res = pso_minimize_rates(split, D0, system, layers, config)
            rates, D = res.rates, res.distortion
        else:
            rates = tuple(rate_step(split))
            D = float(distortion_surface(rates[0], rates[1], link, source_rates, system.sigma2))
        feasible = D <= D0 + FEASIBILITY_TOL
        T = latency(rates, split, layers, system)
        trace.append(OptimizationState(rates, split, T, D, it, "rates"))
        if feasible and (best is None or T < best.latency):
            best = trace[-1]
        split = cache_split_closed_form(rates[0], rates[1], layers, K, mu)
        T = latency(rates, split, layers, system)
        trace.append(OptimizationState(rates, split, T, D, it, "cache"))
        if feasible and (best is None or T < best.latency):
            best = trace[-1]
        log.debug("outer %d: rates=%s split=%s T=%.6g D=%.6g", it, rates, split, T, D)
        if abs(prev_T - T) <= rel_tol * T:
            break
        prev_T = T
    return OptimizationResult(trace, best)


def uniform_baseline(system, layers, D0, config=PsoConfig()):
    """Latency with rates optimized at the uniform split ``mu_1 = mu_2 = mu``."""
    res = pso_minimize_rates((system.mu, system.mu), D0, system, layers, config)
    return res.latency, res


def delta_T(T_unif, T_opt):
    """Relative latency gain of the optimized split over the uniform one."""
    return (T_unif - T_opt) / T_opt
