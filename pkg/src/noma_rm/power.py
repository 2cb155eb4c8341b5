"""Power allocation by successive pseudo-convex approximation.

At each outer iterate the sum rate is replaced by a separable surrogate:
every link keeps its own rate term exact (with all other powers frozen)
and the effect on every victim's rate is linearized through the
interference price c. The surrogate maximizer per BS is a waterfilling
fixed point with a Lagrange level found by bisection on the power budget;
the outer update damps the step toward that maximizer on the true sum
rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import noise_power
from .config import NetworkConfig
from .links import LinkSystem, build_link_system, gather_link_beams, gather_link_powers
from .rates import LN2, Allocation

_ARMIJO_FLOOR = 1e-4
_DIMINISHING_EXPONENT = 0.6
_BRACKET_CAP = 200


class BracketingError(RuntimeError):
    """The Lagrange-level bisection could not bracket the budget."""


@dataclass
class SpcaSettings:
    outer_iters: int = 100
    bisection_tol: float | None = None   # absolute, in watts; None -> 1e-10 * P_m
    rel_tol: float = 1e-6
    step_rule: str = "armijo"            # "armijo" | "diminishing"


@dataclass
class SurrogateCoefficients:
    """Per scheduled link: own effective gain a (1/W) and interference price c.

    a = |h^H w|^2 / (interference + sigma^2) at the expansion point; c is the
    total derivative of all other links' rates w.r.t. this link's power
    (bit/s/W, nonpositive). p_t is the expansion point.
    """

    links: list
    bs_index: np.ndarray
    a: np.ndarray
    c: np.ndarray
    p_t: np.ndarray


def _coefficients(system: LinkSystem, G: np.ndarray, p_t: np.ndarray) -> tuple:
    signal = np.diag(G) * p_t
    denom = system.sigma2 + G.T @ p_t - signal
    a = np.diag(G) / denom
    scale = system.bandwidth / LN2
    victim_price = scale * (1.0 / (denom + signal) - 1.0 / denom)   # <= 0 per victim
    c = (G * system.coupled) @ victim_price
    return a, c


def surrogate_build(ch, alloc: Allocation, cfg: NetworkConfig,
                    p_t: np.ndarray | None = None) -> SurrogateCoefficients:
    """Surrogate coefficients at expansion point p_t (defaults to alloc.p)."""
    system = build_link_system(ch, alloc, cfg.bandwidth, noise_power(cfg))
    W = gather_link_beams(alloc, system.links)
    G = system.gains(W)
    if p_t is None:
        p_links = gather_link_powers(alloc, system.links)
    else:
        p_links = np.array([p_t[m, k, s] for (m, k, s) in system.links])
    a, c = _coefficients(system, G, p_links)
    return SurrogateCoefficients(links=system.links, bs_index=system.bs_index,
                                 a=a, c=c, p_t=p_links)


def surrogate_value(coeffs: SurrogateCoefficients, p: np.ndarray, bandwidth: float) -> float:
    """Separable surrogate sum rate at powers p."""
    own = bandwidth * np.log2(1.0 + coeffs.a * p)
    return float(own.sum() + (coeffs.c * (p - coeffs.p_t)).sum())


def surrogate_gradient(coeffs: SurrogateCoefficients, p: np.ndarray, bandwidth: float) -> np.ndarray:
    return bandwidth * coeffs.a / (LN2 * (1.0 + coeffs.a * p)) + coeffs.c


def waterfill_fixed_point(a: np.ndarray, c: np.ndarray, budget: float,
                          bandwidth: float, tol: float | None = None,
                          return_level: bool = False):
    """Maximize sum of B*log2(1 + a_k p_k) + c_k p_k over p >= 0, sum p <= budget.

    Solves the KKT fixed point p_k = max(0, B / ((lambda - c_k) ln 2) - 1 / a_k)
    with lambda = 0 when the unconstrained optimum fits the budget and
    otherwise set by bisection on sum(p) = budget.
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    if a.size == 0:
        p = np.zeros(0)
        return (p, 0.0) if return_level else p
    if np.any(a <= 0) or np.any(c > 0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
        raise BracketingError("invalid coefficients: need finite a > 0 and c <= 0")
    if tol is None:
        tol = 1e-10 * budget

    def powers(lam: float) -> np.ndarray:
        gap = lam - c
        with np.errstate(divide="ignore"):
            level = np.where(gap > 0, bandwidth / (gap * LN2), np.inf)
        return np.maximum(0.0, level - 1.0 / a)

    p0 = powers(0.0)
    if np.all(np.isfinite(p0)) and p0.sum() <= budget:
        return (p0, 0.0) if return_level else p0

    lam_lo = 0.0
    lam_hi = float(np.max(c + a * bandwidth / LN2)) + 1.0
    for _ in range(_BRACKET_CAP):
        if powers(lam_hi).sum() <= budget:
            break
        lam_lo = lam_hi
        lam_hi *= 2.0
    else:
        raise BracketingError("could not bracket the Lagrange level")

    lam = lam_hi
    p = powers(lam)
    for _ in range(200):
        mid = 0.5 * (lam_lo + lam_hi)
        total = powers(mid).sum()
        if total > budget:
            lam_lo = mid
        else:
            lam_hi = mid
            lam = mid
            p = powers(mid)
            if budget - total <= tol:
                break
        if lam_hi - lam_lo <= 1e-16 * max(1.0, lam_hi):
            break
    return (p, lam) if return_level else p


def spca_iterate(ch, alloc: Allocation, cfg: NetworkConfig,
                 settings: SpcaSettings | None = None):
    """Outer SPCA loop; schedule and beams stay fixed.

    Returns (p_full, trace) where trace holds the true sum rate per outer
    iterate. Under the armijo rule a step is accepted only if the true sum
    rate improves, so the trace is non-decreasing; budgets hold at every
    iterate because both endpoints of the damped step are feasible.
    """
    settings = settings or SpcaSettings()
    system = build_link_system(ch, alloc, cfg.bandwidth, noise_power(cfg))
    p_full = alloc.p.copy()
    if system.num_links == 0:
        return p_full, [0.0]

    W = gather_link_beams(alloc, system.links)
    G = system.gains(W)
    p = gather_link_powers(alloc, system.links)
    budget = cfg.power_budget_watts
    tol = settings.bisection_tol

    f = system.sum_rate(G, p)
    trace = [f]
    for t in range(settings.outer_iters):
        a, c = _coefficients(system, G, p)
        p_star = np.empty_like(p)
        for m in np.unique(system.bs_index):
            idx = system.bs_index == m
            p_star[idx] = waterfill_fixed_point(a[idx], c[idx], budget,
                                                cfg.bandwidth, tol=tol)
        direction = p_star - p

        if settings.step_rule == "diminishing":
            gamma = 1.0 / (t + 1.0) ** _DIMINISHING_EXPONENT
            p = p + gamma * direction
            f = system.sum_rate(G, p)
            trace.append(f)
            if abs(trace[-1] - trace[-2]) <= settings.rel_tol * max(abs(trace[-2]), 1e-30):
                break
            continue

        gamma = 1.0
        accepted = False
        while gamma >= _ARMIJO_FLOOR:
            p_try = p + gamma * direction
            f_try = system.sum_rate(G, p_try)
            if f_try > f:
                accepted = True
                break
            gamma *= 0.5
        if not accepted:
            break
        prev = f
        p, f = p_try, f_try
        trace.append(f)
        if f - prev <= settings.rel_tol * max(abs(prev), 1e-30):
            break

    for i, (m, k, s) in enumerate(system.links):
        p_full[m, k, s] = p[i]
    return p_full, trace
