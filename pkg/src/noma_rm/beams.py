"""Beamforming by monotone projected gradient ascent on the unit spheres.

The sum-rate objective (optionally with a quadratic QoS shortfall penalty)
is ascended link by link: take a gradient step, renormalize each beam to
unit norm, and accept the move only if the objective improved, shrinking
the step otherwise. Gradients follow the Wirtinger convention; the exposed
array holds the partials w.r.t. the real/imaginary beam components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import noise_power
from .config import NetworkConfig
from .links import (
    LinkSystem,
    build_link_system,
    gather_link_beams,
    gather_link_powers,
    qos_weighted_objective,
    rate_weights,
)
from .rates import LN2, Allocation

_STEP_FLOOR = 1e-12


@dataclass
class BeamSolverSettings:
    max_iters: int = 200
    step_init: float = 1.0
    armijo_shrink: float = 0.5
    rel_tol: float = 1e-6
    qos_penalty: float = 0.0


def mrt_init(ch, rho: np.ndarray | None = None) -> np.ndarray:
    """Matched beams h / ||h||, either for every slot or only where rho is 1."""
    norms = np.linalg.norm(ch.h, axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    W = ch.h / safe
    if rho is not None:
        W = np.where((rho == 1)[..., None], W, 0.0)
    return W


def beam_objective(ch, alloc: Allocation, cfg: NetworkConfig, mu: float = 0.0) -> float:
    """Sum rate minus mu * sum of squared QoS shortfalls over scheduled links."""
    system = build_link_system(ch, alloc, cfg.bandwidth, noise_power(cfg))
    if system.num_links == 0:
        return 0.0
    W = gather_link_beams(alloc, system.links)
    p = gather_link_powers(alloc, system.links)
    return qos_weighted_objective(system, system.gains(W), p, cfg.min_rate, mu)


def _link_gradient(system: LinkSystem, W: np.ndarray, p: np.ndarray,
                   min_rate: float, mu: float) -> np.ndarray:
    """Gradient of the objective w.r.t. real/imag beam components, per link."""
    e = np.einsum("ijn,in->ij", np.conj(system.cross_h), W)   # h_{i->j}^H w_i
    mask = system.coupled.astype(float)
    np.fill_diagonal(mask, 1.0)
    G = (np.abs(e) ** 2) * mask
    signal = np.diag(G) * p
    denom = system.sigma2 + G.T @ p - signal
    u = rate_weights(system, G, p, min_rate, mu)

    scale = system.bandwidth / LN2
    own_coef = u * scale * p / (denom + signal)                       # [L]
    cross_coef = u * scale * signal / (denom * (denom + signal))      # [L], per victim

    # A[i, j]: weight of the (i -> j) channel term in link i's gradient.
    A = -system.coupled * cross_coef[None, :] * p[:, None]
    np.fill_diagonal(A, own_coef)
    grad = np.einsum("ij,ijn->in", A * e, system.cross_h)
    return 2.0 * grad


def beam_gradient(ch, alloc: Allocation, cfg: NetworkConfig, mu: float = 0.0) -> np.ndarray:
    """Full [M, K, S, N] gradient array; zero on unscheduled slots.

    Entries are d(objective)/d(Re w) + 1j * d(objective)/d(Im w), so a real
    perturbation delta changes the objective by Re(sum(conj(grad) * delta)).
    """
    system = build_link_system(ch, alloc, cfg.bandwidth, noise_power(cfg))
    out = np.zeros_like(alloc.W)
    if system.num_links == 0:
        return out
    W = gather_link_beams(alloc, system.links)
    p = gather_link_powers(alloc, system.links)
    g = _link_gradient(system, W, p, cfg.min_rate, mu)
    for i, (m, k, s) in enumerate(system.links):
        out[m, k, s] = g[i]
    return out


def _renormalize(W: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(W, axis=-1, keepdims=True)
    return W / np.where(norms > 0, norms, 1.0)


def beamform_update(ch, alloc: Allocation, cfg: NetworkConfig,
                    settings: BeamSolverSettings | None = None):
    """Ascend the beam objective from alloc.W; schedule and powers stay fixed.

    Returns (W_full, trace). The trace of accepted objective values is
    non-decreasing by construction; if no ascent step improves on the
    input, the input beams come back unchanged.
    """
    settings = settings or BeamSolverSettings()
    mu = settings.qos_penalty
    system = build_link_system(ch, alloc, cfg.bandwidth, noise_power(cfg))
    if system.num_links == 0:
        return alloc.W.copy(), [0.0]

    W = gather_link_beams(alloc, system.links)
    p = gather_link_powers(alloc, system.links)
    obj = qos_weighted_objective(system, system.gains(W), p, cfg.min_rate, mu)
    trace = [obj]
    step = settings.step_init

    for _ in range(settings.max_iters):
        grad = _link_gradient(system, W, p, cfg.min_rate, mu)
        gmax = np.linalg.norm(grad, axis=-1).max()
        if gmax == 0.0 or not np.isfinite(gmax):
            break
        direction = grad / gmax          # largest per-link move is ~eta
        eta = step
        accepted = False
        while eta >= _STEP_FLOOR:
            W_try = _renormalize(W + eta * direction)
            obj_try = qos_weighted_objective(system, system.gains(W_try), p,
                                             cfg.min_rate, mu)
            if obj_try > obj:
                accepted = True
                break
            eta *= settings.armijo_shrink
        if not accepted:
            break
        prev = obj
        W, obj = W_try, obj_try
        trace.append(obj)
        step = min(settings.step_init, eta / settings.armijo_shrink)
        if obj - prev <= settings.rel_tol * max(abs(prev), 1e-30):
            break

    W_full = alloc.W.copy()
    scatter_link_beams_into(W_full, system.links, W)
    return W_full, trace


def scatter_link_beams_into(W_full: np.ndarray, links, W_links: np.ndarray) -> None:
    for i, (m, k, s) in enumerate(links):
        W_full[m, k, s] = W_links[i]
