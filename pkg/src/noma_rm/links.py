"""Compact view of the scheduled links for the beam and power solvers.

Only scheduled links carry power, so the solvers work on a flat link list
instead of the full [M, K, S] tensors. Link ell' interferes with link ell
iff they share a subcarrier; the relevant channel is the one from ell's BS
to ell's user.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import LN2, Allocation


@dataclass
class LinkSystem:
    """Channel geometry of the scheduled links (beams/powers not included).

    cross_h[i, j] is the channel vector from link i's BS to link j's user on
    link j's subcarrier (meaningful where coupled[i, j]); the diagonal holds
    each link's own channel. coupled marks same-subcarrier off-diagonal pairs.
    """

    links: list                # (m, k, s) triples, row-major order
    cross_h: np.ndarray        # [L, L, N] complex
    coupled: np.ndarray        # [L, L] bool, False on the diagonal
    bs_index: np.ndarray       # [L] int
    bandwidth: float
    sigma2: float

    @property
    def num_links(self) -> int:
        return len(self.links)

    def gains(self, W_links: np.ndarray) -> np.ndarray:
        """G[i, j] = |cross_h[i, j]^H w_i|^2; zero for uncoupled off-diagonal pairs."""
        e = np.einsum("ijn,in->ij", np.conj(self.cross_h), W_links)
        G = np.abs(e) ** 2
        off = ~self.coupled
        np.fill_diagonal(off, False)
        G[off] = 0.0
        return G

    def sinr(self, G: np.ndarray, p: np.ndarray):
        """Per-link (signal, interference+noise) given gain matrix and powers."""
        signal = np.diag(G) * p
        interference = G.T @ p - np.diag(G) * p
        return signal, interference + self.sigma2

    def rates(self, G: np.ndarray, p: np.ndarray) -> np.ndarray:
        signal, denom = self.sinr(G, p)
        return self.bandwidth * np.log2(1.0 + signal / denom)

    def sum_rate(self, G: np.ndarray, p: np.ndarray) -> float:
        return float(self.rates(G, p).sum())


def build_link_system(ch, alloc: Allocation, bandwidth: float, sigma2: float) -> LinkSystem:
    links = alloc.scheduled_links()
    L = len(links)
    N = ch.h.shape[-1]
    cross_h = np.zeros((L, L, N), dtype=complex)
    coupled = np.zeros((L, L), dtype=bool)
    bs_index = np.zeros(L, dtype=int)
    for i, (m_i, k_i, s_i) in enumerate(links):
        bs_index[i] = m_i
        for j, (m_j, k_j, s_j) in enumerate(links):
            if s_i == s_j:
                cross_h[i, j] = ch.h[m_i, k_j, s_j]
                if i != j:
                    coupled[i, j] = True
    return LinkSystem(
        links=links,
        cross_h=cross_h,
        coupled=coupled,
        bs_index=bs_index,
        bandwidth=bandwidth,
        sigma2=sigma2,
    )


def gather_link_beams(alloc: Allocation, links) -> np.ndarray:
    return np.array([alloc.W[m, k, s] for (m, k, s) in links])


def gather_link_powers(alloc: Allocation, links) -> np.ndarray:
    return np.array([alloc.p[m, k, s] for (m, k, s) in links])


def scatter_link_beams(alloc: Allocation, links, W_links: np.ndarray) -> None:
    for i, (m, k, s) in enumerate(links):
        alloc.W[m, k, s] = W_links[i]


def scatter_link_powers(alloc: Allocation, links, p_links: np.ndarray) -> None:
    for i, (m, k, s) in enumerate(links):
        alloc.p[m, k, s] = p_links[i]


def qos_weighted_objective(system: LinkSystem, G: np.ndarray, p: np.ndarray,
                           min_rate: float, mu: float) -> float:
    """Sum rate minus mu * sum of squared QoS shortfalls over scheduled links."""
    r = system.rates(G, p)
    obj = float(r.sum())
    if mu > 0.0:
        shortfall = np.maximum(0.0, min_rate - r)
        obj -= mu * float((shortfall ** 2).sum())
    return obj


def rate_weights(system: LinkSystem, G: np.ndarray, p: np.ndarray,
                 min_rate: float, mu: float) -> np.ndarray:
    """d(objective)/d(rate_l): 1 plus the active QoS penalty pull."""
    if mu <= 0.0:
        return np.ones(system.num_links)
    r = system.rates(G, p)
    return 1.0 + 2.0 * mu * np.maximum(0.0, min_rate - r)
