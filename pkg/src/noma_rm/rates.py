"""Exact SINR, per-link rate, sum rate, and constraint feasibility.

The SINR of a scheduled link (m, k, s) is

    gamma = |h_{m,k,s}^H w_{m,k,s}|^2 p_{m,k,s} / (I_intra + I_inter + sigma^2)

where I_intra sums |h_{m,k,s}^H w_{m,j,s}|^2 p_{m,j,s} over co-cell users
j != k on the same subcarrier and I_inter sums |h_{n,k,s}^H w_{n,k',s}|^2
p_{n,k',s} over all links of other cells on the same subcarrier. Subcarriers
are orthogonal: cross-subcarrier links never interfere. Intra-cell
interference is kept in full by default; see ``sic_mode``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import noise_power
from .config import NetworkConfig

LN2 = float(np.log(2.0))
UNIT_NORM_TOL = 1e-9


class DimensionMismatchError(ValueError):
    """Channel and allocation arrays disagree on (M, K, S, N)."""


@dataclass
class Allocation:
    """Decision triple: binary schedule, unit-norm beams, link powers (watts).

    rho: int array [M, K, S] in {0, 1}; W: complex [M, K, S, N], unit-norm
    wherever rho is 1 and ignored (stored as zeros) elsewhere; p: float
    [M, K, S], zero wherever rho is 0.
    """

    rho: np.ndarray
    W: np.ndarray
    p: np.ndarray

    @property
    def dims(self):
        return self.W.shape

    def scheduled_links(self):
        """Scheduled (m, k, s) index triples in row-major order."""
        return list(zip(*np.nonzero(self.rho)))


def empty_allocation(M: int, K: int, S: int, N: int) -> Allocation:
    return Allocation(
        rho=np.zeros((M, K, S), dtype=np.int8),
        W=np.zeros((M, K, S, N), dtype=complex),
        p=np.zeros((M, K, S), dtype=float),
    )


@dataclass
class RateReport:
    """Per-link SINR/rates plus constraint slacks for one (channel, allocation)."""

    sinr: np.ndarray          # [M, K, S], linear, zero where unscheduled
    rate: np.ndarray          # [M, K, S], bit/s
    sum_rate: float           # bit/s
    budget_slack: np.ndarray  # [M], watts: P_m - sum(rho * p)
    qos_slack: np.ndarray     # per scheduled link, bit/s: r - r_min
    schedule_valid: bool      # rho binary and at most one (BS, subcarrier) per user
    links: list               # scheduled (m, k, s) triples aligned with qos_slack


def _check_dims(ch, alloc):
    M, K, S, N = ch.h.shape
    if alloc.W.shape != (M, K, S, N) or alloc.rho.shape != (M, K, S) or alloc.p.shape != (M, K, S):
        raise DimensionMismatchError(
            f"channel dims {ch.h.shape} vs allocation rho {alloc.rho.shape}, "
            f"W {alloc.W.shape}, p {alloc.p.shape}"
        )


def effective_gains(ch, alloc) -> np.ndarray:
    """|h_{n,k,s}^H w_{n,j,s}|^2 for every victim k and transmit link (n, j, s).

    Returns G with shape [M, K, K, S]; G[n, k, j, s] is the power gain of BS
    n's beam for user j on subcarrier s as received by user k.
    """
    cross = np.einsum("nksa,njsa->nkjs", np.conj(ch.h), alloc.W)
    return np.abs(cross) ** 2


def compute_sinr(ch, alloc: Allocation, sigma2: float, sic_mode: bool = False) -> np.ndarray:
    """Per-link SINR [M, K, S]; exactly zero where rho is zero.

    With ``sic_mode`` a scheduled user additionally cancels intra-cell
    co-subcarrier interference originating from users whose own-link
    effective gain |h^H w|^2 is strictly larger than its own.
    """
    _check_dims(ch, alloc)
    M, K, S, N = ch.h.shape
    G = effective_gains(ch, alloc)                       # [n, k, j, s]
    own = np.einsum("mkks->mks", G)                      # |h_{m,k,s}^H w_{m,k,s}|^2
    signal = own * alloc.p

    weighted = G * alloc.p[:, None, :, :]                # [n, k, j, s]
    total = weighted.sum(axis=(0, 2))                    # [k, s]: all links heard by k
    interference = total[None, :, :] - signal            # drop the own-link term

    if sic_mode:
        # Cancellation rule: victim k drops the co-cell, co-subcarrier term of
        # any user j whose own effective gain exceeds the victim's.
        intra = np.einsum("mkjs,mjs->mkjs", G, alloc.p.astype(float))
        stronger = (own[:, None, :, :] > own[:, :, None, :])  # [m, k, j, s]: gain_j > gain_k
        scheduled_j = (alloc.rho[:, None, :, :] == 1)
        cancelled = np.where(stronger & scheduled_j, intra, 0.0).sum(axis=2)
        interference = interference - cancelled

    denom = interference + sigma2
    gamma = np.where(alloc.rho == 1, signal / denom, 0.0)
    return gamma


def compute_rates(sinr: np.ndarray, bandwidth: float) -> np.ndarray:
    """Shannon rate B * log2(1 + gamma), elementwise, in bit/s."""
    return bandwidth * np.log2(1.0 + sinr)


def sum_rate(rate: np.ndarray) -> float:
    """Network sum rate: the triple sum over (m, k, s)."""
    return float(rate.sum())


def schedule_is_valid(rho: np.ndarray) -> bool:
    """Binary entries and at most one (BS, subcarrier) slot per user."""
    binary = np.isin(rho, (0, 1)).all()
    per_user = rho.sum(axis=(0, 2))
    return bool(binary and (per_user <= 1).all())


def check_feasibility(ch, alloc: Allocation, cfg: NetworkConfig,
                      sic_mode: bool = False) -> RateReport:
    """Evaluate rates and all constraint slacks; reports violations, never raises
    on them (only on structural shape mismatches)."""
    _check_dims(ch, alloc)
    sigma2 = noise_power(cfg)
    sinr = compute_sinr(ch, alloc, sigma2, sic_mode=sic_mode)
    rate = compute_rates(sinr, cfg.bandwidth)
    total = sum_rate(rate)
    spent = (alloc.rho * alloc.p).sum(axis=(1, 2))
    budget_slack = cfg.power_budget_watts - spent
    links = alloc.scheduled_links()
    qos_slack = np.array([rate[m, k, s] - cfg.min_rate for (m, k, s) in links])
    return RateReport(
        sinr=sinr,
        rate=rate,
        sum_rate=total,
        budget_slack=budget_slack,
        qos_slack=qos_slack,
        schedule_valid=schedule_is_valid(alloc.rho),
        links=links,
    )


def validate_allocation(alloc: Allocation, atol_norm: float = UNIT_NORM_TOL) -> list[str]:
    """Structural invariant violations as human-readable strings (empty if clean)."""
    problems = []
    if not np.isin(alloc.rho, (0, 1)).all():
        problems.append("rho has entries outside {0, 1}")
    per_user = alloc.rho.sum(axis=(0, 2))
    if (per_user > 1).any():
        bad = np.nonzero(per_user > 1)[0]
        problems.append(f"users scheduled more than once: {bad.tolist()}")
    if (alloc.p < 0).any():
        problems.append("negative powers")
    off = alloc.rho == 0
    if np.any(alloc.p[off] != 0):
        problems.append("nonzero power on unscheduled links")
    norms = np.linalg.norm(alloc.W, axis=-1)
    on = alloc.rho == 1
    if on.any() and np.any(np.abs(norms[on] - 1.0) > atol_norm):
        problems.append("scheduled beams not unit-norm")
    return problems
