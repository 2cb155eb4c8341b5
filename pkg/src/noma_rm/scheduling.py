"""Greedy joint user-BS association and subcarrier assignment.

Users are processed in descending order of their best channel norm; each
commits to the (BS, subcarrier) slot with the highest marginal rate against
the interference created by already-committed users, or stays unscheduled
if no slot offers a positive rate. Committed powers on a BS are kept at the
uniform split P_m / load, and a candidate probes with P_m / (load + 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig
from .channel import noise_power
from .rates import Allocation, DimensionMismatchError, effective_gains, empty_allocation


@dataclass
class ScheduleDecision:
    """Per-user slot choice plus the 0/1 scheduling indicator phi."""

    assignment: list           # per user: (m, s) or None
    phi: np.ndarray            # [K] floats in {0.0, 1.0}, diagnostic


def marginal_rates(ch, candidate_beams: np.ndarray, candidate_powers: np.ndarray,
                   committed: Allocation, sigma2: float, bandwidth: float) -> np.ndarray:
    """Rate each user would get on each slot against the committed snapshot.

    Entry [k, m, s] assumes user k transmits with candidate_beams[m, k, s]
    at candidate_powers[m, k, s] while every committed link of *other*
    users interferes; any committed links of user k itself are ignored
    (the probe asks what k would get if it were (re)assigned there).
    """
    M, K, S, N = ch.h.shape
    if candidate_beams.shape != (M, K, S, N) or candidate_powers.shape != (M, K, S):
        raise DimensionMismatchError("candidate beams/powers shape mismatch")
    G = effective_gains(ch, committed)                 # [n, k, j, s]
    weighted = G * committed.p[:, None, :, :]
    total = weighted.sum(axis=(0, 2))                  # [k, s]
    own_committed = np.einsum("nkks->ks", weighted)    # user k's own committed links
    interference = total - own_committed

    num_gain = np.abs(np.einsum("mksa,mksa->mks", np.conj(ch.h), candidate_beams)) ** 2
    signal = num_gain * candidate_powers               # [m, k, s]
    denom = interference[None, :, :] + sigma2          # broadcast over m
    rates = bandwidth * np.log2(1.0 + signal / denom)
    return np.transpose(rates, (1, 0, 2))              # [k, m, s]


def schedule_users(ch, candidate_beams: np.ndarray, cfg: NetworkConfig) -> ScheduleDecision:
    """Sequential greedy schedule with snapshot updates after each commit."""
    M, K, S, N = ch.h.shape
    sigma2 = noise_power(cfg)
    budget = cfg.power_budget_watts
    cap = cfg.max_users_per_carrier

    # |h^H w_cand|^2 for every candidate slot, computed once.
    cand_gain = np.abs(np.einsum("mksa,mksa->mks", np.conj(ch.h), candidate_beams)) ** 2

    # Strong users first: descending best channel norm, index order on ties.
    norms = np.linalg.norm(ch.h, axis=-1).max(axis=(0, 2))  # [K]
    order = np.argsort(-norms, kind="stable")

    interference = np.zeros((K, S))          # committed interference seen by each user
    slot_count = np.zeros((M, S), dtype=int)
    load = np.zeros(M, dtype=int)
    committed = []                           # per link: [m, k, s, gain_vec[K], power]

    assignment: list = [None] * K
    phi = np.zeros(K)

    for k in order:
        k = int(k)
        probe = budget / (load + 1)                       # [M]
        signal = cand_gain[:, k, :] * probe[:, None]      # [M, S]
        rates = cfg.bandwidth * np.log2(1.0 + signal / (sigma2 + interference[k][None, :]))
        if cap is not None:
            rates = np.where(slot_count < cap, rates, -np.inf)
        flat = int(np.argmax(rates))                      # row-major: lowest (m, s) wins ties
        best = rates.flat[flat]
        if best <= 0.0:
            continue
        m, s = divmod(flat, S)

        # Rebalance BS m to the uniform split over its new load.
        new_load = load[m] + 1
        p_new = budget / new_load
        for link in committed:
            if link[0] == m:
                delta = p_new - link[4]
                interference[:, link[2]] += delta * link[3]
                link[4] = p_new
        w = candidate_beams[m, k, s]
        gain_vec = np.abs(np.conj(ch.h[m, :, s]) @ w) ** 2    # [K]
        # Rows of already-committed users go stale here; each user is probed
        # exactly once, so only uncommitted rows are ever read.
        interference[:, s] += p_new * gain_vec
        committed.append([m, k, s, gain_vec, p_new])
        load[m] = new_load
        slot_count[m, s] += 1
        assignment[k] = (m, s)
        phi[k] = 1.0

    return ScheduleDecision(assignment=assignment, phi=phi)


def allocation_from_schedule(ch, decision: ScheduleDecision, cfg: NetworkConfig,
                             candidate_beams: np.ndarray) -> Allocation:
    """Materialize a schedule: candidate beams, uniform per-BS power split."""
    M, K, S, N = ch.h.shape
    alloc = empty_allocation(M, K, S, N)
    load = np.zeros(M, dtype=int)
    for k, slot in enumerate(decision.assignment):
        if slot is None:
            continue
        m, s = slot
        alloc.rho[m, k, s] = 1
        alloc.W[m, k, s] = candidate_beams[m, k, s]
        load[m] += 1
    budget = cfg.power_budget_watts
    for k, slot in enumerate(decision.assignment):
        if slot is None:
            continue
        m, s = slot
        alloc.p[m, k, s] = budget / load[m]
    return alloc
