"""Alternating baseline solver and evaluation harness.

One outer round runs scheduling, then beam ascent, then SPCA power
allocation. A round's output is kept only if the network sum rate did not
decrease; otherwise the previous allocation stands and the loop stops.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .beams import BeamSolverSettings, beamform_update, mrt_init
from .channel import ChannelState, generate_channels, generate_topology, noise_power
from .config import NetworkConfig
from .power import SpcaSettings, spca_iterate
from .rates import (
    Allocation,
    RateReport,
    check_feasibility,
    compute_rates,
    compute_sinr,
    empty_allocation,
    sum_rate,
)
from .scheduling import allocation_from_schedule, schedule_users


@dataclass
class SolverSettings:
    max_rounds: int = 10
    round_rel_tol: float = 1e-4
    beam: BeamSolverSettings = field(default_factory=BeamSolverSettings)
    power: SpcaSettings = field(default_factory=SpcaSettings)


@dataclass
class SolveResult:
    alloc: Allocation
    report: RateReport
    outer_trace: list          # accepted sum rate per outer round
    rounds: int
    wall_time: float
    beam_trace: list = field(default_factory=list)    # last round's ascent trace
    power_trace: list = field(default_factory=list)   # last round's SPCA trace


def _network_sum_rate(ch, alloc, cfg) -> float:
    sinr = compute_sinr(ch, alloc, noise_power(cfg))
    return sum_rate(compute_rates(sinr, cfg.bandwidth))


def solve_baseline(ch: ChannelState, cfg: NetworkConfig,
                   settings: SolverSettings | None = None) -> SolveResult:
    """Alternate {schedule, beams, powers} with round-level accept-if-improved."""
    settings = settings or SolverSettings()
    t0 = time.perf_counter()
    candidates = mrt_init(ch)

    best_alloc = None
    best_sr = -np.inf
    prev_assignment = None
    outer_trace: list = []
    beam_trace: list = []
    power_trace: list = []
    rounds = 0

    for _ in range(settings.max_rounds):
        rounds += 1
        decision = schedule_users(ch, candidates, cfg)
        alloc = allocation_from_schedule(ch, decision, cfg, candidates)
        if prev_assignment is not None and decision.assignment == prev_assignment:
            # Same schedule as last round: keep refining the same beams/powers.
            alloc.W = best_alloc.W.copy()
            alloc.p = best_alloc.p.copy()
        alloc.W, b_trace = beamform_update(ch, alloc, cfg, settings.beam)
        alloc.p, p_trace = spca_iterate(ch, alloc, cfg, settings.power)
        sr = _network_sum_rate(ch, alloc, cfg)

        if sr < best_sr - 1e-9 * max(abs(best_sr), 1.0):
            break
        improvement = sr - best_sr
        best_alloc, best_sr = alloc, sr
        prev_assignment = decision.assignment
        outer_trace.append(sr)
        beam_trace, power_trace = b_trace, p_trace
        if len(outer_trace) > 1 and improvement <= settings.round_rel_tol * max(abs(sr), 1e-30):
            break

    if best_alloc is None:
        M, K, S, N = ch.h.shape
        best_alloc = empty_allocation(M, K, S, N)
        outer_trace = [0.0]
    report = check_feasibility(ch, best_alloc, cfg)
    return SolveResult(
        alloc=best_alloc,
        report=report,
        outer_trace=outer_trace,
        rounds=rounds,
        wall_time=time.perf_counter() - t0,
        beam_trace=beam_trace,
        power_trace=power_trace,
    )


def random_heuristic(ch: ChannelState, cfg: NetworkConfig,
                     rng: np.random.Generator) -> Allocation:
    """Comparison heuristic: random slot per user, MRT beams, uniform powers."""
    M, K, S, N = ch.h.shape
    cap = cfg.max_users_per_carrier
    alloc = empty_allocation(M, K, S, N)
    slot_count = np.zeros((M, S), dtype=int)
    load = np.zeros(M, dtype=int)
    mrt = mrt_init(ch)
    for k in range(K):
        open_slots = [(m, s) for m in range(M) for s in range(S)
                      if cap is None or slot_count[m, s] < cap]
        if not open_slots:
            continue
        m, s = open_slots[int(rng.integers(len(open_slots)))]
        alloc.rho[m, k, s] = 1
        alloc.W[m, k, s] = mrt[m, k, s]
        slot_count[m, s] += 1
        load[m] += 1
    budget = cfg.power_budget_watts
    for (m, k, s) in alloc.scheduled_links():
        alloc.p[m, k, s] = budget / load[m]
    return alloc


def sample_seed(base_seed: int, index: int) -> int:
    """Stable per-sample seed, independent of worker scheduling."""
    ss = np.random.SeedSequence((int(base_seed), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_sample_channels(cfg: NetworkConfig, seed: int) -> ChannelState:
    rng = np.random.default_rng(seed)
    topo = generate_topology(cfg, rng)
    return generate_channels(cfg, topo, rng)


def solve_one_sample(cfg: NetworkConfig, base_seed: int, index: int,
                     solver: str = "baseline"):
    """(seed, channels, allocation, sum_rate) for sample `index` of a run."""
    seed = sample_seed(base_seed, index)
    ch = draw_sample_channels(cfg, seed)
    if solver == "baseline":
        res = solve_baseline(ch, cfg)
        return seed, ch, res.alloc, res.report.sum_rate
    if solver == "heuristic":
        rng = np.random.default_rng(np.random.SeedSequence((int(base_seed), int(index), 1)))
        alloc = random_heuristic(ch, cfg, rng)
        return seed, ch, alloc, _network_sum_rate(ch, alloc, cfg)
    raise ValueError(f"unknown solver {solver!r}")


def cdf_table(sums) -> np.ndarray:
    """Empirical CDF rows (sum_rate, cumulative probability), ascending."""
    values = np.sort(np.asarray(sums, dtype=float))
    n = len(values)
    probs = np.arange(1, n + 1) / n
    return np.column_stack([values, probs])


def evaluate_cdf(cfg: NetworkConfig, num_samples: int, solver: str = "baseline",
                 base_seed: int = 0, workers: int = 1) -> np.ndarray:
    """Empirical sum-rate CDF over seeded channel draws."""
    indices = range(num_samples)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            sums = list(pool.map(_eval_worker,
                                 [(cfg, base_seed, i, solver) for i in indices]))
    else:
        sums = [solve_one_sample(cfg, base_seed, i, solver)[3] for i in indices]
    return cdf_table(sums)


def _eval_worker(args):
    cfg, base_seed, index, solver = args
    return solve_one_sample(cfg, base_seed, index, solver)[3]


# ---------------------------------------------------------------------------
# Scoring of externally produced (learned) allocations


def channel_state_from_h(h: np.ndarray) -> ChannelState:
    M, K = h.shape[0], h.shape[1]
    return ChannelState(h=h, user_positions=np.zeros((K, 2)), bs_positions=np.zeros((M, 2)))


def project_prediction(h: np.ndarray, rho_prob: np.ndarray, w_raw: np.ndarray,
                       p_raw: np.ndarray, budget_watts: float,
                       max_users_per_carrier: int | None = None) -> Allocation:
    """Project raw predicted outputs to a feasible allocation.

    Per user: argmax slot of the scheduling probabilities, unscheduled below
    0.5. Beams are renormalized (MRT is not available here, so a near-zero
    predicted beam falls back to the matched direction of the stored
    channel). Powers are clipped to >= 0 and scaled down uniformly per BS
    when the budget is exceeded.
    """
    M, K, S, N = h.shape
    alloc = empty_allocation(M, K, S, N)
    slot_count = np.zeros((M, S), dtype=int)
    order = np.argsort(-rho_prob.max(axis=(0, 2)), kind="stable")  # confident users first
    for k in order:
        k = int(k)
        grid = rho_prob[:, k, :]
        flat = int(np.argmax(grid))
        if grid.flat[flat] < 0.5:
            continue
        m, s = divmod(flat, S)
        if max_users_per_carrier is not None and slot_count[m, s] >= max_users_per_carrier:
            continue
        w = w_raw[m, k, s]
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            hv = h[m, k, s]
            hn = np.linalg.norm(hv)
            w = hv / hn if hn > 0 else np.eye(N)[0].astype(complex)
            norm = 1.0
        alloc.rho[m, k, s] = 1
        alloc.W[m, k, s] = w / norm
        alloc.p[m, k, s] = max(0.0, float(p_raw[m, k, s]))
        slot_count[m, s] += 1
    spent = (alloc.rho * alloc.p).sum(axis=(1, 2))
    for m in range(M):
        if spent[m] > budget_watts and spent[m] > 0:
            alloc.p[m] *= budget_watts / spent[m]
    return alloc
