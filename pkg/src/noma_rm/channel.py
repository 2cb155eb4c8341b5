"""Topology and random channel generation.

Channels follow a pure power-law path loss d^(-alpha) with i.i.d. standard
circularly-symmetric complex Gaussian fast fading per antenna, drawn
independently for every (BS, user, subcarrier) triple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig, dbm_to_watts

# Users closer than this to any BS are resampled (path loss blows up as d -> 0).
MIN_BS_USER_DISTANCE_M = 10.0
_RESAMPLE_CAP = 1000


@dataclass
class ChannelState:
    """One network realization.

    h has shape [M, K, S, N] (complex); positions are (x, y) in meters.
    """

    h: np.ndarray
    user_positions: np.ndarray
    bs_positions: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.h.shape


def noise_power(cfg: NetworkConfig) -> float:
    """Noise power sigma^2 in watts: psd + 10*log10(B) + noise figure, converted."""
    dbm = cfg.noise_psd + 10.0 * math.log10(cfg.bandwidth) + cfg.noise_figure
    return dbm_to_watts(dbm)


def bs_grid(num_bs: int, cell_radius: float) -> np.ndarray:
    """BS positions on a square grid with inter-site distance 2*cell_radius."""
    cols = max(1, math.ceil(math.sqrt(num_bs)))
    pos = []
    for i in range(num_bs):
        row, col = divmod(i, cols)
        pos.append((2.0 * cell_radius * col, 2.0 * cell_radius * row))
    return np.asarray(pos, dtype=float)


def generate_topology(cfg: NetworkConfig, rng: np.random.Generator):
    """Place BSs on the grid and drop users uniformly in the cell discs.

    Each user lands uniformly in one of the radius-`cell_radius` discs
    (disc chosen uniformly; the discs tile the grid and only touch at their
    boundaries). Draws closer than MIN_BS_USER_DISTANCE_M to any BS are
    resampled.
    """
    bs_pos = bs_grid(cfg.num_bs, cfg.cell_radius)
    users = np.empty((cfg.num_users, 2), dtype=float)
    for k in range(cfg.num_users):
        for attempt in range(_RESAMPLE_CAP):
            cell = int(rng.integers(cfg.num_bs))
            radius = cfg.cell_radius * math.sqrt(rng.uniform())
            angle = rng.uniform(0.0, 2.0 * math.pi)
            pos = bs_pos[cell] + radius * np.array([math.cos(angle), math.sin(angle)])
            dists = np.linalg.norm(bs_pos - pos, axis=1)
            if dists.min() >= MIN_BS_USER_DISTANCE_M:
                users[k] = pos
                break
        else:
            raise ValueError(
                "could not place a user at least "
                f"{MIN_BS_USER_DISTANCE_M} m from every BS; check cell_radius"
            )
    return bs_pos, users


def bs_user_distances(bs_positions: np.ndarray, user_positions: np.ndarray) -> np.ndarray:
    """Pairwise distances, shape [M, K]."""
    diff = bs_positions[:, None, :] - user_positions[None, :, :]
    return np.linalg.norm(diff, axis=-1)


def generate_channels(cfg: NetworkConfig, topology, rng: np.random.Generator) -> ChannelState:
    """Draw h[m,k,s] = sqrt(d(m,k)^-alpha) * z with z ~ CN(0, I_N)."""
    bs_pos, user_pos = topology
    M, K, S, N = cfg.dims
    dist = bs_user_distances(bs_pos, user_pos)
    amp = np.sqrt(dist ** (-cfg.pathloss_exponent))[:, :, None, None]

    def draw(shape):
        re = rng.standard_normal(shape)
        im = rng.standard_normal(shape)
        return (re + 1j * im) / np.sqrt(2.0)

    z = draw((M, K, S, N))
    # Degenerate all-zero draws have probability zero but would break the
    # path-loss statistics contract; redraw just those entries.
    dead = np.all(z == 0, axis=-1)
    while np.any(dead):
        z[dead] = draw((int(dead.sum()), N))
        dead = np.all(z == 0, axis=-1)
    h = amp * z
    return ChannelState(h=h, user_positions=user_pos, bs_positions=bs_pos)


def generate_network(cfg: NetworkConfig, seed=None) -> ChannelState:
    """Convenience: topology + channels from one seeded stream."""
    rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    topo = generate_topology(cfg, rng)
    return generate_channels(cfg, topo, rng)
