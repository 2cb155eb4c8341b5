"""Scenario configuration for the multi-cell multi-carrier NOMA downlink."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass
class NetworkConfig:
    """All scenario parameters for one network.

    Powers are in dBm, bandwidth in Hz, rates in bit/s, distances in meters.
    ``num_subcarriers=None`` resolves to ``num_users // 2``, the default
    carrier-to-user ratio. ``max_users_per_carrier=None`` means unlimited.
    """

    num_bs: int = 4
    num_users: int = 48
    num_subcarriers: int | None = None
    num_antennas: int = 2
    power_budget_dbm: float = 30.0
    min_rate: float = 0.1e6
    bandwidth: float = 250e3
    noise_psd: float = -80.0
    noise_figure: float = 7.0
    cell_radius: float = 500.0
    pathloss_exponent: float = 3.7
    carrier_freq: float = 2.4e9
    max_users_per_carrier: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_subcarriers is None:
            self.num_subcarriers = max(1, self.num_users // 2)
        for name in ("num_bs", "num_users", "num_subcarriers", "num_antennas"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")
        if self.cell_radius <= 0:
            raise ValueError("cell_radius must be > 0")
        if self.pathloss_exponent <= 0:
            raise ValueError("pathloss_exponent must be > 0")
        if self.carrier_freq <= 0:
            raise ValueError("carrier_freq must be > 0")
        if self.min_rate < 0:
            raise ValueError("min_rate must be >= 0")
        if self.max_users_per_carrier is not None and self.max_users_per_carrier < 1:
            raise ValueError("max_users_per_carrier must be >= 1 or unlimited")
        sigma2 = dbm_to_watts(
            self.noise_psd + 10.0 * math.log10(self.bandwidth) + self.noise_figure
        )
        if not (sigma2 > 0.0 and math.isfinite(sigma2)):
            raise ValueError("derived noise power must be positive and finite")

    @property
    def power_budget_watts(self) -> float:
        return dbm_to_watts(self.power_budget_dbm)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """(M, K, S, N) array dimensions."""
        return (self.num_bs, self.num_users, self.num_subcarriers, self.num_antennas)


def default_config(**overrides) -> NetworkConfig:
    """Default scenario: 4 BSs, 12 users per BS, S = K/2 subcarriers."""
    return NetworkConfig(**overrides)


_INT_FIELDS = {"num_bs", "num_users", "num_subcarriers", "num_antennas", "rng_seed"}
_OPTIONAL_INT_FIELDS = {"max_users_per_carrier"}


def parse_config_text(text: str) -> NetworkConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a config."""
    known = {f.name for f in fields(NetworkConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in _OPTIONAL_INT_FIELDS and val.lower() in ("unlimited", "none"):
            values[key] = None
        elif key in _INT_FIELDS or key in _OPTIONAL_INT_FIELDS:
            values[key] = int(val)
        else:
            values[key] = float(val)
    return NetworkConfig(**values)


def load_config(path) -> NetworkConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def config_to_text(cfg: NetworkConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            v = "unlimited"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def save_config(cfg: NetworkConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_text(cfg))
