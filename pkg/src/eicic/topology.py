"""Network layout and channel gain generation.

Macro sites sit on a hexagonal grid, each split into ``sectors_per_macro``
co-located sector eNBs with omni-directional radiation.  Picos are dropped
uniformly inside each sector wedge, hotspot UEs uniformly inside discs
around the picos, and the remaining UEs uniformly over the union of the
macro cell hexagons.

All randomness is drawn from child streams of one ``SeedSequence`` so the
same ``(config, seed)`` always yields a bit-identical scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

MACRO = "macro"
PICO = "pico"

FADING_MODELS = ("none", "rayleigh_block")

# Child stream order of the scenario SeedSequence; never reorder.
_STREAM_PICOS, _STREAM_HOTSPOT, _STREAM_WIDE, _STREAM_SHADOW, _STREAM_FADING = range(5)
_NUM_STREAMS = 5

_MAX_DRAWS = 20_000


@dataclass(frozen=True)
class NetworkConfig:
    """Scenario parameters.

    Defaults describe the desk-scale reference drop (one three-sector site,
    two picos per sector, 120 UEs); :meth:`full_scale` gives the full 21-sector
    layout.  Powers are totals in dBm, split evenly over ``num_rbs``.
    """

    inter_site_distance: float = 500.0
    num_macro_sites: int = 1
    sectors_per_macro: int = 3
    picos_per_sector: int = 2
    hotspot_radius: float = 40.0
    num_ues: int = 120
    hotspot_ue_fraction: float = 2.0 / 3.0
    macro_power: float = 46.0
    pico_power: float = 30.0
    bandwidth: float = 20e6
    num_rbs: int = 100
    noise_psd: float = -174.0
    shadowing_sigma: float = 10.0
    fading_model: str = "none"
    seed: int = 0
    ue_weights: Optional[tuple] = None
    macro_pathloss: tuple = (128.1, 37.6)
    pico_pathloss: tuple = (140.7, 36.7)
    min_ue_distance: float = 10.0
    pico_macro_separation: float = 75.0

    @classmethod
    def full_scale(cls, **overrides) -> "NetworkConfig":
        """Seven sites (21 sectors), 42 picos and 1260 UEs."""
        params = dict(num_macro_sites=7, num_ues=1260)
        params.update(overrides)
        return cls(**params)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def replace(self, **changes) -> "NetworkConfig":
        params = {f.name: getattr(self, f.name) for f in fields(self)}
        params.update(changes)
        return NetworkConfig(**params)

    @property
    def rb_bandwidth(self) -> float:
        return self.bandwidth / self.num_rbs

    @property
    def num_picos(self) -> int:
        return self.num_macro_sites * self.sectors_per_macro * self.picos_per_sector

    def validate(self) -> None:
        """Raise :class:`ConfigError` naming the first offending field."""
        for name in ("num_macro_sites", "sectors_per_macro", "num_ues", "num_rbs"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}", name)
        if int(self.picos_per_sector) != self.picos_per_sector or self.picos_per_sector < 0:
            raise ConfigError(
                f"picos_per_sector must be an integer >= 0, got {self.picos_per_sector!r}",
                "picos_per_sector",
            )
        if not 0.0 <= self.hotspot_ue_fraction <= 1.0:
            raise ConfigError(
                f"hotspot_ue_fraction must lie in [0, 1], got {self.hotspot_ue_fraction!r}",
                "hotspot_ue_fraction",
            )
        for name in ("inter_site_distance", "hotspot_radius", "bandwidth", "min_ue_distance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)!r}", name)
        if self.shadowing_sigma < 0:
            raise ConfigError(
                f"shadowing_sigma must be >= 0, got {self.shadowing_sigma!r}", "shadowing_sigma"
            )
        if self.pico_macro_separation < 0:
            raise ConfigError("pico_macro_separation must be >= 0", "pico_macro_separation")
        if not self.inter_site_distance > 2 * self.hotspot_radius:
            raise ConfigError(
                "hotspot_radius must be smaller than inter_site_distance / 2 "
                f"(got hotspot_radius={self.hotspot_radius!r}, "
                f"inter_site_distance={self.inter_site_distance!r})",
                "hotspot_radius",
            )
        if self.fading_model not in FADING_MODELS:
            raise ConfigError(
                f"fading_model must be one of {FADING_MODELS}, got {self.fading_model!r}",
                "fading_model",
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}", "seed")
        if self.ue_weights is not None:
            if len(self.ue_weights) != self.num_ues:
                raise ConfigError(
                    f"ue_weights has {len(self.ue_weights)} entries, expected {self.num_ues}",
                    "ue_weights",
                )
            if any(not w > 0 for w in self.ue_weights):
                raise ConfigError("ue_weights must all be > 0", "ue_weights")
        for name in ("macro_pathloss", "pico_pathloss"):
            if len(getattr(self, name)) != 2:
                raise ConfigError(f"{name} must be a pair (intercept_db, slope_db_per_decade)", name)


def _frozen(array) -> np.ndarray:
    out = np.array(array)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Topology:
    """Physical eNBs and UEs.

    eNBs are ordered macros first, then picos.  ``per_rb_power`` is in watts
    per resource block; ``noise_power`` is the thermal noise per RB in watts.
    """

    enb_tier: np.ndarray
    enb_position: np.ndarray
    enb_bearing: np.ndarray
    enb_site: np.ndarray
    per_rb_power: np.ndarray
    ue_position: np.ndarray
    ue_weight: np.ndarray
    ue_hotspot: np.ndarray
    site_position: np.ndarray
    rb_bandwidth: float
    noise_power: float
    num_rbs: int

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                object.__setattr__(self, f.name, _frozen(value))
        if np.any(self.per_rb_power <= 0):
            raise ConfigError("every eNB needs a positive per-RB power")
        if np.any(self.ue_weight <= 0):
            raise ConfigError("every UE weight must be positive")

    @property
    def num_enbs(self) -> int:
        return len(self.enb_tier)

    @property
    def num_ues(self) -> int:
        return len(self.ue_weight)

    @property
    def macro_ids(self) -> np.ndarray:
        return np.flatnonzero(self.enb_tier == MACRO)

    @property
    def pico_ids(self) -> np.ndarray:
        return np.flatnonzero(self.enb_tier == PICO)

    @property
    def num_macros(self) -> int:
        return len(self.macro_ids)

    @property
    def num_picos(self) -> int:
        return len(self.pico_ids)

    def distances(self) -> np.ndarray:
        """UE-to-eNB distances in meters, shape ``(num_ues, num_enbs)``."""
        diff = self.ue_position[:, None, :] - self.enb_position[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


@dataclass(frozen=True)
class GainTensor:
    """Linear channel power gains.

    ``gains[u, b, r]`` includes path loss, shadowing and fast fading;
    ``large_scale[u, b]`` is path loss and shadowing only.
    """

    gains: np.ndarray
    large_scale: np.ndarray = field(default=None)

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        if gains.ndim != 3:
            raise ValueError("gains must be indexed (ue, enb, rb)")
        if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
            raise ValueError("gains must be strictly positive and finite")
        large = gains.mean(axis=2) if self.large_scale is None else self.large_scale
        object.__setattr__(self, "gains", _frozen(gains))
        object.__setattr__(self, "large_scale", _frozen(np.asarray(large, dtype=float)))

    @property
    def shape(self) -> tuple:
        return self.gains.shape


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


def path_loss_db(distance, tier: str, config: Optional[NetworkConfig] = None):
    """Urban macro/pico path loss in dB; distances below the clamp use the clamp.

    >>> float(path_loss_db(1000.0, "macro"))
    128.1
    """
    config = config or NetworkConfig()
    if tier == MACRO:
        intercept, slope = config.macro_pathloss
    elif tier == PICO:
        intercept, slope = config.pico_pathloss
    else:
        raise ValueError(f"unknown tier {tier!r}")
    d = np.maximum(np.asarray(distance, dtype=float), config.min_ue_distance)
    return intercept + slope * np.log10(d / 1000.0)


def hex_site_positions(num_sites: int, isd: float) -> np.ndarray:
    """Centre site followed by complete rings, spiralling outwards."""
    axial = [(0, 0)]
    directions = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
    ring = 1
    while len(axial) < num_sites:
        q, r = -ring, ring  # start corner, then walk the six edges
        for dq, dr in directions:
            for _ in range(ring):
                axial.append((q, r))
                q, r = q + dq, r + dr
        ring += 1
    axial = np.array(axial[:num_sites], dtype=float)
    x = isd * (axial[:, 0] + axial[:, 1] / 2.0)
    y = isd * (math.sqrt(3.0) / 2.0) * axial[:, 1]
    return np.column_stack([x, y])


def _in_hexagon(points: np.ndarray, center: np.ndarray, isd: float) -> np.ndarray:
    # Hexagon with inradius isd/2 whose flat sides face the six neighbours.
    rel = np.atleast_2d(points) - center
    angles = np.arange(6) * (math.pi / 3.0)
    normals = np.column_stack([np.cos(angles), np.sin(angles)])
    return np.all(rel @ normals.T <= isd / 2.0 + 1e-9, axis=1)


def _sample_hexagon(rng: np.random.Generator, center: np.ndarray, isd: float) -> np.ndarray:
    circ = isd / math.sqrt(3.0)
    while True:
        point = center + rng.uniform(-circ, circ, size=2)
        if _in_hexagon(point, center, isd)[0]:
            return point


def _sector_bearings(sectors: int) -> np.ndarray:
    # Three sectors point at 30, 150 and 270 degrees (between neighbour sites).
    return (math.pi / 6.0 + 2.0 * math.pi * np.arange(sectors) / sectors) % (2.0 * math.pi)


def _in_wedge(rel: np.ndarray, bearing: float, width: float) -> bool:
    angle = math.atan2(rel[1], rel[0])
    delta = (angle - bearing + math.pi) % (2.0 * math.pi) - math.pi
    return abs(delta) <= width / 2.0


def num_hotspot_ues(config: NetworkConfig) -> int:
    if config.num_picos == 0:
        return 0
    return int(math.floor(config.hotspot_ue_fraction * config.num_ues + 0.5))


def generate_layout(config: NetworkConfig) -> Topology:
    """Drop macros, picos and UEs for ``config``."""
    config.validate()
    streams = np.random.SeedSequence(int(config.seed)).spawn(_NUM_STREAMS)
    isd = config.inter_site_distance
    sites = hex_site_positions(config.num_macro_sites, isd)
    bearings = _sector_bearings(config.sectors_per_macro)
    width = 2.0 * math.pi / config.sectors_per_macro

    macro_pos, macro_bearing, macro_site = [], [], []
    for s, site in enumerate(sites):
        for bearing in bearings:
            macro_pos.append(site)
            macro_bearing.append(bearing)
            macro_site.append(s)

    pico_rng = np.random.default_rng(streams[_STREAM_PICOS])
    pico_pos, pico_site = [], []
    for s, site in enumerate(sites):
        for bearing in bearings:
            for _ in range(config.picos_per_sector):
                for _attempt in range(_MAX_DRAWS):
                    cand = _sample_hexagon(pico_rng, site, isd)
                    if not _in_wedge(cand - site, bearing, width):
                        continue
                    if np.min(np.hypot(*(sites - cand).T)) < config.pico_macro_separation:
                        continue
                    if pico_pos and np.min(
                        np.hypot(*(np.array(pico_pos) - cand).T)
                    ) < 2.0 * config.hotspot_radius:
                        continue
                    pico_pos.append(cand)
                    pico_site.append(s)
                    break
                else:
                    raise ConfigError(
                        "could not place pico: geometry infeasible "
                        f"(site {s}, hotspot_radius={config.hotspot_radius})"
                    )

    num_picos = len(pico_pos)
    n_hot = num_hotspot_ues(config)
    hot_rng = np.random.default_rng(streams[_STREAM_HOTSPOT])
    per_pico = np.full(num_picos, n_hot // num_picos if num_picos else 0, dtype=int)
    if num_picos:
        per_pico[: n_hot % num_picos] += 1
    ue_pos, ue_hot = [], []
    for p in range(num_picos):
        k = per_pico[p]
        radius = config.hotspot_radius * np.sqrt(hot_rng.uniform(size=k))
        theta = hot_rng.uniform(0.0, 2.0 * math.pi, size=k)
        offsets = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
        ue_pos.extend(pico_pos[p] + offsets)
        ue_hot.extend([p] * k)

    wide_rng = np.random.default_rng(streams[_STREAM_WIDE])
    for _ in range(config.num_ues - n_hot):
        site = sites[wide_rng.integers(len(sites))]
        ue_pos.append(_sample_hexagon(wide_rng, site, isd))
        ue_hot.append(-1)

    num_macros = len(macro_pos)
    tiers = np.array([MACRO] * num_macros + [PICO] * num_picos)
    enb_pos = np.array(macro_pos + pico_pos, dtype=float).reshape(-1, 2)
    power_dbm = np.where(tiers == MACRO, config.macro_power, config.pico_power)
    weights = (
        np.ones(config.num_ues)
        if config.ue_weights is None
        else np.asarray(config.ue_weights, dtype=float)
    )
    noise_w = float(dbm_to_watts(config.noise_psd) * config.rb_bandwidth)
    return Topology(
        enb_tier=tiers,
        enb_position=enb_pos,
        enb_bearing=np.concatenate([macro_bearing, np.full(num_picos, np.nan)]),
        enb_site=np.array(macro_site + pico_site, dtype=int),
        per_rb_power=dbm_to_watts(power_dbm) / config.num_rbs,
        ue_position=np.array(ue_pos, dtype=float).reshape(-1, 2),
        ue_weight=weights,
        ue_hotspot=np.array(ue_hot, dtype=int),
        site_position=sites,
        rb_bandwidth=config.rb_bandwidth,
        noise_power=noise_w,
        num_rbs=config.num_rbs,
    )


def build_gain_tensor(topology: Topology, config: NetworkConfig) -> GainTensor:
    """Path loss x lognormal shadowing x optional block Rayleigh fading."""
    streams = np.random.SeedSequence(int(config.seed)).spawn(_NUM_STREAMS)
    dist = topology.distances()
    pl = np.empty_like(dist)
    macro = topology.enb_tier == MACRO
    pl[:, macro] = path_loss_db(dist[:, macro], MACRO, config)
    pl[:, ~macro] = path_loss_db(dist[:, ~macro], PICO, config)

    shadow = np.zeros_like(dist)
    if config.shadowing_sigma > 0:
        shadow = np.random.default_rng(streams[_STREAM_SHADOW]).normal(
            0.0, config.shadowing_sigma, size=dist.shape
        )
    large_scale = 10.0 ** (-(pl + shadow) / 10.0)

    n = config.num_rbs
    if config.fading_model == "rayleigh_block":
        fading = np.random.default_rng(streams[_STREAM_FADING]).exponential(
            1.0, size=dist.shape + (n,)
        )
        gains = large_scale[:, :, None] * fading
    else:
        gains = np.repeat(large_scale[:, :, None], n, axis=2)
    return GainTensor(gains=gains, large_scale=large_scale)


def make_topology(
    tiers: Sequence[str],
    num_ues: int,
    num_rbs: int,
    weights: Optional[Sequence[float]] = None,
    macro_power_w: float = 1.0,
    pico_power_w: float = 0.05,
    noise_power: float = 1e-13,
    rb_bandwidth: float = 180e3,
) -> Topology:
    """Position-free topology for hand-built channel instances."""
    tiers = np.asarray(tiers)
    weights = np.ones(num_ues) if weights is None else np.asarray(weights, dtype=float)
    return Topology(
        enb_tier=tiers,
        enb_position=np.zeros((len(tiers), 2)),
        enb_bearing=np.full(len(tiers), np.nan),
        enb_site=np.zeros(len(tiers), dtype=int),
        per_rb_power=np.where(tiers == MACRO, macro_power_w, pico_power_w),
        ue_position=np.zeros((num_ues, 2)),
        ue_weight=weights,
        ue_hotspot=np.full(num_ues, -1),
        site_position=np.zeros((1, 2)),
        rb_bandwidth=rb_bandwidth,
        noise_power=noise_power,
        num_rbs=num_rbs,
    )
