"""UE to base-station association with log-distance path loss.

Path loss follows ``alpha + 10*beta*log10(d) + X`` with ``X`` a zero-mean
Gaussian shadowing term. Newly seen UEs attach to the station with minimum
sampled path loss; known UEs compare their serving station against the
geometrically nearest one under a hysteresis margin.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .mobility import TimeSlotSnapshot
from .topology import BaseStation, station_coords

MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class PathLossModel:
    alpha: float = 72.0
    beta: float = 2.92
    sigma: float = 8.7
    hysteresis_eps: float = 2.0
    seed: int = 0
    # roam iff PL(nearest) < PL(serving) + eps, instead of the
    # anti-ping-pong PL(nearest) + eps < PL(serving)
    hysteresis_literal: bool = False

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.hysteresis_eps < 0:
            raise ValueError("hysteresis_eps must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")


@dataclass
class AssociationState:
    attached: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ActiveLoad:
    slot_index: int
    ue_count: dict[int, int]
    total_ues: int

    @property
    def active_stations(self) -> list[int]:
        return sorted(b for b, c in self.ue_count.items() if c > 0)

    def counts(self, n_stations: int) -> np.ndarray:
        arr = np.zeros(n_stations, dtype=np.int64)
        for b, c in self.ue_count.items():
            arr[b] = c
        return arr

    @classmethod
    def from_counts(cls, counts, slot_index: int = 0) -> "ActiveLoad":
        if isinstance(counts, dict):
            items = counts.items()
        else:
            items = enumerate(counts)
        ue_count = {int(b): int(c) for b, c in items if c > 0}
        return cls(slot_index, ue_count, sum(ue_count.values()))


def path_loss(d, model: PathLossModel, shadow_sample=0.0):
    """Path loss in dB at distance ``d`` meters; distances below 1 m are clamped."""
    d = np.maximum(np.asarray(d, dtype=float), MIN_DISTANCE_M)
    if np.any(~np.isfinite(d)):
        raise ValueError("distance must be finite")
    out = model.alpha + 10.0 * model.beta * np.log10(d) + shadow_sample
    return float(out) if np.ndim(out) == 0 else out


# -- counter-based Gaussian samples -----------------------------------------

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK
    z = x
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK
    return z ^ (z >> np.uint64(31))


@lru_cache(maxsize=1 << 16)
def ue_key(vehicle_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(vehicle_id.encode(), digest_size=8).digest(), "little")


def shadow_samples(seed: int, slot: int, ue_keys, bs_ids, sigma: float) -> np.ndarray:
    """Standard-normal draws scaled by ``sigma``, one per (UE, BS) pair.

    Each value is a pure function of ``(seed, slot, ue_key, bs_id)``, so the
    result does not depend on evaluation order. ``ue_keys`` and ``bs_ids``
    broadcast against each other.
    """
    ue = np.asarray(ue_keys, dtype=np.uint64)
    bs = np.asarray(bs_ids, dtype=np.uint64)
    if sigma == 0:
        return np.zeros(np.broadcast_shapes(ue.shape, bs.shape))
    with np.errstate(over="ignore"):
        h = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        h = _splitmix64(h ^ np.uint64(slot & 0xFFFFFFFFFFFFFFFF))
        h = _splitmix64(h ^ ue)
        h = _splitmix64(h ^ bs)
        h2 = _splitmix64(h)
    # 53-bit uniforms in (0, 1]
    u1 = ((h >> np.uint64(11)).astype(np.float64) + 1.0) / 9007199254740992.0
    u2 = (h2 >> np.uint64(11)).astype(np.float64) / 9007199254740992.0
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return sigma * z


# -- per-slot association ----------------------------------------------------

def associate_slot(
    snapshot: TimeSlotSnapshot,
    stations: Sequence[BaseStation] | np.ndarray,
    prev_state: AssociationState,
    model: PathLossModel,
) -> tuple[ActiveLoad, AssociationState]:
    coords = stations if isinstance(stations, np.ndarray) else station_coords(stations)
    n_bs = len(coords)
    if n_bs == 0:
        raise ValueError("no base stations")
    vids = list(snapshot.active_ues)
    attached: dict[str, int] = {}
    if vids:
        pos = np.array([snapshot.active_ues[v] for v in vids], dtype=float)
        keys = np.array([ue_key(v) for v in vids], dtype=np.uint64)
        diff = pos[:, None, :] - coords[None, :, :]
        dist = np.maximum(np.sqrt((diff**2).sum(axis=-1)), MIN_DISTANCE_M)
        det = model.alpha + 10.0 * model.beta * np.log10(dist)
        nearest = np.argmin(dist, axis=1)
        prev = np.array([prev_state.attached.get(v, -1) for v in vids])
        rows = np.arange(len(vids))
        choice = np.empty(len(vids), dtype=np.int64)

        new = prev < 0
        if new.any():
            idx = rows[new]
            shadow = shadow_samples(
                model.seed, snapshot.slot_index, keys[idx, None], np.arange(n_bs)[None, :], model.sigma
            )
            choice[idx] = np.argmin(det[idx] + shadow, axis=1)

        old = ~new
        if old.any():
            idx = rows[old]
            near, serving = nearest[idx], prev[idx]
            pl_near = det[idx, near] + shadow_samples(
                model.seed, snapshot.slot_index, keys[idx], near, model.sigma
            )
            pl_serv = det[idx, serving] + shadow_samples(
                model.seed, snapshot.slot_index, keys[idx], serving, model.sigma
            )
            eps = model.hysteresis_eps
            if model.hysteresis_literal:
                roam = pl_near < pl_serv + eps
            else:
                roam = pl_near + eps < pl_serv
            choice[idx] = np.where(roam, near, serving)

        attached = dict(zip(vids, choice.tolist()))

    counts = np.bincount(np.fromiter(attached.values(), dtype=np.int64), minlength=n_bs)
    ue_count = {int(b): int(c) for b, c in enumerate(counts) if c > 0}
    load = ActiveLoad(snapshot.slot_index, ue_count, len(attached))
    return load, AssociationState(attached)


def associate_stream(slots, stations, model: PathLossModel):
    """Associate a sequence of snapshots, carrying state between slots."""
    coords = station_coords(stations) if not isinstance(stations, np.ndarray) else stations
    state = AssociationState()
    for snap in slots:
        load, state = associate_slot(snap, coords, state, model)
        yield snap, load
