"""Synthetic deployments and traces in the on-disk formats the simulator reads.

Useful for demos and tests when the Cologne files are not at hand.
"""

from __future__ import annotations

import numpy as np


def synthetic_deployment(n: int = 247, seed: int = 0, extent: float = 20_000.0) -> np.ndarray:
    """Station coordinates: a dense urban core plus sparse suburbs."""
    rng = np.random.default_rng(seed)
    n_core = n // 2
    core = rng.normal(extent / 2, extent / 12, size=(n_core, 2))
    rest = rng.uniform(0, extent, size=(n - n_core, 2))
    return np.clip(np.vstack([core, rest]), 0, extent)


def deployment_text(coords: np.ndarray) -> str:
    lines = ["# x y"] + [f"{x:.2f} {y:.2f}" for x, y in coords]
    return "\n".join(lines) + "\n"


def synthetic_trace(
    n_vehicles: int = 200,
    duration: float = 300.0,
    step: float = 1.0,
    seed: int = 0,
    extent: float = 20_000.0,
    hotspot_share: float = 0.6,
    speed: float = 12.0,
) -> str:
    """Random-waypoint-ish trace in ``time vehicle_id x y speed`` layout.

    A share of the vehicles start around a hotspot near the map center;
    each vehicle is on for a random sub-interval, so slots see UEs appear
    and disappear.
    """
    rng = np.random.default_rng(seed)
    hot = rng.random(n_vehicles) < hotspot_share
    pos = np.where(
        hot[:, None],
        rng.normal(extent * 0.55, extent / 25, size=(n_vehicles, 2)),
        rng.uniform(0, extent, size=(n_vehicles, 2)),
    )
    heading = rng.uniform(0, 2 * np.pi, n_vehicles)
    start = rng.uniform(0, duration * 0.5, n_vehicles)
    stop = start + rng.uniform(duration * 0.2, duration, n_vehicles)
    out = []
    t = 0.0
    while t < duration:
        on = (start <= t) & (t < stop)
        heading += rng.normal(0, 0.2, n_vehicles)
        pos += step * speed * np.c_[np.cos(heading), np.sin(heading)]
        pos = np.clip(pos, 0, extent)
        for v in np.nonzero(on)[0]:
            out.append(f"{t:.1f} {v} {pos[v, 0]:.2f} {pos[v, 1]:.2f} {speed:.2f}")
        t += step
    return "\n".join(out) + "\n"
