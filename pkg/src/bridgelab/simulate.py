"""Forward simulation and reproducible random-number streams.

The Euler scheme cross-validates the closed-form transformed kernels
against the stochastic equation they claim to solve; the flipped-Bessel
simulator cross-validates the reconstructed signed density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngPolicy:
    """Counter-based stream derivation from one master seed.

    Stream i is a Philox generator jumped i * 2^128 steps ahead, so
    distinct indices can never overlap and workers can draw
    independently from (master_seed, worker_index).
    """

    master_seed: int

    def stream(self, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.master_seed).jumped(index))

    def streams(self, count: int):
        return [self.stream(i) for i in range(count)]


def euler_maruyama(mu, x0, t, dt, rng, n_paths=1, return_path=False):
    """Euler scheme for dY = mu(Y) dt + dB from x0 up to time t.

    Takes floor(t / dt) full steps plus one partial step for the
    remainder.  Returns the endpoints, or (times, paths) when
    `return_path` is set.
    """
    if dt <= 0 or dt > t:
        raise ValueError("need 0 < dt <= t")
    n_full = int(t / dt)
    rem = t - n_full * dt
    steps = [dt] * n_full + ([rem] if rem > 1e-12 * t else [])
    y = np.full(n_paths, float(x0))
    if return_path:
        path = np.empty((n_paths, len(steps) + 1))
        path[:, 0] = y
    for i, h in enumerate(steps):
        y = y + mu(y) * h + math.sqrt(h) * rng.standard_normal(n_paths)
        if return_path:
            path[:, i + 1] = y
    if return_path:
        times = np.concatenate([[0.0], np.cumsum(steps)])
        return times, path
    return y


def poisson_flip_endpoints(x0, t, n, rng, variant="X"):
    """Endpoints of a Bessel(3) radius with unit-rate Poisson sign flips.

    The radius at time t is sampled exactly as the norm of a
    3-dimensional Brownian motion started at (|x0|, 0, 0), so no time
    stepping is needed; the sign flips an N ~ Poisson(t) number of
    times.  Variant 'X' starts the origin on the positive side,
    variant 'Y' on the negative side.
    """
    if variant not in ("X", "Y"):
        raise ValueError(f"variant must be 'X' or 'Y', got {variant!r}")
    r0 = abs(float(x0))
    g = rng.standard_normal((n, 3))
    radius = np.sqrt((r0 + math.sqrt(t) * g[:, 0]) ** 2
                     + t * (g[:, 1] ** 2 + g[:, 2] ** 2))
    flips = rng.poisson(t, size=n)
    if x0 > 0 or (x0 == 0 and variant == "X"):
        start_sign = 1.0
    else:
        start_sign = -1.0
    sign = start_sign * np.where(flips % 2 == 0, 1.0, -1.0)
    return sign * radius
