"""Reference measures and quadrature used by every kernel integral.

All transition densities in this library are stored with respect to an
explicit reference measure, either Lebesgue-with-density on a real
interval or a positive weight vector on a finite state set.  Keeping
the measure explicit is what lets h-transformed kernels and their base
kernels be compared without silent convention mismatches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature does not converge.

    Carries the achieved estimate so callers can still inspect it.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


LEBESGUE = "lebesgue-with-density"
FINITE = "finite-weights"


@dataclass(frozen=True)
class ReferenceMeasure:
    """A sigma-finite reference measure on the state space.

    kind 'lebesgue-with-density': rho(x) dx on the interval `support`,
    with rho strictly positive on the open interval.  kind
    'finite-weights': a positive weight per state of a finite set.
    """

    kind: str
    density: Optional[Callable] = None
    support: tuple = (-np.inf, np.inf)
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == LEBESGUE:
            if self.density is None:
                raise ValueError("lebesgue measure needs a density callable")
            lo, hi = self.support
            if not lo < hi:
                raise ValueError(f"empty support ({lo}, {hi})")
        elif self.kind == FINITE:
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or w.size == 0:
                raise ValueError("weights must be a nonempty vector")
            if np.any(w <= 0):
                raise ValueError("weights must be strictly positive")
            object.__setattr__(self, "weights", w)
        else:
            raise ValueError(f"unknown measure kind {self.kind!r}")

    @classmethod
    def lebesgue(cls, density=None, support=(-np.inf, np.inf)):
        if density is None:
            density = _unit_density
        return cls(kind=LEBESGUE, density=density, support=support)

    @classmethod
    def finite(cls, weights):
        return cls(kind=FINITE, weights=np.asarray(weights, dtype=float),
                   support=(0, len(weights)))

    @property
    def n_states(self):
        if self.kind != FINITE:
            raise ValueError("n_states only defined for finite-weights measures")
        return self.weights.size


def _unit_density(x):
    return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Quadrature:
    """Integration policy for kernel residual checks.

    `scheme` is 'adaptive' (QUADPACK) or 'fixed' (composite Simpson on
    `fixed_points` + 1 nodes).  `window` is the truncation half-width in
    units of sqrt(t) used when an integrand lives on an unbounded
    support; ten standard deviations leaves a relative tail below 1e-20
    for Gaussian-type integrands.
    """

    scheme: str = "adaptive"
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_subdivisions: int = 200
    window: float = 10.0
    fixed_points: int = 4096

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.window <= 0:
            raise ValueError("window must be positive")
        if self.scheme not in ("adaptive", "fixed"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def integrate(self, fn, lo, hi, points=()):
        """Integrate fn over [lo, hi]; raises QuadratureError on failure.

        `points` marks interior locations where the integrand kinks or
        jumps (the sign-flipped kernels are discontinuous at 0), so the
        adaptive rule subdivides there instead of overlooking a lobe.
        """
        if self.scheme == "fixed":
            xs = np.linspace(lo, hi, self.fixed_points + 1)
            return float(integrate.simpson(fn(xs), x=xs))
        inner = sorted(p for p in points if lo < p < hi)
        out = integrate.quad(fn, lo, hi, epsabs=self.abs_tol,
                             epsrel=self.rel_tol, limit=self.max_subdivisions,
                             points=inner or None, full_output=1)
        if len(out) > 3:
            raise QuadratureError(
                f"quadrature did not converge on [{lo}, {hi}]: {out[3]}",
                estimate=out[0])
        return float(out[0])

    def truncated(self, support, centers, scale):
        """Integration window: `window * scale` around the centers,
        clipped to the support."""
        lo, hi = support
        c = np.atleast_1d(np.asarray(centers, dtype=float))
        half = self.window * scale
        return max(lo, float(c.min()) - half), min(hi, float(c.max()) + half)


DEFAULT_QUADRATURE = Quadrature()
