"""Transition-kernel catalog and the eigenfunction transform.

A TransitionKernel stores a jointly evaluable density p_t(x, y) with
respect to its own reference measure.  The catalog covers standard
Brownian motion, Brownian motion with constant or tanh drift (built as
transforms of the Gaussian kernel), the 3-dimensional Bessel radius,
and the sign-flipped Bessel process whose two variants differ only in
the sign convention they assign to the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .measure import ReferenceMeasure


class DomainError(ValueError):
    """Evaluation outside the kernel's (t, x, y) domain."""


@dataclass(frozen=True)
class Eigenpair:
    """A positive function psi with P_t psi = exp(lam * t) * psi.

    `psi_hat` is the matching eigenfunction of the dual semigroup; it
    defaults to psi, which is correct for self-dual kernels.
    """

    psi: Callable
    lam: float
    psi_hat: Optional[Callable] = None

    def __post_init__(self):
        if self.psi_hat is None:
            object.__setattr__(self, "psi_hat", self.psi)


@dataclass
class TransitionKernel:
    """Density p_t(x, y) of a Markov semigroup w.r.t. `measure`.

    `self_dual` means the dual density is p_t(y, x), which holds for
    every catalog kernel (one-dimensional diffusions on natural scale
    are self-dual w.r.t. their speed measure).  `bridge_family` tags
    which pinned-path sampler applies; transforms inherit the tag of
    their base because they share its bridges.
    """

    name: str
    measure: ReferenceMeasure
    density_fn: Callable
    self_dual: bool = True
    dual_density_fn: Optional[Callable] = None
    bridge_family: str = "generic"
    base: Optional["TransitionKernel"] = None
    eigenpair: Optional[Eigenpair] = None
    drift: Optional[Callable] = None
    zero_sign: int = 0
    breakpoints: tuple = ()
    params: dict = field(default_factory=dict)

    def mass_centers(self, x):
        """States around which p_t(x, .) concentrates; integration
        windows must cover all of them.  Sign-flipping kernels put mass
        around the mirror image of the start as well."""
        if self.bridge_family == "flipbessel":
            return [float(x), -float(x)]
        return [float(x)]

    def _check_domain(self, t, x, y):
        if np.any(np.asarray(t) <= 0):
            raise DomainError("transition densities are defined for t > 0 only")
        lo, hi = self.measure.support
        for v, label in ((x, "x"), (y, "y")):
            a = np.asarray(v, dtype=float)
            if np.any(a < lo) or np.any(a > hi):
                raise DomainError(f"{label} outside support [{lo}, {hi}]")

    def density(self, t, x, y):
        """p_t(x, y) w.r.t. this kernel's reference measure."""
        self._check_domain(t, x, y)
        return self.density_fn(t, x, y)

    def lebesgue_density(self, t, x, y):
        """Density of the transition measure P_t(x, dy) w.r.t. dy."""
        return self.density(t, x, y) * self.measure.density(np.asarray(y, dtype=float))

    def dual_density(self, t, x, y):
        """Density of the dual semigroup, p-hat_t(x, y)."""
        if self.self_dual:
            return self.density(t, y, x)
        if self.dual_density_fn is None:
            raise DomainError(f"kernel {self.name} has no dual density")
        self._check_domain(t, x, y)
        return self.dual_density_fn(t, x, y)

    @property
    def bridge_base(self):
        """Root of the transform chain; bridges of a transformed kernel
        coincide with the bridges of its base."""
        k = self
        while k.base is not None:
            k = k.base
        return k


def h_transform(kernel: TransitionKernel, eig: Eigenpair) -> TransitionKernel:
    """Transform a kernel by a positive eigenfunction.

    The result has reference density rho * psi * psi_hat and density

        q_t(x, y) = exp(-lam t) p_t(x, y) / (psi(x) psi_hat(y)),

    so its transition measure is Q_t(x, dy) =
    exp(-lam t) [psi(y) / psi(x)] P_t(x, dy).  The eigenpair is not
    verified here; `checks.eigen_residual` does that separately.
    """
    psi, psi_hat, lam = eig.psi, eig.psi_hat, eig.lam
    base_measure_density = kernel.measure.density

    def measure_density(y):
        return base_measure_density(y) * psi(y) * psi_hat(y)

    base_density = kernel.density_fn

    def q(t, x, y):
        return np.exp(-lam * np.asarray(t, dtype=float)) \
            * base_density(t, x, y) / (psi(np.asarray(x, dtype=float))
                                       * psi_hat(np.asarray(y, dtype=float)))

    return TransitionKernel(
        name=f"h[{kernel.name}]",
        measure=ReferenceMeasure.lebesgue(measure_density, kernel.measure.support),
        density_fn=q,
        self_dual=kernel.self_dual and eig.psi_hat is eig.psi,
        bridge_family=kernel.bridge_family,
        base=kernel,
        eigenpair=eig,
        zero_sign=kernel.zero_sign,
        breakpoints=kernel.breakpoints,
    )


# ------------------------------------------------------------------
# catalog
# ------------------------------------------------------------------

def gaussian_density(t, x, y):
    t = np.asarray(t, dtype=float)
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return np.exp(-d * d / (2.0 * t)) / np.sqrt(2.0 * math.pi * t)


def gaussian_kernel() -> TransitionKernel:
    """Standard Brownian motion; reference measure is Lebesgue."""
    return TransitionKernel(
        name="gaussian",
        measure=ReferenceMeasure.lebesgue(),
        density_fn=gaussian_density,
        bridge_family="gaussian",
        drift=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )


def constant_drift_kernel(k: float) -> TransitionKernel:
    """Brownian motion with constant drift k, as the exp(k x) transform
    of the Gaussian kernel with rate k^2 / 2."""
    eig = Eigenpair(psi=lambda x: np.exp(k * np.asarray(x, dtype=float)),
                    lam=0.5 * k * k)
    kern = h_transform(gaussian_kernel(), eig)
    kern.name = f"drift:{k:g}"
    kern.drift = lambda x: np.full_like(np.asarray(x, dtype=float), k)
    kern.params = {"k": k}
    return kern


def tanh_drift_kernel(k: float, c: float = 0.0) -> TransitionKernel:
    """Brownian motion with drift k * tanh(k x + c).

    Built as the cosh(k x + c) / cosh(c) transform of the Gaussian
    kernel with rate k^2 / 2; the normalization makes psi(0) = 1.
    """
    cc = math.cosh(c)
    eig = Eigenpair(psi=lambda x: np.cosh(k * np.asarray(x, dtype=float) + c) / cc,
                    lam=0.5 * k * k)
    kern = h_transform(gaussian_kernel(), eig)
    kern.name = f"tanh:{k:g}:{c:g}"
    kern.drift = lambda x: k * np.tanh(k * np.asarray(x, dtype=float) + c)
    kern.params = {"k": k, "c": c}
    return kern


def _sinhc(u):
    """sinh(u) / u with the removable singularity at 0 filled in."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-4
    safe = np.where(small, 1.0, u)
    return np.where(small, 1.0 + u * u / 6.0, np.sinh(np.minimum(safe, 700.0)) / safe)


def bessel3_density(t, x, y):
    """Bessel(3) transition density w.r.t. the speed measure y^2 dy.

    Two algebraically equal forms are blended for stability: near
    x*y/t = 0 the reflection difference cancels catastrophically, so a
    sinh-based form takes over there; for large x*y/t the difference of
    Gaussians avoids sinh overflow.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    norm = 1.0 / np.sqrt(2.0 * math.pi * t)
    u = x * y / t
    small = u <= 0.1
    b_small = (2.0 / t) * norm * np.exp(-(x * x + y * y) / (2.0 * t)) * _sinhc(u)
    xy = np.where(small, 1.0, x * y)
    diff = np.exp(-(y - x) ** 2 / (2.0 * t)) - np.exp(-(y + x) ** 2 / (2.0 * t))
    b_big = norm * diff / xy
    return np.where(small, b_small, b_big)


def bessel3_kernel() -> TransitionKernel:
    """Radius of a 3-dimensional Brownian motion on ]0, inf[.

    The density is evaluable at x = 0 (entrance law
    sqrt(2 / (pi t^3)) exp(-y^2 / 2t)), even though the open support
    excludes the origin.
    """
    return TransitionKernel(
        name="bessel3",
        measure=ReferenceMeasure.lebesgue(lambda y: np.asarray(y, dtype=float) ** 2,
                                          support=(0.0, np.inf)),
        density_fn=bessel3_density,
        bridge_family="bessel3",
    )


def _sign_with_zero(x, zero_sign):
    s = np.sign(np.asarray(x, dtype=float))
    return np.where(s == 0, float(zero_sign), s)


def flipped_bessel_density(t, x, y, zero_sign):
    """Density of a Bessel(3) radius with Poisson sign flips, w.r.t.
    y^2 dy on the whole line.

    The sign process flips at unit-rate Poisson times, so the chance
    the endpoint sign matches the start's sign convention is
    (1 + exp(-2t)) / 2, and (1 - exp(-2t)) / 2 otherwise.  `zero_sign`
    is the convention for the origin: the X variant treats 0 as
    positive and leaves it on the positive side immediately, the Y
    variant treats it as negative.  From the origin the two one-sided
    values are therefore

        (1 +/- exp(-2t)) / sqrt(2 pi t^3) * exp(-y^2 / 2t)

    with the big value on the starting convention's side, and the
    variants swap which side carries which formula.
    """
    t = np.asarray(t, dtype=float)
    match = _sign_with_zero(x, zero_sign) == _sign_with_zero(y, zero_sign)
    a = np.exp(-2.0 * t)
    w = np.where(match, 0.5 * (1.0 + a), 0.5 * (1.0 - a))
    return w * bessel3_density(t, np.abs(np.asarray(x, dtype=float)),
                               np.abs(np.asarray(y, dtype=float)))


def flipped_bessel_kernel(variant: str) -> TransitionKernel:
    """Sign-flipped Bessel(3) process on the real line.

    variant 'X': the origin counts as a positive state (start >= 0 uses
    the unflipped sign).  variant 'Y': the origin counts as negative.
    For start and target both away from 0 the two variants have
    identical densities; they differ only when started at the polar
    point 0.
    """
    if variant not in ("X", "Y"):
        raise ValueError(f"variant must be 'X' or 'Y', got {variant!r}")
    zero_sign = 1 if variant == "X" else -1
    return TransitionKernel(
        name=f"flipbessel:{variant}",
        measure=ReferenceMeasure.lebesgue(lambda y: np.asarray(y, dtype=float) ** 2),
        density_fn=lambda t, x, y: flipped_bessel_density(t, x, y, zero_sign),
        bridge_family="flipbessel",
        zero_sign=zero_sign,
        breakpoints=(0.0,),
        params={"variant": variant},
    )


def kernel_from_id(kernel_id: str) -> TransitionKernel:
    """Resolve a catalog identifier.

    Accepted forms: 'gaussian', 'drift:k', 'tanh:k:c', 'bessel3',
    'flipbessel:X' or 'flipbessel:Y', with k and c decimal reals.
    """
    parts = kernel_id.strip().split(":")
    head = parts[0]
    try:
        if head == "gaussian" and len(parts) == 1:
            return gaussian_kernel()
        if head == "drift" and len(parts) == 2:
            return constant_drift_kernel(float(parts[1]))
        if head == "tanh" and len(parts) == 3:
            return tanh_drift_kernel(float(parts[1]), float(parts[2]))
        if head == "bessel3" and len(parts) == 1:
            return bessel3_kernel()
        if head == "flipbessel" and len(parts) == 2:
            return flipped_bessel_kernel(parts[1])
    except ValueError as exc:
        raise ValueError(f"bad kernel id {kernel_id!r}: {exc}") from exc
    raise ValueError(f"unknown kernel id {kernel_id!r}")


def radon_nikodym_weight(eig: Eigenpair, t, x0, xt):
    """The likelihood-ratio functional exp(-lam t) psi(X_t) / psi(X_0).

    Multiplicative over concatenated time intervals and a mean-one
    martingale under the base law when (psi, lam) is a true eigenpair.
    """
    x0 = np.asarray(x0, dtype=float)
    xt = np.asarray(xt, dtype=float)
    return np.exp(-eig.lam * np.asarray(t, dtype=float)) * eig.psi(xt) / eig.psi(x0)
