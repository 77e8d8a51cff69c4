"""Bridge laws built from transition densities.

A bridge pins a kernel's path at (x, 0) and (y, t).  Its conditional
densities are ratios of transition densities, so two kernels related by
an eigenfunction transform have identical bridges: every transform
factor cancels.  The sampler exploits this by always bridging through
the base kernel of a transform chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import TransitionKernel, bessel3_density, _sign_with_zero
from .measure import DEFAULT_QUADRATURE, LEBESGUE, Quadrature


class MissingGridPointError(ValueError):
    """A path was queried at a time not on its grid."""


class RejectionBudgetError(RuntimeError):
    """Rejection sampling used up its try budget."""

    def __init__(self, message, acceptance_rate):
        super().__init__(f"{message} (acceptance rate {acceptance_rate:.2e})")
        self.acceptance_rate = acceptance_rate


class MeasureMismatchError(ValueError):
    """Two kernels' densities cannot be expressed on a common measure."""


@dataclass(frozen=True)
class BridgeSpec:
    """A pinned triple: start x at time 0, end y at time t, over `kernel`."""

    kernel: TransitionKernel
    x: float
    t: float
    y: float

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("bridge horizon t must be positive")
        if float(self.kernel.density(self.t, self.x, self.y)) <= 0:
            raise ValueError("endpoint density p_t(x, y) must be positive")


@dataclass
class PathSample:
    """A discretized path on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    pinned: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def value_at(self, s):
        i = int(np.searchsorted(self.times, s))
        for j in (i - 1, i):
            if 0 <= j < self.times.size and abs(self.times[j] - s) <= 1e-12 * max(1.0, abs(s)):
                return float(self.values[j])
        raise MissingGridPointError(f"no grid point at time {s}")


def reverse(path: PathSample, horizon: float) -> PathSample:
    """Time reversal s -> horizon - s with values reversed and pins swapped."""
    return PathSample(times=horizon - path.times[::-1],
                      values=path.values[::-1].copy(),
                      pinned=path.pinned)


# ------------------------------------------------------------------
# densities
# ------------------------------------------------------------------

def bridge_transition_density(spec: BridgeSpec, z, s, z2, s2):
    """Conditional density of the bridge at (z2, s2) given (z, s),
    w.r.t. the kernel's reference measure in z2.

    Equals p_{s2-s}(z, z2) p_{t-s2}(z2, y) / p_{t-s}(z, y).
    """
    if not (0 <= s < s2 < spec.t):
        raise ValueError(f"need 0 <= s < s2 < t, got s={s}, s2={s2}, t={spec.t}")
    k = spec.kernel
    return k.density(s2 - s, z, z2) * k.density(spec.t - s2, z2, spec.y) \
        / k.density(spec.t - s, z, spec.y)


def bridge_marginal_density(spec: BridgeSpec, s, z):
    """Marginal density of the bridge at time s, w.r.t. the kernel
    measure; integrates to one in z."""
    if not (0 < s < spec.t):
        raise ValueError(f"need 0 < s < t, got s={s}, t={spec.t}")
    k = spec.kernel
    return k.density(s, spec.x, z) * k.density(spec.t - s, z, spec.y) \
        / k.density(spec.t, spec.x, spec.y)


def bridge_likelihood_ratio(spec: BridgeSpec, path: PathSample, s):
    """Density of the bridge law w.r.t. the unpinned law on information
    up to time s: p_{t-s}(X_s, y) / p_t(x, y)."""
    if not (0 <= s < spec.t):
        raise ValueError(f"need 0 <= s < t, got s={s}, t={spec.t}")
    xs = path.value_at(s)
    k = spec.kernel
    return float(k.density(spec.t - s, xs, spec.y) / k.density(spec.t, spec.x, spec.y))


# ------------------------------------------------------------------
# sampling
# ------------------------------------------------------------------

def _normal_pdf(r, mean, sd):
    z = (r - mean) / sd
    return np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * sd)


def _scan_rejection(target, lo, hi, rng, budget=10_000, npts=64,
                    inflate=1.4, safety=1.5):
    """Sample one value per draw from unnormalized densities via a
    moment-matched Gaussian proposal.

    `target(idx, r)` evaluates draw idx's density at r (both arrays,
    broadcastable).  The proposal mean/variance and the envelope
    constant come from an npts-point scan of [lo, hi] per draw; the
    window must contain essentially all of the target's mass.  Proposals
    whose density ratio exceeds the envelope are still accepted (the
    acceptance test saturates), so a slightly undersized envelope only
    underweights that sliver; the sampler is cross-validated against
    quadrature CDFs in the test suite.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    uu = np.linspace(0.0, 1.0, npts)
    grid = lo[:, None] + (hi - lo)[:, None] * uu[None, :]
    idx = np.arange(n)
    gv = target(idx[:, None], grid)
    mass = gv.sum(axis=1)
    if np.any(mass <= 0):
        raise RejectionBudgetError("target vanishes on the scan window", 0.0)
    m1 = (gv * grid).sum(axis=1) / mass
    m2 = (gv * grid * grid).sum(axis=1) / mass
    step = (hi - lo) / (npts - 1)
    var = np.maximum(m2 - m1 * m1, (0.5 * step) ** 2)
    sd = inflate * np.sqrt(var)
    env = (gv / _normal_pdf(grid, m1[:, None], sd[:, None])).max(axis=1) * safety

    out = np.empty(n)
    pending = idx
    tries = 0
    max_rounds = max(64, budget)
    while pending.size:
        k = pending.size
        r = rng.normal(m1[pending], sd[pending])
        u = rng.random(k)
        gvals = target(pending, r)
        accept = u * env[pending] * _normal_pdf(r, m1[pending], sd[pending]) <= gvals
        out[pending[accept]] = r[accept]
        pending = pending[~accept]
        tries += 1
        if tries > max_rounds:
            rate = (n - pending.size) / max(1, tries * n)
            raise RejectionBudgetError("rejection budget exceeded", rate)
    return out


def _radial_bridge_step(a, b, r0, r1, rng):
    """One conditional step of a Bessel(3) bridge: sample the radius at
    the intermediate time given radius r0 now and r1 at the end.

    Target density in r (Lebesgue): b_a(r0, r) b_b(r, r1) r^2, which is
    unimodal; the scan window uses the Brownian-bridge mean and width.
    """
    r0 = np.asarray(r0, dtype=float)
    mu = r0 + (a / (a + b)) * (r1 - r0)
    sig = math.sqrt(a * b / (a + b))
    lo = np.maximum(0.0, mu - 9.0 * sig)
    hi = np.maximum(mu + 9.0 * sig, 10.0 * sig)

    def target(idx, r):
        r = np.asarray(r, dtype=float)
        dens = bessel3_density(a, r0[idx], r) * bessel3_density(b, r, r1) * r * r
        return np.where(r > 0, dens, 0.0)

    return _scan_rejection(target, lo, hi, rng)


def _flip_sign_step(a, b, sign_now, sign_end, rng):
    """Sample the sign at the intermediate time of a sign-flipped bridge.

    Sign and radius decouple given the endpoints: the chance of k
    parity flips over a window of length u is (1 +/- exp(-2u)) / 2.
    """
    wa_plus = np.where(sign_now > 0, 0.5 * (1 + math.exp(-2 * a)),
                       0.5 * (1 - math.exp(-2 * a)))
    wb_plus = 0.5 * (1 + math.exp(-2 * b)) if sign_end > 0 \
        else 0.5 * (1 - math.exp(-2 * b))
    wb_minus = 0.5 * (1 - math.exp(-2 * b)) if sign_end > 0 \
        else 0.5 * (1 + math.exp(-2 * b))
    p_plus = wa_plus * wb_plus
    p_minus = (1.0 - wa_plus) * wb_minus
    prob = p_plus / (p_plus + p_minus)
    return np.where(rng.random(prob.shape) < prob, 1.0, -1.0)


def sample_bridge_values(spec: BridgeSpec, grid, n, rng):
    """Draw n bridge paths on `grid`, returning an (n, len(grid)) array.

    The grid must be strictly increasing and include 0 and t; those
    endpoints are pinned exactly.  Values at interior times are drawn
    sequentially from the bridge's own conditional densities: in closed
    form for the Gaussian family (which covers every transform of the
    Gaussian kernel, since transforms share bridges), and by rejection
    sampling against a moment-matched Gaussian proposal for the Bessel
    families.
    """
    grid = np.asarray(grid, dtype=float)
    t = spec.t
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must contain at least the two endpoints")
    if abs(grid[0]) > 1e-12 or abs(grid[-1] - t) > 1e-12 * max(1.0, t):
        raise ValueError("grid must start at 0 and end at the horizon t")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")

    family = spec.kernel.bridge_family
    m = grid.size
    values = np.empty((n, m))
    values[:, 0] = spec.x
    values[:, -1] = spec.y
    y = spec.y

    for j in range(1, m - 1):
        a = grid[j] - grid[j - 1]
        b = t - grid[j]
        cur = values[:, j - 1]
        if family == "gaussian":
            frac = a / (a + b)
            mean = cur + frac * (y - cur)
            sd = math.sqrt(a * b / (a + b))
            values[:, j] = mean + sd * rng.standard_normal(n)
        elif family == "bessel3":
            values[:, j] = _radial_bridge_step(a, b, cur, y, rng)
        elif family == "flipbessel":
            zero_sign = spec.kernel.zero_sign
            radius = _radial_bridge_step(a, b, np.abs(cur), abs(y), rng)
            sign_now = _sign_with_zero(cur, zero_sign)
            sign_end = float(_sign_with_zero(y, zero_sign))
            values[:, j] = radius * _flip_sign_step(a, b, sign_now, sign_end, rng)
        else:
            values[:, j] = _generic_bridge_step(spec.kernel, a, b, cur, y, rng)
    return values


def _generic_bridge_step(kernel, a, b, cur, y, rng):
    """Rejection fallback for kernels without a dedicated sampler.

    Valid for unimodal conditionals on an interval support; the target
    is the Lebesgue form of the bridge conditional.
    """
    cur = np.asarray(cur, dtype=float)
    mu = cur + (a / (a + b)) * (y - cur)
    sig = math.sqrt(a * b / (a + b))
    lo_s, hi_s = kernel.measure.support
    lo = np.maximum(lo_s, mu - 10.0 * sig)
    hi = np.minimum(hi_s, mu + 10.0 * sig)
    rho = kernel.measure.density
    dens = kernel.density_fn

    def target(idx, r):
        r = np.asarray(r, dtype=float)
        inside = (r > lo_s) & (r < hi_s)
        rs = np.where(inside, r, mu[idx])
        val = dens(a, cur[idx], rs) * dens(b, rs, y) * rho(rs)
        return np.where(inside, val, 0.0)

    return _scan_rejection(target, lo, hi, rng)


def sample_bridge(spec: BridgeSpec, grid, rng) -> PathSample:
    """Draw one bridge path; endpoints are pinned exactly."""
    vals = sample_bridge_values(spec, grid, 1, rng)[0]
    return PathSample(times=np.asarray(grid, dtype=float), values=vals, pinned=True)


def sample_unpinned_values(kernel: TransitionKernel, x0, grid, n, rng):
    """Draw n unpinned paths of the kernel's own law on `grid`.

    Gaussian steps in closed form; other continuous kernels step by
    rejection from their transition density.  The sign-flipped Bessel
    family is excluded here (its step density is bimodal); use
    `simulate.poisson_flip_endpoints` for that process.
    """
    grid = np.asarray(grid, dtype=float)
    if abs(grid[0]) > 1e-12:
        raise ValueError("grid must start at 0")
    if kernel.bridge_family == "flipbessel":
        raise NotImplementedError("forward sampling of the sign-flipped family "
                                  "is handled by simulate.poisson_flip_endpoints")
    m = grid.size
    values = np.empty((n, m))
    values[:, 0] = x0
    rho = kernel.measure.density
    dens = kernel.density_fn
    lo_s, hi_s = kernel.measure.support
    for j in range(1, m):
        dt = grid[j] - grid[j - 1]
        cur = values[:, j - 1]
        if kernel.name == "gaussian":
            values[:, j] = cur + math.sqrt(dt) * rng.standard_normal(n)
            continue
        lo = np.maximum(lo_s, cur - 12.0 * math.sqrt(dt))
        hi = np.minimum(hi_s, cur + 12.0 * math.sqrt(dt))

        def target(idx, r, _cur=cur, _dt=dt):
            r = np.asarray(r, dtype=float)
            inside = (r >= lo_s) & (r <= hi_s)
            rs = np.where(inside, r, _cur[idx])
            return np.where(inside, dens(_dt, _cur[idx], rs) * rho(rs), 0.0)

        values[:, j] = _scan_rejection(target, lo, hi, rng)
    return values


# ------------------------------------------------------------------
# eigenfunction extraction and disintegration
# ------------------------------------------------------------------

def extract_eigen_ratio(kernel_p: TransitionKernel, kernel_q: TransitionKernel,
                        b, horizon, s, z):
    """Ratio of the two kernels' densities into the anchor state b,
    with both densities expressed w.r.t. kernel_p's reference measure.

    When the kernels share bridges this ratio, as a function of z, is
    an eigenfunction of kernel_p up to a time-dependent scalar; its
    s-dependence is a pure factor exp(lam s).
    """
    if not (0 <= s < horizon):
        raise ValueError(f"need 0 <= s < horizon, got s={s}")
    if kernel_p.measure.kind != LEBESGUE or kernel_q.measure.kind != LEBESGUE:
        raise MeasureMismatchError("both kernels need evaluable measure densities")
    conv = float(kernel_q.measure.density(np.asarray(b, dtype=float))
                 / kernel_p.measure.density(np.asarray(b, dtype=float)))
    u = horizon - s
    return kernel_p.density(u, z, b) / (kernel_q.density(u, z, b) * conv)


def extract_eigenvalue(kernel_p, kernel_q, b, horizon, s_grid):
    """Rate lam from the anchor-point decay of the extraction ratio.

    Fits lam_s = lam * s by least squares through the origin and
    reports the largest deviation of lam_s / s from the fit.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    psi0 = float(extract_eigen_ratio(kernel_p, kernel_q, b, horizon, 0.0, b))
    lam_s = np.array([
        -math.log(float(extract_eigen_ratio(kernel_p, kernel_q, b, horizon, s, b))
                  / psi0)
        for s in s_grid])
    lam = float(np.dot(s_grid, lam_s) / np.dot(s_grid, s_grid))
    spread = float(np.max(np.abs(lam_s / s_grid - lam)))
    return lam, spread


@dataclass(frozen=True)
class DisintegrationCheck:
    """Two estimates of E_x[F * g(X_t)]: pathwise Monte Carlo vs the
    bridge-decomposed integral over endpoints."""

    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float

    @property
    def residual(self):
        return abs(self.lhs - self.rhs)

    @property
    def combined_se(self):
        return math.hypot(self.lhs_se, self.rhs_se)

    @property
    def passed(self):
        return self.residual < 3.0 * self.combined_se


def disintegration_residual(kernel: TransitionKernel, x, t, functional: Callable,
                            g: Callable, n_samples: int,
                            q: Quadrature = DEFAULT_QUADRATURE, *,
                            rng, grid=None) -> DisintegrationCheck:
    """Check that the unpinned expectation disintegrates over bridges.

    `functional(times, values)` must map an (n, len(grid)) batch of
    paths to n reals and be bounded.  The right side integrates the
    bridge estimate of F against g(y) p_t(x, y) m(dy) on a Simpson
    grid, with Monte Carlo errors propagated through the weights.
    """
    if grid is None:
        grid = np.array([0.0, 0.5 * t, t])
    grid = np.asarray(grid, dtype=float)

    vals = sample_unpinned_values(kernel, x, grid, n_samples, rng)
    samples = np.asarray(functional(grid, vals), dtype=float) * g(vals[:, -1])
    lhs = float(samples.mean())
    lhs_se = float(samples.std(ddof=1) / math.sqrt(n_samples))

    lo, hi = q.truncated(kernel.measure.support, [x], math.sqrt(t))
    n_nodes = 33
    ys = np.linspace(lo, hi, n_nodes)
    h = ys[1] - ys[0]
    w = np.full(n_nodes, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= h / 3.0

    n_inner = max(100, n_samples // n_nodes)
    rho = kernel.measure.density
    rhs = 0.0
    var = 0.0
    for yj, wj in zip(ys, w):
        weight = wj * float(g(yj)) * float(kernel.density(t, x, yj)) * float(rho(yj))
        if weight == 0.0:
            continue
        bvals = sample_bridge_values(BridgeSpec(kernel, x, t, yj), grid, n_inner, rng)
        fj = np.asarray(functional(grid, bvals), dtype=float)
        rhs += weight * float(fj.mean())
        var += (weight * float(fj.std(ddof=1) / math.sqrt(n_inner))) ** 2
    return DisintegrationCheck(lhs=lhs, lhs_se=lhs_se, rhs=rhs, rhs_se=math.sqrt(var))


def write_paths_csv(fileobj, times, values):
    """Serialize a pool of paths as draw_id,time,value rows."""
    fileobj.write("draw_id,time,value\n")
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    for i in range(values.shape[0]):
        for s, v in zip(times, values[i]):
            fileobj.write(f"{i},{float(s)!r},{float(v)!r}\n")
