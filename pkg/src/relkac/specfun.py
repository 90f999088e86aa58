"""Closed-form special functions for the relativistic kinetic energy sqrt(-Delta + m^2) - m.

Everything here is a pure function of its arguments.  The central objects:

* ``levy_density`` -- the jump (Levy) density n(y) of the process generated by
  sqrt(-Delta + m^2) - m,

      n(y) = 2 (m/2pi)^((d+1)/2) K_{(d+1)/2}(m|y|) / |y|^((d+1)/2)     (m > 0)
      n(y) = Gamma((d+1)/2) / pi^((d+1)/2) / |y|^(d+1)                 (m = 0)

* ``free_kernel`` -- the heat kernel k0(y, t) of exp(-t [sqrt(-Delta+m^2) - m]),

      k0(y,t) = 2 (m/2pi)^((d+1)/2) t e^{mt} K_{(d+1)/2}(m r) / r^((d+1)/2),
                r = sqrt(|y|^2 + t^2)                                  (m > 0)
      k0(y,t) = Gamma((d+1)/2) / pi^((d+1)/2) * t / (|y|^2+t^2)^((d+1)/2)   (m = 0)

  with k0(y,t)/t -> n(y) as t -> 0+ and integral k0(.,t) = 1 for every t.

* ``subordinator_density`` / ``subordinator_laplace`` -- the law of the
  first-passage time T(t) = inf{s : B(s) + m s = t} of drifted Brownian
  motion (inverse Gaussian for m > 0, one-sided stable-1/2 for m = 0), with

      E[exp(-sigma T(t))] = exp(-t [sqrt(2 sigma + m^2) - m]).

* ``char_exponent`` -- the characteristic exponent V(rho) of that law,
  E[exp(i rho T(t))] = exp(-t V(rho)), the boundary value of the principal
  branch of sqrt(m^2 - 2 i rho) - m.

Both K_nu and the density formulas are evaluated through scipy's Bessel
routines; the test suite validates them against independent quadrature of
the integral representation K_nu(tau) = int_0^inf exp(-tau cosh u) cosh(nu u) du.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv


class DomainError(ValueError):
    """Argument outside the mathematical domain of a special function."""


@dataclass(frozen=True)
class MassDim:
    """Mass m >= 0 and spatial dimension d >= 1 (natural units, c = hbar = 1)."""

    m: float
    d: int

    def __post_init__(self):
        if self.m < 0:
            raise DomainError(f"mass must be >= 0, got {self.m}")
        if self.d < 1 or int(self.d) != self.d:
            raise DomainError(f"dimension must be an integer >= 1, got {self.d}")


def _radius(y, d: int) -> np.ndarray:
    """|y| for y given as a scalar (d=1) or an array whose last axis has length d."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 0 or y.shape[-1] != d:
        if d == 1:
            return np.abs(y)
        raise DomainError(f"point has wrong dimension for d={d}: shape {y.shape}")
    return np.sqrt(np.sum(y * y, axis=-1))


def bessel_k(nu: float, tau) -> np.ndarray | float:
    """Modified Bessel function of the third kind K_nu(tau), tau > 0, nu >= 0."""
    if nu < 0:
        raise DomainError(f"order must be >= 0, got nu={nu}")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("bessel_k requires tau > 0")
    out = kv(nu, tau)
    return float(out) if out.ndim == 0 else out


def levy_density_radial(r, md: MassDim) -> np.ndarray | float:
    """Jump density n as a function of the radius r = |y| > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("levy_density has a non-integrable singularity at y = 0")
    nu = (md.d + 1) / 2
    if md.m > 0:
        out = 2.0 * (md.m / (2 * np.pi)) ** nu * kv(nu, md.m * r) / r**nu
    else:
        out = gamma_fn(nu) / np.pi**nu / r ** (md.d + 1)
    return float(out) if out.ndim == 0 else out


def levy_density(y, md: MassDim) -> np.ndarray | float:
    """Jump density n(y), y != 0; rotationally symmetric, so depends on |y| only."""
    return levy_density_radial(_radius(y, md.d), md)


def free_kernel_radial(r, t, md: MassDim) -> np.ndarray | float:
    """Semigroup kernel k0 as a function of the radius r = |y| >= 0, t > 0."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("free_kernel requires t > 0")
    nu = (md.d + 1) / 2
    q = r * r + t * t
    if md.m > 0:
        out = (
            2.0
            * (md.m / (2 * np.pi)) ** nu
            * t
            * np.exp(md.m * t)
            * kv(nu, md.m * np.sqrt(q))
            / q ** (nu / 2)
        )
    else:
        out = gamma_fn(nu) / np.pi**nu * t / q**nu
    return float(out) if out.ndim == 0 else out


def free_kernel(y, t, md: MassDim) -> np.ndarray | float:
    """Kernel k0(y, t) of exp(-t [sqrt(-Delta+m^2) - m]); even in y, normalized in y."""
    return free_kernel_radial(_radius(y, md.d), t, md)


@dataclass
class ConvergenceReport:
    """Record of a numerical limit check: values along a sequence vs. the target."""

    times: np.ndarray
    values: np.ndarray
    limit: float
    rel_errors: np.ndarray
    tol: float
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def kernel_to_levy_limit(y, md: MassDim, t_seq, tol: float = 1e-3) -> ConvergenceReport:
    """Check k0(y,t)/t -> n(y) along a decreasing sequence of times t_seq."""
    t_seq = np.asarray(sorted(np.atleast_1d(t_seq), reverse=True), dtype=float)
    if np.any(t_seq <= 0):
        raise DomainError("t_seq must be positive")
    limit = float(levy_density(y, md))
    vals = np.array([float(free_kernel(y, t, md)) / t for t in t_seq])
    rel = np.abs(vals - limit) / abs(limit)
    return ConvergenceReport(
        times=t_seq,
        values=vals,
        limit=limit,
        rel_errors=rel,
        tol=tol,
        converged=bool(rel[-1] <= tol),
    )


def relativistic_symbol(xi, md: MassDim) -> np.ndarray | float:
    """sqrt(|xi|^2 + m^2) - m; vanishes at xi = 0, asymptotically |xi|."""
    r2 = np.asarray(_radius(xi, md.d), dtype=float) ** 2
    # clamp: the symbol is >= 0 by definition, but m**2 can underflow for
    # denormal masses and leave -m behind
    out = np.maximum(np.sqrt(r2 + md.m**2) - md.m, 0.0)
    return float(out) if out.ndim == 0 else out


def subordinator_laplace(sigma, t, m: float) -> np.ndarray | float:
    """E[exp(-sigma T(t))] = exp(-t [sqrt(2 sigma + m^2) - m]), sigma, t >= 0."""
    sigma = np.asarray(sigma, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(sigma < 0) or np.any(t < 0):
        raise DomainError("subordinator_laplace requires sigma >= 0 and t >= 0")
    out = np.exp(-t * (np.sqrt(2 * sigma + m * m) - m))
    return float(out) if out.ndim == 0 else out


def subordinator_density(s, t, m: float) -> np.ndarray | float:
    """Density of T(t) = inf{u : B(u) + m u = t} at s > 0.

    For m > 0 this is the inverse Gaussian (first-passage) density

        t / sqrt(2 pi s^3) * exp(-(t - m s)^2 / (2 s)),

    and the m = 0 expression is its drift-free limit

        t / sqrt(2 pi s^3) * exp(-t^2 / (2 s)),

    the one-sided stable-1/2 law with Laplace transform exp(-t sqrt(2 sigma)).
    Both branches integrate against exp(-sigma s) to ``subordinator_laplace``.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s <= 0) or np.any(t <= 0):
        raise DomainError("subordinator_density requires s > 0 and t > 0")
    out = t / np.sqrt(2 * np.pi * s**3) * np.exp(-((t - m * s) ** 2) / (2 * s))
    return float(out) if out.ndim == 0 else out


def sqrt_weight_density(kappa, t) -> np.ndarray | float:
    """Weight f_t(kappa) = t/(2 sqrt(pi)) kappa^(-3/2) exp(-t^2/(4 kappa)).

    Inverse Laplace transform of exp(-t sqrt(z)): the fractional-power formula
    exp(-t sqrt(S)) = int_0^inf f_t(kappa) exp(-kappa S) dkappa for S >= 0.
    Related to ``subordinator_density`` through T = 2 kappa and a mass tilt:
    density(s, t, m) = (1/2) f_t(s/2) exp(-m^2 s / 2 + m t).
    """
    kappa = np.asarray(kappa, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(kappa <= 0) or np.any(t <= 0):
        raise DomainError("sqrt_weight_density requires kappa > 0 and t > 0")
    out = t / (2 * np.sqrt(np.pi)) * kappa ** (-1.5) * np.exp(-t * t / (4 * kappa))
    return float(out) if out.ndim == 0 else out


def char_exponent(rho, m: float) -> np.ndarray | complex:
    """Characteristic exponent V(rho) of T(t): E[exp(i rho T(t))] = exp(-t V(rho)).

    Two-term closed form

        V(rho) = (sqrt(m^4 + 4 rho^2) - m^2)
                 / (sqrt(2) [ (m^2 + sqrt(m^4 + 4 rho^2))^(1/2) + sqrt(2) m ])
               - i sqrt(2) rho / (m^2 + sqrt(m^4 + 4 rho^2))^(1/2),

    which equals the boundary value lim_{sigma -> 0+} sqrt(2(sigma - i rho) + m^2) - m
    on the principal branch.  V(0) = 0, Re V >= 0, and for m = 0,
    V(rho) = sqrt(|rho|) (1 - i sgn rho).
    """
    rho = np.asarray(rho, dtype=float)
    p = np.sqrt(m**4 + 4 * rho * rho)
    root = np.sqrt(m * m + p)
    safe = root > 0  # root = 0 only when rho = 0 and m = 0, where V = 0
    root = np.where(safe, root, 1.0)
    re = (p - m * m) / (np.sqrt(2) * (root + np.sqrt(2) * m))
    im = -np.sqrt(2) * rho / root
    out = np.where(safe, re + 1j * im, 0.0 + 0.0j)
    return complex(out) if out.ndim == 0 else out
