"""Closed-form constants attached to the fractional spectral measure.

The spatial covariance structure used throughout this package is the measure

    mu(dxi) = c_H(h) * |xi|^(1 - 2h) dxi,        1/4 < h < 1/2,

normalised so that a Gaussian sheet with time-control t * mu has
Var X(t, x) = t * |x|^(2h).  Every constant below is an elementary
Gamma-function expression; the test suite re-derives each one with an
independent quadrature oracle before trusting it.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "validate_hurst",
    "c_H",
    "C_H",
    "c_alpha",
    "frequency_identity_constant",
    "fbm_covariance",
    "spectral_density",
]


def validate_hurst(h: float, lo: float = 0.25, hi: float = 0.5, name: str = "hurst") -> float:
    """Check that h lies in the open interval (lo, hi) and return it as float.

    The endpoints are genuinely excluded: the constants below carry factors
    like 1/(1 - 2h) and Beta(1/2, 2h - 1/2) that blow up at the boundary, so
    a closed-interval check would hide real domain errors.
    """
    h = float(h)
    if not (lo < h < hi) or math.isnan(h):
        raise ValueError(f"{name} must lie in the open interval ({lo}, {hi}), got {h!r}")
    return h


def c_H(h: float) -> float:
    """Spectral normalisation Gamma(2h+1) sin(pi h) / (2 pi).

    This is the unique constant for which the spectral density
    c_H |xi|^(1-2h) reproduces unit fractional-Brownian increments:
    the induced field satisfies Var X(t, x) = t |x|^(2h).
    Defined for 0 < h < 1.
    """
    h = float(h)
    if not 0.0 < h < 1.0:
        raise ValueError(f"c_H requires 0 < h < 1, got {h!r}")
    return math.gamma(2.0 * h + 1.0) * math.sin(math.pi * h) / (2.0 * math.pi)


def C_H(h: float) -> float:
    """Pointwise-difference normalisation h (1 - 2h) / 2.

    Companion constant to c_H: for suitable g,

        c_H * int |Fg(xi)|^2 |xi|^(1-2h) dxi
            = C_H * int int |g(x) - g(y)|^2 |x - y|^(2h-2) dx dy.

    Positive only on 0 < h < 1/2, which is the regime where the squared
    difference kernel |x - y|^(2h-2) is locally integrable off the diagonal.
    """
    h = float(h)
    if not 0.0 < h < 0.5:
        raise ValueError(f"C_H requires 0 < h < 1/2, got {h!r}")
    return h * (1.0 - 2.0 * h) / 2.0


def c_alpha(alpha: float) -> float:
    """Cosine-deficit moment integral(0, inf) (1 - cos x) x^(-alpha-1) dx.

    Closed form on the open interval 0 < alpha < 2, where the integral
    converges (x^(1-alpha) behaviour at the origin, x^(-alpha-1) envelope at
    infinity):

        alpha in (0, 1):  Gamma(1-alpha) cos(pi alpha / 2) / alpha
        alpha = 1:        pi / 2
        alpha in (1, 2):  -Gamma(2-alpha) cos(pi alpha / 2) / (alpha (alpha-1))

    The three branches agree in the limit at alpha = 1; the piecewise form
    avoids the removable Gamma poles.  Carries the scaling rule
    integral (1 - cos(s x)) x^(-alpha-1) dx = c_alpha * s^alpha for s > 0.
    """
    a = float(alpha)
    if not 0.0 < a < 2.0:
        raise ValueError(f"c_alpha requires 0 < alpha < 2, got {alpha!r}")
    if a == 1.0:
        return math.pi / 2.0
    if a < 1.0:
        return math.gamma(1.0 - a) * math.cos(math.pi * a / 2.0) / a
    return -math.gamma(2.0 - a) * math.cos(math.pi * a / 2.0) / (a * (a - 1.0))


def frequency_identity_constant(h: float) -> float:
    """Constant K(h) with int |1 - e^(-i xi x)|^2 |x|^(2h-2) dx = K(h) |xi|^(1-2h).

    Closed form 2 Gamma(2h+1) sin(pi h) / (h (1 - 2h)), equivalently
    2 pi c_H(h) / C_H(h).  This is the bridge between the difference-kernel
    and spectral forms of the same quadratic functional.  Defined for
    0 < h < 1/2.
    """
    h = float(h)
    if not 0.0 < h < 0.5:
        raise ValueError(f"frequency_identity_constant requires 0 < h < 1/2, got {h!r}")
    return 2.0 * math.gamma(2.0 * h + 1.0) * math.sin(math.pi * h) / (h * (1.0 - 2.0 * h))


def fbm_covariance(x, y, h: float):
    """Fractional Brownian covariance (|x|^2h + |y|^2h - |x-y|^2h) / 2.

    Accepts scalars or arrays (broadcast).  This is the spatial covariance of
    the noise field at unit time; at time t and s the field covariance is
    min(t, s) * fbm_covariance(x, y, h).
    """
    h = float(h)
    if not 0.0 < h < 1.0:
        raise ValueError(f"fbm_covariance requires 0 < h < 1, got {h!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = 0.5 * (np.abs(x) ** (2 * h) + np.abs(y) ** (2 * h) - np.abs(x - y) ** (2 * h))
    if out.ndim == 0:
        return float(out)
    return out


def spectral_density(xi, h: float):
    """Density c_H(h) |xi|^(1-2h) of the spectral measure, vectorised in xi."""
    coef = c_H(validate_hurst(h, 0.0, 0.5, "h"))
    xi = np.asarray(xi, dtype=float)
    out = coef * np.abs(xi) ** (1.0 - 2.0 * h)
    if out.ndim == 0:
        return float(out)
    return out
