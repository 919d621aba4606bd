"""Standard normal density, distribution function and log-distribution function.

All functions accept Python floats or numpy arrays. Scalars in, float out.
Non-finite inputs are rejected with :class:`~logei_bo.errors.DomainError`
instead of propagating NaN.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, erfcx

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)

#: Below this point ``log_normal_cdf`` switches to the scaled-erfc tail branch.
LOG_CDF_CROSSOVER = -5.0


def _as_finite(z, name: str = "z") -> np.ndarray:
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {z!r}")
    return arr


def _out(arr: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def normal_pdf(z):
    """Standard normal density phi(z)."""
    a = _as_finite(z)
    return _out(_INV_SQRT_2PI * np.exp(-0.5 * a * a), z)


def normal_cdf(z):
    """Standard normal distribution function Phi(z).

    Evaluated as ``erfc(-z / sqrt(2)) / 2`` so that the lower tail keeps full
    relative precision down to the subnormal range. ``normal_cdf(-40)`` is about
    3.7e-350 and therefore underflows to 0.0; use :func:`log_normal_cdf` there.
    """
    a = _as_finite(z)
    return _out(0.5 * erfc(-a / _SQRT2), z)


def log_normal_cdf(z):
    """log Phi(z), finite for every finite ``z`` down to about -1e154.

    For ``z > 0`` the value is ``log1p(-Phi(-z))``; on ``[-5, 0]`` it is
    ``log(Phi(z))``; below -5 it is ``log(erfcx(-z/sqrt 2) / 2) - z**2 / 2``,
    which never forms the underflowing product.
    """
    a = _as_finite(z)
    out = np.empty_like(a)
    hi = a > 0.0
    mid = (a <= 0.0) & (a >= LOG_CDF_CROSSOVER)
    lo = a < LOG_CDF_CROSSOVER
    out[hi] = np.log1p(-0.5 * erfc(a[hi] / _SQRT2))
    out[mid] = np.log(0.5 * erfc(-a[mid] / _SQRT2))
    t = a[lo]
    out[lo] = np.log(0.5 * erfcx(-t / _SQRT2)) - 0.5 * t * t
    return _out(out, z)


def mills_ratio(z):
    """Phi(z) / phi(z), computed without forming either factor.

    Accurate for all finite ``z``; for large positive ``z`` it grows like
    ``sqrt(2 pi) exp(z**2 / 2)`` and overflows to inf beyond z ~ 37.
    """
    a = _as_finite(z)
    return _out(_SQRT_HALF_PI * erfcx(-a / _SQRT2), z)


def log_normal_pdf(z):
    a = _as_finite(z)
    return _out(-0.5 * a * a - _LOG_SQRT_2PI, z)
