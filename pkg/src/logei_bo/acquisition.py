"""Closed-form expected-improvement acquisition functions.

Three variants are provided:

``EI``
    ``(y* - mu) Phi(z) + sigma phi(z)`` with ``z = (y* - mu) / sigma``.
``LogTransformedEI``
    Improvement ``y* - exp(l)`` under a Gaussian posterior on ``l = log y``:
    ``y* Phi(z) - exp(mu + sigma**2 / 2) Phi(z - sigma)`` with
    ``z = (log y* - mu) / sigma``.
``LogOfEI``
    ``log`` of the plain EI value, evaluated without underflow.

All three integrate the improvement mass lying *below* the incumbent, exactly
as the defining integrals are written, while the incumbent itself is the
largest observed value. The two conventions pull in opposite directions; this
module does not reconcile them (see :mod:`logei_bo.bo` for how the optimizer
orients a maximisation problem before calling into here).

Each variant has a scalar entry point taking a :class:`PosteriorGaussian`
and an :class:`Incumbent`, plus an array kernel (``*_array``) used by the
optimizer to score whole candidate pools at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import AcquisitionOverflowError, DomainError, NumericError
from .special import log_normal_pdf, mills_ratio, normal_cdf, normal_pdf

# largest x with exp(x) finite
LOG_MAX_FLOAT = math.log(np.finfo(float).max)
LOG_TINY_FLOAT = math.log(np.finfo(float).tiny)

EI_ROUNDOFF = 1e-15
LOGEI_ROUNDOFF = 1e-12

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_TAIL_SWITCH = -5.0
_SERIES_SWITCH = -40.0
_SERIES_TERMS = 20


class Variant(str, enum.Enum):
    EI = "ei"
    LOG_TRANSFORMED_EI = "logei"
    LOG_OF_EI = "logofei"

    @classmethod
    def parse(cls, name: str | Variant) -> Variant:
        if isinstance(name, Variant):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "ei": cls.EI,
            "logei": cls.LOG_TRANSFORMED_EI,
            "logtransformedei": cls.LOG_TRANSFORMED_EI,
            "logofei": cls.LOG_OF_EI,
        }
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(
                f"unknown acquisition variant {name!r}; expected one of ei, logei, logofei"
            ) from None


@dataclass(frozen=True)
class PosteriorGaussian:
    """Gaussian predictive distribution ``N(mu, sigma**2)`` at one query point."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError(f"posterior must be finite, got mu={self.mu!r}, sigma={self.sigma!r}")
        if self.sigma < 0:
            raise DomainError(f"posterior sigma must be >= 0, got {self.sigma!r}")


@dataclass(frozen=True)
class Incumbent:
    y_star: float

    def __post_init__(self):
        if not math.isfinite(self.y_star):
            raise DomainError(f"incumbent must be finite, got {self.y_star!r}")


@dataclass(frozen=True)
class AcquisitionSpec:
    variant: Variant
    incumbent: Incumbent

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.variant is Variant.LOG_TRANSFORMED_EI and self.incumbent.y_star <= 0:
            raise DomainError(
                f"LogTransformedEI requires a positive incumbent, got {self.incumbent.y_star!r}"
            )

    def evaluate(self, post: PosteriorGaussian) -> AcquisitionValue:
        return evaluate(post, self)


@dataclass(frozen=True)
class AcquisitionValue:
    """Acquisition value plus a flag raised when the linear-scale value underflows."""

    value: float
    underflowed: bool = False


def standardize(inc_value: float, post: PosteriorGaussian) -> float:
    """Return the standardized score ``(inc_value - mu) / sigma``."""
    if post.sigma <= 0:
        raise DomainError("cannot standardize against a posterior with sigma = 0")
    if not math.isfinite(inc_value):
        raise DomainError(f"value must be finite, got {inc_value!r}")
    return (inc_value - post.mu) / post.sigma


def incumbent_from(y, variant: Variant | str = Variant.EI) -> Incumbent:
    """Incumbent ``y* = max_n y_n`` of the observed objective values.

    ``y`` may be a :class:`~logei_bo.gp.Dataset` or any sequence of numbers.
    The result is in the original objective scale for every variant.
    """
    variant = Variant.parse(variant)
    values = np.asarray(getattr(y, "y", y), dtype=float).ravel()
    if values.size == 0:
        raise DomainError("cannot take an incumbent of an empty dataset")
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise DomainError(f"observation {bad} is not finite")
    if variant is Variant.LOG_TRANSFORMED_EI:
        nonpos = np.flatnonzero(values <= 0)
        if nonpos.size:
            i = int(nonpos[0])
            raise DomainError(
                f"LogTransformedEI needs y > 0 but observation {i} has y = {values[i]!r}"
            )
    return Incumbent(float(values.max()))


# ---------------------------------------------------------------------------
# h(z) = phi(z) + z Phi(z), the standardized EI, and its logarithm


def _log1p_z_mills_series(z: np.ndarray) -> np.ndarray:
    # 1 + z R(z) = z**-2 * sum_k (-1)^k (2k+1)!! z**(-2k), asymptotic as z -> -inf
    w = 1.0 / (z * z)
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, _SERIES_TERMS):
        term = -term * (2 * k + 1) * w
        total = total + term
    return np.log(w) + np.log(total)


def log_h_array(z) -> np.ndarray:
    """``log(phi(z) + z Phi(z))`` for an array of finite scores."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    direct = z >= _TAIL_SWITCH
    mid = (z < _TAIL_SWITCH) & (z >= _SERIES_SWITCH)
    far = z < _SERIES_SWITCH
    zd = z[direct]
    out[direct] = np.log(normal_pdf(zd) + zd * normal_cdf(zd))
    zm = z[mid]
    out[mid] = log_normal_pdf(zm) + np.log1p(zm * mills_ratio(zm))
    zf = z[far]
    with np.errstate(over="ignore", divide="ignore"):
        out[far] = -0.5 * zf * zf - _LOG_SQRT_2PI + _log1p_z_mills_series(zf)
    return out


def h_array(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    direct = z >= _TAIL_SWITCH
    zd = z[direct]
    out[direct] = normal_pdf(zd) + zd * normal_cdf(zd)
    out[~direct] = np.exp(log_h_array(z[~direct]))
    return out


def _check_arrays(mu, sigma, y_star):
    mu, sigma, y_star = np.broadcast_arrays(
        np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float), np.asarray(y_star, dtype=float)
    )
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma)) and np.all(np.isfinite(y_star))):
        raise DomainError("mu, sigma and y_star must be finite")
    if np.any(sigma < 0):
        raise DomainError("sigma must be >= 0")
    return mu.ravel(), sigma.ravel(), y_star.ravel(), mu.shape


def ei_array(mu, sigma, y_star) -> np.ndarray:
    """Vectorised EI; ``sigma == 0`` entries take the limit ``max(y* - mu, 0)``."""
    mu, sigma, y_star, shape = _check_arrays(mu, sigma, y_star)
    out = np.maximum(y_star - mu, 0.0)
    gap = y_star - mu
    with np.errstate(over="ignore", divide="ignore"):
        z = gap / np.where(sigma > 0, sigma, 1.0)
    # sigma so small that z overflows behaves like the sigma = 0 limit
    pos = (sigma > 0) & np.isfinite(z)
    if np.any(pos):
        s, zp = sigma[pos], z[pos]
        # h(z) = z + h(-z) keeps the exact gap as the leading term when z > 0
        upper = zp > 0
        val = np.empty_like(zp)
        val[~upper] = s[~upper] * h_array(zp[~upper])
        val[upper] = gap[pos][upper] + s[upper] * h_array(-zp[upper])
        out[pos] = val
    if np.any(out < -EI_ROUNDOFF):
        raise NumericError(f"EI evaluated to {out.min()!r}, below round-off tolerance")
    return np.maximum(out, 0.0).reshape(shape)


def log_transformed_ei_array(mu, sigma, y_star) -> np.ndarray:
    """Vectorised log-transformed-objective EI; ``mu``, ``sigma`` describe ``log y``."""
    mu, sigma, y_star, shape = _check_arrays(mu, sigma, y_star)
    if np.any(y_star <= 0):
        raise DomainError(f"LogTransformedEI needs y* > 0, got {y_star.min()!r}")
    with np.errstate(over="ignore", divide="ignore"):
        z = (np.log(y_star) - mu) / np.where(sigma > 0, sigma, 1.0)
    pos = (sigma > 0) & np.isfinite(z)
    out = np.empty_like(mu)
    with np.errstate(over="ignore"):
        out[~pos] = np.maximum(y_star[~pos] - np.exp(mu[~pos]), 0.0)
    if np.any(pos):
        m, s, ys, zp = mu[pos], sigma[pos], y_star[pos], z[pos]
        exponent = m + 0.5 * s * s
        if np.any(exponent > LOG_MAX_FLOAT):
            i = int(np.argmax(exponent))
            raise AcquisitionOverflowError(
                f"exp(mu + sigma^2/2) overflows: mu={m[i]!r}, sigma={s[i]!r}, "
                f"exponent {exponent[i]:.6g} > {LOG_MAX_FLOAT:.6g}"
            )
        out[pos] = ys * normal_cdf(zp) - np.exp(exponent) * normal_cdf(zp - s)
    floor = -LOGEI_ROUNDOFF * y_star
    if np.any(out < floor):
        i = int(np.argmin(out - floor))
        raise NumericError(
            f"LogTransformedEI evaluated to {out[i]!r}, below round-off tolerance {floor[i]!r}"
        )
    return np.maximum(out, 0.0).reshape(shape)


def log_of_ei_array(mu, sigma, y_star) -> np.ndarray:
    """Vectorised ``log EI``; ``sigma == 0`` entries give ``log max(y* - mu, 0)``.

    Zero-variance entries may therefore be ``-inf``. The scalar
    :func:`log_of_ei_stable` rejects ``sigma == 0`` instead.
    """
    mu, sigma, y_star, shape = _check_arrays(mu, sigma, y_star)
    out = np.empty_like(mu)
    with np.errstate(over="ignore", divide="ignore"):
        z = (y_star - mu) / np.where(sigma > 0, sigma, 1.0)
        pos = (sigma > 0) & np.isfinite(z)
        out[~pos] = np.log(np.maximum(y_star[~pos] - mu[~pos], 0.0))
    if np.any(pos):
        out[pos] = np.log(sigma[pos]) + log_h_array(z[pos])
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# scalar entry points


def _linear_underflow(value: float, sigma: float) -> bool:
    return sigma > 0 and value < np.finfo(float).tiny


def ei_closed(post: PosteriorGaussian, inc: Incumbent) -> AcquisitionValue:
    """Expected improvement below ``inc.y_star`` under ``post``."""
    v = float(ei_array(post.mu, post.sigma, inc.y_star))
    return AcquisitionValue(v, bool(_linear_underflow(v, post.sigma)))


def log_transformed_ei_closed(post: PosteriorGaussian, inc: Incumbent) -> AcquisitionValue:
    """EI of ``y = exp(l)`` where ``post`` is the posterior of ``l = log y``.

    Raises
    ------
    DomainError
        If ``inc.y_star <= 0``.
    AcquisitionOverflowError
        If ``mu + sigma**2 / 2`` exceeds ``log(DBL_MAX)``.
    """
    if inc.y_star <= 0:
        raise DomainError(f"LogTransformedEI needs y* > 0, got {inc.y_star!r}")
    v = float(log_transformed_ei_array(post.mu, post.sigma, inc.y_star))
    return AcquisitionValue(v, bool(_linear_underflow(v, post.sigma)))


def log_of_ei_stable(post: PosteriorGaussian, inc: Incumbent) -> AcquisitionValue:
    """``log EI`` without intermediate underflow; finite for ``z >= -1e4``.

    ``underflowed`` reports whether ``exp`` of the result would underflow a
    double, i.e. whether :func:`ei_closed` alone would have lost the value.
    """
    if post.sigma <= 0:
        raise DomainError("log_of_ei_stable needs sigma > 0; take the degenerate branch first")
    v = float(log_of_ei_array(post.mu, post.sigma, inc.y_star))
    return AcquisitionValue(v, bool(v < LOG_TINY_FLOAT))


def evaluate(post: PosteriorGaussian, spec: AcquisitionSpec) -> AcquisitionValue:
    if spec.variant is Variant.EI:
        return ei_closed(post, spec.incumbent)
    if spec.variant is Variant.LOG_TRANSFORMED_EI:
        return log_transformed_ei_closed(post, spec.incumbent)
    return log_of_ei_stable(post, spec.incumbent)


def acquisition_array(variant: Variant | str, mu, sigma, y_star) -> np.ndarray:
    variant = Variant.parse(variant)
    if variant is Variant.EI:
        return ei_array(mu, sigma, y_star)
    if variant is Variant.LOG_TRANSFORMED_EI:
        return log_transformed_ei_array(mu, sigma, y_star)
    return log_of_ei_array(mu, sigma, y_star)
