"""Brute-force reference values for the EI integrals.

The closed forms in :mod:`logei_bo.acquisition` are checked against these
functions, which integrate the defining expressions numerically and share no
code with them beyond the elementary density ``exp(-u**2/2)/sqrt(2 pi)``.

Quadrature is composite Gauss-Legendre on a truncated interval. After the
substitution ``u = (y - mu) / sigma`` the integrands are one-sided,
``(y* - mu - u sigma) phi(u)`` and ``(y* - exp(mu + u sigma)) phi(u)`` over
``u <= z``, so the interval starts 12 units below ``min(z, 0)``. The dropped
lower tail is bounded by ``(|y* - mu| + 25 sigma) * 1e-32``, far under
``1e-12 (|y* - mu| + sigma)``. For large ``z`` the upper end is capped at
``max(0, c) + 12`` where ``c`` is where the integrand's mass is centred
(``0`` for EI, ``sigma`` for the exponential term of logEI); the part above
the cap is below the same bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .acquisition import Incumbent, PosteriorGaussian, Variant
from .errors import AcquisitionOverflowError, DomainError

TRUNCATION = 12.0
PANEL_WIDTH = 0.5
GENERATOR_NAME = "PCG64"

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class QuadratureConfig:
    """``node_count`` Gauss-Legendre nodes per panel; Monte-Carlo sample size and seed."""

    node_count: int = 24
    mc_samples: int = 1_000_000
    mc_seed: int = 20240101

    def __post_init__(self):
        if int(self.node_count) < 16:
            raise DomainError(f"node_count must be >= 16, got {self.node_count}")
        if int(self.mc_samples) < 10_000:
            raise DomainError(f"mc_samples must be >= 1e4, got {self.mc_samples}")
        if not 0 <= int(self.mc_seed) < 2**64:
            raise DomainError(f"mc_seed must be a 64-bit unsigned integer, got {self.mc_seed}")

    def to_dict(self) -> dict:
        return {"node_count": self.node_count, "mc_samples": self.mc_samples, "mc_seed": self.mc_seed}


@lru_cache(maxsize=8)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def panel_nodes(a: float, b: float, node_count: int, width: float = PANEL_WIDTH):
    """Nodes and weights of composite Gauss-Legendre on ``[a, b]``."""
    if b <= a:
        return np.empty(0), np.empty(0)
    n_panels = max(1, math.ceil((b - a) / width))
    edges = np.linspace(a, b, n_panels + 1)
    x, w = _legendre(node_count)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _phi(u: np.ndarray) -> np.ndarray:
    return _INV_SQRT_2PI * np.exp(-0.5 * u * u)


def _require_sigma(post: PosteriorGaussian):
    if post.sigma <= 0:
        raise DomainError("quadrature oracle needs sigma > 0")


def ei_integral_quadrature(
    post: PosteriorGaussian, inc: Incumbent, cfg: QuadratureConfig = QuadratureConfig()
) -> float:
    """``int_{-inf}^{z} (y* - mu - u sigma) phi(u) du`` by panel quadrature."""
    _require_sigma(post)
    mu, s, ys = post.mu, post.sigma, inc.y_star
    z = (ys - mu) / s
    lo = min(z, 0.0) - TRUNCATION
    hi = min(z, TRUNCATION)
    u, w = panel_nodes(lo, hi, cfg.node_count)
    return float(np.dot(w, (ys - mu - u * s) * _phi(u)))


def ei_integral_quadrature_y(
    post: PosteriorGaussian, inc: Incumbent, cfg: QuadratureConfig = QuadratureConfig()
) -> float:
    """Same integral taken directly in ``y``: ``int (y* - y) N(y; mu, sigma^2) dy``."""
    _require_sigma(post)
    mu, s, ys = post.mu, post.sigma, inc.y_star
    lo = min(ys, mu) - TRUNCATION * s
    hi = min(ys, mu + TRUNCATION * s)
    y, w = panel_nodes(lo, hi, cfg.node_count, width=PANEL_WIDTH * s)
    dens = _INV_SQRT_2PI / s * np.exp(-0.5 * ((y - mu) / s) ** 2)
    return float(np.dot(w, (ys - y) * dens))


def log_ei_integral_quadrature(
    post: PosteriorGaussian, inc: Incumbent, cfg: QuadratureConfig = QuadratureConfig()
) -> float:
    """``int_{-inf}^{z} (y* - exp(mu + u sigma)) phi(u) du`` by panel quadrature.

    ``post`` is the posterior of ``log y``; ``z = (log y* - mu) / sigma``.
    """
    _require_sigma(post)
    if inc.y_star <= 0:
        raise DomainError(f"log-objective EI needs y* > 0, got {inc.y_star!r}")
    mu, s, ys = post.mu, post.sigma, inc.y_star
    z = (math.log(ys) - mu) / s
    lo = min(z, 0.0) - TRUNCATION
    hi = min(z, max(0.0, s) + TRUNCATION)
    if mu + hi * s > _LOG_MAX:
        raise AcquisitionOverflowError(
            f"exp(mu + u sigma) overflows at the upper panel edge u = {hi:.6g}"
        )
    u, w = panel_nodes(lo, hi, cfg.node_count)
    # combine exp(mu + u s) * phi(u) in log space to keep the product finite
    growth = np.exp(mu + u * s - 0.5 * u * u) * _INV_SQRT_2PI
    return float(np.dot(w, ys * _phi(u) - growth))


def shifted_exp_integral_quadrature(
    z: float, sigma: float, cfg: QuadratureConfig = QuadratureConfig()
) -> float:
    """``int_{-inf}^{z} exp(u sigma) phi(u) du`` by panel quadrature."""
    if not (math.isfinite(z) and math.isfinite(sigma)) or sigma < 0:
        raise DomainError("z must be finite and sigma >= 0")
    lo = min(z, 0.0) - TRUNCATION
    hi = min(z, sigma + TRUNCATION)
    u, w = panel_nodes(lo, hi, cfg.node_count)
    return float(np.dot(w, np.exp(u * sigma - 0.5 * u * u))) * _INV_SQRT_2PI


def make_generator(seed: int) -> np.random.Generator:
    """Seeded ``numpy`` PCG64 generator; the only RNG the package uses."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def ei_integral_mc(
    post: PosteriorGaussian,
    inc: Incumbent,
    cfg: QuadratureConfig = QuadratureConfig(),
    variant: Variant | str = Variant.EI,
) -> tuple[float, float]:
    """Monte-Carlo estimate and standard error of the EI or logEI integral.

    Draws ``cfg.mc_samples`` deviates from PCG64 seeded with ``cfg.mc_seed``,
    so repeated calls return bit-identical results.
    """
    _require_sigma(post)
    variant = Variant.parse(variant)
    if variant is Variant.LOG_OF_EI:
        raise DomainError("the Monte-Carlo oracle covers the ei and logei integrands only")
    rng = make_generator(cfg.mc_seed)
    draws = post.mu + post.sigma * rng.standard_normal(int(cfg.mc_samples))
    if variant is Variant.EI:
        gain = np.maximum(inc.y_star - draws, 0.0)
    else:
        if inc.y_star <= 0:
            raise DomainError(f"log-objective EI needs y* > 0, got {inc.y_star!r}")
        with np.errstate(over="ignore"):
            gain = np.maximum(inc.y_star - np.exp(draws), 0.0)
    n = gain.size
    return float(gain.mean()), float(gain.std(ddof=1) / math.sqrt(n))
