"""Exact Gaussian-process regression with a Matern-5/2 ARD kernel.

Targets are standardized (shift by the mean, divide by the standard
deviation) before fitting and the transform is undone on prediction. With
``log_targets=True`` the model is trained on ``log y`` and predictions are the
posterior of ``log y``, unstandardized, which is what the log-transformed EI
expects.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .acquisition import PosteriorGaussian
from .errors import DomainError, NumericError, ShapeError

_SQRT5 = math.sqrt(5.0)
_LOG_2PI = math.log(2.0 * math.pi)

VARIANCE_CLAMP = 1e-10
JITTER_START = 1e-10
JITTER_STOP = 1e-4
N_STARTS = 8


@dataclass(frozen=True)
class Observation:
    x: tuple[float, ...]
    y: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``{(x_n, y_n)}`` stored as an ``(N, D)`` input matrix and targets."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1) if y.size != 1 or X.size == 1 else X.reshape(1, -1)
        if X.ndim != 2:
            raise ShapeError(f"inputs must be a 2-D array, got shape {X.shape}")
        if X.shape[0] != y.size:
            raise ShapeError(f"{X.shape[0]} inputs but {y.size} targets")
        if y.size < 1:
            raise DomainError("a dataset needs at least one observation")
        if X.shape[1] < 1:
            raise ShapeError("inputs must have at least one dimension")
        for name, arr in (("x", X), ("y", y)):
            bad = ~np.isfinite(arr)
            if np.any(bad):
                row = int(np.argwhere(bad)[0][0])
                raise DomainError(f"observation {row} has a non-finite {name}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.y.size

    @property
    def observations(self) -> list[Observation]:
        return [Observation(tuple(map(float, x)), float(y)) for x, y in zip(self.X, self.y)]

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> Dataset:
        obs = list(observations)
        if not obs:
            raise DomainError("a dataset needs at least one observation")
        dims = {len(o.x) for o in obs}
        if len(dims) != 1:
            raise ShapeError(f"observations have mixed dimensions {sorted(dims)}")
        return cls(np.array([o.x for o in obs], dtype=float), np.array([o.y for o in obs]))

    def append(self, x: Sequence[float], y: float) -> Dataset:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if x.shape[1] != self.dim:
            raise ShapeError(f"point has dimension {x.shape[1]}, dataset has {self.dim}")
        return Dataset(np.vstack([self.X, x]), np.append(self.y, y))

    def has_duplicate_inputs(self) -> bool:
        return np.unique(self.X, axis=0).shape[0] != len(self)

    @classmethod
    def from_csv(cls, path: str | Path) -> Dataset:
        """Read a CSV with header ``x1,...,xD,y``.

        Raises :class:`DomainError` with the 1-based line number of the first
        malformed row.
        """
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DomainError(f"{path}: empty file, expected header x1,...,xD,y") from None
            dim = len(header) - 1
            expected = [f"x{i}" for i in range(1, dim + 1)] + ["y"]
            if dim < 1 or header != expected:
                raise DomainError(
                    f"{path}:1: header must be {','.join(expected) if dim >= 1 else 'x1,...,xD,y'}, "
                    f"got {','.join(header)}"
                )
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != dim + 1:
                    raise DomainError(f"{path}:{lineno}: expected {dim + 1} cells, got {len(row)}")
                try:
                    values = [float(c) for c in row]
                except ValueError:
                    raise DomainError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
                if not all(math.isfinite(v) for v in values):
                    raise DomainError(f"{path}:{lineno}: non-finite cell in {row!r}")
                rows.append(values)
        if not rows:
            raise DomainError(f"{path}: no observations")
        arr = np.array(rows, dtype=float)
        return cls(arr[:, :dim], arr[:, dim])


@dataclass(frozen=True)
class GPHyperparams:
    length_scales: tuple[float, ...]
    signal_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.length_scales))
        object.__setattr__(self, "length_scales", ls)
        if not ls or not all(math.isfinite(v) and v > 0 for v in ls):
            raise DomainError(f"length scales must be positive and finite, got {ls}")
        if not (math.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise DomainError(f"signal_variance must be > 0, got {self.signal_variance!r}")
        if not (math.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise DomainError(f"noise_variance must be >= 0, got {self.noise_variance!r}")

    @property
    def dim(self) -> int:
        return len(self.length_scales)

    def to_dict(self) -> dict:
        return {
            "length_scales": list(self.length_scales),
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GPHyperparams:
        return cls(tuple(d["length_scales"]), d["signal_variance"], d["noise_variance"])


# ---------------------------------------------------------------------------
# kernel


def _matern52_from_r(r: np.ndarray, signal_variance: float) -> np.ndarray:
    sr = _SQRT5 * r
    return signal_variance * (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


def kernel_matrix(A: np.ndarray, B: np.ndarray, hp: GPHyperparams) -> np.ndarray:
    """Matern-5/2 covariance between the rows of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    ls = np.asarray(hp.length_scales)
    if A.shape[1] != ls.size or B.shape[1] != ls.size:
        raise ShapeError(
            f"inputs of dimension {A.shape[1]} and {B.shape[1]} vs {ls.size} length scales"
        )
    a = A / ls
    b = B / ls
    r2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return _matern52_from_r(np.sqrt(np.maximum(r2, 0.0)), hp.signal_variance)


def kernel_matern52(a, b, hp: GPHyperparams) -> float:
    """``k(a, b) = s (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r)`` with ARD distance ``r``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size != hp.dim:
        raise ShapeError(f"points of dimension {a.size} and {b.size} vs {hp.dim} length scales")
    r = math.sqrt(float((((a - b) / np.asarray(hp.length_scales)) ** 2).sum()))
    return float(_matern52_from_r(np.asarray(r), hp.signal_variance))


# ---------------------------------------------------------------------------
# fitting


def _targets(data: Dataset, log_targets: bool) -> np.ndarray:
    if not log_targets:
        return data.y.copy()
    bad = np.flatnonzero(data.y <= 0)
    if bad.size:
        i = int(bad[0])
        raise DomainError(
            f"log targets need y > 0 but observation {i} has y = {data.y[i]!r}"
        )
    return np.log(data.y)


def _standardization(t: np.ndarray, standardize: bool) -> tuple[float, float]:
    if not standardize:
        return 0.0, 1.0
    shift = float(t.mean())
    # zero-spread targets carry no variation, the model degenerates to a constant
    scale = float(t.std())
    return shift, scale


def _cholesky_with_jitter(K: np.ndarray, signal_variance: float) -> tuple[np.ndarray, float]:
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START * signal_variance
    eye = np.eye(K.shape[0])
    while jitter <= JITTER_STOP * signal_variance * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericError(
        f"kernel matrix not positive definite after jitter up to {JITTER_STOP:g} x signal variance"
    )


@dataclass(frozen=True, eq=False)
class GPModel:
    """A fitted GP. Immutable; ``predict`` is safe to call concurrently."""

    hyperparams: GPHyperparams
    X: np.ndarray
    targets: np.ndarray
    chol: np.ndarray
    weights: np.ndarray
    target_shift: float
    target_scale: float
    log_targets: bool
    jitter: float = 0.0
    _std_targets: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def _check(self, Xq) -> np.ndarray:
        Xq = np.asarray(Xq, dtype=float)
        if Xq.ndim == 1:
            Xq = Xq.reshape(1, -1)
        if Xq.shape[1] != self.dim:
            raise ShapeError(f"query has dimension {Xq.shape[1]}, model has {self.dim}")
        if not np.all(np.isfinite(Xq)):
            raise DomainError("query points must be finite")
        return Xq

    def predict_latent_many(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance in standardized target space."""
        Xq = self._check(Xq)
        Ks = kernel_matrix(self.X, Xq, self.hyperparams)
        mu = Ks.T @ self.weights
        v = solve_triangular(self.chol, Ks, lower=True, check_finite=False)
        var = self.hyperparams.signal_variance - (v * v).sum(0)
        if np.any(var < -VARIANCE_CLAMP):
            raise NumericError(f"posterior variance {var.min()!r} is negative beyond round-off")
        return mu, np.maximum(var, 0.0)

    def predict_many(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at each row of ``Xq``.

        Values are in the trained target's space: ``log y`` if the model was
        fit with ``log_targets``, else ``y``.
        """
        mu, var = self.predict_latent_many(Xq)
        return self.target_shift + self.target_scale * mu, self.target_scale * np.sqrt(var)

    def predict(self, x) -> PosteriorGaussian:
        mu, sd = self.predict_many(np.asarray(x, dtype=float).reshape(1, -1))
        return PosteriorGaussian(float(mu[0]), float(sd[0]))

    def predict_latent(self, x) -> PosteriorGaussian:
        mu, var = self.predict_latent_many(np.asarray(x, dtype=float).reshape(1, -1))
        return PosteriorGaussian(float(mu[0]), float(math.sqrt(var[0])))


def _prepare(data: Dataset, hp: GPHyperparams, log_targets: bool, standardize: bool):
    if hp.dim != data.dim:
        raise ShapeError(f"{hp.dim} length scales for {data.dim}-dimensional data")
    t = _targets(data, log_targets)
    shift, scale = _standardization(t, standardize)
    ts = (t - shift) / scale if scale > 0 else np.zeros_like(t)
    K = kernel_matrix(data.X, data.X, hp)
    K[np.diag_indices_from(K)] += hp.noise_variance
    L, jitter = _cholesky_with_jitter(K, hp.signal_variance)
    alpha = solve_triangular(
        L.T, solve_triangular(L, ts, lower=True, check_finite=False), lower=False, check_finite=False
    )
    return t, ts, shift, scale, L, jitter, alpha


def fit(
    data: Dataset, hp: GPHyperparams, log_targets: bool = False, standardize: bool = True
) -> GPModel:
    """Condition a GP with hyperparameters ``hp`` on ``data``.

    Raises
    ------
    DomainError
        ``log_targets`` with a nonpositive target (the message names the
        index), or duplicated inputs with ``noise_variance == 0``.
    NumericError
        The kernel matrix stays singular after jitter escalation.
    """
    if hp.noise_variance == 0 and data.has_duplicate_inputs():
        raise DomainError("duplicate inputs make the noiseless kernel matrix singular")
    t, ts, shift, scale, L, jitter, alpha = _prepare(data, hp, log_targets, standardize)
    return GPModel(
        hyperparams=hp,
        X=data.X.copy(),
        targets=t,
        chol=L,
        weights=alpha,
        target_shift=shift,
        target_scale=scale,
        log_targets=bool(log_targets),
        jitter=jitter,
        _std_targets=ts,
    )


def predict(model: GPModel, x) -> PosteriorGaussian:
    return model.predict(x)


def log_marginal_likelihood(
    data: Dataset, hp: GPHyperparams, log_targets: bool = False, standardize: bool = True
) -> float:
    """``-1/2 t^T K^-1 t - 1/2 log|K| - N/2 log 2 pi`` on standardized targets."""
    _, ts, _, _, L, _, alpha = _prepare(data, hp, log_targets, standardize)
    value = -0.5 * float(ts @ alpha) - float(np.log(np.diag(L)).sum()) - 0.5 * ts.size * _LOG_2PI
    if not math.isfinite(value):
        raise NumericError("log marginal likelihood is not finite")
    return value


# ---------------------------------------------------------------------------
# hyperparameter search


def _spans(X: np.ndarray) -> np.ndarray:
    span = X.max(0) - X.min(0)
    return np.where(span > 0, span, 1.0)


def default_hyperparams(data: Dataset) -> GPHyperparams:
    """Starting point of the search: length scale = input span, unit signal variance."""
    return GPHyperparams(tuple(_spans(data.X)), 1.0, 1e-6)


def hyperparam_bounds(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Box in log space for ``(log l_1..log l_D, log s, log noise)``."""
    span = _spans(data.X)
    lo = np.concatenate([np.log(span * 1e-2), [math.log(1e-2), math.log(1e-8)]])
    hi = np.concatenate([np.log(span * 1e2), [math.log(1e2), math.log(1.0)]])
    return lo, hi


def _theta_to_hp(theta: np.ndarray) -> GPHyperparams:
    d = theta.size - 2
    return GPHyperparams(tuple(np.exp(theta[:d])), float(np.exp(theta[d])), float(np.exp(theta[d + 1])))


def _hp_to_theta(hp: GPHyperparams) -> np.ndarray:
    return np.log(np.array([*hp.length_scales, hp.signal_variance, hp.noise_variance]))


def tune_hyperparams(
    data: Dataset, log_targets: bool = False, budget: int = 4, seed: int = 0
) -> GPHyperparams:
    """Maximise the log marginal likelihood by multi-start coordinate search.

    Starts are the default hyperparameters followed by log-uniform draws from
    :func:`hyperparam_bounds`; ``min(8, budget)`` starts are used and each
    gets ``budget`` coordinate sweeps. A sweep tries ``theta_i +/- step`` for
    every coordinate and keeps improvements; the step halves after a sweep
    that changes nothing. The result is never worse than the default start.
    """
    if budget < 1:
        raise DomainError(f"budget must be >= 1, got {budget}")
    _targets(data, log_targets)
    lo, hi = hyperparam_bounds(data)
    rng = np.random.default_rng(seed)
    starts = [np.clip(_hp_to_theta(default_hyperparams(data)), lo, hi)]
    starts += [rng.uniform(lo, hi) for _ in range(N_STARTS - 1)]
    starts = starts[: min(N_STARTS, budget)]

    def score(theta: np.ndarray) -> float:
        try:
            return log_marginal_likelihood(data, _theta_to_hp(theta), log_targets)
        except NumericError:
            return -math.inf

    best_theta, best_val = None, -math.inf
    for theta in starts:
        theta = theta.copy()
        val = score(theta)
        if not math.isfinite(val):
            continue
        step = 1.0
        for _ in range(budget):
            moved = False
            for i in range(theta.size):
                for direction in (1.0, -1.0):
                    cand = theta.copy()
                    cand[i] = np.clip(cand[i] + direction * step, lo[i], hi[i])
                    if cand[i] == theta[i]:
                        continue
                    cv = score(cand)
                    if cv > val:
                        theta, val, moved = cand, cv, True
                        break
            if not moved:
                step *= 0.5
        if val > best_val:
            best_theta, best_val = theta, val
    if best_theta is None:
        raise NumericError("every hyperparameter start failed to produce a finite likelihood")
    return _theta_to_hp(best_theta)
