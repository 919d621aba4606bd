"""Ask-tell Bayesian optimisation driver.

The loop maximises the objective and keeps ``y* = max_n y_n`` as its
incumbent. The acquisition closed forms integrate improvement *below* the
incumbent, so before scoring candidates the driver passes the problem
through a decreasing map ``g`` of the objective, for which "below ``g(y*)``"
means "above ``y*``":

* ``EI`` and ``LogOfEI``: ``g(y) = -y``; the posterior becomes
  ``N(-mu, sigma^2)`` and the incumbent ``-y*``.
* ``LogTransformedEI``: ``g(y) = 1/y``, i.e. ``log g = -log y``; the GP is
  still trained on ``log y`` and its posterior ``N(mu, sigma^2)`` over
  ``log y`` becomes ``N(-mu, sigma^2)`` over ``log(1/y)``, with incumbent
  ``1/y*``. Positivity is preserved, as the log-transformed form requires.

With ``BOConfig.maximize = False`` the map is the identity and the
acquisition is applied to the raw posterior exactly as written, which steers
the search towards low objective values.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .acquisition import Variant, acquisition_array, incumbent_from
from .errors import DomainError, LogEIBOError, ShapeError
from .gp import Dataset, GPHyperparams, GPModel, fit, tune_hyperparams
from .oracle import make_generator

log = logging.getLogger(__name__)

_N_ELITE = 5
_PERTURB_PER_ELITE = 16
_PERTURB_SCALES = (0.02, 0.1)
_REFINE_STEP = 0.05


@dataclass(frozen=True)
class SearchSpace:
    """Axis-aligned box ``[lower, upper]``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or not lo:
            raise ShapeError(f"bounds of length {len(lo)} and {len(hi)}")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise DomainError(f"dimension {i}: need finite lower < upper, got [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def span(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def clip(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.lower) + self.span * rng.random((n, self.dim))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class BOConfig:
    """Loop settings.

    ``tune_budget`` is passed to :func:`~logei_bo.gp.tune_hyperparams` every
    iteration unless fixed ``hyperparams`` are given.
    """

    acquisition: Variant = Variant.EI
    init_design_size: int = 5
    max_evaluations: int = 30
    candidate_pool: int = 256
    local_refinement_steps: int = 10
    seed: int = 0
    tune_budget: int = 4
    hyperparams: GPHyperparams | None = None
    maximize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "acquisition", Variant.parse(self.acquisition))
        if self.init_design_size < 1:
            raise DomainError("init_design_size must be >= 1")
        if self.init_design_size >= self.max_evaluations:
            raise DomainError(
                f"init_design_size ({self.init_design_size}) must be < max_evaluations "
                f"({self.max_evaluations})"
            )
        if self.candidate_pool < 1:
            raise DomainError("candidate_pool must be >= 1")
        if self.local_refinement_steps < 0:
            raise DomainError("local_refinement_steps must be >= 0")
        if self.tune_budget < 1:
            raise DomainError("tune_budget must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def log_targets(self) -> bool:
        return self.acquisition is Variant.LOG_TRANSFORMED_EI


@dataclass
class TrialRecord:
    iteration: int
    x: tuple[float, ...]
    y: float
    incumbent_so_far: float
    acquisition_value_at_x: float | None
    wall_time: float
    log_targets: bool | None = None

    def to_json_dict(self, timing: bool = True) -> dict:
        acq = self.acquisition_value_at_x
        if acq is not None and not math.isfinite(acq):
            acq = None
        return {
            "iter": self.iteration,
            "x": list(self.x),
            "y": self.y,
            "incumbent": self.incumbent_so_far,
            "acq": acq,
            "wall_ms": self.wall_time * 1e3 if timing else None,
            "log_targets": self.log_targets,
        }

    def same_outcome(self, other: TrialRecord) -> bool:
        """Equality ignoring wall-clock time."""
        return replace(self, wall_time=0.0) == replace(other, wall_time=0.0)


class ObjectiveError(LogEIBOError):
    """The objective returned a non-finite value; ``records`` holds the completed trials."""

    def __init__(self, message: str, records: list[TrialRecord], x: np.ndarray, y: float):
        super().__init__(message)
        self.records = records
        self.x = x
        self.y = y


@dataclass
class Suggestion:
    x: np.ndarray
    acquisition_value: float | None
    model: GPModel | None = field(default=None, repr=False)

    @property
    def log_targets(self) -> bool | None:
        return None if self.model is None else self.model.log_targets


def _initial_design(space: SearchSpace, config: BOConfig) -> np.ndarray:
    return space.sample(make_generator(config.seed), config.init_design_size)


def _canonical(history: Dataset) -> Dataset:
    keys = [history.y] + [history.X[:, j] for j in range(history.dim - 1, -1, -1)]
    order = np.lexsort(keys)
    return Dataset(history.X[order], history.y[order])


def oriented_scorer(
    model: GPModel, variant: Variant, y_star: float, maximize: bool = True
) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``X -> acquisition`` for a fitted model and incumbent ``y*``."""

    def score(X: np.ndarray) -> np.ndarray:
        mu, sd = model.predict_many(X)
        if not maximize:
            return acquisition_array(variant, mu, sd, y_star)
        if variant is Variant.LOG_TRANSFORMED_EI:
            return acquisition_array(variant, -mu, sd, 1.0 / y_star)
        return acquisition_array(variant, -mu, sd, -y_star)

    return score


def _candidates(history: Dataset, space: SearchSpace, config: BOConfig, rng) -> np.ndarray:
    pool = space.sample(rng, config.candidate_pool)
    elite_idx = np.argsort(-history.y, kind="stable")[:_N_ELITE]
    elite = history.X[elite_idx]
    local = []
    for scale in _PERTURB_SCALES:
        noise = rng.standard_normal((elite.shape[0], _PERTURB_PER_ELITE // 2, space.dim))
        local.append(elite[:, None, :] + scale * space.span * noise)
    local = space.clip(np.concatenate(local, axis=1).reshape(-1, space.dim))
    return np.vstack([pool, local])


def _refine(x: np.ndarray, value: float, score, space: SearchSpace, steps: int):
    step = _REFINE_STEP * space.span
    eye = np.eye(space.dim)
    for _ in range(steps):
        neighbours = space.clip(np.vstack([x + eye * step, x - eye * step]))
        values = score(neighbours)
        i = int(np.argmax(values))
        if values[i] > value:
            x, value = neighbours[i], float(values[i])
        else:
            step = step * 0.5
    return x, value


def suggest_with_info(history: Dataset | None, space: SearchSpace, config: BOConfig) -> Suggestion:
    """:func:`suggest` plus the acquisition value and the fitted model."""
    n = 0 if history is None else len(history)
    if n >= config.max_evaluations:
        raise DomainError(f"history already holds {n} >= max_evaluations observations")
    if history is not None and history.dim != space.dim:
        raise ShapeError(f"history has dimension {history.dim}, space has {space.dim}")
    if n < config.init_design_size:
        return Suggestion(_initial_design(space, config)[n].copy(), None)

    history = _canonical(history)
    variant = config.acquisition
    y_star = incumbent_from(history, variant).y_star
    if config.hyperparams is not None:
        hp = config.hyperparams
    else:
        hp = tune_hyperparams(history, config.log_targets, config.tune_budget, seed=config.seed)
    model = fit(history, hp, log_targets=config.log_targets)
    score = oriented_scorer(model, variant, y_star, config.maximize)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(config.seed), n])))
    cands = _candidates(history, space, config, rng)
    values = score(cands)
    i = int(np.argmax(values))
    x, value = _refine(cands[i], float(values[i]), score, space, config.local_refinement_steps)
    return Suggestion(np.asarray(x, dtype=float), value, model)


def suggest(history: Dataset | None, space: SearchSpace, config: BOConfig) -> np.ndarray:
    """Next point to evaluate.

    The first ``init_design_size`` points come from a seeded uniform design.
    After that the GP is refit (on ``log y`` for LogTransformedEI), the
    acquisition is scored on a uniform pool plus perturbations of the best
    observations, and the winner is polished by coordinate hill climbing.
    The result depends only on the seed and the *set* of observations.
    """
    return suggest_with_info(history, space, config).x


def run(
    objective: Callable[[np.ndarray], float],
    space: SearchSpace,
    config: BOConfig,
    callback: Callable[[TrialRecord], None] | None = None,
) -> list[TrialRecord]:
    """Evaluate ``objective`` ``config.max_evaluations`` times and return the trials.

    Raises
    ------
    ObjectiveError
        The objective produced NaN or inf. The exception carries every
        record completed before the failing evaluation.
    """
    records: list[TrialRecord] = []
    history: Dataset | None = None
    best = -math.inf
    for it in range(config.max_evaluations):
        t0 = time.perf_counter()
        sug = suggest_with_info(history, space, config)
        y = float(objective(sug.x))
        elapsed = time.perf_counter() - t0
        if not math.isfinite(y):
            raise ObjectiveError(
                f"objective returned {y!r} at iteration {it}, x = {sug.x.tolist()}",
                records,
                sug.x,
                y,
            )
        if config.log_targets and y <= 0:
            raise ObjectiveError(
                f"LogTransformedEI needs a positive objective, got {y!r} at iteration {it}",
                records,
                sug.x,
                y,
            )
        best = max(best, y)
        rec = TrialRecord(
            iteration=it,
            x=tuple(float(v) for v in sug.x),
            y=y,
            incumbent_so_far=best,
            acquisition_value_at_x=sug.acquisition_value,
            wall_time=elapsed,
            log_targets=sug.log_targets,
        )
        records.append(rec)
        if callback is not None:
            callback(rec)
        log.debug("iter %d y=%.6g best=%.6g", it, y, best)
        history = Dataset(np.atleast_2d(sug.x), [y]) if history is None else history.append(sug.x, y)
    return records


def best_of(records: Sequence[TrialRecord]) -> TrialRecord:
    return max(records, key=lambda r: r.y)
