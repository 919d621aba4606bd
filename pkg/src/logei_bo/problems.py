"""Built-in benchmark objectives, all to be maximised and strictly positive."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bo import SearchSpace
from .errors import DomainError


@dataclass(frozen=True)
class Problem:
    name: str
    func: Callable[[np.ndarray], float]
    space: SearchSpace
    optimum: float
    argmax: tuple[tuple[float, ...], ...]
    description: str

    def __call__(self, x) -> float:
        return float(self.func(np.asarray(x, dtype=float)))


def _quad1d(x: np.ndarray) -> float:
    return 1.0 - (x[0] - 0.3) ** 2


def _branin(x: np.ndarray) -> float:
    x1, x2 = x[0], x[1]
    b = 5.1 / (4 * math.pi**2)
    c = 5 / math.pi
    t = 1 / (8 * math.pi)
    return (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * math.cos(x1) + 10


_BRANIN_MIN = 0.397887357729738
_POSBRANIN_SHIFT = 310.0


def _posbranin(x: np.ndarray) -> float:
    return _POSBRANIN_SHIFT - _branin(x)


_H3_A = np.array([[3.0, 10, 30], [0.1, 10, 35], [3.0, 10, 30], [0.1, 10, 35]])
_H3_C = np.array([1.0, 1.2, 3.0, 3.2])
_H3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]]
)
_H3_MIN = -3.862782147820755
_POSHARTMANN_SHIFT = 0.1


def _poshartmann3(x: np.ndarray) -> float:
    inner = (_H3_A * (x[None, :] - _H3_P) ** 2).sum(1)
    return _POSHARTMANN_SHIFT + float((_H3_C * np.exp(-inner)).sum())


PROBLEMS: dict[str, Problem] = {
    "quad1d": Problem(
        "quad1d",
        _quad1d,
        SearchSpace((0.0,), (1.0,)),
        1.0,
        ((0.3,),),
        "1 - (x - 0.3)^2 on [0, 1]; values in [0.51, 1]",
    ),
    "posbranin": Problem(
        "posbranin",
        _posbranin,
        SearchSpace((-5.0, 0.0), (10.0, 15.0)),
        _POSBRANIN_SHIFT - _BRANIN_MIN,
        ((-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475)),
        "310 - Branin(x) on [-5, 10] x [0, 15]; values in [1.8, 309.6]",
    ),
    "poshartmann3": Problem(
        "poshartmann3",
        _poshartmann3,
        SearchSpace((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
        _POSHARTMANN_SHIFT - _H3_MIN,
        ((0.114614, 0.555649, 0.852547),),
        "0.1 - Hartmann3(x) on [0, 1]^3; values in (0.1, 3.96]",
    ),
}


def get_problem(name: str) -> Problem:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise DomainError(
            f"unknown problem {name!r}; available: {', '.join(sorted(PROBLEMS))}"
        ) from None
