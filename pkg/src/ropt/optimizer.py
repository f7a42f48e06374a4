from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.common.custom_exceptions import InvalidInputError

REFLECTION = 1.0
EXPANSION = 2.0
CONTRACTION = 0.5
SHRINK = 0.5


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def nelder_mead(objective: Callable[[np.ndarray], float], x0, max_iterations: int = 100,
                tolerance: float = 1e-3, initial_step: float = 0.1) -> SimplexResult:
    """
    Downhill simplex minimisation.

    Stops when the simplex diameter (largest vertex distance to the best
    vertex) drops below `tolerance` or after `max_iterations`. Non-finite
    objective values are treated as +inf.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.ndim != 1 or x0.size < 1:
        raise InvalidInputError("Start point must be a non-empty vector.")
    f0 = float(objective(x0))
    if not np.isfinite(f0):
        raise InvalidInputError(f"Objective is not finite at the start point {x0.tolist()}.")

    def f(x: np.ndarray) -> float:
        value = float(objective(x))
        return value if np.isfinite(value) else np.inf

    n = x0.size
    simplex = np.vstack([x0] + [x0 + initial_step * np.eye(n)[i] for i in range(n)])
    values = np.array([f0] + [f(v) for v in simplex[1:]])

    iterations = 0
    converged = False
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)) < tolerance:
            converged = True
            break
        if iterations >= max_iterations:
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]

        reflected = centroid + REFLECTION * (centroid - worst)
        f_r = f(reflected)
        if values[0] <= f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
            continue

        if f_r < values[0]:
            expanded = centroid + EXPANSION * (reflected - centroid)
            f_e = f(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
            continue

        if f_r < values[-1]:
            # outside contraction
            contracted = centroid + CONTRACTION * (reflected - centroid)
            f_c = f(contracted)
            if f_c <= f_r:
                simplex[-1], values[-1] = contracted, f_c
                continue
        else:
            contracted = centroid + CONTRACTION * (worst - centroid)
            f_c = f(contracted)
            if f_c < values[-1]:
                simplex[-1], values[-1] = contracted, f_c
                continue

        # shrink towards the best vertex
        simplex[1:] = simplex[0] + SHRINK * (simplex[1:] - simplex[0])
        values[1:] = [f(v) for v in simplex[1:]]

    return SimplexResult(x=simplex[0].copy(), fun=float(values[0]),
                         iterations=iterations, converged=converged)
