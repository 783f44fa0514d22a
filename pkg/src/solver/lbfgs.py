"""
Limited-memory BFGS with a strong-Wolfe line search
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import config
from ..errors import InputFormatError, SolverFailure

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]

# curvature pairs with s.y below this fraction of |s||y| are skipped
CURVATURE_EPSILON = 1e-10


class Termination(str, Enum):
    GRADIENT = "gradient"
    RELATIVE_ENERGY = "relative-energy"
    ITERATION_CAP = "iteration-cap"


class SolveConfig(BaseModel):
    """Stopping rules and line-search constants"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iterations: int = Field(default_factory=lambda: config.MAX_ITERATIONS, gt=0)
    gradient_tolerance: float = Field(default_factory=lambda: config.GRADIENT_TOLERANCE, gt=0)
    relative_energy_tolerance: float = Field(
        default_factory=lambda: config.relative_energy_tolerance, gt=0)
    history_size: int = Field(default_factory=lambda: config.HISTORY_SIZE, gt=0)
    c1: float = Field(default=1e-4, gt=0, lt=1)
    c2: float = Field(default=0.9, gt=0, lt=1)
    max_line_search_evaluations: int = Field(default=30, gt=0)

    @model_validator(mode="after")
    def _ordered_constants(self):
        if self.c1 >= self.c2:
            raise ValueError("line search needs c1 < c2")
        return self


@dataclass
class SolveReport:
    x: np.ndarray
    energy: float
    gradient_norm: float
    iterations: int
    termination: Termination
    energy_trace: List[float] = field(default_factory=list)
    evaluations: int = 0

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "termination": self.termination.value,
            "energy": self.energy,
            "gradient_norm": self.gradient_norm,
            "evaluations": self.evaluations,
        }


@dataclass
class _Trial:
    alpha: float
    x: np.ndarray
    energy: float
    gradient: np.ndarray
    slope: float

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.energy) and np.isfinite(self.slope))


def _evaluate(objective: Objective, x: np.ndarray) -> Tuple[float, np.ndarray]:
    energy, gradient = objective(x)
    gradient = np.asarray(gradient, dtype=np.float64).reshape(-1)
    if gradient.shape != x.shape:
        raise InputFormatError(f"objective returned a gradient of length {len(gradient)} "
                               f"for {len(x)} variables")
    return float(energy), gradient


def _cubic_step(lo: _Trial, hi: _Trial) -> Optional[float]:
    """Minimizer of the cubic matching value and slope at both ends"""
    if not (lo.finite and hi.finite) or lo.alpha == hi.alpha:
        return None
    d1 = lo.slope + hi.slope - 3.0 * (lo.energy - hi.energy) / (lo.alpha - hi.alpha)
    radical = d1 * d1 - lo.slope * hi.slope
    if radical < 0:
        return None
    d2 = np.sign(hi.alpha - lo.alpha) * np.sqrt(radical)
    denom = hi.slope - lo.slope + 2.0 * d2
    if denom == 0:
        return None
    alpha = hi.alpha - (hi.alpha - lo.alpha) * (hi.slope + d2 - d1) / denom
    return float(alpha) if np.isfinite(alpha) else None


class _LineSearch:
    """Bracketing phase followed by zoom; non-finite trials count as overshooting"""

    def __init__(self, objective: Objective, settings: SolveConfig):
        self.objective = objective
        self.settings = settings
        self.evaluations = 0
        self.best: Optional[_Trial] = None

    def _trial(self, x: np.ndarray, p: np.ndarray, alpha: float) -> _Trial:
        xt = x + alpha * p
        self.evaluations += 1
        energy, gradient = _evaluate(self.objective, xt)
        slope = float(gradient @ p) if np.isfinite(gradient).all() else np.nan
        trial = _Trial(alpha, xt, energy, gradient, slope)
        if trial.finite and (self.best is None or trial.energy < self.best.energy):
            self.best = trial
        return trial

    def search(self, x: np.ndarray, start: _Trial, p: np.ndarray,
               alpha: float) -> Optional[_Trial]:
        c1, c2 = self.settings.c1, self.settings.c2
        budget = self.settings.max_line_search_evaluations
        self.best = None
        f0, d0 = start.energy, start.slope
        prev = start
        for i in range(budget):
            trial = self._trial(x, p, alpha)
            if (not trial.finite or trial.energy > f0 + c1 * alpha * d0
                    or (i > 0 and trial.energy >= prev.energy)):
                return self._zoom(x, p, f0, d0, prev, trial, budget - i - 1)
            if abs(trial.slope) <= -c2 * d0:
                return trial
            if trial.slope >= 0:
                return self._zoom(x, p, f0, d0, trial, prev, budget - i - 1)
            prev = trial
            alpha *= 2.0
        return self._fallback(f0)

    def _zoom(self, x, p, f0: float, d0: float, lo: _Trial, hi: _Trial,
              budget: int) -> Optional[_Trial]:
        c1, c2 = self.settings.c1, self.settings.c2
        for _ in range(budget):
            a, b = sorted((lo.alpha, hi.alpha))
            width = b - a
            alpha = _cubic_step(lo, hi)
            if alpha is None or not (a + 0.1 * width <= alpha <= b - 0.1 * width):
                alpha = 0.5 * (a + b)
            if alpha == lo.alpha or alpha == hi.alpha:
                break
            trial = self._trial(x, p, alpha)
            if (not trial.finite or trial.energy > f0 + c1 * alpha * d0
                    or trial.energy >= lo.energy):
                hi = trial
                continue
            if abs(trial.slope) <= -c2 * d0:
                return trial
            if trial.slope * (hi.alpha - lo.alpha) >= 0:
                hi = lo
            lo = trial
        return self._fallback(f0)

    def _fallback(self, f0: float) -> Optional[_Trial]:
        # accept any strict decrease seen, otherwise report failure
        if self.best is not None and self.best.energy < f0:
            return self.best
        return None


def _two_loop(gradient: np.ndarray, history: Deque[Tuple[np.ndarray, np.ndarray, float]]
              ) -> np.ndarray:
    """H_k times the gradient, from the stored (s, y, 1 / y.s) pairs"""
    q = gradient.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = history[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def minimize(objective: Objective, x0: np.ndarray,
             settings: Optional[SolveConfig] = None) -> SolveReport:
    """Minimize an objective returning (energy, gradient).

    Stops on a small gradient norm, a small relative energy decrease or the
    iteration cap. A line search that finds no lower energy ends the solve as a
    relative-energy stop. Raises SolverFailure if the start point is not finite
    or a line search meets only non-finite energies.
    """
    settings = settings or SolveConfig()
    x = np.array(x0, dtype=np.float64).reshape(-1)
    energy, gradient = _evaluate(objective, x)
    if not (np.isfinite(energy) and np.isfinite(gradient).all()):
        raise SolverFailure("objective is not finite at the starting point", x, energy)

    history: Deque[Tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=settings.history_size)
    search = _LineSearch(objective, settings)
    trace = [energy]
    iterations = 0
    evaluations = 1
    tiny = np.finfo(float).tiny

    while True:
        gradient_norm = float(np.linalg.norm(gradient))
        if gradient_norm < settings.gradient_tolerance:
            termination = Termination.GRADIENT
            break
        if iterations >= settings.max_iterations:
            termination = Termination.ITERATION_CAP
            break

        direction = -_two_loop(gradient, history) if history else -gradient
        if direction @ gradient >= 0:
            history.clear()
            direction = -gradient
        alpha = 1.0 if history else min(1.0, 1.0 / gradient_norm)
        start = _Trial(0.0, x, energy, gradient, float(gradient @ direction))

        step = search.search(x, start, direction, alpha)
        evaluations += search.evaluations
        search.evaluations = 0
        if step is None and history:
            history.clear()
            direction = -gradient
            start = _Trial(0.0, x, energy, gradient, -gradient_norm ** 2)
            step = search.search(x, start, direction, min(1.0, 1.0 / gradient_norm))
            evaluations += search.evaluations
            search.evaluations = 0
        if step is None:
            if search.best is None:
                raise SolverFailure("line search met only non-finite energies", x, energy)
            termination = Termination.RELATIVE_ENERGY
            break

        s = step.x - x
        y = step.gradient - gradient
        sy = float(s @ y)
        if sy > CURVATURE_EPSILON * np.linalg.norm(s) * np.linalg.norm(y):
            history.append((s, y, 1.0 / sy))

        previous = energy
        x, energy, gradient = step.x, step.energy, step.gradient
        iterations += 1
        trace.append(energy)
        change = (previous - energy) / max(abs(previous), abs(energy), tiny)
        if change < settings.relative_energy_tolerance:
            gradient_norm = float(np.linalg.norm(gradient))
            termination = (Termination.GRADIENT if gradient_norm < settings.gradient_tolerance
                           else Termination.RELATIVE_ENERGY)
            break

    log.debug("solve finished after %d iterations (%s), energy %.6g",
              iterations, termination.value, energy)
    return SolveReport(x=x, energy=energy, gradient_norm=gradient_norm, iterations=iterations,
                       termination=termination, energy_trace=trace, evaluations=evaluations)


def finite_difference_gradient(objective: Callable, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences; the objective may return an energy or (energy, gradient)"""
    if not h > 0:
        raise InputFormatError(f"step size must be positive, got {h}")

    def energy_at(point):
        value = objective(point)
        return float(value[0] if isinstance(value, tuple) else value)

    x = np.array(x, dtype=np.float64).reshape(-1)
    gradient = np.zeros_like(x)
    for i in range(len(x)):
        forward = x.copy()
        backward = x.copy()
        forward[i] += h
        backward[i] -= h
        gradient[i] = (energy_at(forward) - energy_at(backward)) / (2.0 * h)
    return gradient
