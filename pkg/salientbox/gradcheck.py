from __future__ import annotations

import logging
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from salientbox.config import LossConfig
from salientbox.errors import InvalidParameterError
from salientbox.losses import multitask_grad, multitask_loss_from_logits
from salientbox.models import CountCategory

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-5
# components smaller than this are compared on an absolute scale
_DENOMINATOR_FLOOR = 1e-4


def central_difference(func: Callable[[np.ndarray], float], x: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Numerical gradient of a scalar function by central differences."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        original = x.flat[i]
        x.flat[i] = original + step
        forward = func(x)
        x.flat[i] = original - step
        backward = func(x)
        x.flat[i] = original
        grad.flat[i] = (forward - backward) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), _DENOMINATOR_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))


class TrialResult(BaseModel):
    trial: int
    size: int
    category: CountCategory
    masked: bool
    max_rel_error: float


class GradCheckReport(BaseModel):
    seed: int
    trials: List[TrialResult] = Field(default_factory=list)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def max_rel_error(self) -> float:
        return max((t.max_rel_error for t in self.trials), default=0.0)

    @property
    def failures(self) -> List[TrialResult]:
        return [t for t in self.trials if t.max_rel_error > self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures


def run_grad_check(
    seed: int = 0,
    trials: int = 200,
    max_size: int = 64,
    cfg: Optional[LossConfig] = None,
    perturb: float = 0.0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> GradCheckReport:
    """Analytic multi-task gradients against central differences; ``perturb`` is a negative control."""
    if trials < 1:
        raise InvalidParameterError(f"trials must be at least 1, got {trials}")
    cfg = cfg or LossConfig()
    rng = np.random.default_rng(seed)
    report = GradCheckReport(seed=seed, tolerance=tolerance)
    for trial in range(trials):
        # first trial pins the single-element case
        size = 1 if trial == 0 else int(rng.integers(1, max_size + 1))
        g = np.where(rng.random(size) < 0.4, rng.uniform(0.5, 1.0, size), rng.uniform(0.0, 0.5, size))
        x = rng.random(size)
        logits = rng.normal(0.0, 2.0, 4)
        category = CountCategory.from_index(int(rng.integers(0, 4)))
        n_box = None if rng.random() < 0.5 else int(rng.integers(0, 5))

        def loss_of(theta: np.ndarray) -> float:
            return multitask_loss_from_logits(theta[:size], g, theta[size:], category, cfg, n_box)

        grad_x, grad_z = multitask_grad(x, g, logits, category, cfg, n_box)
        analytic = np.concatenate([grad_x, grad_z]) + perturb
        numeric = central_difference(loss_of, np.concatenate([x, logits]))
        error = relative_error(analytic, numeric)
        masked = n_box is not None and n_box < category.numeric
        report.trials.append(
            TrialResult(trial=trial, size=size, category=category, masked=masked, max_rel_error=error)
        )
        if error > tolerance:
            logger.warning("gradient check trial %d failed: rel error %.3e (d=%d)", trial, error, size)
    logger.info("gradient check: %d trials, max rel error %.3e", trials, report.max_rel_error)
    return report
