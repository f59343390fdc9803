from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from salientbox.config import LossConfig
from salientbox.errors import InvalidParameterError
from salientbox.models import CountCategory, CountDistribution

LOG_FLOOR = 1e-12


def _pair(x, g) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    g = np.asarray(g, dtype=np.float64).ravel()
    if x.shape != g.shape:
        raise InvalidParameterError(f"prediction and target lengths differ: {x.size} vs {g.size}")
    if x.size == 0:
        raise InvalidParameterError("loss needs at least one element")
    return x, g


def _weights(g: np.ndarray, alpha: float) -> np.ndarray:
    if alpha <= 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    return np.where(g > 0.5, alpha, 1.0)


def weighted_euclidean_loss(x, g, alpha: float = 5.0) -> float:
    """(1/2d) * sum alpha^[g_i > 0.5] * (x_i - g_i)^2."""
    x, g = _pair(x, g)
    residual = x - g
    return float(np.dot(_weights(g, alpha), residual * residual) / (2.0 * x.size))


def weighted_euclidean_grad(x, g, alpha: float = 5.0) -> np.ndarray:
    x, g = _pair(x, g)
    return _weights(g, alpha) * (x - g) / x.size


def multinomial_logistic_loss(y: CountDistribution, n) -> float:
    category = CountCategory.parse(n)
    return -math.log(max(y.probs[category.index], LOG_FLOOR))


def saliency_mask(n, n_box: Optional[int]) -> float:
    """1 unless box annotations are known to be missing for some objects."""
    if n_box is None:
        return 1.0
    if n_box < 0:
        raise InvalidParameterError(f"n_box must be nonnegative, got {n_box}")
    return 1.0 if n_box >= CountCategory.parse(n).numeric else 0.0


def multitask_loss(x, g, y: CountDistribution, n, cfg: Optional[LossConfig] = None, n_box: Optional[int] = None) -> float:
    cfg = cfg or LossConfig()
    sal = weighted_euclidean_loss(x, g, cfg.alpha)
    return saliency_mask(n, n_box) * sal + cfg.lam * multinomial_logistic_loss(y, n)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    exp = np.exp(z - z.max())
    return exp / exp.sum()


def multitask_loss_from_logits(x, g, logits, n, cfg: Optional[LossConfig] = None, n_box: Optional[int] = None) -> float:
    """Combined loss with the subitizing branch given as raw category scores."""
    cfg = cfg or LossConfig()
    z = np.asarray(logits, dtype=np.float64)
    if z.shape != (4,):
        raise InvalidParameterError("expected four category scores")
    category = CountCategory.parse(n)
    # log-softmax directly, so the eps floor never kicks in here
    log_prob = z[category.index] - z.max() - math.log(float(np.exp(z - z.max()).sum()))
    sal = weighted_euclidean_loss(x, g, cfg.alpha)
    return saliency_mask(category, n_box) * sal - cfg.lam * log_prob


def multitask_grad(x, g, logits, n, cfg: Optional[LossConfig] = None, n_box: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of ``multitask_loss_from_logits`` w.r.t. the map and the scores."""
    cfg = cfg or LossConfig()
    category = CountCategory.parse(n)
    mask = saliency_mask(category, n_box)
    grad_x = mask * weighted_euclidean_grad(x, g, cfg.alpha)
    target = np.zeros(4)
    target[category.index] = 1.0
    grad_z = cfg.lam * (softmax(logits) - target)
    return grad_x, grad_z
