"""
Training objectives for the resolution classifiers.

Bi-Class uses a focal loss on the probability of full-resolution motion.
Mu-Class trains against soft labels derived from the RD costs of all four
factors, weighted by how decisive the label is (2 minus its entropy in bits).
Cross-entropy terms use the natural log.
"""

import numpy as np

EPSILON = 1e-7
DEFAULT_GAMMA = 2.0
DEFAULT_SOFT_TEMPERATURE = 10.0


def clamp_probability(p: np.ndarray | float) -> np.ndarray:
    return np.clip(np.asarray(p, dtype=np.float64), EPSILON, 1.0 - EPSILON)


def focal_loss(
    p: float | np.ndarray,
    label: int | np.ndarray,
    alpha: float | np.ndarray = 1.0,
    gamma: float = DEFAULT_GAMMA,
) -> float | np.ndarray:
    """``alpha * (1 - p_t)^gamma * -ln(p_t)`` where ``p_t`` is p for label 1."""
    p = clamp_probability(p)
    p_t = np.where(np.asarray(label) == 1, p, 1.0 - p)
    loss = np.asarray(alpha) * (1.0 - p_t) ** gamma * -np.log(p_t)
    return float(loss) if loss.ndim == 0 else loss


def focal_loss_grad(
    logits: np.ndarray, labels: np.ndarray, alpha: np.ndarray, gamma: float
) -> np.ndarray:
    """dLoss/dlogit of the focal loss composed with a logistic output."""
    p = 0.5 * (1.0 + np.tanh(0.5 * logits))
    p_t = clamp_probability(np.where(labels == 1, p, 1.0 - p))
    sign = np.where(labels == 1, 1.0, -1.0)
    miss = 1.0 - p_t
    slope = gamma * miss**gamma * p_t * np.log(p_t) - miss ** (gamma + 1)
    return sign * alpha * slope


def soft_label(
    rd_costs: np.ndarray | list[float], temperature: float = DEFAULT_SOFT_TEMPERATURE
) -> np.ndarray:
    """Softmax of ``temperature * (RD_max - RD_i) / RD_max``."""
    costs = np.asarray(rd_costs, dtype=np.float64)
    if np.any(costs <= 0):
        raise ValueError("RD costs must be positive")
    if temperature <= 0:
        raise ValueError("Soft-label temperature must be positive")
    highest = costs.max()
    advantage = temperature * (highest - costs) / highest
    weights = np.exp(advantage - advantage.max())
    return weights / weights.sum()


def entropy_bits(distribution: np.ndarray) -> float:
    """Shannon entropy in bits; zero-probability terms contribute nothing."""
    q = np.asarray(distribution, dtype=np.float64)
    nonzero = q[q > 0]
    return float(-np.sum(nonzero * np.log2(nonzero)))


def entropy_weight(target: np.ndarray) -> float:
    """Sample weight ``2 - H(target)``; 0 for a uniform target over 4 classes."""
    return max(0.0, 2.0 - entropy_bits(target))


def mu_loss(probs: np.ndarray, target: np.ndarray) -> float:
    """Cross-entropy against a soft label, weighted by ``2 - H(target)``."""
    ce = -np.sum(np.asarray(target) * np.log(clamp_probability(probs)))
    return float(entropy_weight(target) * ce)


def mu_loss_grad(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """dLoss/dlogits for a batch, softmax outputs assumed."""
    weights = np.array([entropy_weight(t) for t in targets])
    return weights[:, None] * (probs - targets)
