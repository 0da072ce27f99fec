"""Objective functions f: R^d -> R with gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

DEFAULT_LAMBDA_REG = 1e-8


class Objective:
    """Contract consumed by the integrators.

    Subclasses set ``dim`` and implement ``value`` and ``gradient``.
    ``known_optimum`` is ``(x_star, f_star)`` when the minimiser is known.
    """

    dim: int
    known_optimum: tuple[np.ndarray, float] | None = None

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ConfigError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x


class QuadraticObjective(Objective):
    """f(x) = 1/2 sum_a scales_a (x_a - center_a)^2."""

    def __init__(self, center, scales):
        center = np.array(center, dtype=float)
        scales = np.array(scales, dtype=float)
        if center.ndim != 1 or center.shape != scales.shape:
            raise ConfigError("center and scales must be vectors of equal length")
        if np.any(scales <= 0) or not np.all(np.isfinite(scales)):
            raise DomainError("quadratic scales must be strictly positive")
        center.setflags(write=False)
        scales.setflags(write=False)
        self.center = center
        self.scales = scales
        self.dim = center.size
        self.known_optimum = (center, 0.0)

    def value(self, x):
        r = self._check(x) - self.center
        return 0.5 * float(np.dot(self.scales * r, r))

    def gradient(self, x):
        return self.scales * (self._check(x) - self.center)


def quadratic_objective(center, scales) -> QuadraticObjective:
    return QuadraticObjective(center, scales)


def _softplus(u: np.ndarray) -> np.ndarray:
    # log(1 + e^u) without overflow or log(0)
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


class LogisticRegressionObjective(Objective):
    """Mean cross-entropy of h(x; w) = sigmoid(w.x) plus lambda_reg * |w|^2.

    Labels must be in {0, 1}.
    """

    def __init__(self, features, labels, lambda_reg: float = DEFAULT_LAMBDA_REG):
        X = np.array(features, dtype=float)
        y = np.array(labels, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ConfigError("features must be a non-empty N x d matrix")
        if y.shape != (X.shape[0],):
            raise ConfigError(f"labels must have length {X.shape[0]}, got shape {y.shape}")
        if not np.all((y == 0) | (y == 1)):
            raise ConfigError("labels must be 0 or 1")
        if lambda_reg < 0:
            raise DomainError("lambda_reg must be non-negative")
        X.setflags(write=False)
        y.setflags(write=False)
        self.features = X
        self.labels = y
        self.lambda_reg = float(lambda_reg)
        self.dim = X.shape[1]
        # sign that turns each sample loss into softplus(sign * z)
        self._sign = 1.0 - 2.0 * y

    @classmethod
    def from_dataset(cls, dataset, lambda_reg: float = DEFAULT_LAMBDA_REG):
        return cls(dataset.features, dataset.labels, lambda_reg)

    def value(self, w):
        w = self._check(w)
        z = self.features @ w
        loss = float(np.mean(_softplus(self._sign * z)))
        return loss + self.lambda_reg * float(w @ w)

    def gradient(self, w):
        w = self._check(w)
        h = sigmoid(self.features @ w)
        n = self.features.shape[0]
        return self.features.T @ (h - self.labels) / n + 2.0 * self.lambda_reg * w


def logistic_value(obj: LogisticRegressionObjective, w) -> float:
    return obj.value(w)


def logistic_gradient(obj: LogisticRegressionObjective, w) -> np.ndarray:
    return obj.gradient(w)


class CountingObjective(Objective):
    """Wraps another objective and counts value/gradient calls."""

    def __init__(self, inner: Objective):
        self.inner = inner
        self.dim = inner.dim
        self.known_optimum = inner.known_optimum
        self.value_calls = 0
        self.gradient_calls = 0

    def value(self, x):
        self.value_calls += 1
        return self.inner.value(x)

    def gradient(self, x):
        self.gradient_calls += 1
        return self.inner.gradient(x)


@dataclass
class GradCheckReport:
    max_rel_err: float
    per_coordinate: np.ndarray


def grad_check(obj: Objective, x, h: float = 1e-6) -> GradCheckReport:
    """Compare ``obj.gradient`` against central differences with step ``h``.

    Relative errors use the denominator max(1, |grad_a|).
    """
    if not h > 0:
        raise DomainError("finite-difference step must be positive")
    x = np.array(x, dtype=float)
    g = np.asarray(obj.gradient(x), dtype=float)
    fd = np.empty_like(x)
    for a in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[a] += h
        xm[a] -= h
        fd[a] = (obj.value(xp) - obj.value(xm)) / (2.0 * h)
    rel = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
    return GradCheckReport(float(rel.max(initial=0.0)), rel)
