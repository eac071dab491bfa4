"""Scalar functions bundled with their first two derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SmoothFunction:
    """value/gradient/hessian triple for a scalar function of a vector argument.

    gradient returns shape (p,), hessian (p, p); scalar-argument callers can
    wrap floats with numpy scalars of shape (1,).
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]

    @staticmethod
    def constant(c: float, dim: int = 1) -> "SmoothFunction":
        return SmoothFunction(lambda x: c,
                              lambda x: np.zeros(dim),
                              lambda x: np.zeros((dim, dim)))

    @staticmethod
    def affine(coeffs, intercept: float = 0.0) -> "SmoothFunction":
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        dim = len(c)
        return SmoothFunction(lambda x: float(c @ np.atleast_1d(x)) + intercept,
                              lambda x: c.copy(),
                              lambda x: np.zeros((dim, dim)))

    @staticmethod
    def quadratic_form(mat, center=None, offset: float = 0.0) -> "SmoothFunction":
        """f(x) = (x - center)' mat (x - center) / 2 + offset."""
        a = np.atleast_2d(np.asarray(mat, dtype=float))
        mu = np.zeros(a.shape[0]) if center is None else np.asarray(center, float)
        return SmoothFunction(
            lambda x: 0.5 * float((np.atleast_1d(x) - mu) @ a @ (np.atleast_1d(x) - mu)) + offset,
            lambda x: a @ (np.atleast_1d(x) - mu),
            lambda x: a.copy())
