"""Finite-difference derivatives shared by the Hamiltonian and problem layers."""

from typing import Callable, Tuple, Type

import numpy as np

from utils.settings import integrator_config


def _steps(x: np.ndarray, rel: float) -> np.ndarray:
    return rel * np.maximum(1.0, np.abs(x))


def central_gradient(func: Callable[[np.ndarray], float], x: np.ndarray,
                     rel_step: float = None) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    steps = _steps(x, integrator_config.fd_step if rel_step is None else rel_step)
    grad = np.empty_like(x)
    for i, h in enumerate(steps):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (func(xp) - func(xm)) / (xp[i] - xm[i])
    return grad


def central_jacobian(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                     rel_step: float = None) -> np.ndarray:
    """Central-difference Jacobian, shape (len(func(x)), len(x))."""
    x = np.asarray(x, dtype=float)
    steps = _steps(x, integrator_config.fd_step if rel_step is None else rel_step)
    columns = []
    for i, h in enumerate(steps):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        columns.append((np.atleast_1d(func(xp)) - np.atleast_1d(func(xm))) / (xp[i] - xm[i]))
    if not columns:
        return np.zeros((np.atleast_1d(func(x)).size, 0))
    return np.stack(columns, axis=1)


def forward_jacobian(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                     f0: np.ndarray, rel_step: float,
                     retry_on: Tuple[Type[Exception], ...] = ()) -> np.ndarray:
    """
    Forward-difference Jacobian reusing the base value f0.

    A column whose forward evaluation raises one of `retry_on` is taken as a
    backward difference instead.
    """
    x = np.asarray(x, dtype=float)
    jac = np.empty((np.size(f0), x.size))
    for i, h in enumerate(_steps(x, rel_step)):
        xp = x.copy()
        xp[i] += h
        try:
            jac[:, i] = (np.asarray(func(xp)) - f0) / (xp[i] - x[i])
        except retry_on:
            xp[i] = x[i] - h
            jac[:, i] = (f0 - np.asarray(func(xp))) / (x[i] - xp[i])
    return jac
