"""Coefficient fields: scalars, velocities, and SPD diffusion tensors.

All fields are evaluated pointwise at arrays of shape (..., 2); constants may
be given as plain numbers.  Diffusion tensors carry declared spectral bounds
so stability checks can compare sampled values against them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

FD_STEP = 1e-6


def as_scalar_field(f) -> Callable[[np.ndarray], np.ndarray]:
    if callable(f):
        return f
    value = float(f)
    return lambda x: np.full(np.asarray(x).shape[:-1], value)


def as_vector_field(f) -> Callable[[np.ndarray], np.ndarray]:
    if callable(f):
        return f
    vec = np.asarray(f, dtype=float).reshape(2)
    return lambda x: np.broadcast_to(vec, np.asarray(x).shape[:-1] + (2,)).copy()


@dataclass(frozen=True)
class DiffusionTensor:
    """SPD tensor field kappa with declared bounds kappa_min, kappa_max."""

    at: Callable[[np.ndarray], np.ndarray]  # (..., 2) -> (..., 2, 2)
    kappa_min: float
    kappa_max: float
    constant: bool = False

    def inverse(self, x: np.ndarray) -> np.ndarray:
        k = self.at(x)
        det = k[..., 0, 0] * k[..., 1, 1] - k[..., 0, 1] * k[..., 1, 0]
        inv = np.empty_like(k)
        inv[..., 0, 0] = k[..., 1, 1]
        inv[..., 1, 1] = k[..., 0, 0]
        inv[..., 0, 1] = -k[..., 0, 1]
        inv[..., 1, 0] = -k[..., 1, 0]
        return inv / det[..., None, None]

    def check_bounds(self, points: np.ndarray, rng=None, trials: int = 8) -> float:
        """Max relative violation of the declared Rayleigh-quotient bounds
        over random directions at the given sample points (0 when clean)."""
        rng = np.random.default_rng(0) if rng is None else rng
        k = self.at(points)
        worst = 0.0
        for _ in range(trials):
            xi = rng.standard_normal(2)
            xi /= np.linalg.norm(xi)
            quad = np.einsum("a,...ab,b->...", xi, k, xi)
            worst = max(worst, float((self.kappa_min - quad).max() / self.kappa_min))
            worst = max(worst, float((quad - self.kappa_max).max() / self.kappa_max))
        return max(worst, 0.0)


def isotropic_kappa(value: float) -> DiffusionTensor:
    value = float(value)
    eye = value * np.eye(2)

    def at(x):
        return np.broadcast_to(eye, np.asarray(x).shape[:-1] + (2, 2)).copy()

    return DiffusionTensor(at, value, value, constant=True)


def diagonal_kappa(kx: float, ky: float) -> DiffusionTensor:
    mat = np.diag([float(kx), float(ky)])

    def at(x):
        return np.broadcast_to(mat, np.asarray(x).shape[:-1] + (2, 2)).copy()

    return DiffusionTensor(at, min(kx, ky), max(kx, ky), constant=True)


def interface_kappa(k_left: float, k_right: float, x_split: float = 0.5) -> DiffusionTensor:
    """Isotropic kappa jumping across the vertical line x = x_split."""

    def at(x):
        x = np.asarray(x)
        val = np.where(x[..., 0] < x_split, k_left, k_right)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = val
        out[..., 1, 1] = val
        return out

    return DiffusionTensor(at, min(k_left, k_right), max(k_left, k_right))


@dataclass(frozen=True)
class VelocityField:
    """Advection field with (analytic or finite-difference) divergence."""

    at: Callable[[np.ndarray], np.ndarray]
    div: Callable[[np.ndarray], np.ndarray] | None = None

    def div_at(self, x: np.ndarray) -> np.ndarray:
        if self.div is not None:
            return self.div(x)
        log.debug("velocity divergence via central differences, step %g", FD_STEP)
        x = np.asarray(x, dtype=float)
        ex = np.zeros_like(x)
        ex[..., 0] = FD_STEP
        ey = np.zeros_like(x)
        ey[..., 1] = FD_STEP
        dbx = (self.at(x + ex)[..., 0] - self.at(x - ex)[..., 0]) / (2 * FD_STEP)
        dby = (self.at(x + ey)[..., 1] - self.at(x - ey)[..., 1]) / (2 * FD_STEP)
        return dbx + dby

    def w1inf_bound(self, points: np.ndarray) -> float:
        """Sampled max of |beta| and |grad beta| (finite differences)."""
        x = np.asarray(points, dtype=float)
        vals = self.at(x)
        worst = float(np.abs(vals).max()) if vals.size else 0.0
        for a in range(2):
            e = np.zeros_like(x)
            e[..., a] = FD_STEP
            d = (self.at(x + e) - self.at(x - e)) / (2 * FD_STEP)
            if d.size:
                worst = max(worst, float(np.abs(d).max()))
        return worst


def constant_velocity(bx: float, by: float) -> VelocityField:
    vec = np.array([float(bx), float(by)])

    def at(x):
        return np.broadcast_to(vec, np.asarray(x).shape[:-1] + (2,)).copy()

    return VelocityField(at, div=lambda x: np.zeros(np.asarray(x).shape[:-1]))


def rotation_velocity() -> VelocityField:
    """beta = (y, -x): divergence-free rigid rotation."""

    def at(x):
        x = np.asarray(x)
        return np.stack([x[..., 1], -x[..., 0]], axis=-1)

    return VelocityField(at, div=lambda x: np.zeros(np.asarray(x).shape[:-1]))
