"""Metric fields: anything that yields a Jacobian posterior per latent point.

A field must provide `latent_dim`, `data_dim`, `jacobian_posterior(z)`,
`jacobian_batch(Z)` and `latent_box()`; fields that map latents to an
ambient space additionally provide `decode(z)`. Geodesics, indicatrices and
volumes are computed against this interface, so fitted models and analytic
test surfaces are interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gp import (
    GpModel,
    JacobianPosterior,
    _jacobian_posterior_batch,
    _posterior_mean_var_batch,
    posterior_mean_var,
)

__all__ = [
    "GpField",
    "EuclideanField",
    "ConstantField",
    "SphereField",
    "SyntheticField",
    "as_field",
    "sphere_chart",
    "sphere_chart_inverse",
]


def _batch_by_loop(field, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    means = np.empty((Z.shape[0], field.data_dim, field.latent_dim))
    covs = np.empty((Z.shape[0], field.latent_dim, field.latent_dim))
    for i, z in enumerate(Z):
        jac = field.jacobian_posterior(z)
        means[i] = jac.mean
        covs[i] = jac.cov
    return means, covs


@dataclass(frozen=True, eq=False)
class GpField:
    """Field induced by a fitted model's Jacobian posterior."""

    model: GpModel

    @property
    def latent_dim(self) -> int:
        return self.model.dim_latent

    @property
    def data_dim(self) -> int:
        return self.model.dim_data

    def jacobian_posterior(self, z: np.ndarray) -> JacobianPosterior:
        means, covs = _jacobian_posterior_batch(self.model, np.atleast_2d(z))
        return JacobianPosterior(mean=means[0], cov=covs[0], dim_data=self.data_dim)

    def jacobian_batch(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _jacobian_posterior_batch(self.model, Z)

    def latent_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.model.latent_bounds

    def decode(self, z: np.ndarray) -> np.ndarray:
        mean, _ = posterior_mean_var(self.model, z)
        return mean

    def decode_batch(self, Z: np.ndarray) -> np.ndarray:
        means, _ = _posterior_mean_var_batch(self.model, Z)
        return means

    def posterior_variance(self, z: np.ndarray) -> float:
        _, var = posterior_mean_var(self.model, z)
        return var


class EuclideanField:
    """Identity Jacobian, zero uncertainty: both norms are Euclidean."""

    def __init__(self, dim: int = 2, box: float = 2.0):
        self.latent_dim = dim
        self.data_dim = dim
        self._box = float(box)

    def jacobian_posterior(self, z: np.ndarray) -> JacobianPosterior:
        q = self.latent_dim
        return JacobianPosterior(mean=np.eye(q), cov=np.zeros((q, q)), dim_data=q)

    def jacobian_batch(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _batch_by_loop(self, Z)

    def latent_box(self) -> tuple[np.ndarray, np.ndarray]:
        q = self.latent_dim
        return -self._box * np.ones(q), self._box * np.ones(q)

    def decode(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float)


class ConstantField:
    """The same Jacobian posterior at every latent point."""

    def __init__(self, jac: JacobianPosterior, box: float = 2.0):
        self.jac = jac
        self.latent_dim = jac.dim_latent
        self.data_dim = jac.dim_data
        self._box = float(box)

    def jacobian_posterior(self, z: np.ndarray) -> JacobianPosterior:
        return self.jac

    def jacobian_batch(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = np.atleast_2d(Z).shape[0]
        return (
            np.broadcast_to(self.jac.mean, (n, *self.jac.mean.shape)).copy(),
            np.broadcast_to(self.jac.cov, (n, *self.jac.cov.shape)).copy(),
        )

    def latent_box(self) -> tuple[np.ndarray, np.ndarray]:
        q = self.latent_dim
        return -self._box * np.ones(q), self._box * np.ones(q)


def sphere_chart(z: np.ndarray) -> np.ndarray:
    """(azimuth, polar) -> unit vector (cos t sin p, sin t sin p, cos p)."""
    t, p = float(z[0]), float(z[1])
    return np.array(
        [math.cos(t) * math.sin(p), math.sin(t) * math.sin(p), math.cos(p)]
    )


def sphere_chart_inverse(x: np.ndarray) -> np.ndarray:
    """Unit vector -> (azimuth in [-pi, pi], polar in [0, pi])."""
    return np.array([math.atan2(x[1], x[0]), math.acos(np.clip(x[2], -1.0, 1.0))])


class SphereField:
    """Deterministic unit sphere in its standard angular chart.

    The exact chart Jacobian gives the round metric diag(sin^2 p, 1), so
    geodesic lengths can be checked against great-circle arcs. The latent
    box keeps a margin away from the polar coordinate singularities.
    """

    latent_dim = 2
    data_dim = 3

    def __init__(self, polar_margin: float = 0.3):
        self._margin = float(polar_margin)

    def jacobian_posterior(self, z: np.ndarray) -> JacobianPosterior:
        t, p = float(z[0]), float(z[1])
        st, ct, sp, cp = math.sin(t), math.cos(t), math.sin(p), math.cos(p)
        mean = np.array([[-st * sp, ct * cp], [ct * sp, st * cp], [0.0, -sp]])
        return JacobianPosterior(mean=mean, cov=np.zeros((2, 2)), dim_data=3)

    def jacobian_batch(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _batch_by_loop(self, Z)

    def latent_box(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([-math.pi, self._margin]),
            np.array([math.pi, math.pi - self._margin]),
        )

    def decode(self, z: np.ndarray) -> np.ndarray:
        return sphere_chart(z)


class SyntheticField:
    """Smooth trigonometric field with genuinely position-dependent
    uncertainty, for exercising geodesics and volumes without a fit."""

    def __init__(
        self,
        seed: int = 0,
        latent_dim: int = 2,
        data_dim: int = 8,
        noise_floor: float = 0.1,
        box: float = 2.0,
    ):
        rng = np.random.default_rng(seed)
        self.latent_dim = latent_dim
        self.data_dim = data_dim
        self.noise_floor = float(noise_floor)
        self._box = float(box)
        self._freq_mean = rng.normal(0.0, 1.0, (data_dim, latent_dim, latent_dim))
        self._phase_mean = rng.uniform(0.0, 2.0 * np.pi, (data_dim, latent_dim))
        self._amp_mean = rng.normal(0.0, 1.0, (data_dim, latent_dim)) / math.sqrt(
            latent_dim
        )
        self._freq_cov = rng.normal(0.0, 1.0, (latent_dim, latent_dim, latent_dim))
        self._phase_cov = rng.uniform(0.0, 2.0 * np.pi, (latent_dim, latent_dim))

    def jacobian_posterior(self, z: np.ndarray) -> JacobianPosterior:
        z = np.asarray(z, dtype=float)
        mean = self._amp_mean * np.sin(self._freq_mean @ z + self._phase_mean)
        root = np.sin(self._freq_cov @ z + self._phase_cov)
        cov = root @ root.T / self.latent_dim + self.noise_floor * np.eye(
            self.latent_dim
        )
        return JacobianPosterior(mean=mean, cov=cov, dim_data=self.data_dim)

    def jacobian_batch(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _batch_by_loop(self, Z)

    def latent_box(self) -> tuple[np.ndarray, np.ndarray]:
        q = self.latent_dim
        return -self._box * np.ones(q), self._box * np.ones(q)


def as_field(obj):
    """Wrap a fitted model as a field; pass fields through unchanged."""
    if isinstance(obj, GpModel):
        return GpField(obj)
    if hasattr(obj, "jacobian_posterior"):
        return obj
    raise TypeError(f"cannot interpret {type(obj).__name__} as a metric field")
