"""The three norms induced by a stochastic Jacobian.

At a latent point the Jacobian J is random with Gaussian rows, so the
pullback inner product v^T J^T J v is a scalar random variable. This module
provides the sampled stochastic norm sqrt(v^T G v), the expected-Riemannian
norm sqrt(v^T E[G] v), and the Finsler norm E[sqrt(v^T G v)] in closed form,
together with the coefficients (alpha, omega) and the bounds that relate
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gp import JacobianPosterior
from .randmat import ScalarWishart, WishartSpec, sample_jacobian, wishart_scalar_moments
from .specfun import kummer_1f1, log_gamma_ratio

__all__ = [
    "MetricPoint",
    "BoundReport",
    "riemannian_norm",
    "finsler_norm",
    "alpha_sigma_norm",
    "stochastic_norm_sample",
    "alpha_coefficient",
    "omega",
    "bound_report",
    "relative_gap",
    "fundamental_form",
]

# below this v^T Sigma v the noncentrality overflows the series; the norm
# collapses to its deterministic limit sqrt(v^T E[J]^T E[J] v)
DETERMINISTIC_SIGMA = 1e-14

BOUND_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class MetricPoint:
    """Jacobian posterior at one latent point, the input to every norm."""

    jac: JacobianPosterior

    @property
    def dim_data(self) -> int:
        return self.jac.dim_data

    @property
    def dim_latent(self) -> int:
        return self.jac.dim_latent

    @property
    def expected_metric_tensor(self) -> np.ndarray:
        """E[J^T J] = E[J]^T E[J] + D Sigma, symmetric PSD."""
        j = self.jac
        return j.mean.T @ j.mean + j.dim_data * j.cov


@dataclass(frozen=True, eq=False)
class BoundReport:
    """One tangent vector's norms under the sandwich inequality."""

    v: np.ndarray
    lower: float
    finsler: float
    upper: float
    alpha: float
    omega: float

    @property
    def ok(self) -> bool:
        return (
            self.lower <= self.finsler + BOUND_SLACK
            and self.finsler <= self.upper + BOUND_SLACK
        )


def _sigma_and_signal(p: MetricPoint, v: np.ndarray) -> tuple[float, float]:
    # sigma = v^T Sigma v, signal = ||E[J] v||^2; both clamped at zero
    sigma = float(v @ p.jac.cov @ v)
    jv = p.jac.mean @ v
    return max(sigma, 0.0), float(jv @ jv)


def riemannian_norm(p: MetricPoint, v: np.ndarray) -> float:
    """Norm under the expected metric tensor: sqrt(v^T E[G] v)."""
    v = np.asarray(v, dtype=float)
    sigma, signal = _sigma_and_signal(p, v)
    return math.sqrt(signal + p.dim_data * sigma)


def finsler_norm(p: MetricPoint, v: np.ndarray) -> float:
    """Expected norm E[sqrt(v^T G v)] in closed form.

    The quadratic form is a scalar non-central Wishart variable, so its
    square root has the mean

        sqrt(2 sigma) * Gamma(D/2 + 1/2)/Gamma(D/2) * 1F1(-1/2, D/2, -omega/2)

    with sigma = v^T Sigma v and omega = signal/sigma. For nearly
    deterministic Jacobians (sigma below 1e-14) the deterministic limit
    ||E[J] v|| is returned instead of overflowing the series.
    """
    v = np.asarray(v, dtype=float)
    sigma, signal = _sigma_and_signal(p, v)
    if sigma < DETERMINISTIC_SIGMA:
        return math.sqrt(signal)
    b = 0.5 * p.dim_data
    ratio = math.exp(log_gamma_ratio(b + 0.5, b))
    return math.sqrt(2.0 * sigma) * ratio * kummer_1f1(-0.5, b, -0.5 * signal / sigma)


def alpha_sigma_norm(p: MetricPoint, v: np.ndarray) -> float:
    """Lower-bound norm sqrt(alpha * v^T Sigma v)."""
    v = np.asarray(v, dtype=float)
    sigma, _ = _sigma_and_signal(p, v)
    return math.sqrt(alpha_coefficient(p.dim_data) * sigma)


def stochastic_norm_sample(p: MetricPoint, v: np.ndarray, seed: int) -> float:
    """One draw of the stochastic norm sqrt(v^T J^T J v)."""
    v = np.asarray(v, dtype=float)
    spec = WishartSpec(dof=p.dim_data, scale=p.jac.cov, mean_jacobian=p.jac.mean)
    return float(np.linalg.norm(sample_jacobian(spec, seed) @ v))


def alpha_coefficient(dim_data: int) -> float:
    """The tight constant 2 (Gamma(D/2 + 1/2)/Gamma(D/2))^2, in (0, D]."""
    if dim_data < 1:
        raise ValueError("dim_data must be >= 1")
    half = 0.5 * dim_data
    return 2.0 * math.exp(2.0 * log_gamma_ratio(half + 0.5, half))


def omega(p: MetricPoint, v: np.ndarray) -> float:
    """Non-centrality ratio (v^T Sigma v)^{-1} v^T E[J]^T E[J] v.

    Scale-invariant in v. Reported as +inf when v^T Sigma v falls below
    1e-14, the same guard under which the norms use their deterministic
    limit.
    """
    v = np.asarray(v, dtype=float)
    sigma, signal = _sigma_and_signal(p, v)
    if sigma < DETERMINISTIC_SIGMA:
        return math.inf
    return signal / sigma

def bound_report(p: MetricPoint, v: np.ndarray) -> BoundReport:
    """All three norms of v with the sandwich inequality evaluated."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("v must be nonzero")
    return BoundReport(
        v=v,
        lower=alpha_sigma_norm(p, v),
        finsler=finsler_norm(p, v),
        upper=riemannian_norm(p, v),
        alpha=alpha_coefficient(p.dim_data),
        omega=omega(p, v),
    )


def relative_gap(p: MetricPoint, v: np.ndarray) -> tuple[float, float, float]:
    """Relative gap between the two norms and its two upper bounds.

    Returns (gap, wishart_bound, jensen_bound) where
    gap = (||v||_R - ||v||_F) / ||v||_R, the first bound is
    1/(D + omega) + omega/(D + omega)^2, and the second is
    Var[z]/(2 E[z]^2) for z = v^T G v computed through the scalar moment
    formulas. For a Gaussian Jacobian the two coincide; they are computed
    through different code paths on purpose.
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("v must be nonzero")
    upper = riemannian_norm(p, v)
    gap = 0.0 if upper == 0.0 else (upper - finsler_norm(p, v)) / upper
    w = omega(p, v)
    d = p.dim_data
    if math.isinf(w):
        # deterministic limit: both bounds collapse to zero
        return gap, 0.0, 0.0
    wishart_bound = 1.0 / (d + w) + w / (d + w) ** 2
    sigma, _ = _sigma_and_signal(p, v)
    m1, m2 = wishart_scalar_moments(ScalarWishart(dof=d, sigma=sigma, omega=w))
    jensen_bound = (m2 - m1 * m1) / (2.0 * m1 * m1)
    return gap, wishart_bound, jensen_bound


def fundamental_form(p: MetricPoint, v: np.ndarray) -> np.ndarray:
    """Half the Hessian of the squared Finsler norm at v.

    Central finite differences with step 1e-5 ||v||. Positive definiteness
    of the result is the strong-convexity property of the metric; the
    quadratic homogeneity identity v^T (Hess F^2 / 2) v = F(v)^2 holds to
    the differencing accuracy.
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("v must be nonzero")
    q = v.shape[0]
    h = 1e-5 * float(np.linalg.norm(v))

    def g(u: np.ndarray) -> float:
        return finsler_norm(p, u) ** 2

    g0 = g(v)
    hess = np.empty((q, q))
    eye = np.eye(q)
    for i in range(q):
        ei = h * eye[i]
        hess[i, i] = (g(v + ei) - 2.0 * g0 + g(v - ei)) / h**2
        for j in range(i):
            ej = h * eye[j]
            hess[i, j] = hess[j, i] = (
                g(v + ei + ej) - g(v + ei - ej) - g(v - ei + ej) + g(v - ei - ej)
            ) / (4.0 * h**2)
    return 0.5 * hess
