"""Gaussian-process regression with Jacobian posteriors.

A GP maps latent coordinates to data space; its derivative is again a GP,
so the Jacobian at a latent point has a Gaussian posterior with one shared
q x q covariance across all D output dimensions. Both the closed-form
(kernel derivative) and the finite-difference constructions are provided,
along with marginal-likelihood fitting of the hyperparameters.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

__all__ = [
    "RBF",
    "MATERN52",
    "Kernel",
    "GpModel",
    "JacobianPosterior",
    "kernel_eval",
    "make_model",
    "posterior_mean_var",
    "jacobian_posterior_closed_form",
    "jacobian_posterior_discretized",
    "fit_hyperparameters",
    "pca_latents",
    "fit_gplvm",
    "save_model",
    "load_model",
]

RBF = "rbf"
MATERN52 = "matern52"
_FAMILIES = (RBF, MATERN52)

_JITTER0 = 1e-8
_JITTER_ESCALATIONS = 5


@dataclass(frozen=True)
class Kernel:
    """Stationary covariance with one lengthscale and one variance."""

    family: str
    lengthscale: float
    variance: float

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}, expected one of {_FAMILIES}")
        if self.lengthscale <= 0.0 or self.variance <= 0.0:
            raise ValueError("lengthscale and variance must be positive")


@dataclass(frozen=True, eq=False)
class JacobianPosterior:
    """Posterior law of the Jacobian at one latent point.

    mean: D x q matrix of derivative predictive means
    cov: q x q derivative covariance, shared by all D output rows
         (symmetrized, negative eigenvalues clamped to zero)
    dim_data: D
    """

    mean: np.ndarray
    cov: np.ndarray
    dim_data: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 2:
            raise ValueError("mean must be a D x q matrix")
        q = mean.shape[1]
        if cov.shape != (q, q):
            raise ValueError("cov must be q x q")
        if self.dim_data != mean.shape[0]:
            raise ValueError("dim_data must equal the row count of mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _clamp_psd(cov))

    @property
    def dim_latent(self) -> int:
        return self.mean.shape[1]


def _clamp_psd(cov: np.ndarray) -> np.ndarray:
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] >= 0.0:
        return sym
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T


def _clamp_psd_batch(covs: np.ndarray) -> np.ndarray:
    sym = 0.5 * (covs + np.swapaxes(covs, -1, -2))
    vals, vecs = np.linalg.eigh(sym)
    if np.all(vals[..., 0] >= 0.0):
        return sym
    vals = np.clip(vals, 0.0, None)
    return np.einsum("...ij,...j,...kj->...ik", vecs, vals, vecs)


# ---------------------------------------------------------------------------
# kernel algebra


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("nmq,nmq->nm", diff, diff)


def _kernel_matrix(k: Kernel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    r2 = _sqdist(a, b)
    if k.family == RBF:
        return k.variance * np.exp(-0.5 * r2 / k.lengthscale**2)
    u = math.sqrt(5.0) / k.lengthscale
    r = np.sqrt(r2)
    return k.variance * (1.0 + u * r + (u * r) ** 2 / 3.0) * np.exp(-u * r)


def _kernel_grad_first(k: Kernel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient of k(z1, z2) in z1, for all pairs: shape (n, m, q)."""
    diff = a[:, None, :] - b[None, :, :]
    r2 = np.einsum("nmq,nmq->nm", diff, diff)
    if k.family == RBF:
        c = -(k.variance / k.lengthscale**2) * np.exp(-0.5 * r2 / k.lengthscale**2)
    else:
        u = math.sqrt(5.0) / k.lengthscale
        r = np.sqrt(r2)
        c = -(k.variance * u**2 / 3.0) * (1.0 + u * r) * np.exp(-u * r)
    return c[:, :, None] * diff


def _prior_derivative_cov(k: Kernel, q: int) -> np.ndarray:
    """Cross derivative of k in both arguments at coincident points, q x q."""
    if k.family == RBF:
        return (k.variance / k.lengthscale**2) * np.eye(q)
    return (5.0 * k.variance / (3.0 * k.lengthscale**2)) * np.eye(q)


def kernel_eval(k: Kernel, z1: np.ndarray, z2: np.ndarray) -> float:
    """Covariance between function values at two latent points."""
    z1 = np.atleast_2d(np.asarray(z1, dtype=float))
    z2 = np.atleast_2d(np.asarray(z2, dtype=float))
    return float(_kernel_matrix(k, z1, z2)[0, 0])


# ---------------------------------------------------------------------------
# model construction


@dataclass(frozen=True, eq=False)
class GpModel:
    """Fitted GP regressor from latent space to data space.

    Immutable after construction; chol is the lower Cholesky factor of
    K(X, X) + noise I and alpha the cached solve against the centered
    outputs, so predictions never refactorize.
    """

    kernel: Kernel
    noise: float
    latent_inputs: np.ndarray
    outputs: np.ndarray
    output_means: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray

    @property
    def dim_latent(self) -> int:
        return self.latent_inputs.shape[1]

    @property
    def dim_data(self) -> int:
        return self.outputs.shape[1]

    @property
    def latent_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.latent_inputs.min(axis=0), self.latent_inputs.max(axis=0)


def _finite_cholesky(kmat: np.ndarray) -> np.ndarray | None:
    # LAPACK can report success yet emit non-finite factors (NaN/inf input);
    # treat those as failures so they reach the jitter ladder
    try:
        chol = np.linalg.cholesky(kmat)
    except np.linalg.LinAlgError:
        return None
    return chol if np.all(np.isfinite(chol)) else None


def _robust_cholesky(gram: np.ndarray, noise: float, variance: float) -> np.ndarray:
    kmat = gram + noise * np.eye(len(gram))
    chol = _finite_cholesky(kmat)
    if chol is not None:
        return chol
    # jitter ladder: 1e-8 * variance, escalated tenfold at most five times
    jitter = _JITTER0 * variance
    with np.errstate(invalid="ignore"):
        for _ in range(_JITTER_ESCALATIONS):
            chol = _finite_cholesky(kmat + jitter * np.eye(len(gram)))
            if chol is not None:
                return chol
            jitter *= 10.0
    if math.isfinite(jitter):
        detail = f" even with jitter up to {jitter / 10:.1e}"
    else:
        detail = " (non-finite kernel matrix)"
    raise np.linalg.LinAlgError(f"kernel matrix factorization failed{detail}")


def make_model(X: np.ndarray, Y: np.ndarray, kernel: Kernel, noise: float) -> GpModel:
    """Assemble a GpModel: center outputs, factor the kernel matrix once."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("X must be N x q and Y must be N x D with matching N")
    if X.shape[0] < 2:
        raise ValueError("need at least two training points")
    if noise < 0.0:
        raise ValueError("noise must be nonnegative")
    means = Y.mean(axis=0)
    chol = _robust_cholesky(_kernel_matrix(kernel, X, X), noise, kernel.variance)
    alpha = cho_solve((chol, True), Y - means)
    return GpModel(
        kernel=kernel,
        noise=noise,
        latent_inputs=X,
        outputs=Y,
        output_means=means,
        chol=chol,
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# prediction


def _posterior_mean_var_batch(m: GpModel, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    ks = _kernel_matrix(m.kernel, Z, m.latent_inputs)
    means = m.output_means + ks @ m.alpha
    w = solve_triangular(m.chol, ks.T, lower=True)
    var = np.maximum(m.kernel.variance - np.einsum("ij,ij->j", w, w), 0.0)
    return means, var


def posterior_mean_var(m: GpModel, z: np.ndarray) -> tuple[np.ndarray, float]:
    """Predictive mean (D-vector) and the shared per-output variance at z."""
    means, var = _posterior_mean_var_batch(m, np.asarray(z, dtype=float)[None, :])
    return means[0], float(var[0])


def _jacobian_posterior_batch(m: GpModel, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Derivative posteriors at n points: means (n, D, q), covs (n, q, q)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    n, q = Z.shape
    grads = _kernel_grad_first(m.kernel, Z, m.latent_inputs)  # (n, N, q)
    means = np.einsum("nNq,ND->nDq", grads, m.alpha)
    rhs = grads.transpose(1, 0, 2).reshape(len(m.latent_inputs), n * q)
    w = solve_triangular(m.chol, rhs, lower=True).reshape(len(m.latent_inputs), n, q)
    explained = np.einsum("Nnq,Nnp->nqp", w, w)
    covs = _prior_derivative_cov(m.kernel, q)[None, :, :] - explained
    return means, _clamp_psd_batch(covs)


def jacobian_posterior_closed_form(m: GpModel, z: np.ndarray) -> JacobianPosterior:
    """Jacobian posterior at z via analytic kernel derivatives."""
    means, covs = _jacobian_posterior_batch(m, np.asarray(z, dtype=float)[None, :])
    return JacobianPosterior(mean=means[0], cov=covs[0], dim_data=m.dim_data)


def jacobian_posterior_discretized(m: GpModel, z: np.ndarray, h: float) -> JacobianPosterior:
    """Jacobian posterior at z from forward differences with step h.

    Uses the joint predictive covariance of z and the q shifted points
    z + h e_j, so the covariance of the difference quotients is exact for
    the given step rather than a diagonal approximation.
    """
    if h <= 0.0:
        raise ValueError("step h must be positive")
    if h > m.kernel.lengthscale / 10.0:
        warnings.warn(
            f"difference step h={h:g} exceeds a tenth of the lengthscale "
            f"{m.kernel.lengthscale:g}; the Jacobian will be smoothed",
            stacklevel=2,
        )
    z = np.asarray(z, dtype=float)
    q = z.shape[0]
    pts = np.vstack([z[None, :], z[None, :] + h * np.eye(q)])

    ks = _kernel_matrix(m.kernel, pts, m.latent_inputs)
    means = ks @ m.alpha  # centered predictive means, (q+1, D)
    w = solve_triangular(m.chol, ks.T, lower=True)
    joint = _kernel_matrix(m.kernel, pts, pts) - w.T @ w  # (q+1, q+1)

    mean = (means[1:] - means[0]).T / h  # (D, q)
    cov = (joint[1:, 1:] - joint[1:, :1] - joint[:1, 1:] + joint[0, 0]) / h**2
    return JacobianPosterior(mean=mean, cov=cov, dim_data=m.dim_data)


# ---------------------------------------------------------------------------
# fitting


def _log_marginal_and_grad(
    X: np.ndarray, Yc: np.ndarray, kernel: Kernel, noise: float
) -> tuple[float, np.ndarray]:
    n, d = Yc.shape
    gram = _kernel_matrix(kernel, X, X)
    chol = _robust_cholesky(gram, noise, kernel.variance)
    alpha = cho_solve((chol, True), Yc)
    lml = (
        -0.5 * float(np.sum(Yc * alpha))
        - d * float(np.sum(np.log(np.diag(chol))))
        - 0.5 * n * d * math.log(2.0 * math.pi)
    )

    kinv = cho_solve((chol, True), np.eye(n))
    mmat = alpha @ alpha.T - d * kinv

    r2 = _sqdist(X, X)
    if kernel.family == RBF:
        dk_dlog_ell = gram * r2 / kernel.lengthscale**2
    else:
        u = math.sqrt(5.0) / kernel.lengthscale
        r = np.sqrt(r2)
        dk_dlog_ell = (kernel.variance * u**2 / 3.0) * r2 * (1.0 + u * r) * np.exp(-u * r)
    grad = np.array(
        [
            0.5 * float(np.sum(mmat * dk_dlog_ell)),
            0.5 * float(np.sum(mmat * gram)),
            0.5 * noise * float(np.trace(mmat)),
        ]
    )
    return lml, grad


def fit_hyperparameters(
    X: np.ndarray,
    Y: np.ndarray,
    k0: Kernel,
    noise0: float,
    steps: int = 200,
    lr: float = 0.05,
) -> GpModel:
    """Maximize the log marginal likelihood over kernel and noise.

    Adam ascent on (log lengthscale, log variance, log noise); the returned
    model carries the best parameters seen, so its likelihood is never below
    the initial one. steps=0 returns the initial hyperparameters unchanged.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if steps == 0:
        return make_model(X, Y, k0, noise0)
    Yc = Y - Y.mean(axis=0)

    theta = np.log(np.array([k0.lengthscale, k0.variance, max(noise0, 1e-12)]))
    best_theta = theta.copy()
    best_lml = -np.inf
    m1 = np.zeros(3)
    m2 = np.zeros(3)
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    for step in range(steps + 1):
        ell, var, noise = np.exp(theta)
        lml, grad = _log_marginal_and_grad(X, Yc, Kernel(k0.family, ell, var), noise)
        if lml > best_lml:
            best_lml = lml
            best_theta = theta.copy()
        if step == steps:
            break
        m1 = beta1 * m1 + (1.0 - beta1) * grad
        m2 = beta2 * m2 + (1.0 - beta2) * grad**2
        m1_hat = m1 / (1.0 - beta1 ** (step + 1))
        m2_hat = m2 / (1.0 - beta2 ** (step + 1))
        theta = theta + lr * m1_hat / (np.sqrt(m2_hat) + eps)

    ell, var, noise = np.exp(best_theta)
    return make_model(X, Y, Kernel(k0.family, ell, var), noise)


def pca_latents(Y: np.ndarray, q: int) -> np.ndarray:
    """Deterministic PCA initialization of latent coordinates.

    Projects centered outputs onto the top q principal directions and
    rescales each coordinate to unit variance. Column signs are fixed by
    making the largest-magnitude loading positive, so the result does not
    depend on the SVD's sign convention.
    """
    Y = np.asarray(Y, dtype=float)
    yc = Y - Y.mean(axis=0)
    u, s, _ = np.linalg.svd(yc, full_matrices=False)
    x = u[:, :q] * s[:q]
    for j in range(x.shape[1]):
        i = np.argmax(np.abs(x[:, j]))
        if x[i, j] < 0:
            x[:, j] = -x[:, j]
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    return x / std


def _latent_gradient(X: np.ndarray, mmat: np.ndarray, kernel: Kernel) -> np.ndarray:
    # d lml / d x_n = sum_m M[n, m] * grad_z1 k(x_n, x_m), using symmetry of M
    diff = X[:, None, :] - X[None, :, :]
    r2 = np.einsum("nmq,nmq->nm", diff, diff)
    if kernel.family == RBF:
        c = -(kernel.variance / kernel.lengthscale**2) * np.exp(-0.5 * r2 / kernel.lengthscale**2)
    else:
        u = math.sqrt(5.0) / kernel.lengthscale
        r = np.sqrt(r2)
        c = -(kernel.variance * u**2 / 3.0) * (1.0 + u * r) * np.exp(-u * r)
    w = mmat * c
    np.fill_diagonal(w, 0.0)
    return w.sum(axis=1)[:, None] * X - w @ X


def fit_gplvm(
    Y: np.ndarray,
    q: int,
    k0: Kernel,
    noise0: float,
    steps: int = 200,
    lr: float = 0.05,
    optimize_latents: bool = False,
) -> GpModel:
    """Fit a latent-variable model: PCA latents, then hyperparameters.

    With optimize_latents the latent coordinates are moved jointly with the
    hyperparameters by Adam ascent on the posterior (marginal likelihood
    plus a standard normal prior on the latents); by default they stay at
    the PCA initialization so fits are exactly reproducible.
    """
    Y = np.asarray(Y, dtype=float)
    X = pca_latents(Y, q)
    if not optimize_latents or steps == 0:
        return fit_hyperparameters(X, Y, k0, noise0, steps=steps, lr=lr)

    Yc = Y - Y.mean(axis=0)
    n, d = Yc.shape
    theta = np.log(np.array([k0.lengthscale, k0.variance, max(noise0, 1e-12)]))
    best = (-np.inf, theta.copy(), X.copy())
    mt = np.zeros(3)
    vt = np.zeros(3)
    mx = np.zeros_like(X)
    vx = np.zeros_like(X)
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    for step in range(steps + 1):
        ell, var, noise = np.exp(theta)
        kernel = Kernel(k0.family, ell, var)
        lml, grad = _log_marginal_and_grad(X, Yc, kernel, noise)
        objective = lml - 0.5 * float(np.sum(X * X))
        if objective > best[0]:
            best = (objective, theta.copy(), X.copy())
        if step == steps:
            break
        gram = _kernel_matrix(kernel, X, X)
        chol = _robust_cholesky(gram, noise, var)
        alpha = cho_solve((chol, True), Yc)
        mmat = alpha @ alpha.T - d * cho_solve((chol, True), np.eye(n))
        gx = _latent_gradient(X, mmat, kernel) - X

        mt = beta1 * mt + (1.0 - beta1) * grad
        vt = beta2 * vt + (1.0 - beta2) * grad**2
        theta = theta + lr * (mt / (1.0 - beta1 ** (step + 1))) / (
            np.sqrt(vt / (1.0 - beta2 ** (step + 1))) + eps
        )
        mx = beta1 * mx + (1.0 - beta1) * gx
        vx = beta2 * vx + (1.0 - beta2) * gx**2
        X = X + lr * (mx / (1.0 - beta1 ** (step + 1))) / (
            np.sqrt(vx / (1.0 - beta2 ** (step + 1))) + eps
        )

    _, theta, X = best
    ell, var, noise = np.exp(theta)
    return make_model(X, Y, Kernel(k0.family, ell, var), noise)


def log_marginal_likelihood(m: GpModel) -> float:
    """Log marginal likelihood of the model's own training data, from the
    cached factorization."""
    yc = m.outputs - m.output_means
    n, d = yc.shape
    return (
        -0.5 * float(np.sum(yc * m.alpha))
        - d * float(np.sum(np.log(np.diag(m.chol))))
        - 0.5 * n * d * math.log(2.0 * math.pi)
    )


# ---------------------------------------------------------------------------
# persistence


def save_model(m: GpModel, path: str) -> None:
    """Write the model as JSON (matrices row-major, full double precision)."""
    doc = {
        "kernel": {
            "family": m.kernel.family,
            "lengthscale": m.kernel.lengthscale,
            "variance": m.kernel.variance,
        },
        "noise": m.noise,
        "latent_inputs": m.latent_inputs.tolist(),
        "outputs": m.outputs.tolist(),
        "output_means": m.output_means.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> GpModel:
    """Rebuild a model from JSON; the Cholesky factor is recomputed."""
    with open(path) as fh:
        doc = json.load(fh)
    kernel = Kernel(
        family=doc["kernel"]["family"],
        lengthscale=float(doc["kernel"]["lengthscale"]),
        variance=float(doc["kernel"]["variance"]),
    )
    return make_model(
        np.asarray(doc["latent_inputs"], dtype=float),
        np.asarray(doc["outputs"], dtype=float),
        kernel,
        float(doc["noise"]),
    )
