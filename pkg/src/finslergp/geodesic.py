"""Discrete curves and geodesics under the expected-norm metrics.

Curves are piecewise linear with a uniform parameter grid on [0, 1]; a
curve of N points has N-1 segments, velocity (p[i+1]-p[i])*(N-1) on each,
and all metric quantities evaluated at segment midpoints (second-order
quadrature). Geodesics come from gradient descent on the discretized
energy with Armijo backtracking, optionally seeded by a shortest path on
an 8-connected latent grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .data import write_csv
from .fields import as_field
from .metric import DETERMINISTIC_SIGMA, alpha_coefficient
from .specfun import kummer_1f1, kummer_1f1_derivative, log_gamma_ratio

__all__ = [
    "METRIC_KINDS",
    "DiscreteCurve",
    "GeodesicResult",
    "line_curve",
    "resample_curve",
    "curve_energy",
    "energy_riemannian",
    "energy_finsler",
    "curve_length",
    "energy_gradient",
    "energy_gradient_fd",
    "grid_initialize",
    "minimize_energy",
    "geodesic_between",
    "export_curve_csv",
]

RIEMANN = "riemann"
FINSLER = "finsler"
EUCLID = "euclid"
ALPHA_SIGMA = "alpha_sigma"
METRIC_KINDS = (RIEMANN, FINSLER, EUCLID, ALPHA_SIGMA)

_ARMIJO_C = 1e-4
_ARMIJO_SHRINK = 0.5
_FD_STEP = 1e-5
_CONVERGED_STREAK = 10


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Piecewise-linear curve on a uniform parameter grid.

    Endpoints are fixed by convention: optimizers only ever move the
    interior through with_interior, which re-attaches the original ends.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 3:
            raise ValueError("a curve needs at least three points (N x q)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("curve points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def velocities(self) -> np.ndarray:
        """Per-segment velocity (p[i+1] - p[i]) * (N - 1), shape (N-1, q)."""
        return np.diff(self.points, axis=0) * (self.n_points - 1)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.points[:-1] + self.points[1:])

    def with_interior(self, interior: np.ndarray) -> "DiscreteCurve":
        pts = np.empty_like(self.points)
        pts[0] = self.points[0]
        pts[-1] = self.points[-1]
        pts[1:-1] = interior
        return DiscreteCurve(pts)


@dataclass(frozen=True, eq=False)
class GeodesicResult:
    curve: DiscreteCurve
    energy: float
    length: float
    metric_kind: str
    iterations: int
    converged: bool


def line_curve(start: np.ndarray, end: np.ndarray, n_points: int) -> DiscreteCurve:
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    t = np.linspace(0.0, 1.0, n_points)[:, None]
    return DiscreteCurve((1.0 - t) * start + t * end)


def _resample_polyline(pts: np.ndarray, n: int) -> np.ndarray:
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.repeat(pts[:1], n, axis=0)
    t = np.linspace(0.0, s[-1], n)
    out = np.empty((n, pts.shape[1]))
    for j in range(pts.shape[1]):
        out[:, j] = np.interp(t, s, pts[:, j])
    return out


def resample_curve(c: DiscreteCurve, n_points: int) -> DiscreteCurve:
    """Same geometric path, re-marked at n_points by Euclidean arc length."""
    return DiscreteCurve(_resample_polyline(c.points, n_points))


# ---------------------------------------------------------------------------
# segment norms


def _check_kind(kind: str) -> None:
    if kind not in METRIC_KINDS:
        raise ValueError(f"unknown metric kind {kind!r}, expected one of {METRIC_KINDS}")


def _segment_norms_sq(field, mids: np.ndarray, vels: np.ndarray, kind: str) -> np.ndarray:
    """Squared metric norm of each velocity, evaluated at its midpoint."""
    if kind == EUCLID:
        return np.einsum("nq,nq->n", vels, vels)
    means, covs = field.jacobian_batch(mids)
    d = field.data_dim
    sigma = np.maximum(np.einsum("nq,nqp,np->n", vels, covs, vels), 0.0)
    if kind == ALPHA_SIGMA:
        return alpha_coefficient(d) * sigma
    jv = np.einsum("ndq,nq->nd", means, vels)
    signal = np.einsum("nd,nd->n", jv, jv)
    if kind == RIEMANN:
        return signal + d * sigma
    out = np.empty(len(vels))
    b = 0.5 * d
    c2 = 2.0 * math.exp(2.0 * log_gamma_ratio(b + 0.5, b))
    for i in range(len(vels)):
        if sigma[i] < DETERMINISTIC_SIGMA:
            out[i] = signal[i]
        else:
            out[i] = c2 * sigma[i] * kummer_1f1(-0.5, b, -0.5 * signal[i] / sigma[i]) ** 2
    return out


def _warn_if_outside(field, curve: DiscreteCurve) -> None:
    lo, hi = field.latent_box()
    span = hi - lo
    if np.any(curve.points < lo - 0.1 * span) or np.any(curve.points > hi + 0.1 * span):
        warnings.warn(
            "curve leaves the latent bounding box; the posterior reverts to the prior there",
            stacklevel=3,
        )


def curve_energy(m, c: DiscreteCurve, metric_kind: str) -> float:
    """Discretized energy: sum of squared segment norms times 1/(N-1)."""
    _check_kind(metric_kind)
    field = as_field(m)
    if metric_kind != EUCLID:
        _warn_if_outside(field, c)
    e = _segment_norms_sq(field, c.midpoints, c.velocities, metric_kind)
    return float(np.sum(e)) / (c.n_points - 1)


def energy_riemannian(m, c: DiscreteCurve) -> float:
    return curve_energy(m, c, RIEMANN)


def energy_finsler(m, c: DiscreteCurve) -> float:
    return curve_energy(m, c, FINSLER)


def curve_length(m, c: DiscreteCurve, metric_kind: str) -> float:
    """Discretized length: sum of segment norms times 1/(N-1)."""
    _check_kind(metric_kind)
    field = as_field(m)
    if metric_kind != EUCLID:
        _warn_if_outside(field, c)
    e = _segment_norms_sq(field, c.midpoints, c.velocities, metric_kind)
    return float(np.sum(np.sqrt(e))) / (c.n_points - 1)


# ---------------------------------------------------------------------------
# energy gradient


def _velocity_gradient(field, mids, vels, kind):
    """d(norm^2)/d(velocity) per segment, analytic in v; (n, q)."""
    if kind == EUCLID:
        return 2.0 * vels
    means, covs = field.jacobian_batch(mids)
    d = field.data_dim
    sv = np.einsum("nqp,np->nq", covs, vels)
    if kind == ALPHA_SIGMA:
        return 2.0 * alpha_coefficient(d) * sv
    jv = np.einsum("ndq,nq->nd", means, vels)
    jtjv = np.einsum("ndq,nd->nq", means, jv)
    if kind == RIEMANN:
        return 2.0 * (jtjv + d * sv)
    sigma = np.maximum(np.einsum("nq,nq->n", vels, sv), 0.0)
    signal = np.einsum("nd,nd->n", jv, jv)
    b = 0.5 * d
    c2 = 2.0 * math.exp(2.0 * log_gamma_ratio(b + 0.5, b))
    grad = np.empty_like(vels)
    for i in range(len(vels)):
        if sigma[i] < DETERMINISTIC_SIGMA:
            grad[i] = 2.0 * jtjv[i]
            continue
        w = signal[i] / sigma[i]
        x = -0.5 * w
        h = kummer_1f1(-0.5, b, x)
        hx = kummer_1f1_derivative(-0.5, b, x)  # d 1F1 / dx at x = -w/2
        # norm^2 = c2 sigma h(w)^2 with dh/dw = -hx/2
        grad[i] = 2.0 * c2 * ((h * h + h * hx * w) * sv[i] - h * hx * jtjv[i])
    return grad


def _midpoint_gradient(field, mids, vels, kind, step=_FD_STEP):
    """d(norm^2)/d(midpoint) per segment by central differences; (n, q)."""
    n, q = mids.shape
    out = np.zeros((n, q))
    if kind == EUCLID:
        return out
    for j in range(q):
        e = np.zeros(q)
        e[j] = step
        plus = _segment_norms_sq(field, mids + e, vels, kind)
        minus = _segment_norms_sq(field, mids - e, vels, kind)
        out[:, j] = (plus - minus) / (2.0 * step)
    return out


def energy_gradient(m, c: DiscreteCurve, metric_kind: str, step: float = _FD_STEP) -> np.ndarray:
    """Energy gradient at the interior points, shape (N-2, q).

    Velocity dependence is differentiated analytically (including the
    hypergeometric factor); the midpoint dependence of the Jacobian
    posterior is differenced centrally with the given step.
    """
    _check_kind(metric_kind)
    field = as_field(m)
    mids, vels = c.midpoints, c.velocities
    dv = _velocity_gradient(field, mids, vels, metric_kind)
    dz = _midpoint_gradient(field, mids, vels, metric_kind, step)
    n1 = c.n_points - 1
    return (0.5 * (dz[:-1] + dz[1:]) + n1 * (dv[:-1] - dv[1:])) / n1


def energy_gradient_fd(m, c: DiscreteCurve, metric_kind: str, step: float = _FD_STEP) -> np.ndarray:
    """All-finite-difference energy gradient; the slow reference path."""
    _check_kind(metric_kind)
    field = as_field(m)
    n, q = c.points.shape
    grad = np.empty((n - 2, q))
    for k in range(1, n - 1):
        for j in range(q):
            plus = c.points.copy()
            plus[k, j] += step
            minus = c.points.copy()
            minus[k, j] -= step
            ep = _segment_norms_sq(field, *_mv(plus), metric_kind).sum() / (n - 1)
            em = _segment_norms_sq(field, *_mv(minus), metric_kind).sum() / (n - 1)
            grad[k - 1, j] = (ep - em) / (2.0 * step)
    return grad


def _mv(pts):
    return 0.5 * (pts[:-1] + pts[1:]), np.diff(pts, axis=0) * (len(pts) - 1)


# ---------------------------------------------------------------------------
# initialization


def grid_initialize(
    m,
    start: np.ndarray,
    end: np.ndarray,
    grid: int = 10,
    metric_kind: str = RIEMANN,
    n_points: int = 64,
) -> DiscreteCurve:
    """Shortest path on an 8-connected latent grid, resampled to n_points.

    The grid covers the latent bounding box plus a 10% margin on each side;
    edge weights are segment lengths under the chosen metric, evaluated at
    edge midpoints.
    """
    _check_kind(metric_kind)
    field = as_field(m)
    if field.latent_dim != 2:
        raise ValueError("grid initialization requires a 2-d latent space")
    if grid < 2:
        raise ValueError("grid must be at least 2")
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    lo, hi = field.latent_box()
    span = hi - lo
    lo = lo - 0.1 * span
    hi = hi + 0.1 * span
    for z, name in ((start, "start"), (end, "end")):
        if np.any(z < lo) or np.any(z > hi):
            raise ValueError(f"{name} point {z} outside the grid box [{lo}, {hi}]")

    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    nodes = np.array([[x, y] for x in xs for y in ys])

    us, vs = [], []
    for ix in range(grid):
        for iy in range(grid):
            u = ix * grid + iy
            for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
                jx, jy = ix + dx, iy + dy
                if 0 <= jx < grid and 0 <= jy < grid:
                    us.append(u)
                    vs.append(jx * grid + jy)
    us = np.array(us)
    vs = np.array(vs)
    mids = 0.5 * (nodes[us] + nodes[vs])
    deltas = nodes[vs] - nodes[us]
    weights = np.sqrt(_segment_norms_sq(field, mids, deltas, metric_kind))
    # strictly positive weights keep degenerate-metric regions traversable
    weights = np.maximum(weights, 1e-12)

    graph = csr_matrix((weights, (us, vs)), shape=(grid * grid, grid * grid))
    i_start = int(np.argmin(np.sum((nodes - start) ** 2, axis=1)))
    i_end = int(np.argmin(np.sum((nodes - end) ** 2, axis=1)))
    _, pred = dijkstra(
        graph, directed=False, indices=i_start, return_predecessors=True
    )
    path = [i_end]
    while path[-1] != i_start:
        prev = pred[path[-1]]
        if prev < 0:
            raise RuntimeError("grid path search failed on a connected grid")
        path.append(int(prev))
    poly = [start] + [nodes[i] for i in reversed(path)] + [end]
    pts = [poly[0]]
    for p in poly[1:]:
        if np.linalg.norm(p - pts[-1]) > 1e-12:
            pts.append(p)
    if len(pts) < 2:
        pts = [start, end]
    return DiscreteCurve(_resample_polyline(np.array(pts), n_points))


# ---------------------------------------------------------------------------
# optimization


def minimize_energy(
    m,
    init: DiscreteCurve,
    metric_kind: str = RIEMANN,
    max_iter: int = 500,
    tol: float = 1e-8,
    on_step=None,
) -> GeodesicResult:
    """Gradient descent on the curve energy with Armijo backtracking.

    Interior points move along the negative energy gradient; each step is
    shrunk by half until the Armijo condition (c = 1e-4) holds, so accepted
    energies never increase. Convergence is declared after 10 consecutive
    iterations with relative energy change below tol; hitting max_iter
    first returns the best curve with converged=False.
    """
    _check_kind(metric_kind)
    field = as_field(m)
    cur = DiscreteCurve(np.array(init.points, dtype=float))
    energy = _segment_norms_sq(field, cur.midpoints, cur.velocities, metric_kind).sum()
    energy /= cur.n_points - 1
    trial = None
    prev_interior = None
    prev_grad = None
    streak = 0
    iterations = 0
    converged = False

    for it in range(max_iter):
        grad = energy_gradient(field, cur, metric_kind)
        gnorm2 = float(np.sum(grad * grad))
        if gnorm2 == 0.0:
            converged = True
            break
        if prev_grad is not None:
            s = (cur.points[1:-1] - prev_interior).ravel()
            y = (grad - prev_grad).ravel()
            sy = float(s @ y)
            if sy > 1e-300:
                trial = float(s @ s) / sy
        if trial is None:
            scale = 1.0 + float(np.max(np.abs(cur.points)))
            trial = 0.01 * scale / math.sqrt(gnorm2)
        trial = float(np.clip(trial, 1e-18, 1e12))
        prev_interior = cur.points[1:-1].copy()
        prev_grad = grad

        step = trial
        accepted = False
        for _ in range(60):
            cand = cur.with_interior(prev_interior - step * grad)
            e_new = _segment_norms_sq(
                field, cand.midpoints, cand.velocities, metric_kind
            ).sum() / (cand.n_points - 1)
            if e_new <= energy - _ARMIJO_C * step * gnorm2:
                accepted = True
                break
            step *= _ARMIJO_SHRINK
        iterations = it + 1
        if not accepted:
            # no decrease at machine scale: numerically stationary
            converged = True
            break
        rel = abs(energy - e_new) / max(energy, 1e-300)
        cur, energy = cand, e_new
        trial = 2.0 * step
        if on_step is not None:
            on_step(energy)
        streak = streak + 1 if rel < tol else 0
        if streak >= _CONVERGED_STREAK:
            converged = True
            break

    return GeodesicResult(
        curve=cur,
        energy=float(energy),
        length=curve_length(field, cur, metric_kind),
        metric_kind=metric_kind,
        iterations=iterations,
        converged=converged,
    )


def geodesic_between(
    m,
    start: np.ndarray,
    end: np.ndarray,
    metric_kind: str = RIEMANN,
    n_points: int = 64,
    grid: int = 0,
    max_iter: int = 600,
    tol: float = 1e-8,
) -> GeodesicResult:
    """End-to-end geodesic: initialize, then refine coarse-to-fine.

    grid > 0 seeds the curve with a latent-grid shortest path; otherwise a
    straight line. Optimizing at 9/17/33 points before the final resolution
    sidesteps the ill-conditioning of fine discretizations.
    """
    field = as_field(m)
    levels = [n for n in (9, 17, 33) if n < n_points] + [n_points]
    if grid:
        curve = grid_initialize(field, start, end, grid, metric_kind, levels[0])
    else:
        curve = line_curve(start, end, levels[0])
    total = 0
    result = None
    for n in levels:
        if n != curve.n_points:
            curve = resample_curve(curve, n)
        result = minimize_energy(field, curve, metric_kind, max_iter=max_iter, tol=tol)
        curve = result.curve
        total += result.iterations
    return GeodesicResult(
        curve=result.curve,
        energy=result.energy,
        length=result.length,
        metric_kind=metric_kind,
        iterations=total,
        converged=result.converged,
    )


# ---------------------------------------------------------------------------
# export


def export_curve_csv(path: str, c: DiscreteCurve, m=None) -> None:
    """Curve as CSV: t, latent coordinates, and decoded means if available."""
    header = ["t"] + [f"z_{j + 1}" for j in range(c.dim)]
    t = np.linspace(0.0, 1.0, c.n_points)
    cols = [t, *c.points.T]
    if m is not None:
        field = as_field(m)
        if hasattr(field, "decode"):
            if hasattr(field, "decode_batch"):
                decoded = field.decode_batch(c.points)
            else:
                decoded = np.array([field.decode(z) for z in c.points])
            header += [f"f_{j + 1}" for j in range(decoded.shape[1])]
            cols += list(decoded.T)
    write_csv(path, zip(*cols), header=header)
