"""Indicatrices and volume measures on 2-D latent spaces.

The indicatrix at a point is the unit ball boundary {v : norm(v) = 1}; by
1-homogeneity its polar radius is exactly 1/norm(e(theta)), so no contour
extraction is needed. Volumes follow the unit-ball-ratio convention
pi / area(indicatrix), evaluated with polygonal polar quadrature; for the
expected-norm (Riemannian) metric this reproduces sqrt(det E[G]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import write_csv
from .fields import as_field
from .gp import JacobianPosterior
from .metric import (
    MetricPoint,
    alpha_sigma_norm,
    finsler_norm,
    omega,
    riemannian_norm,
)

__all__ = [
    "Indicatrix",
    "VolumeField",
    "indicatrix",
    "bh_volume",
    "volume_field",
    "volume_ratio_bound",
    "export_indicatrix_csv",
    "export_volume_field_csv",
]

PLOT_ANGLES = 64
QUADRATURE_ANGLES = 256

_NORMS = {
    "riemann": riemannian_norm,
    "finsler": finsler_norm,
    "alpha_sigma": alpha_sigma_norm,
    "euclid": lambda p, v: float(np.linalg.norm(v)),
}


def _unit_directions(K: int) -> np.ndarray:
    """K unit vectors at angles 2*pi*k/K. For even K the second half is the
    exact negation of the first, so evenness of a norm shows up as exact
    equality of opposite radii."""
    half = K // 2
    angles = 2.0 * math.pi * np.arange(half if K % 2 == 0 else K) / K
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    if K % 2 == 0:
        dirs = np.vstack([dirs, -dirs])
    return dirs


@dataclass(frozen=True, eq=False)
class Indicatrix:
    """Polar sampling of a unit ball boundary at one latent point."""

    center: np.ndarray
    angles: np.ndarray
    radii: np.ndarray
    metric_kind: str

    def is_convex(self, slack: float = 1e-8) -> bool:
        """Cross-product sign test on the sampled polygon (CCW traversal)."""
        pts = self.radii[:, None] * _unit_directions(len(self.radii))
        e = np.roll(pts, -1, axis=0) - pts
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        norms = np.linalg.norm(e, axis=1)
        scale = norms * np.roll(norms, -1)
        return bool(np.all(cross >= -slack * np.maximum(scale, 1e-300)))

    @property
    def area(self) -> float:
        r = self.radii
        step = 2.0 * math.pi / len(r)
        return float(0.5 * math.sin(step) * np.sum(r * np.roll(r, -1)))


@dataclass(frozen=True, eq=False)
class VolumeField:
    """Per-grid-point volumes of the three metrics and their relative gap."""

    grid_points: np.ndarray
    v_riemann: np.ndarray
    v_finsler: np.ndarray
    v_alpha_sigma: np.ndarray
    ratio: np.ndarray
    ratio_bound: np.ndarray


def _as_metric_point(p) -> MetricPoint:
    if isinstance(p, MetricPoint):
        return p
    if isinstance(p, JacobianPosterior):
        return MetricPoint(p)
    raise TypeError("expected a MetricPoint or JacobianPosterior")


def indicatrix(p, K: int = PLOT_ANGLES, metric_kind: str = "finsler") -> Indicatrix:
    """Unit-ball boundary radii r(theta) = 1/norm(e(theta)) at K angles."""
    p = _as_metric_point(p)
    if p.dim_latent != 2:
        raise ValueError("indicatrices are only defined for 2-d latent spaces")
    if K < 16:
        raise ValueError("need at least 16 angles")
    if metric_kind not in _NORMS:
        raise ValueError(f"unknown metric kind {metric_kind!r}")
    norm = _NORMS[metric_kind]
    values = np.array([norm(p, d) for d in _unit_directions(K)])
    if not (np.all(np.isfinite(values)) and np.all(values > 0.0)):
        raise ValueError("metric is degenerate along a sampled direction")
    return Indicatrix(
        center=np.zeros(2),
        angles=2.0 * math.pi * np.arange(K) / K,
        radii=1.0 / values,
        metric_kind=metric_kind,
    )


def bh_volume(p, K: int = QUADRATURE_ANGLES, metric_kind: str = "finsler") -> float:
    """Unit-ball-ratio volume pi / area of the indicatrix polygon."""
    return math.pi / indicatrix(p, K, metric_kind).area


def _norm_gap_bound(d: int, w: float) -> float:
    """Per-direction bound on (riemann - finsler) / riemann; decreasing in w."""
    if math.isinf(w):
        return 0.0
    return 1.0 / (d + w) + w / (d + w) ** 2


def volume_ratio_bound(p, K: int = QUADRATURE_ANGLES) -> float:
    """Upper bound on the volume ratio (v_r - v_f) / v_r for the K-angle
    quadrature volumes.

    With M the largest per-direction norm gap bound over the sampled
    directions, every sampled radius satisfies r_f <= r_r / (1 - M), so the
    finsler polygon area is at most area_r / (1 - M)**2 and the volume ratio
    is at most 1 - (1 - M)**2.
    """
    p = _as_metric_point(p)
    m = max(_norm_gap_bound(p.dim_data, omega(p, d)) for d in _unit_directions(K))
    return 1.0 - (1.0 - m) ** 2


def volume_field(m, grid: int = 32, K: int = QUADRATURE_ANGLES) -> VolumeField:
    """All three volumes and the relative gap over a latent lattice.

    The lattice covers the latent bounding box plus a 10% margin. All
    volumes use the same polar quadrature, so the shared discretization
    bias cancels in the ratio and the pointwise orderings are exact.
    """
    field = as_field(m)
    if field.latent_dim != 2:
        raise ValueError("volume fields are only defined for 2-d latent spaces")
    if grid < 2:
        raise ValueError("grid must be at least 2")
    lo, hi = field.latent_box()
    span = hi - lo
    lo = lo - 0.1 * span
    hi = hi + 0.1 * span
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    pts = np.array([[x, y] for x in xs for y in ys])
    means, covs = field.jacobian_batch(pts)

    n = len(pts)
    v_r = np.empty(n)
    v_f = np.empty(n)
    v_a = np.empty(n)
    bound = np.empty(n)
    for i in range(n):
        p = MetricPoint(JacobianPosterior(mean=means[i], cov=covs[i], dim_data=field.data_dim))
        v_r[i] = bh_volume(p, K, "riemann")
        v_f[i] = bh_volume(p, K, "finsler")
        v_a[i] = bh_volume(p, K, "alpha_sigma")
        bound[i] = volume_ratio_bound(p, K)
    ratio = (v_r - v_f) / v_r
    return VolumeField(
        grid_points=pts,
        v_riemann=v_r,
        v_finsler=v_f,
        v_alpha_sigma=v_a,
        ratio=ratio,
        ratio_bound=bound,
    )


# ---------------------------------------------------------------------------
# export


def _log10_floor(x: np.ndarray, floor: float = 1e-16) -> np.ndarray:
    return np.log10(np.maximum(x, floor))


def export_volume_field_csv(path: str, vf: VolumeField) -> None:
    header = [
        "z1",
        "z2",
        "v_riemann",
        "v_finsler",
        "v_alpha_sigma",
        "ratio",
        "log10_v_riemann",
        "log10_v_finsler",
        "log10_v_alpha_sigma",
        "log10_ratio",
    ]
    rows = zip(
        vf.grid_points[:, 0],
        vf.grid_points[:, 1],
        vf.v_riemann,
        vf.v_finsler,
        vf.v_alpha_sigma,
        vf.ratio,
        _log10_floor(vf.v_riemann),
        _log10_floor(vf.v_finsler),
        _log10_floor(vf.v_alpha_sigma),
        _log10_floor(vf.ratio),
    )
    write_csv(path, rows, header=header)


def export_indicatrix_csv(path: str, indicatrices: list[Indicatrix]) -> None:
    """One CSV row per angle with a radius column per metric kind."""
    if not indicatrices:
        raise ValueError("need at least one indicatrix")
    if len(set(len(ind.angles) for ind in indicatrices)) != 1:
        raise ValueError("indicatrices must share the angle grid")
    header = ["theta"] + [f"r_{ind.metric_kind}" for ind in indicatrices]
    cols = [indicatrices[0].angles] + [ind.radii for ind in indicatrices]
    write_csv(path, zip(*cols), header=header)
