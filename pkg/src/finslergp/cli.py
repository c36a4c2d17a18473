"""Command-line interface: generate data, fit models, compute geodesics,
indicatrices and volume fields, and run the verification sweeps.

Every command is deterministic given its full flag set (seeds included) and
writes a JSON sidecar with the resolved configuration next to each output,
so reruns are byte-identical and self-describing. Exit codes: 0 success,
1 verification or numerical-convergence failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .data import (
    ParseError,
    gen_circles_sphere,
    gen_pinwheel_sphere,
    load_csv,
    write_dataset,
    write_sidecar,
)
from .experiments import (
    bound_sweep,
    comparison_entries,
    convergence_violations,
    export_comparison_csv,
    export_convergence_csv,
    export_violations_csv,
    make_truncation_ensemble,
    truncation_sweep,
)
from .fields import SphereField, as_field
from .geodesic import export_curve_csv
from .gp import (
    MATERN52,
    RBF,
    Kernel,
    fit_gplvm,
    load_model,
    log_marginal_likelihood,
    save_model,
)
from .measure import export_indicatrix_csv, export_volume_field_csv, indicatrix, volume_field

METRIC_CHOICES = ("riemann", "finsler", "euclid")


def _config(args, command: str, **extra) -> dict:
    cfg = {
        k: v for k, v in vars(args).items() if k != "func" and not k.startswith("_")
    }
    cfg.update(extra)
    cfg["command"] = command
    cfg["version"] = __version__
    return cfg


def _load_field(spec: str):
    """A model file path, or the literal name 'sphere' for the analytic
    deterministic sphere chart."""
    if spec == "sphere":
        return SphereField()
    return load_model(spec)


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(c) for c in text.split(",")], dtype=float)
    except ValueError:
        raise ValueError(f"expected comma-separated coordinates, got {text!r}")


def _read_pairs(path: str) -> list[tuple[np.ndarray, np.ndarray]]:
    """Endpoint pairs, one per row: start coordinates then end coordinates."""
    pairs = []
    with open(path, newline="") as fh:
        for i, cells in enumerate(csv.reader(fh)):
            if not cells:
                continue
            try:
                row = np.array([float(c) for c in cells], dtype=float)
            except ValueError:
                if i == 0:
                    continue  # header row
                raise ParseError(f"non-numeric endpoint in {path} row {i + 1}")
            if row.size % 2 != 0:
                raise ParseError(f"odd coordinate count in {path} row {i + 1}")
            half = row.size // 2
            pairs.append((row[:half], row[half:]))
    if not pairs:
        raise ParseError(f"no endpoint pairs in {path}")
    return pairs


def _parse_dims(text: str) -> list[int]:
    """Either an explicit comma list '2,4,8' or 'lo:hi:dyadic' for the
    doubling grid lo, 2*lo, 4*lo, ..., capped at hi."""
    if text.endswith(":dyadic"):
        lo_hi = text.split(":")
        if len(lo_hi) != 3:
            raise ValueError(f"expected lo:hi:dyadic, got {text!r}")
        lo, hi = int(lo_hi[0]), int(lo_hi[1])
        if lo < 1 or hi < lo:
            raise ValueError(f"need 1 <= lo <= hi in {text!r}")
        dims = []
        d = lo
        while d <= hi:
            dims.append(d)
            d *= 2
        return dims
    return [int(c) for c in text.split(",")]


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    if args.shape == "pinwheel":
        ds = gen_pinwheel_sphere(n=args.n, arms=args.arms, noise=args.noise, seed=args.seed)
    else:
        radii = tuple(float(r) for r in args.radii.split(","))
        ds = gen_circles_sphere(n=args.n, radii=radii, noise=args.noise, seed=args.seed)
    write_dataset(args.out, ds)
    write_sidecar(
        args.out,
        _config(args, f"generate {args.shape}", labels=True, name=ds.name,
                provenance=ds.provenance),
    )
    print(f"wrote {ds.points.shape[0]} x {ds.points.shape[1]} points to {args.out}")
    return 0


def _has_labels(args) -> bool:
    if args.labels != "auto":
        return args.labels == "yes"
    sidecar = f"{args.data}.config.json"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            return bool(json.load(fh).get("labels", False))
    return False


def cmd_fit(args) -> int:
    ds = load_csv(args.data, has_labels=_has_labels(args))
    family = RBF if args.kernel == "rbf" else MATERN52
    k0 = Kernel(family, args.lengthscale, args.variance)
    model = fit_gplvm(
        ds.points,
        args.latent_dim,
        k0,
        args.noise,
        steps=args.steps,
        lr=args.lr,
        optimize_latents=args.optimize_latents,
    )
    save_model(model, args.out)
    write_sidecar(args.out, _config(args, "fit", data_provenance=ds.provenance))
    print(f"log marginal likelihood: {log_marginal_likelihood(model):.6f}")
    print(
        f"kernel: {model.kernel.family} lengthscale={model.kernel.lengthscale:.6g} "
        f"variance={model.kernel.variance:.6g} noise={model.noise:.6g}"
    )
    print(f"wrote model to {args.out}")
    return 0


def cmd_geodesic(args) -> int:
    m = _load_field(args.model)
    if args.pairs is not None:
        pairs = _read_pairs(args.pairs)
    elif args.start is not None and args.end is not None:
        pairs = [(_parse_point(args.start), _parse_point(args.end))]
    else:
        raise ValueError("provide --start and --end, or --pairs")
    kinds = METRIC_CHOICES if args.metric is None else (args.metric,)
    entries = comparison_entries(
        m,
        pairs,
        metric_kinds=kinds,
        n_points=args.nc,
        grid=args.grid,
        max_iter=args.max_iter,
        tol=args.tol,
    )
    base, ext = os.path.splitext(args.out)
    for row, curve in entries:
        curve_path = f"{base}_pair{row.pair}_{row.metric_kind}{ext or '.csv'}"
        export_curve_csv(curve_path, curve, m)
    export_comparison_csv(args.out, [row for row, _ in entries])
    write_sidecar(args.out, _config(args, "geodesic"))
    bad = [row for row, _ in entries if not row.converged]
    for row in bad:
        print(f"pair {row.pair} {row.metric_kind}: not converged", file=sys.stderr)
    print(f"wrote {len(entries)} curves and table to {args.out}")
    return 0


def cmd_verify(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    dims = _parse_dims(args.dims)
    report = bound_sweep(n_specs=args.n, seed=args.seed)
    ensemble = make_truncation_ensemble(d_max=dims[-1], seed=args.seed)
    rows = truncation_sweep(ensemble, dims, v_samples=args.v_samples, seed=args.seed)

    counts = dict(report.counts)
    counts.update(convergence_violations(rows, ensemble.m_constant))
    if args.inject_violation:
        counts["injected_self_test"] = 1

    cfg = _config(args, "verify", m_constant=ensemble.m_constant)
    violations_path = os.path.join(args.out, "violations.csv")
    export_violations_csv(violations_path, report)
    write_sidecar(violations_path, cfg)
    convergence_path = os.path.join(args.out, "convergence.csv")
    export_convergence_csv(convergence_path, rows)
    write_sidecar(convergence_path, cfg)

    total = sum(counts.values())
    for name in sorted(counts):
        if counts[name]:
            print(f"VIOLATION {name}: {counts[name]}")
    print(f"checks: {len(counts)}, violations: {total}")
    print(f"wrote {violations_path} and {convergence_path}")
    return 1 if total else 0


def cmd_volume(args) -> int:
    m = _load_field(args.model)
    field = volume_field(m, grid=args.grid, K=args.k)
    export_volume_field_csv(args.out, field)
    write_sidecar(args.out, _config(args, "volume"))
    print(f"wrote {field.grid_points.shape[0]} grid rows to {args.out}")
    return 0


def cmd_indicatrix(args) -> int:
    m = _load_field(args.model)
    center = _parse_point(args.at)
    p = as_field(m).jacobian_posterior(center)
    curves = [indicatrix(p, K=args.k, metric_kind=kind) for kind in
              ("riemann", "finsler", "alpha_sigma")]
    export_indicatrix_csv(args.out, curves)
    write_sidecar(args.out, _config(args, "indicatrix", center=center.tolist()))
    print(f"wrote {args.k} angles at {center.tolist()} to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finslergp",
        description="Expected-Riemannian and Finsler latent-space geometry tools",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="synthetic sphere datasets")
    gen_sub = p_gen.add_subparsers(dest="shape", required=True)
    for shape in ("pinwheel", "circles"):
        p_shape = gen_sub.add_parser(shape)
        p_shape.add_argument("--n", type=int, default=1000)
        p_shape.add_argument("--noise", type=float, default=0.05 if shape == "pinwheel" else 0.03)
        p_shape.add_argument("--seed", type=int, default=0)
        p_shape.add_argument("--out", required=True)
        if shape == "pinwheel":
            p_shape.add_argument("--arms", type=int, default=5)
        else:
            p_shape.add_argument("--radii", default="0.6,1.3")
        p_shape.set_defaults(func=cmd_generate)

    p_fit = sub.add_parser("fit", help="fit a latent-variable GP model")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--kernel", choices=("rbf", "matern52"), default="rbf")
    p_fit.add_argument("--steps", type=int, default=200)
    p_fit.add_argument("--lr", type=float, default=0.05)
    p_fit.add_argument("--noise", type=float, default=0.01)
    p_fit.add_argument("--lengthscale", type=float, default=1.0)
    p_fit.add_argument("--variance", type=float, default=1.0)
    p_fit.add_argument("--latent-dim", type=int, default=2)
    p_fit.add_argument("--optimize-latents", action="store_true")
    p_fit.add_argument("--labels", choices=("auto", "yes", "no"), default="auto")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.set_defaults(func=cmd_fit)

    p_geo = sub.add_parser("geodesic", help="optimize curves between endpoints")
    p_geo.add_argument("--model", required=True, help="model file or 'sphere'")
    p_geo.add_argument("--start", help="comma-separated latent coordinates")
    p_geo.add_argument("--end", help="comma-separated latent coordinates")
    p_geo.add_argument("--pairs", help="CSV of endpoint pairs (start then end per row)")
    p_geo.add_argument("--metric", choices=METRIC_CHOICES, default=None,
                       help="single metric; omitted runs all three")
    p_geo.add_argument("--nc", type=int, default=64, help="curve points")
    p_geo.add_argument("--grid", type=int, default=10, help="grid-initialization resolution")
    p_geo.add_argument("--tol", type=float, default=1e-8)
    p_geo.add_argument("--max-iter", type=int, default=600)
    p_geo.add_argument("--out", required=True, help="comparison table path")
    p_geo.set_defaults(func=cmd_geodesic)

    p_ver = sub.add_parser("verify", help="inequality and convergence sweeps")
    p_ver.add_argument("--n", type=int, default=10_000, help="bound-sweep specs")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--dims", default="2:1024:dyadic")
    p_ver.add_argument("--v-samples", type=int, default=64)
    p_ver.add_argument("--out", default=".", help="output directory")
    p_ver.add_argument("--inject-violation", action="store_true", help=argparse.SUPPRESS)
    p_ver.set_defaults(func=cmd_verify)

    p_vol = sub.add_parser("volume", help="volume-density field on a latent grid")
    p_vol.add_argument("--model", required=True)
    p_vol.add_argument("--grid", type=int, default=32)
    p_vol.add_argument("--k", type=int, default=256, help="quadrature angles")
    p_vol.add_argument("--out", required=True)
    p_vol.set_defaults(func=cmd_volume)

    p_ind = sub.add_parser("indicatrix", help="unit-ball boundaries at a latent point")
    p_ind.add_argument("--model", required=True)
    p_ind.add_argument("--at", required=True, help="comma-separated latent coordinates")
    p_ind.add_argument("--k", type=int, default=64, help="sampled angles")
    p_ind.add_argument("--out", required=True)
    p_ind.set_defaults(func=cmd_indicatrix)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
