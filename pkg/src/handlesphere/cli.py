"""Command-line interface.

Subcommands: pack, mesh, spectrum, limit, capacity, sweep, gamma.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fem, harness, limit as limit_mod
from .capacity import Condenser, capacity_exact, capacity_fem
from .eigen import lowest_eigenpairs, parity_scores
from .fem import GluedMetric, MeasureSpec
from .geometry import HandleProfile
from .mesh import SphereMesh, build_mesh
from .packing import Packing, build_packing
from .relaxed_form import from_handles


def _cmd_pack(args):
    packing = build_packing(args.eta, d=2, seed=args.seed)
    packing.save(args.output)
    print(f"{len(packing.centers)} centers ({2 * len(packing.centers)} "
          f"symmetrized) at separation >= {2 * args.eta:g} -> {args.output}")
    return 0


def _profile_from_args(args):
    return HandleProfile(epsilon=args.epsilon, theta=args.theta,
                         delta0=args.delta0, delta1=args.delta1)


def _cmd_mesh(args):
    packing = Packing.load(args.packing)
    profile = _profile_from_args(args)
    manifold = from_handles(packing, profile)
    mesh = build_mesh(manifold.handles, target_edge=args.target_edge,
                      loop_segments=args.loop_segments)
    mesh.save(args.output)
    print(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles, "
          f"{len(mesh.boundary_loops)} boundary loops, min angle "
          f"{mesh.min_angle():.1f} deg -> {args.output}")
    return 0


def _measure_from_args(args):
    if args.measure == "infinite":
        return MeasureSpec.infinite()
    return MeasureSpec(kind=args.measure, kappa=args.kappa)


def _cmd_spectrum(args):
    mesh = SphereMesh.load(args.mesh)
    profile = _profile_from_args(args)
    centers = np.array([lp.center for lp in mesh.boundary_loops])
    # one handle per antipodal loop pair
    gen = []
    seen = set()
    for k in range(len(mesh.boundary_loops)):
        partner = mesh.loop_partner(k)
        if k not in seen:
            gen.append(centers[k])
            seen.update((k, partner))
    manifold = from_handles(np.array(gen), profile) if gen \
        else from_handles(np.zeros((0, 3)), profile)
    forms = fem.assemble(mesh, GluedMetric(manifold.handles),
                         _measure_from_args(args))
    eig = lowest_eigenpairs(forms, args.k, lam=args.lam)
    parities = parity_scores(forms, eig.vectors)
    sigmas = 1.0 / (args.lam + eig.values)
    with open(args.output, "w") as f:
        f.write("format: 1\n")
        f.write("index,lambda,sigma,parity,residual\n")
        for i in range(args.k):
            f.write(f"{i},{eig.values[i]:.17g},{sigmas[i]:.17g},"
                    f"{parities[i]:.17g},{eig.residuals[i]:.3e}\n")
    print(f"{args.k} eigenvalues -> {args.output}")
    return 0


def _cmd_limit(args):
    spec = limit_mod.limit_spectrum(args.alpha, k=args.k, d=args.d,
                                    convention=args.convention)
    lines = ["format: 1", "ell,parity,value,multiplicity"]
    for e in spec.entries:
        lines.append(f"{e.ell},{e.parity},{e.value:.17g},{e.multiplicity}")
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
        print(f"limit spectrum -> {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_capacity(args):
    c = Condenser(inner_radius=args.r, outer_radius=args.R, d=args.d)
    exact = capacity_exact(c)
    if args.d == 2 and args.fem:
        value = capacity_fem(c, resolution=args.resolution)
        print(f"capacity_fem = {value:.12g} (exact {exact:.12g}, "
              f"rel err {abs(value - exact) / exact:.2e})")
    else:
        print(f"capacity_exact = {exact:.12g}")
    return 0


def _cmd_sweep(args):
    config = harness.SweepConfig.from_file(args.config)
    report = harness.run_sweep(config, log=sys.stderr)
    csv_path = args.output or config.output_csv or "sweep.csv"
    summary_path = args.summary or config.output_summary \
        or csv_path.rsplit(".", 1)[0] + "_summary.txt"
    harness.write_csv(report, csv_path)
    harness.write_summary(report, summary_path)
    print(f"report -> {csv_path}, summary -> {summary_path}")
    if report.fitted.get("s") is not None:
        print(f"fitted shift s = {report.fitted['s']:.4f} "
              f"(alpha_form {report.fitted['alpha_form']:.4f}, "
              f"alpha_paper {report.fitted['alpha_paper']:.4f})")
    return 0


def _cmd_gamma(args):
    config = harness.SweepConfig.from_file(args.config)
    out = harness.gamma_check(config, l_max=args.l_max, log=sys.stderr)
    lines = ["format: 1", "eta,recovery_max_gap,lower_max_gap"]
    for lev in out["levels"]:
        lines.append(f"{lev['eta']:g},{lev['recovery_max_gap']:.17g},"
                     f"{lev['lower_max_gap']:.17g}")
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
        print(f"gap report -> {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _add_profile_args(p):
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--theta", type=float, default=10.0)
    p.add_argument("--delta0", type=float, default=0.6)
    p.add_argument("--delta1", type=float, default=0.9)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="handlesphere",
        description="Spectra of spheres with many small handles")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pack", help="maximal symmetric cap packing")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=_cmd_pack)

    p = sub.add_parser("mesh", help="holed symmetric triangulation")
    p.add_argument("--packing", required=True)
    _add_profile_args(p)
    p.add_argument("--target-edge", type=float, default=0.07)
    p.add_argument("--loop-segments", type=int, default=48)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("spectrum", help="lowest eigenvalues of a mesh")
    p.add_argument("--mesh", required=True)
    _add_profile_args(p)
    p.add_argument("--measure", default="infinite",
                   choices=["infinite", "boundary_density",
                            "volume_density"])
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("limit", help="closed-form limit spectrum")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--convention", default="form",
                   choices=list(limit_mod.CONVENTIONS))
    p.add_argument("--output", "-o", default="")
    p.set_defaults(func=_cmd_limit)

    p = sub.add_parser("capacity", help="condenser capacity")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--fem", action="store_true")
    p.add_argument("--resolution", type=float, default=None)
    p.set_defaults(func=_cmd_capacity)

    p = sub.add_parser("sweep", help="schedule sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output", "-o", default="")
    p.add_argument("--summary", default="")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("gamma", help="convergence-gap report")
    p.add_argument("--config", required=True)
    p.add_argument("--l-max", type=int, default=2)
    p.add_argument("--output", "-o", default="")
    p.set_defaults(func=_cmd_gamma)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
