"""Command line driver for the refinement experiments.

Runs one problem with uniform or adaptive refinement and writes a CSV
convergence history plus an SVG convergence plot into the output directory.
Optionally dumps the final mesh and assembled matrix in line-oriented text
formats for cross-checking.
"""

import argparse
import os
import sys

from .assemble import assemble, dump_matrix
from .estimate import adaptive_loop, fit_rate
from .mesh import initial_prism_mesh
from .plots import convergence_figure
from .problems import get_problem
from .simplexfem import adaptive_loop_tri
from .space import build_space
from .trimesh import initial_trimesh


def write_csv(records, path, deterministic=False):
    """Write step records with 17 significant digits.

    In deterministic mode the wall_time column is written as 0 so that
    reruns produce byte-identical files.
    """
    with_err = records and records[0]["error_u"] is not None
    cols = ["step", "dofs", "estimator"] + (["error_u"] if with_err else []) \
        + ["wall_time"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for r in records:
            row = [str(r["step"]), str(r["dofs"]), f"{r['estimator']:.17g}"]
            if with_err:
                row.append(f"{r['error_u']:.17g}")
            row.append("0" if deterministic else f"{r['wall_time']:.17g}")
            fh.write(",".join(row) + "\n")
    return path


def build_parser():
    p = argparse.ArgumentParser(
        prog="prismfosls",
        description="space-time least-squares heat equation experiments")
    p.add_argument("--problem", required=True,
                   help="problem id from the registry, e.g. 1d-smooth")
    p.add_argument("--dim", type=int, choices=(1, 2), default=None,
                   help="spatial dimension (checked against the problem)")
    p.add_argument("--mesh", choices=("prism", "simplex"), default="prism")
    p.add_argument("--mode", choices=("uniform", "adaptive"),
                   default="adaptive")
    p.add_argument("--theta", type=float, default=0.5,
                   help="bulk marking parameter")
    p.add_argument("--max-dofs", type=int, default=10000)
    p.add_argument("--solver", choices=("auto", "direct", "amg"),
                   default="auto")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--deterministic", action="store_true",
                   help="write wall_time as 0 for byte-identical reruns")
    p.add_argument("--dump-mesh", action="store_true",
                   help="write the final prismatic mesh as text")
    p.add_argument("--dump-matrix", action="store_true",
                   help="write the final stiffness matrix in "
                        "'row col value' form")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        problem = get_problem(args.problem)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    if args.dim is not None and args.dim != problem.dim:
        print(f"error: problem {problem.name!r} has spatial dimension "
              f"{problem.dim}, not {args.dim}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    tag = f"{problem.name}_{args.mesh}_{args.mode}"

    if args.mesh == "simplex":
        if problem.dim != 1:
            print("error: the simplicial baseline is only available for "
                  "spatial dimension 1", file=sys.stderr)
            return 2
        records, mesh, _ = adaptive_loop_tri(
            initial_trimesh(problem.T), problem, theta=args.theta,
            max_dofs=args.max_dofs, mode=args.mode)
    else:
        records, mesh, _ = adaptive_loop(
            initial_prism_mesh(problem.dim, problem.T), problem,
            theta=args.theta, max_dofs=args.max_dofs, mode=args.mode,
            exact=problem.exact, solver=args.solver)

    csv_path = os.path.join(args.out, tag + ".csv")
    write_csv(records, csv_path, deterministic=args.deterministic)
    svg_path = os.path.join(args.out, tag + ".svg")
    convergence_figure({f"{args.mesh}, {args.mode}": records}, svg_path,
                       title=problem.name)

    if args.dump_mesh and args.mesh == "prism":
        mesh.dump(os.path.join(args.out, tag + "_mesh.txt"))
    if args.dump_matrix and args.mesh == "prism":
        space = build_space(mesh)
        A, _ = assemble(space, problem)
        dump_matrix(A, os.path.join(args.out, tag + "_matrix.txt"))

    n = len(records)
    lo = max(0, n - max(3, n // 2))
    rate = fit_rate([r["dofs"] for r in records[lo:]],
                    [r["estimator"] for r in records[lo:]]) if n >= 2 else 0.0
    print(f"{tag}: {n} steps, final dofs {records[-1]['dofs']}, "
          f"estimator {records[-1]['estimator']:.6g}, rate {rate:.3f}")
    print(f"wrote {csv_path} and {svg_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
