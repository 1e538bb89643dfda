"""Command line interface: run, validate, pareto, surrogate.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .asd import dedup, normalize_objectives, pareto_filter, run_asd
from .config import load_config
from .errors import ConfigError, MoltoError
from .mesh import Mesh
from .optimizer import SolutionCandidate

OUTPUT_ENV = "MOLTO_OUTPUT_DIR"


def export_field(phi: np.ndarray, mesh: Mesh, path) -> None:
    """Write a nodal field as `x y value` rows plus triangle connectivity."""
    if phi.shape != (mesh.num_nodes,):
        raise MoltoError("field dimension does not match mesh")
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.num_nodes} triangles {mesh.num_triangles}\n")
        for (x, y), value in zip(mesh.nodes, phi):
            fh.write(f"{x:.9f} {y:.9f} {value:.9f}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def read_field(path):
    with open(path) as fh:
        header = fh.readline().split()
        n_nodes, n_tris = int(header[1]), int(header[3])
        rows = [fh.readline().split() for _ in range(n_nodes)]
        tris = [fh.readline().split() for _ in range(n_tris)]
    nodes = np.array([[float(r[0]), float(r[1])] for r in rows])
    values = np.array([float(r[2]) for r in rows])
    triangles = np.array([[int(c) for c in r] for r in tris])
    return nodes, values, triangles


def _candidate_row(index: int, cand: SolutionCandidate) -> list:
    return ([index] + list(cand.w_star) + list(cand.w_final)
            + list(cand.objectives) + list(cand.normalized)
            + [int(f) for f in cand.feasible]
            + [int(cand.converged), cand.iterations])


def _register_header(m: int) -> list:
    return (["index"]
            + [f"wstar_{a + 1}" for a in range(m)]
            + [f"wfinal_{a + 1}" for a in range(m)]
            + [f"j_{a + 1}" for a in range(m)]
            + [f"jnorm_{a + 1}" for a in range(m)]
            + [f"feasible_{a + 1}" for a in range(m)]
            + ["converged", "iterations"])


def write_register(candidates, path) -> None:
    m = len(candidates[0].objectives)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_register_header(m))
        for i, cand in enumerate(candidates):
            writer.writerow(_candidate_row(i, cand))


def read_register(path) -> list:
    candidates = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        m = sum(1 for name in header if name.startswith("wstar_"))
        for row in reader:
            vals = row[1:]
            w_star = tuple(float(v) for v in vals[0:m])
            w_final = tuple(float(v) for v in vals[m:2 * m])
            objectives = tuple(float(v) for v in vals[2 * m:3 * m])
            normalized = tuple(float(v) for v in vals[3 * m:4 * m])
            feasible = tuple(bool(int(v)) for v in vals[4 * m:5 * m])
            converged = bool(int(vals[5 * m]))
            iterations = int(vals[5 * m + 1])
            candidates.append(SolutionCandidate(
                w_star=w_star, w_final=w_final, objectives=objectives,
                normalized=normalized, feasible=feasible, converged=converged,
                iterations=iterations))
    return candidates


def _write_outputs(result, out_dir: Path, problem) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    candidates = result.register.candidates
    write_register(candidates, out_dir / "register.csv")

    with open(out_dir / "levels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "candidates", "mean_edge", "std_edge"])
        writer.writerows(result.history)

    for k, cand in enumerate(candidates):
        if cand.history:
            m = len(cand.objectives)
            n_g = len(cand.history[0][2])
            with open(out_dir / f"candidate_{k}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["iteration"]
                                + [f"j_{a + 1}" for a in range(m)]
                                + [f"g_{a + 1}" for a in range(n_g)]
                                + [f"w_{a + 1}" for a in range(m)])
                for s, j, g, w in cand.history:
                    writer.writerow([s, *j, *g, *w])
        if cand.phi is not None:
            export_field(cand.phi, problem.mesh, out_dir / f"candidate_{k}_final.dat")

    pareto = result.pareto
    if pareto:
        m = len(pareto[0].objectives)
        coords = normalize_objectives(np.array([c.objectives for c in pareto]))
        with open(out_dir / "pareto.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"j_{a + 1}" for a in range(m)]
                            + [f"jhat_{a + 1}" for a in range(m)])
            for cand, coord in zip(pareto, coords):
                writer.writerow(list(cand.objectives) + list(coord))


def _cmd_validate(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        config = load_config(args.config)
    for w in caught:
        print(f"warning: {w.message}")
    print(f"ok: {config.kind} configuration with "
          f"{len(config.initial_weights())} initial weights")
    return 0


def _run_common(args, require_kind=None) -> int:
    config = load_config(args.config)
    if require_kind and config.kind != require_kind:
        raise ConfigError(f"expected a {require_kind} configuration, "
                          f"got '{config.kind}'")
    asd_cfg = config.asd_config()
    if args.jobs is not None:
        asd_cfg.jobs = args.jobs
    out_dir = Path(os.environ.get(OUTPUT_ENV)
                   or args.out
                   or config.values.get("out_dir", "molto_out"))
    problem = config.build_problem()
    result = run_asd(problem, config.initial_weights(), asd_cfg)
    _write_outputs(result, out_dir, problem)
    for level, count, mean, std in result.history:
        print(f"level {level}: {count} candidates, "
              f"mean edge {mean:.6f} (std {std:.6f})")
    print(f"{len(result.pareto)} Pareto-efficient candidates "
          f"({len(result.failures)} failed runs) -> {out_dir}")
    return 0


def _cmd_pareto(args) -> int:
    candidates = read_register(args.register)
    kept = pareto_filter(dedup(candidates, args.tol))
    out = Path(args.out) if args.out else None
    if out:
        write_register(kept, out)
        print(f"{len(kept)} of {len(candidates)} candidates kept -> {out}")
    else:
        for cand in kept:
            print(",".join(f"{v:.9g}" for v in cand.objectives))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molto",
        description="Multi-objective level set topology optimization with "
                    "adaptive simplex refinement of the Pareto frontier")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full refinement loop")
    run.add_argument("config")
    run.add_argument("--jobs", type=int, default=None)
    run.add_argument("--out", default=None)

    val = sub.add_parser("validate", help="check a configuration file")
    val.add_argument("config")

    par = sub.add_parser("pareto", help="re-filter a register CSV offline")
    par.add_argument("register")
    par.add_argument("--tol", type=float, default=1e-3)
    par.add_argument("--out", default=None)

    sur = sub.add_parser("surrogate",
                         help="run the refinement loop on an analytic mapping")
    sur.add_argument("config")
    sur.add_argument("--jobs", type=int, default=None)
    sur.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "run":
            return _run_common(args)
        if args.command == "surrogate":
            return _run_common(args, require_kind="surrogate")
        return _cmd_pareto(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (MoltoError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
