"""Command line front end.

Exit codes: 0 success, 1 input/format error, 2 a checked property failed,
3 the complex check and the annihilation check disagree (a bug canary).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path

import numpy as np

from . import annihilating as ann
from .complexes import cohomology, hodge_decompose, random_complex
from .derham import (
    BoundaryConditionSpec,
    FormatError,
    MaterialWeights,
    OrientationError,
    build_derham,
    build_forms_complex,
    read_mesh,
    read_voxels,
)
from .exceptions import ChainInconsistencyError, InvalidSpaceError, SpaceMismatchError
from .factorization import (
    EvolutionProblem,
    component_resolvent_recover,
    component_solve,
    direct_resolvent_apply,
    evolve,
    factored_resolvent_apply,
)
from .linmap import DEFAULT_RANK_TOL
from .serialization import (
    SCHEMA_VERSION,
    ManifestError,
    dumps,
    load_complex,
    read_manifest,
    read_vector,
    save_complex,
    staged_output,
    write_atomic,
    write_vector,
)

DEFAULT_SEED = 20240601
EXIT_OK, EXIT_INPUT, EXIT_CHECK, EXIT_THEOREM = 0, 1, 2, 3


class InputError(Exception):
    """Bad input; maps to exit code 1."""


@dataclass
class RunManifest:
    """Resolved settings for one command invocation."""

    command: str
    inputs: list
    tol: float | None = None
    overrides: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    out: Path | None = None

    def tol_for(self, check, fallback=DEFAULT_RANK_TOL):
        if check in self.overrides:
            return float(self.overrides[check])
        return fallback if self.tol is None else self.tol


def _run_manifest(args):
    inputs = [v for k in ("manifest", "voxels", "mesh", "vector", "u0")
              if (v := getattr(args, k, None)) is not None]
    for p in inputs:
        if not Path(p).exists():
            raise InputError(f"no such file: {p}")
    overrides = {}
    if getattr(args, "manifest", None):
        overrides = read_manifest(args.manifest).get("tolerances", {})
    return RunManifest(args.command, inputs, args.tol, overrides, args.seed,
                       Path(args.out) if args.out else None)


def _load(run, args):
    spec = load_complex(args.manifest)
    tol = run.tol_for("rank", spec.tol)
    return type(spec)(spec.spaces, spec.maps, tol)


def _emit(run, report, name="report.json"):
    report = {"schema_version": SCHEMA_VERSION, "command": run.command, **report}
    text = dumps(report)
    if run.out is None:
        sys.stdout.write(text)
    elif run.command in ("hodge", "evolve"):
        return text
    else:
        target = run.out if run.out.suffix == ".json" else run.out / name
        write_atomic(target, text)
    return text


# ------------------------------------------------------------------ commands

def cmd_verify(run, args):
    spec = _load(run, args)
    tol = run.tol_for("complex", spec.tol)
    eq = ann.equivalence_check(spec, tol)
    _emit(run, {"dims": spec.dims, **eq.to_dict()})
    if not eq.agree:
        return EXIT_THEOREM
    return EXIT_OK if eq.complex_holds else EXIT_CHECK


def _weights(path):
    if path is None:
        return None
    data = json.loads(Path(path).read_text())
    unknown = set(data) - {"nu", "epsilon", "mu", "kappa"}
    if unknown:
        raise InputError(f"unknown weight names {sorted(unknown)}")
    return MaterialWeights(**data)


def cmd_build_derham(run, args):
    grid = read_voxels(args.voxels, args.h)
    if args.bc == "mixed":
        if not args.gamma0_sides:
            raise InputError("--bc mixed needs --gamma0-sides")
        bc = BoundaryConditionSpec.mixed_sides(grid, args.gamma0_sides.split(","))
    else:
        bc = BoundaryConditionSpec(args.bc)
    spec = build_derham(grid, bc, _weights(args.weights), run.tol_for("rank"))
    source = {"kind": "derham", "bc": args.bc, "h": args.h, "grid_shape": list(grid.shape)}
    with staged_output(run.out) as stage:
        save_complex(spec, stage, {"source": source})
    return EXIT_OK


def cmd_build_forms(run, args):
    mesh = read_mesh(args.mesh)
    spec = build_forms_complex(mesh, args.bc, tol=run.tol_for("rank"))
    with staged_output(run.out) as stage:
        save_complex(spec, stage, {"source": {"kind": "forms", "bc": args.bc,
                                              "counts": mesh.counts()}})
    return EXIT_OK


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_random_complex(run, args):
    try:
        spec = random_complex(_int_list(args.dims), _int_list(args.ranks), run.seed,
                              weighted=args.weighted, tol=run.tol_for("rank"))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    with staged_output(run.out) as stage:
        save_complex(spec, stage, {"source": {"kind": "random", "seed": run.seed,
                                              "ranks": _int_list(args.ranks)}})
    return EXIT_OK


def cmd_hodge(run, args):
    spec = _load(run, args)
    x = read_vector(args.vector)
    if not 0 <= args.slot <= spec.length:
        raise InputError(f"slot {args.slot} out of range 0..{spec.length}")
    if x.size != spec.dims[args.slot]:
        raise InputError(f"vector has length {x.size}, slot {args.slot} has "
                         f"dimension {spec.dims[args.slot]}")
    parts = hodge_decompose(spec, args.slot, x)
    space = spec.spaces[args.slot]
    norm = max(space.norm(x), 1e-300)
    pairs = {"exact,harmonic": (parts.exact, parts.harmonic),
             "exact,coexact": (parts.exact, parts.coexact),
             "harmonic,coexact": (parts.harmonic, parts.coexact)}
    report = {
        "slot": args.slot,
        "norms": {name: space.norm(getattr(parts, name)) for name in parts._fields},
        "reconstruction": space.norm(x - sum(parts)) / norm,
        "orthogonality": {k: abs(space.inner(u, v)) / norm**2 for k, (u, v) in pairs.items()},
    }
    if run.out is None:
        _emit(run, report)
        return EXIT_OK
    text = _emit(run, report)
    with staged_output(run.out) as stage:
        for name in parts._fields:
            write_vector(stage / f"{name}.mtx", getattr(parts, name))
        (stage / "report.json").write_text(text)
    return EXIT_OK


def cmd_betti(run, args):
    spec = _load(run, args)
    _emit(run, {"dims": cohomology(spec).dims})
    return EXIT_OK


def cmd_poincare(run, args):
    op = ann.build(_load(run, args))
    try:
        c = ann.poincare_constant(op)
    except ValueError as exc:
        _emit(run, {"error": str(exc)})
        return EXIT_CHECK
    parts = []
    for k in range(op.length):
        try:
            parts.append(ann.poincare_constant(op, part=k))
        except ValueError:
            parts.append(None)
    _emit(run, {"constant": c, "part_constants": parts})
    return EXIT_OK


def cmd_fredholm(run, args):
    op = ann.build(_load(run, args))
    rep = ann.fredholm_report(op)
    _emit(run, rep.to_dict())
    tol = run.tol_for("orthogonality", 1e-10)
    ok = rep.index == 0 and rep.dims_add_up and rep.orthogonality <= tol
    return EXIT_OK if ok else EXIT_CHECK


def cmd_product_table(run, args):
    op = ann.build(_load(run, args))
    table = ann.appendix_product_table(op, run.tol_for("annihilation", 0.0))
    _emit(run, {"N": op.length,
                "table": {f"{k},{l}": [list(p) for p in v] for (k, l), v in sorted(table.items())}})
    return EXIT_OK


def _rel(x, y):
    scale = np.linalg.norm(y)
    return float(np.linalg.norm(x - y) / scale) if scale > 0 else float(np.linalg.norm(x))


def cmd_factor_check(run, args):
    op = ann.build(_load(run, args))
    rng = np.random.default_rng(run.seed)
    taus = [float(t) for t in args.taus.split(",")]
    tol = run.tol_for("factorization", 1e-10)
    orders = list(permutations(range(op.length)))
    if len(orders) > 24:
        orders = [tuple(rng.permutation(op.length)) for _ in range(24)]
    results = {}
    for tau in taus:
        fact = recov = perm = 0.0
        for _ in range(args.samples):
            b = rng.standard_normal(op.space.dim)
            direct = direct_resolvent_apply(op, tau, b)
            base = factored_resolvent_apply(op, tau, b)
            fact = max(fact, _rel(base, direct))
            for order in orders[1:]:
                perm = max(perm, _rel(factored_resolvent_apply(op, tau, b, order), base))
            for l in range(op.length):
                recov = max(recov, _rel(component_resolvent_recover(op, tau, l, b),
                                        component_solve(op, l, tau, b)))
        results[repr(tau)] = {"factored_vs_direct": fact, "component_recovery": recov,
                              "order_permutation": perm}
    ok = all(r["factored_vs_direct"] <= tol and r["component_recovery"] <= tol
             for r in results.values())
    _emit(run, {"samples": args.samples, "tol": tol, "passed": ok, "results": results})
    return EXIT_OK if ok else EXIT_CHECK


def cmd_evolve(run, args):
    op = ann.build(_load(run, args))
    if args.u0:
        u0 = read_vector(args.u0)
    else:
        u0 = np.random.default_rng(run.seed).standard_normal(op.space.dim)
        u0 /= op.space.space.norm(u0)
    try:
        problem = EvolutionProblem(op, u0, args.dt, args.steps, args.scheme)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    traj = evolve(problem)
    diffs = np.diff(traj.energies)
    report = {
        "scheme": args.scheme, "h": args.dt, "steps": args.steps,
        "initial_energy": float(traj.energies[0]),
        "final_energy": float(traj.energies[-1]),
        "max_energy_drift": traj.energy_drift(),
        "max_energy_increase": float(diffs.max(initial=0.0)),
    }
    if run.out is None:
        _emit(run, report)
        return EXIT_OK
    text = _emit(run, report)
    with staged_output(run.out) as stage:
        traj.write(stage / "trajectory.txt",
                   stage / "states.npy" if args.dump_states else None)
        (stage / "report.json").write_text(text)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "build-derham": cmd_build_derham,
    "build-forms": cmd_build_forms,
    "random-complex": cmd_random_complex,
    "hodge": cmd_hodge,
    "betti": cmd_betti,
    "poincare": cmd_poincare,
    "fredholm": cmd_fredholm,
    "product-table": cmd_product_table,
    "factor-check": cmd_factor_check,
    "evolve": cmd_evolve,
}

_NEEDS_OUT = {"build-derham", "build-forms", "random-complex"}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="skewcomplex",
        description="Hilbert complexes as annihilating skew-selfadjoint block operators.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None,
                        help="tolerance for every check (manifest 'tolerances' override it)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--format", choices=["json"], default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    for name, text in [("verify", "complex property, annihilation and their agreement"),
                       ("betti", "slot cohomology dimensions"),
                       ("poincare", "Friedrichs/Poincare constant of S"),
                       ("fredholm", "kernel, cokernel and index of S"),
                       ("product-table", "nonzero blocks of every S_k S_l")]:
        add(name, text).add_argument("manifest")

    p = add("build-derham", "grad-curl-div complex from a voxel file")
    p.add_argument("voxels")
    p.add_argument("--bc", choices=["dirichlet", "neumann", "mixed"], default="dirichlet")
    p.add_argument("--gamma0-sides", default=None,
                   help="comma separated Dirichlet sides for mixed, e.g. 'z-,x+'")
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--weights", default=None, help="JSON with nu/epsilon/mu/kappa")

    p = add("build-forms", "exterior-derivative complex from a simplex listing")
    p.add_argument("mesh")
    p.add_argument("--bc", choices=["dirichlet", "neumann"], default="neumann")

    p = add("random-complex", "random exact complex with prescribed ranks")
    p.add_argument("--dims", required=True)
    p.add_argument("--ranks", required=True)
    p.add_argument("--weighted", action="store_true")

    p = add("hodge", "exact/harmonic/coexact split of a slot vector")
    p.add_argument("manifest")
    p.add_argument("--slot", type=int, required=True)
    p.add_argument("--vector", required=True)

    p = add("factor-check", "factored vs direct resolvents")
    p.add_argument("manifest")
    p.add_argument("--taus", default="0.1,1,10")
    p.add_argument("--samples", type=int, default=50)

    p = add("evolve", "time stepping of u' + S u = 0")
    p.add_argument("manifest")
    p.add_argument("--scheme", default="cayley",
                   choices=["cayley", "monolithic-implicit-euler", "factored-implicit-euler"])
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--u0", default=None)
    p.add_argument("--dump-states", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command in _NEEDS_OUT and not args.out:
        print(f"error: {args.command} needs --out", file=sys.stderr)
        return EXIT_INPUT
    try:
        run = _run_manifest(args)
        return COMMANDS[args.command](run, args)
    except (InputError, ManifestError, FormatError, OrientationError, ChainInconsistencyError,
            SpaceMismatchError, InvalidSpaceError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
