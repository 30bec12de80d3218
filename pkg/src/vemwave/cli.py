"""Command-line entry point: convergence/prefine/dispersion/cfl/anisotropy/solve."""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import dispersion as disp
from . import harness, timestep
from .assembly import Material, assemble_global, interpolate
from .mesh import FAMILIES, PERIODIC_GRIDS, MeshError, read_mesh


class ConfigError(ValueError):
    """Invalid run configuration (maps to exit code 2)."""


def _positive(name, value):
    if value <= 0:
        raise ConfigError(f"--{name} must be > 0 (got {value})")
    return value


def _parse_int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from None


def _load_config_file(path):
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        if not _:
            raise ConfigError(f"config file line {raw!r} is not 'key = value'")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vemwave",
        description="Virtual element elastodynamics on polygonal meshes")
    parser.add_argument("--config", help="key = value file; CLI flags take precedence")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker count; only 1 (sequential) is implemented")
    subparsers = {}
    raw = parser.add_subparsers(dest="command", required=True)

    class _Sub:
        def add_parser(self, name, **kw):
            p = raw.add_parser(name, **kw)
            subparsers[name] = p
            return p

    sub = _Sub()
    p = sub.add_parser("convergence", help="manufactured-solution h-refinement study")
    p.add_argument("--family", default="random_quad",
                   help=f"mesh family, one of {FAMILIES} (or quad/hexa/octa aliases)")
    p.add_argument("--k", default="1,2", help="comma-separated degrees")
    p.add_argument("--levels", type=int, default=3, help="levels 0..levels-1")
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--T", type=float, default=0.1)
    p.add_argument("--paper-scale", action="store_true",
                   help="use T = 1 and dt = 1e-4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("prefine", help="p-refinement study on the fixed 5x5 mesh")
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--basis", default="both", choices=["both", "monomial", "orthonormal"])
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--T", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("dispersion", help="plane-wave dispersion analysis")
    p.add_argument("--grid", default="quad", help=f"one of {PERIODIC_GRIDS}")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--theta", type=float, default=float(np.pi / 4))
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--q-rel", type=float, default=None,
                   help="run the fully discrete analysis at this Courant fraction")
    p.add_argument("--p-convention", default="scaled", choices=["scaled", "shared"])
    p.add_argument("--out", default=".")

    p = sub.add_parser("cfl", help="CFL parameter q_CFL versus degree")
    p.add_argument("--grids", default="quad,tria")
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("anisotropy", help="velocity ratios versus propagation angle")
    p.add_argument("--grid", default="quad")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--angles", type=int, default=32)
    p.add_argument("--out", default=".")

    p = sub.add_parser("solve", help="integrate the benchmark load on a mesh file")
    p.add_argument("--mesh", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--T", type=float, default=0.1)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--out", default=".")
    return parser, subparsers


FAMILY_ALIASES = {"quad": "random_quad", "hexa": "hexagonal", "octa": "nonconvex_octagon"}


def _cmd_convergence(args, out):
    family = FAMILY_ALIASES.get(args.family, args.family)
    if family not in FAMILIES:
        raise ConfigError(f"--family must be one of {FAMILIES}")
    degrees = _parse_int_list(args.k)
    if not degrees or min(degrees) < 1:
        raise ConfigError("--k must list degrees >= 1")
    if args.levels < 1:
        raise ConfigError("--levels must be >= 1")
    dt, final_time = args.dt, args.T
    if args.paper_scale:
        dt, final_time = 1e-4, 1.0
    _positive("dt", dt)
    _positive("T", final_time)
    study = harness.run_convergence(family, degrees, range(args.levels), dt,
                                    final_time, seed=args.seed)
    harness.write_convergence_csv(study, out / "convergence.csv")
    if args.levels >= 2:
        for k in degrees:
            print(f"k={k}: L2 slope {study.slope(k, 'l2'):.3f}, "
                  f"H1 slope {study.slope(k, 'h1'):.3f}")
    return 0


def _cmd_prefine(args, out):
    if args.kmax < 1 or args.kmax > 10:
        raise ConfigError("--kmax must be in 1..10")
    _positive("dt", args.dt)
    _positive("T", args.T)
    kinds = ("monomial", "orthonormal") if args.basis == "both" else (args.basis,)
    records = harness.run_p_refinement(range(1, args.kmax + 1), args.dt, args.T,
                                       basis_kinds=kinds, seed=args.seed)
    with open(out / "prefine.csv", "w", newline="", encoding="ascii") as f:
        w = csv.writer(f)
        w.writerow(["basis", "k", "ndofs", "err_l2", "err_h1", "max_condition"])
        for r in records:
            w.writerow([r.basis_kind, r.degree, r.n_dofs, f"{r.err_l2:.12e}",
                        f"{r.err_h1:.12e}", f"{r.max_condition:.3e}"])
    return 0


def _cmd_dispersion(args, out):
    if args.delta <= 0:
        raise ConfigError(f"--delta must be > 0 (got {args.delta})")
    if args.grid not in PERIODIC_GRIDS:
        raise ConfigError(f"--grid must be one of {PERIODIC_GRIDS}")
    if args.k < 1:
        raise ConfigError("--k must be >= 1")
    if args.r <= np.sqrt(2.0):
        raise ConfigError("--r must exceed sqrt(2)")
    theta = args.theta % (2 * np.pi)
    cfg = disp.DispersionConfig(args.grid, args.k, args.delta, theta, args.r,
                                q_rel=args.q_rel if args.q_rel else 1.0,
                                p_convention=args.p_convention)
    if args.q_rel:
        result = disp.fullydiscrete_dispersion(cfg)
    else:
        result = disp.semidiscrete_dispersion(cfg)
    disp.write_dispersion_csv([result], out / "dispersion.csv")
    print(f"e_P = {result.e_p:+.6e}  e_S = {result.e_s:+.6e}  "
          f"max|Im w|/|w| = {result.im_omega_max:.2e}")
    return 0


def _cmd_cfl(args, out):
    grids = [g for g in args.grids.split(",") if g]
    for g in grids:
        if g not in PERIODIC_GRIDS:
            raise ConfigError(f"--grids entries must be in {PERIODIC_GRIDS}")
    if not 1 <= args.kmin <= args.kmax:
        raise ConfigError("need 1 <= kmin <= kmax")
    rows = []
    for g in grids:
        for k in range(args.kmin, args.kmax + 1):
            q = disp.cfl_parameter(g, k, args.delta, args.r)
            rows.append((g, k, q))
            print(f"{g} k={k}: q_CFL = {q:.6f}")
    disp.write_cfl_csv(rows, out / "cfl.csv")
    return 0


def _cmd_anisotropy(args, out):
    if args.angles < 8:
        raise ConfigError("--angles must be >= 8")
    rows = disp.anisotropy_sweep(args.grid, args.k, args.delta, args.r, args.angles)
    with open(out / "anisotropy.csv", "w", newline="", encoding="ascii") as f:
        w = csv.writer(f)
        w.writerow(["theta", "ratio_s", "ratio_p"])
        for row in rows:
            w.writerow([f"{row['theta']:.12g}", f"{row['ratio_s']:.12e}",
                        f"{row['ratio_p']:.12e}"])
    return 0


def _cmd_solve(args, out):
    mesh_path = Path(args.mesh)
    if not mesh_path.exists():
        print(f"error: mesh file not found: {mesh_path}", file=sys.stderr)
        return 1
    mesh = read_mesh(mesh_path)
    material = Material(args.rho, args.lam, args.mu)
    problem = harness.standing_wave_benchmark(material)
    system = assemble_global(mesh, args.k, material)
    _positive("dt", args.dt)
    n_steps = int(round(args.T / args.dt))
    u0 = system.restrict(interpolate(system, lambda p: problem.displacement(p, 0.0)))
    v0 = system.restrict(interpolate(system, lambda p: problem.velocity(p, 0.0)))
    if n_steps == 0:
        state = timestep.SimulationState(u0.copy(), u0.copy(), 0, args.dt)
        timestep.save_checkpoint(state, out / "final_state.ckpt")
        return 0
    from .assembly import assemble_load
    f_spatial = assemble_load(system, lambda p, t: problem.spatial_load(p))
    load = lambda n: problem.time_factor(n * args.dt) * f_spatial

    every = args.snapshot_every
    log = []

    def on_step(state):
        if every and state.step_index % every == 0:
            timestep.save_checkpoint(state, out / f"state_{state.step_index:08d}.ckpt")
        if state.step_index % 100 == 0:
            e = timestep.discrete_energy(state, system)
            log.append((state.step_index, e))
            print(f"step {state.step_index}: E = {e:.10e}")

    state, _ = timestep.simulate(system, u0, v0, args.dt, n_steps, load,
                                 on_step=on_step)
    timestep.save_checkpoint(state, out / "final_state.ckpt")
    if log:
        with open(out / "energy.csv", "w", newline="", encoding="ascii") as f:
            w = csv.writer(f)
            w.writerow(["step", "energy"])
            for n, e in log:
                w.writerow([n, f"{e:.12e}"])
    return 0


_COMMANDS = {
    "convergence": _cmd_convergence,
    "prefine": _cmd_prefine,
    "dispersion": _cmd_dispersion,
    "cfl": _cmd_cfl,
    "anisotropy": _cmd_anisotropy,
    "solve": _cmd_solve,
}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args, remaining = parser.parse_known_args(argv)
    if remaining:
        print(f"error: unrecognized arguments: {' '.join(remaining)}", file=sys.stderr)
        return 2
    if args.config:
        try:
            defaults = _load_config_file(args.config)
        except (OSError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        # config file fills in values the CLI left at their defaults
        command_parser = subparsers[args.command]
        for key, val in defaults.items():
            if hasattr(args, key):
                default = command_parser.get_default(key)
                if getattr(args, key) == default:
                    cast = type(default) if default is not None else str
                    setattr(args, key, cast(val))
    try:
        if args.threads != 1:
            raise ConfigError("--threads: parallel execution is not implemented; use 1")
        out = Path(args.out) if hasattr(args, "out") else Path(".")
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MeshError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
