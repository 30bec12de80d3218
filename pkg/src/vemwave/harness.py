"""Error norms, the manufactured standing-wave benchmark, and h/p refinement
convergence studies."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import GlobalSystem, Material, assemble_global, assemble_load, interpolate
from .mesh import FAMILIES, generate_family
from .polybasis import BasisConditioningError
from .projectors import build_element_operators
from . import timestep as ts


@dataclass(frozen=True)
class BenchmarkProblem:
    """Manufactured elastodynamics problem with a separable-in-time exact solution
    u(x, t) = time_factor(t) * shape(x); the body force is hard-coded analytically
    and cross-checked against finite differences in the test suite."""

    material: Material
    final_time: float

    def time_factor(self, t: float) -> float:
        return float(np.cos(2.0 * np.pi * t / self.final_time))

    def time_factor_dt(self, t: float) -> float:
        w = 2.0 * np.pi / self.final_time
        return float(-w * np.sin(w * t))

    def shape(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        x, y = p[:, 0], p[:, 1]
        sx = np.sin(np.pi * x)
        sy = np.sin(np.pi * y)
        return np.column_stack([sx * sx * np.sin(2.0 * np.pi * y),
                                np.sin(2.0 * np.pi * x) * sy * sy])

    def displacement(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.time_factor(t) * self.shape(points)

    def velocity(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.time_factor_dt(t) * self.shape(points)

    def gradient(self, points: np.ndarray, t: float) -> np.ndarray:
        """Displacement gradient, shape (n, 2, 2): out[:, i, j] = d u_i / d x_j."""
        p = np.atleast_2d(points)
        x, y = p[:, 0], p[:, 1]
        pi = np.pi
        g = np.empty((len(p), 2, 2))
        g[:, 0, 0] = pi * np.sin(2 * pi * x) * np.sin(2 * pi * y)
        g[:, 0, 1] = 2 * pi * np.sin(pi * x) ** 2 * np.cos(2 * pi * y)
        g[:, 1, 0] = 2 * pi * np.cos(2 * pi * x) * np.sin(pi * y) ** 2
        g[:, 1, 1] = pi * np.sin(2 * pi * x) * np.sin(2 * pi * y)
        return self.time_factor(t) * g

    def spatial_load(self, points: np.ndarray) -> np.ndarray:
        """f / time_factor(t): rho u_tt - div sigma(u) shares the time factor."""
        mat = self.material
        p = np.atleast_2d(points)
        x, y = p[:, 0], p[:, 1]
        pi = np.pi
        w2 = (2.0 * pi / self.final_time) ** 2
        mix = 2.0 * pi * pi * (3.0 * mat.mu + 2.0 * mat.lam)
        bulge = 4.0 * pi * pi * mat.mu
        f1 = (-mat.rho * w2 * np.sin(pi * x) ** 2 * np.sin(2 * pi * y)
              - mix * np.cos(2 * pi * x) * np.sin(2 * pi * y)
              + bulge * np.sin(pi * x) ** 2 * np.sin(2 * pi * y))
        f2 = (-mat.rho * w2 * np.sin(pi * y) ** 2 * np.sin(2 * pi * x)
              - mix * np.cos(2 * pi * y) * np.sin(2 * pi * x)
              + bulge * np.sin(pi * y) ** 2 * np.sin(2 * pi * x))
        return np.column_stack([f1, f2])

    def body_force(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.time_factor(t) * self.spatial_load(points)


def standing_wave_benchmark(material: Material | None = None,
                            final_time: float = 1.0) -> BenchmarkProblem:
    return BenchmarkProblem(material or Material(1.0, 1.0, 1.0), final_time)


@dataclass
class ErrorNorms:
    l2: float
    h1: float
    relative: bool


def error_norms(system: GlobalSystem, u_full: np.ndarray, exact, exact_gradient,
                t: float = 0.0) -> ErrorNorms:
    """Relative L2 and broken H1 seminorm errors of a discrete state.

    The discrete field enters through its computable projections: Pi0_k u_h for the
    L2 norm and (Pi0x, Pi0y) per component for the gradient.  When the exact norm
    is below 1e-14 the absolute errors are returned with relative=False."""
    dofmap = system.dofmap
    err_l2 = err_h1 = norm_l2 = norm_h1 = 0.0
    for ci, ops in enumerate(system.ops):
        sdofs = dofmap.cell_scalar_dofs(ci)
        ux = u_full[sdofs]
        uy = u_full[sdofs + dofmap.n_scalar]
        pts, w = ops.rule.points, ops.rule.weights
        basis_vals = ops.basis.eval(pts)
        uh = np.column_stack([basis_vals @ (ops.pi_zero @ ux),
                              basis_vals @ (ops.pi_zero @ uy)])
        ue = np.asarray(exact(pts, t))
        err_l2 += w @ ((uh - ue) ** 2).sum(axis=1)
        norm_l2 += w @ (ue ** 2).sum(axis=1)

        vals_km1 = basis_vals[:, :ops.n_km1]
        gh = np.empty((len(pts), 2, 2))
        gh[:, 0, 0] = vals_km1 @ (ops.pi_zero_x @ ux)
        gh[:, 0, 1] = vals_km1 @ (ops.pi_zero_y @ ux)
        gh[:, 1, 0] = vals_km1 @ (ops.pi_zero_x @ uy)
        gh[:, 1, 1] = vals_km1 @ (ops.pi_zero_y @ uy)
        ge = np.asarray(exact_gradient(pts, t))
        err_h1 += w @ ((gh - ge) ** 2).sum(axis=(1, 2))
        norm_h1 += w @ (ge ** 2).sum(axis=(1, 2))
    err_l2, err_h1 = np.sqrt(err_l2), np.sqrt(err_h1)
    norm_l2, norm_h1 = np.sqrt(norm_l2), np.sqrt(norm_h1)
    if norm_l2 < 1e-14 or norm_h1 < 1e-14:
        return ErrorNorms(float(err_l2), float(err_h1), relative=False)
    return ErrorNorms(float(err_l2 / norm_l2), float(err_h1 / norm_h1), relative=True)


@dataclass
class ConvergenceRecord:
    family: str
    degree: int
    level: int
    h: float
    n_dofs: int
    err_l2: float
    err_h1: float
    seconds: float


@dataclass
class ConvergenceStudy:
    records: list[ConvergenceRecord] = field(default_factory=list)

    def slope(self, degree: int, norm: str = "l2") -> float:
        """Least-squares log-log slope of the error versus h for one degree."""
        recs = [r for r in self.records if r.degree == degree]
        if len(recs) < 2:
            raise ValueError("slope needs at least two refinement levels")
        hs = np.log([r.h for r in recs])
        errs = np.log([getattr(r, f"err_{norm}") for r in recs])
        return float(np.polyfit(hs, errs, 1)[0])

    def incremental_slopes(self, degree: int, norm: str = "l2") -> list[float]:
        recs = sorted((r for r in self.records if r.degree == degree),
                      key=lambda r: -r.h)
        out = []
        for a, b in zip(recs, recs[1:]):
            ea, eb = getattr(a, f"err_{norm}"), getattr(b, f"err_{norm}")
            out.append(float(np.log(eb / ea) / np.log(b.h / a.h)))
        return out


def solve_benchmark(system: GlobalSystem, problem: BenchmarkProblem, dt: float,
                    final_time: float, *, check_cfl: bool = True) -> np.ndarray:
    """Integrate the benchmark to final_time and return the free displacement DOFs.

    Refuses to run when dt exceeds the CFL estimate, reporting the admissible step.
    The separable load is assembled once and rescaled each step."""
    n_steps = int(round(final_time / dt))
    if abs(n_steps * dt - final_time) > 1e-10 * final_time:
        raise ValueError("final_time must be an integer multiple of dt")
    solver = ts.make_solver(system)
    if check_cfl:
        # a 0.1% eigenvalue estimate is plenty for a go/no-go check
        est = ts.cfl_timestep(system, safety=1.0, tol=1e-3, max_iter=300,
                              solver=solver)
        if dt > 1.02 * est.dt:
            raise ValueError(
                f"dt = {dt:g} violates the CFL limit; admissible dt <= {est.dt:.6e}")
    u0 = system.restrict(interpolate(system, lambda p: problem.displacement(p, 0.0)))
    v0 = system.restrict(interpolate(system, lambda p: problem.velocity(p, 0.0)))
    f_spatial = assemble_load(system, lambda p, t: problem.spatial_load(p), t=0.0)
    load = lambda n: problem.time_factor(n * dt) * f_spatial
    state, _ = ts.simulate(system, u0, v0, dt, n_steps, load, solver=solver,
                           suggested_dt=est.dt if check_cfl else None)
    return state.u_curr


def run_convergence(family: str, degrees, levels, dt: float, final_time: float,
                    *, seed: int = 0, material: Material | None = None,
                    basis_kind: str = "monomial") -> ConvergenceStudy:
    """Assemble, integrate, and measure errors for each (level, degree) pair."""
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    problem = standing_wave_benchmark(material)
    study = ConvergenceStudy()
    for level in levels:
        mesh = generate_family(family, level, seed)
        for degree in degrees:
            start = time.perf_counter()
            system = assemble_global(mesh, degree, problem.material,
                                     basis_kind=basis_kind)
            u_final = solve_benchmark(system, problem, dt, final_time)
            errs = error_norms(system, system.expand(u_final),
                               problem.displacement, problem.gradient, final_time)
            study.records.append(ConvergenceRecord(
                family, degree, level, mesh.max_diameter(), system.n_free,
                errs.l2, errs.h1, time.perf_counter() - start))
    return study


@dataclass
class PRefinementRecord:
    degree: int
    basis_kind: str
    n_dofs: int
    err_l2: float
    err_h1: float
    max_condition: float
    conditioning_failure: bool


def run_p_refinement(degrees, dt: float, final_time: float, *,
                     basis_kinds=("monomial", "orthonormal"), seed: int = 0,
                     material: Material | None = None) -> list[PRefinementRecord]:
    """p-refinement study on the fixed 5x5 randomized quadrilateral mesh.

    Conditioning failures with the monomial basis are recorded, not fatal."""
    mesh = generate_family("random_quad", 0, seed)
    problem = standing_wave_benchmark(material)
    records = []
    for basis_kind in basis_kinds:
        for degree in degrees:
            try:
                ops = build_element_operators(mesh, degree, basis_kind=basis_kind)
                system = assemble_global(mesh, degree, problem.material, ops=ops)
                cond = max(op.projector_condition for op in ops)
                u_final = solve_benchmark(system, problem, dt, final_time)
                errs = error_norms(system, system.expand(u_final),
                                   problem.displacement, problem.gradient,
                                   final_time)
                records.append(PRefinementRecord(
                    degree, basis_kind, system.n_free, errs.l2, errs.h1,
                    cond, False))
            except BasisConditioningError:
                records.append(PRefinementRecord(
                    degree, basis_kind, 0, np.nan, np.nan, np.inf, True))
    return records


CONVERGENCE_CSV_FIELDS = ["family", "k", "level", "h", "ndofs",
                          "err_l2", "err_h1", "seconds"]


def write_convergence_csv(study: ConvergenceStudy, path) -> None:
    with open(path, "w", newline="", encoding="ascii") as f:
        writer = csv.writer(f)
        writer.writerow(CONVERGENCE_CSV_FIELDS)
        for r in study.records:
            writer.writerow([r.family, r.degree, r.level, f"{r.h:.12e}", r.n_dofs,
                             f"{r.err_l2:.12e}", f"{r.err_h1:.12e}",
                             f"{r.seconds:.3f}"])
