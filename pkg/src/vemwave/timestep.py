"""Leap-frog time integration: special initial step, CFL estimation by power
iteration, conserved discrete energy, and binary state checkpoints."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import GlobalSystem, Material

_CKPT_MAGIC = b"VEMCKPT1"


class InstabilityError(RuntimeError):
    def __init__(self, step_index: int, suggested_dt: float | None = None):
        msg = f"leap-frog iteration diverged at step {step_index}"
        if suggested_dt is not None:
            msg += f"; the CFL estimate suggests dt <= {suggested_dt:.6e}"
        super().__init__(msg)
        self.step_index = step_index
        self.suggested_dt = suggested_dt


@dataclass
class SimulationState:
    u_prev: np.ndarray
    u_curr: np.ndarray
    step_index: int
    dt: float

    @property
    def time(self) -> float:
        return self.step_index * self.dt


def make_solver(system: GlobalSystem, method: str = "direct"):
    """Reusable solver for the (constant) mass matrix.

    'direct' factorizes once with a sparse LU (the mass matrix is SPD, so this is
    safe); 'cg' uses conjugate gradients with a diagonal preconditioner.
    """
    m = system.mass.tocsc()
    if method == "direct":
        lu = spla.splu(m)
        return lambda b: lu.solve(b)
    if method == "cg":
        dinv = 1.0 / m.diagonal()
        precond = spla.LinearOperator(m.shape, matvec=lambda x: dinv * x)

        def solve(b):
            x, info = spla.cg(m, b, rtol=1e-12, atol=0.0, M=precond, maxiter=10_000)
            if info != 0:
                raise RuntimeError(f"CG failed to converge (info={info})")
            return x

        return solve
    raise ValueError("method must be 'direct' or 'cg'")


def initial_step(system: GlobalSystem, u0: np.ndarray, v0: np.ndarray,
                 f0: np.ndarray, dt: float, solver=None) -> np.ndarray:
    """u^1 = u^0 + dt v^0 + dt^2/2 M^{-1} (F^0 - K u^0)."""
    solver = solver or make_solver(system)
    return u0 + dt * v0 + 0.5 * dt * dt * solver(f0 - system.stiffness @ u0)


def step(state: SimulationState, system: GlobalSystem, f_n: np.ndarray,
         solver, suggested_dt: float | None = None) -> SimulationState:
    """One leap-frog update: M u^{n+1} = 2M u^n - M u^{n-1} + dt^2 (F^n - K u^n)."""
    dt = state.dt
    u_next = (2.0 * state.u_curr - state.u_prev
              + dt * dt * solver(f_n - system.stiffness @ state.u_curr))
    if not np.all(np.isfinite(u_next)) or np.abs(u_next).max() > 1e12:
        raise InstabilityError(state.step_index + 1, suggested_dt)
    return SimulationState(state.u_curr, u_next, state.step_index + 1, dt)


@dataclass(frozen=True)
class CflEstimate:
    dt: float
    lambda_max: float
    courant: float | None


def cfl_timestep(system: GlobalSystem, safety: float = 0.9,
                 material: Material | None = None,
                 h: float | None = None,
                 tol: float = 1e-6, max_iter: int = 500,
                 solver=None) -> CflEstimate:
    """dt = safety * 2 / sqrt(lambda_max(K, M)) with lambda_max from power iteration
    on M^{-1} K; also reports the Courant number c_p dt / h when material and h are
    given."""
    if not 0 < safety <= 1:
        raise ValueError("safety must be in (0, 1]")
    solver = solver or make_solver(system)
    rng = np.random.default_rng(1234)
    v = rng.standard_normal(system.n_free)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = solver(system.stiffness @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise RuntimeError("power iteration collapsed: K v = 0")
        w /= norm
        lam_new = float(w @ (system.stiffness @ w)) / float(w @ (system.mass @ w))
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            break
        lam, v = lam_new, w
    else:
        raise RuntimeError(
            f"power iteration did not converge in {max_iter} iterations "
            f"(last eigenvalue estimate {lam:.6e})")
    dt = safety * 2.0 / np.sqrt(lam)
    courant = None
    if material is not None and h is not None:
        courant = material.c_p * dt / h
    return CflEstimate(float(dt), lam, courant)


def discrete_energy(state: SimulationState, system: GlobalSystem) -> float:
    """Leap-frog conserved quadratic form at the half step:
    E = 1/2 v^T M v + 1/2 u^n^T K u^{n-1} with v = (u^n - u^{n-1}) / dt."""
    v = (state.u_curr - state.u_prev) / state.dt
    return float(0.5 * v @ (system.mass @ v)
                 + 0.5 * state.u_curr @ (system.stiffness @ state.u_prev))


def save_checkpoint(state: SimulationState, path) -> None:
    """Binary checkpoint: magic, step index, dt, size, then u_prev and u_curr as
    little-endian float64."""
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<qdq", state.step_index, state.dt, len(state.u_curr)))
        f.write(np.asarray(state.u_prev, dtype="<f8").tobytes())
        f.write(np.asarray(state.u_curr, dtype="<f8").tobytes())


def load_checkpoint(path) -> SimulationState:
    with open(path, "rb") as f:
        magic = f.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        step_index, dt, n = struct.unpack("<qdq", f.read(24))
        u_prev = np.frombuffer(f.read(8 * n), dtype="<f8").copy()
        u_curr = np.frombuffer(f.read(8 * n), dtype="<f8").copy()
    return SimulationState(u_prev, u_curr, step_index, dt)


def simulate(system: GlobalSystem, u0: np.ndarray, v0: np.ndarray, dt: float,
             n_steps: int, load=None, *, solver=None,
             energy_every: int = 0, on_step=None,
             suggested_dt: float | None = None):
    """Integrate n_steps of leap-frog from interpolated initial data (free DOFs).

    ``load(step_index) -> F`` returns the free-DOF load at t_n (defaults to zero).
    Returns (state, energies) where energies holds (step, E) samples."""
    if n_steps == 0:
        return SimulationState(u0.copy(), u0.copy(), 0, dt), []
    solver = solver or make_solver(system)
    zero = np.zeros(system.n_free)
    f_of = load or (lambda n: zero)
    u1 = initial_step(system, u0, v0, f_of(0), dt, solver)
    state = SimulationState(u0, u1, 1, dt)
    energies = []
    if energy_every:
        energies.append((1, discrete_energy(state, system)))
    if on_step is not None:
        on_step(state)
    for n in range(1, n_steps):
        state = step(state, system, f_of(n), solver, suggested_dt)
        if energy_every and state.step_index % energy_every == 0:
            energies.append((state.step_index, discrete_energy(state, system)))
        if on_step is not None:
            on_step(state)
    return state, energies
