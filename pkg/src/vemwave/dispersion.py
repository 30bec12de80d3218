"""Plane-wave (von Neumann) analysis on periodic reference cells: Bloch reduction
of (M, K), physical mode extraction, semi- and fully-discrete dispersion errors,
dissipation check, CFL parameter, and parameter sweeps."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .assembly import GlobalSystem, Material, assemble_global
from .mesh import PERIODIC_GRIDS, reference_periodic_cell


class UnstableTimestepError(RuntimeError):
    """The fully discrete frequency map is not invertible for this time step."""


class ModeIdentificationError(RuntimeError):
    """Two candidate eigenvalues are indistinguishably close to a physical mode."""


@dataclass(frozen=True)
class DispersionConfig:
    """Parameters of one plane-wave analysis.

    delta is the sampling ratio h/(kL) of the shortest (shear) wavelength; the
    wavevector magnitude is 2 pi k delta / h.  Under the default 'scaled'
    P-wave convention the compressional mode is analyzed at its own, r times
    longer, wavelength (wavevector magnitude divided by r); 'shared' evaluates
    both modes at the shear wavevector.  q_rel is the Courant fraction used by
    the fully discrete analysis.
    """

    grid: str
    degree: int
    delta: float
    theta: float
    speed_ratio: float
    q_rel: float = 1.0
    rho: float = 1.0
    c_p: float = float(np.sqrt(2.0))
    cell_size: float = 1.0
    p_convention: str = "scaled"

    def __post_init__(self):
        if self.grid not in PERIODIC_GRIDS:
            raise ValueError(f"grid must be one of {PERIODIC_GRIDS}")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.speed_ratio <= np.sqrt(2.0):
            raise ValueError("speed ratio r = c_p/c_s must exceed sqrt(2)")
        if not 0.0 <= self.theta < 2.0 * np.pi:
            raise ValueError("theta must lie in [0, 2 pi)")
        if not 0.0 < self.q_rel <= 1.0:
            raise ValueError("q_rel must lie in (0, 1]")
        if self.p_convention not in ("scaled", "shared"):
            raise ValueError("p_convention must be 'scaled' or 'shared'")

    @property
    def material(self) -> Material:
        return Material.from_wave_speeds(self.rho, self.c_p, self.speed_ratio)

    def wavenumber(self) -> float:
        return 2.0 * np.pi * self.degree * self.delta / self.cell_size

    def wavevector(self) -> np.ndarray:
        return self.wavenumber() * np.array([np.cos(self.theta), np.sin(self.theta)])

    def p_wavevector(self) -> np.ndarray:
        if self.p_convention == "scaled":
            return self.wavevector() / self.speed_ratio
        return self.wavevector()


@dataclass(frozen=True)
class BlochReduction:
    projector: np.ndarray
    mass: np.ndarray
    stiffness: np.ndarray


@dataclass
class DispersionResult:
    config: DispersionConfig
    omega_p: float
    omega_s: float
    c_p_h: float
    c_s_h: float
    e_p: float
    e_s: float
    im_omega_max: float
    eigenvalues: np.ndarray
    dt: float | None = None
    ambiguous: bool = False


_SYSTEM_CACHE: dict = {}


def reference_system(grid: str, degree: int, material: Material) -> GlobalSystem:
    """Unconstrained (no Dirichlet elimination) system on the periodic cell.
    Cached per (grid, degree, material) since sweeps reuse the same matrices."""
    key = (grid, degree, material.rho, material.lam, material.mu)
    system = _SYSTEM_CACHE.get(key)
    if system is None:
        mesh = reference_periodic_cell(grid, 1.0)
        system = assemble_global(mesh, degree, material, eliminate_dirichlet=False)
        if len(_SYSTEM_CACHE) > 64:
            _SYSTEM_CACHE.clear()
        _SYSTEM_CACHE[key] = system
    return system


def _scalar_master_slave(system: GlobalSystem):
    """Classify scalar DOFs of the periodic cell into masters and phased slaves."""
    mesh = system.mesh
    dofmap = system.dofmap
    if mesh.periodic is None:
        raise ValueError("mesh carries no periodic pairing")
    pairs = {}  # slave scalar dof -> (master scalar dof, offset)
    for v, (mv, off) in mesh.periodic.vertex_master.items():
        pairs[int(v)] = (int(mv), off)
    for e, (me, off) in mesh.periodic.edge_master.items():
        for src, dst in zip(dofmap.edge_dofs(int(e)), dofmap.edge_dofs(int(me))):
            pairs[int(src)] = (int(dst), off)
    masters = np.array([d for d in range(dofmap.n_scalar) if d not in pairs], dtype=int)
    return masters, pairs


def bloch_reduce(system: GlobalSystem, wavevector: np.ndarray) -> BlochReduction:
    """Complex projection P with P[slave, master] = exp(i k . offset), and the
    reduced Hermitian pencil (P^H K P, P^H M P)."""
    dofmap = system.dofmap
    masters, pairs = _scalar_master_slave(system)
    master_col = {int(m): j for j, m in enumerate(masters)}
    n_scalar = dofmap.n_scalar
    p_scalar = np.zeros((n_scalar, len(masters)), dtype=complex)
    for m, j in master_col.items():
        p_scalar[m, j] = 1.0
    kvec = np.asarray(wavevector, dtype=float)
    for s, (m, off) in pairs.items():
        if m in pairs:
            raise ValueError(f"slave dof {s} chained to another slave {m}")
        phase = np.exp(1j * (kvec[0] * off[0] + kvec[1] * off[1]))
        p_scalar[s, master_col[m]] = phase
    z = np.zeros_like(p_scalar)
    p = np.block([[p_scalar, z], [z, p_scalar]])
    m_full = system.mass.toarray()
    k_full = system.stiffness.toarray()
    m_red = p.conj().T @ m_full @ p
    k_red = p.conj().T @ k_full @ p
    m_red = 0.5 * (m_red + m_red.conj().T)
    k_red = 0.5 * (k_red + k_red.conj().T)
    return BlochReduction(p, m_red, k_red)


def _identify_modes(eigenvalues: np.ndarray, omega_exact: float,
                    taken: int | None = None) -> tuple[int, bool]:
    """Index of the eigenvalue whose sqrt is closest to the exact frequency.

    Tie break: smaller |Lambda - omega^2|, then smaller index.  Returns the index
    and an ambiguity flag when two distinct candidates remain equally close."""
    omegas = np.sqrt(np.maximum(eigenvalues, 0.0))
    dist = np.abs(omegas - omega_exact)
    if taken is not None:
        dist = dist.copy()
        dist[taken] = np.inf
    tol = 1e-12 * max(omega_exact, 1e-300)
    tied = np.flatnonzero(dist <= dist.min() + tol)
    if len(tied) == 1:
        return int(tied[0]), False
    d2 = np.abs(eigenvalues[tied] - omega_exact ** 2)
    order = np.argsort(d2, kind="stable")
    ambiguous = len(order) > 1 and (d2[order[1]] - d2[order[0]]
                                    <= 1e-12 * max(d2[order[1]], 1e-300))
    return int(tied[order[0]]), bool(ambiguous)


def _mode_pick(eigenvalues: np.ndarray, material: Material, knorm: float,
               which: str) -> tuple[float, bool]:
    """Eigenvalue of the physical mode at this wavevector, with ambiguity flag.

    The complementary physical frequency is located first and excluded, so the
    two physical picks never collide."""
    c = material.c_p if which == "P" else material.c_s
    other = material.c_s if which == "P" else material.c_p
    i_other, _ = _identify_modes(eigenvalues, knorm * other)
    i, ambiguous = _identify_modes(eigenvalues, knorm * c, taken=i_other)
    return float(eigenvalues[i]), ambiguous


def semidiscrete_dispersion(config: DispersionConfig, *,
                            strict: bool = False) -> DispersionResult:
    """Dispersion errors of the spatial discretization (exact time integration).

    Solves the reduced Hermitian pencil, identifies the physical eigenvalues by
    closeness of sqrt(Lambda) to the exact frequencies, and reports
    e_X = c_{X,h}/c_X - 1.  Under the 'scaled' convention the P mode is taken
    from a second pencil at the r-times-smaller compressional wavevector."""
    material = config.material
    system = reference_system(config.grid, config.degree, material)
    kv_s = config.wavevector()
    kv_p = config.p_wavevector()
    red = bloch_reduce(system, kv_s)
    eig_s = la.eigh(red.stiffness, red.mass, eigvals_only=True)
    kn_s = float(np.hypot(*kv_s))
    lam_s, amb_s = _mode_pick(eig_s, material, kn_s, "S")
    if np.allclose(kv_p, kv_s):
        eig_p, kn_p = eig_s, kn_s
    else:
        red_p = bloch_reduce(system, kv_p)
        eig_p = la.eigh(red_p.stiffness, red_p.mass, eigvals_only=True)
        kn_p = float(np.hypot(*kv_p))
    lam_p, amb_p = _mode_pick(eig_p, material, kn_p, "P")
    ambiguous = amb_s or amb_p
    if strict and ambiguous:
        raise ModeIdentificationError(
            "two eigenvalues are equally close to a physical frequency")
    omega_p = float(np.sqrt(max(lam_p, 0.0)))
    omega_s = float(np.sqrt(max(lam_s, 0.0)))
    c_p_h = omega_p / kn_p
    c_s_h = omega_s / kn_s
    neg = eig_s[eig_s < 0]
    im_max = float(np.sqrt(-neg.min())) if len(neg) else 0.0
    return DispersionResult(config, omega_p, omega_s, c_p_h, c_s_h,
                            c_p_h / material.c_p - 1.0, c_s_h / material.c_s - 1.0,
                            im_max, eig_s, ambiguous=ambiguous)


def fullydiscrete_dispersion(config: DispersionConfig, dt: float | None = None,
                             q_cfl: float | None = None) -> DispersionResult:
    """Dispersion errors of the leap-frog discretization in time and space.

    The eigenvalues of the same reduced pencils are mapped through
    Lambda = (4/dt^2) sin^2(omega dt / 2); dt defaults to
    q_rel * q_CFL * h / c_P with q_CFL computed for this grid."""
    if dt is None:
        if q_cfl is None:
            q_cfl = cfl_parameter(config.grid, config.degree, config.delta,
                                  config.speed_ratio, rho=config.rho, c_p=config.c_p)
        dt = config.q_rel * q_cfl * config.cell_size / config.material.c_p
    material = config.material
    system = reference_system(config.grid, config.degree, material)
    kv_s = config.wavevector()
    kv_p = config.p_wavevector()
    red = bloch_reduce(system, kv_s)
    eig_s = la.eigh(red.stiffness, red.mass, eigvals_only=True)
    kn_s = float(np.hypot(*kv_s))
    lam_s, amb_s = _mode_pick(eig_s, material, kn_s, "S")
    if np.allclose(kv_p, kv_s):
        eig_p, kn_p = eig_s, kn_s
    else:
        red_p = bloch_reduce(system, kv_p)
        eig_p = la.eigh(red_p.stiffness, red_p.mass, eigvals_only=True)
        kn_p = float(np.hypot(*kv_p))
    lam_p, amb_p = _mode_pick(eig_p, material, kn_p, "P")

    def to_omega(lam: float) -> float:
        arg = 0.5 * dt * np.sqrt(max(lam, 0.0))
        if arg > 1.0 + 1e-14:
            raise UnstableTimestepError(
                f"dt = {dt:.6e} is unstable for this mode (sin^2 argument {arg:.6f} > 1)")
        return float(2.0 / dt * np.arcsin(min(arg, 1.0)))

    omega_p = to_omega(lam_p)
    omega_s = to_omega(lam_s)
    c_p_h = omega_p / kn_p
    c_s_h = omega_s / kn_s
    neg = eig_s[eig_s < 0]
    im_max = float(np.sqrt(-neg.min())) if len(neg) else 0.0
    return DispersionResult(config, omega_p, omega_s, c_p_h, c_s_h,
                            c_p_h / material.c_p - 1.0, c_s_h / material.c_s - 1.0,
                            im_max, eig_s, dt=dt,
                            ambiguous=amb_s or amb_p)


def cfl_parameter(grid: str, degree: int, delta: float, speed_ratio: float,
                  n_angles: int = 64, rho: float = 1.0,
                  c_p: float = float(np.sqrt(2.0))) -> float:
    """q_CFL = 2 c_P / (h sqrt(Lambda_max)) with Lambda_max the largest reduced
    eigenvalue over a uniform sweep of propagation angles."""
    material = Material.from_wave_speeds(rho, c_p, speed_ratio)
    system = reference_system(grid, degree, material)
    knorm = 2.0 * np.pi * degree * delta
    lam_max = 0.0
    for theta in np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False):
        kvec = knorm * np.array([np.cos(theta), np.sin(theta)])
        red = bloch_reduce(system, kvec)
        lam = la.eigh(red.stiffness, red.mass, eigvals_only=True)
        lam_max = max(lam_max, float(lam[-1]))
    return 2.0 * material.c_p / np.sqrt(lam_max)


def anisotropy_sweep(grid: str, degree: int, delta: float, speed_ratio: float,
                     n_angles: int = 32, rho: float = 1.0,
                     c_p: float = float(np.sqrt(2.0))) -> list[dict]:
    """Velocity ratios c_{X,h}/c_X per propagation angle (CSV-ready rows)."""
    if n_angles < 8:
        raise ValueError("n_angles must be >= 8")
    rows = []
    for theta in np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False):
        cfg = DispersionConfig(grid, degree, delta, float(theta), speed_ratio,
                               rho=rho, c_p=c_p)
        res = semidiscrete_dispersion(cfg)
        rows.append({"theta": float(theta),
                     "ratio_s": res.c_s_h / cfg.material.c_s,
                     "ratio_p": res.c_p_h / cfg.material.c_p})
    return rows


def dissipation_check(config: DispersionConfig) -> float:
    """Maximal relative imaginary part of the computed frequencies, from the
    general (non-Hermitian) eigenvalue solver; <= 1e-10 means non-dissipative."""
    material = config.material
    system = reference_system(config.grid, config.degree, material)
    red = bloch_reduce(system, config.wavevector())
    lam = la.eig(red.stiffness, red.mass, right=False)
    omegas = np.sqrt(lam.astype(complex))
    mags = np.abs(omegas)
    mags[mags == 0.0] = 1.0
    return float(np.max(np.abs(omegas.imag) / mags))


DISPERSION_CSV_FIELDS = ["grid", "k", "delta", "theta", "r", "q_rel",
                         "e_P", "e_S", "im_omega_max"]


def write_dispersion_csv(results: list[DispersionResult], path) -> None:
    with open(path, "w", newline="", encoding="ascii") as f:
        writer = csv.writer(f)
        writer.writerow(DISPERSION_CSV_FIELDS)
        for r in results:
            c = r.config
            writer.writerow([c.grid, c.degree, f"{c.delta:.12g}", f"{c.theta:.12g}",
                             f"{c.speed_ratio:.12g}", f"{c.q_rel:.12g}",
                             f"{r.e_p:.12e}", f"{r.e_s:.12e}",
                             f"{r.im_omega_max:.12e}"])


def write_cfl_csv(rows: list[tuple[str, int, float]], path) -> None:
    with open(path, "w", newline="", encoding="ascii") as f:
        writer = csv.writer(f)
        writer.writerow(["grid", "k", "q_cfl"])
        for grid, degree, q in rows:
            writer.writerow([grid, degree, f"{q:.12e}"])
