"""Scalar virtual element DOF layout and the computable projection matrices.

Per element the degrees of freedom are: vertex values, edge moments against scaled
edge monomials of degree <= k-2, and interior moments against the element polynomial
basis of degree <= k-2.  All projectors are returned as matrices acting on the local
scalar DOF vector and expressed in the element polynomial basis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

from .mesh import DIRICHLET, PolygonalMesh
from .polybasis import (
    QuadratureRule,
    basis_dimension,
    monomial_derivative_map,
    monomial_grams,
    monomial_laplacian_map,
    orthonormalize,
    polygon_quadrature,
    scaled_monomials,
)


class ProjectorError(RuntimeError):
    """Raised when a local projector system is numerically singular."""


@dataclass(frozen=True)
class ScalarDofLayout:
    degree: int
    n_vertices: int
    moments_per_edge: int
    n_interior: int

    @property
    def n_total(self) -> int:
        return self.n_vertices * (1 + self.moments_per_edge) + self.n_interior

    def vertex_dof(self, local_vertex: int) -> int:
        return local_vertex

    def edge_dofs(self, local_edge: int) -> np.ndarray:
        start = self.n_vertices + local_edge * self.moments_per_edge
        return np.arange(start, start + self.moments_per_edge)

    @property
    def interior_dofs(self) -> np.ndarray:
        start = self.n_vertices * (1 + self.moments_per_edge)
        return np.arange(start, start + self.n_interior)


def scalar_layout(degree: int, n_vertices: int) -> ScalarDofLayout:
    return ScalarDofLayout(degree, n_vertices, degree - 1, basis_dimension(degree - 2))


class DofMap:
    """Global enumeration of scalar DOFs: all vertex values, then edge moments in
    mesh edge order (moment degree ascending), then interior moments in cell order.
    Vector DOFs are two stacked scalar blocks (x component first)."""

    def __init__(self, mesh: PolygonalMesh, degree: int):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.mesh = mesh
        self.degree = degree
        self.per_edge = degree - 1
        self.per_cell = basis_dimension(degree - 2)
        self.edge_offset = mesh.n_vertices
        self.cell_offset = self.edge_offset + mesh.n_edges * self.per_edge
        self.n_scalar = self.cell_offset + mesh.n_cells * self.per_cell
        self._cell_cache: dict[int, np.ndarray] = {}

    @property
    def n_vector(self) -> int:
        return 2 * self.n_scalar

    def edge_dofs(self, e: int) -> np.ndarray:
        start = self.edge_offset + e * self.per_edge
        return np.arange(start, start + self.per_edge)

    def cell_scalar_dofs(self, ci: int) -> np.ndarray:
        cached = self._cell_cache.get(ci)
        if cached is not None:
            return cached
        cell = self.mesh.cells[ci]
        parts = [cell]
        for e in self.mesh.cell_edges[ci]:
            parts.append(self.edge_dofs(int(e)))
        start = self.cell_offset + ci * self.per_cell
        parts.append(np.arange(start, start + self.per_cell))
        dofs = np.concatenate(parts).astype(int)
        self._cell_cache[ci] = dofs
        return dofs

    def cell_vector_dofs(self, ci: int) -> np.ndarray:
        s = self.cell_scalar_dofs(ci)
        return np.concatenate([s, s + self.n_scalar])

    def dirichlet_scalar_dofs(self) -> np.ndarray:
        fixed = set()
        for e in self.mesh.boundary_edges():
            if self.mesh.edge_tags[e] != DIRICHLET:
                continue
            a, b = self.mesh.edges[e]
            fixed.add(int(a))
            fixed.add(int(b))
            fixed.update(map(int, self.edge_dofs(int(e))))
        return np.array(sorted(fixed), dtype=int)


@dataclass(frozen=True)
class EdgeTrace:
    """Per-edge data for boundary integration of virtual functions.

    ``trace`` maps the local scalar DOF vector to function values at the edge
    quadrature points; ``param`` holds the edge coordinates t in [-1/2, 1/2]
    measured along the global edge orientation.
    """

    points: np.ndarray
    weights: np.ndarray
    param: np.ndarray
    trace: np.ndarray
    normal: np.ndarray
    length: float


class ElementOperators:
    """All per-element VEM machinery: basis, quadrature, Grams, DOF matrix D,
    and the projectors PiNabla (elliptic), Pi0 (enhanced L2), Pi0x/Pi0y."""

    def __init__(self, mesh: PolygonalMesh, cell_index: int, degree: int, *,
                 basis_kind: str = "monomial", quad_boost: int = 0):
        if basis_kind not in ("monomial", "orthonormal"):
            raise ValueError("basis_kind must be 'monomial' or 'orthonormal'")
        self.cell_index = cell_index
        self.degree = degree
        self.mesh = mesh
        cell = mesh.cells[cell_index]
        self.vertex_coords = mesh.vertices[cell]
        self.geometry = mesh.cell_geometry(cell_index)
        self.layout = scalar_layout(degree, len(cell))

        self.rule: QuadratureRule = polygon_quadrature(
            self.vertex_coords, 2 * degree + 2 + quad_boost,
            centroid=self.geometry.centroid, name=f"cell {cell_index}")
        basis = scaled_monomials(self.geometry.centroid, self.geometry.diameter, degree)
        if basis_kind == "orthonormal":
            basis = orthonormalize(basis, self.rule)
        self.basis = basis
        self.grams = monomial_grams(basis, self.rule)

        self.n_k = basis_dimension(degree)
        self.n_km1 = basis_dimension(degree - 1)
        self.n_km2 = basis_dimension(degree - 2)

        self._build_edges(quad_boost)
        self._build_dof_matrix()
        self._build_elliptic_projector()
        self._build_l2_projectors()

    # -- edge traces --------------------------------------------------------

    def _build_edges(self, quad_boost: int):
        k = self.degree
        cell = self.mesh.cells[self.cell_index]
        signs = self.mesh.cell_edge_signs[self.cell_index]
        n = len(cell)
        npts = k + 1 + quad_boost
        gx, gw = np.polynomial.legendre.leggauss(npts)
        t = 0.5 * gx  # edge coordinate in [-1/2, 1/2]

        # edge polynomials are represented internally in shifted Legendre for
        # conditioning; the DOFs themselves stay monomial moments
        vander = npleg.legvander(2.0 * t, k)
        a_sys = np.zeros((k + 1, k + 1))
        a_sys[0] = npleg.legvander(np.array([-1.0]), k)[0]
        a_sys[1] = npleg.legvander(np.array([1.0]), k)[0]
        if k >= 2:
            nmom = k + 1
            mx, mw = np.polynomial.legendre.leggauss(nmom)
            mt = 0.5 * mx
            mvander = npleg.legvander(2.0 * mt, k)
            for ell in range(k - 1):
                a_sys[2 + ell] = (0.5 * mw * mt ** ell) @ mvander
        trace_coeff = np.linalg.solve(a_sys.T, vander.T).T  # (npts, k+1)

        edges = []
        total = self.layout.n_total
        for loc in range(n):
            a = self.mesh.vertices[cell[loc]]
            b = self.mesh.vertices[cell[(loc + 1) % n]]
            length = float(np.hypot(*(b - a)))
            tangent = (b - a) / length
            normal = np.array([tangent[1], -tangent[0]])  # outward for a CCW loop
            if signs[loc] > 0:
                start, end = a, b
                start_loc, end_loc = loc, (loc + 1) % n
            else:
                start, end = b, a
                start_loc, end_loc = (loc + 1) % n, loc
            mid = 0.5 * (start + end)
            pts = mid[None, :] + t[:, None] * (end - start)[None, :]
            weights = gw * 0.5 * length
            cols = np.concatenate([[start_loc, end_loc], self.layout.edge_dofs(loc)])
            trace = np.zeros((npts, total))
            trace[:, cols] = trace_coeff
            edges.append(EdgeTrace(pts, weights, t, trace, normal, length))
        self.edge_traces = edges

    def boundary_matrix(self, values_per_edge) -> np.ndarray:
        """sum_E int_E g(x) phi_i ds given ``values_per_edge[j]`` = g at edge j's points."""
        out = np.zeros(self.layout.n_total)
        for edge, vals in zip(self.edge_traces, values_per_edge):
            out += (edge.weights * vals) @ edge.trace
        return out

    # -- DOF matrix ---------------------------------------------------------

    def _build_dof_matrix(self):
        lay = self.layout
        d = np.zeros((lay.n_total, self.n_k))
        d[:lay.n_vertices] = self.basis.eval(self.vertex_coords)
        for loc, edge in enumerate(self.edge_traces):
            rows = lay.edge_dofs(loc)
            vals = self.basis.eval(edge.points)
            for ell in range(lay.moments_per_edge):
                d[rows[ell]] = (edge.weights * edge.param ** ell) @ vals / edge.length
        if lay.n_interior:
            d[lay.interior_dofs] = self.grams.mass[:self.n_km2, :] / self.geometry.area
        self.dof_matrix = d

    # -- elliptic projector --------------------------------------------------

    def _expand_in_interior_basis(self, mono_coeffs: np.ndarray) -> np.ndarray:
        """Re-express degree <= k-2 monomial expansions in the element basis used for
        the interior moments (identity for the monomial basis)."""
        if self.basis.coeffs is None:
            return mono_coeffs
        c22 = self.basis.coeffs[:self.n_km2, :self.n_km2]
        return np.linalg.solve(c22, mono_coeffs)

    def _build_elliptic_projector(self):
        lay = self.layout
        area = self.geometry.area
        g = self.grams.stiffness().copy()
        b = np.zeros((self.n_k, lay.n_total))
        for edge in self.edge_traces:
            dx, dy = self.basis.eval_gradient(edge.points)
            dn = dx * edge.normal[0] + dy * edge.normal[1]
            b += dn.T @ (edge.weights[:, None] * edge.trace)
        if self.n_km2:
            lap = monomial_laplacian_map(self.degree, self.geometry.diameter)
            if self.basis.coeffs is not None:
                lap = lap @ self.basis.coeffs
            lap = self._expand_in_interior_basis(lap)
            b[:, lay.interior_dofs] -= area * lap.T

        # mean-value constraint replaces the constant-monomial row
        if self.degree == 1:
            perimeter = sum(e.length for e in self.edge_traces)
            row_g = np.zeros(self.n_k)
            row_b = np.zeros(lay.n_total)
            for edge in self.edge_traces:
                row_g += edge.weights @ self.basis.eval(edge.points)
                row_b += edge.weights @ edge.trace
            g[0] = row_g / perimeter
            b[0] = row_b / perimeter
        else:
            # row: (1/|P|) int p_b . x_b = first interior moment of phi; basis function 0
            # is constant so the scale factors cancel on both sides
            g[0] = self.grams.mass[0] / area
            row = np.zeros(lay.n_total)
            row[lay.interior_dofs[0]] = 1.0
            b[0] = row

        cond = np.linalg.cond(g)
        if not np.isfinite(cond) or cond > 1e15:
            raise ProjectorError(
                f"cell {self.cell_index}: elliptic projector system is singular "
                f"(cond ~ {cond:.2e})")
        self.projector_condition = float(cond)
        self.pi_nabla = np.linalg.solve(g, b)

    # -- L2 projectors -------------------------------------------------------

    def _build_l2_projectors(self):
        lay = self.layout
        area = self.geometry.area
        mass = self.grams.mass

        c = mass @ self.pi_nabla
        if self.n_km2:
            c[:self.n_km2] = 0.0
            c[np.arange(self.n_km2)[:, None], lay.interior_dofs[None, :]] = \
                area * np.eye(self.n_km2)
        self.pi_zero = np.linalg.solve(mass, c)

        bx = np.zeros((self.n_km1, lay.n_total))
        by = np.zeros((self.n_km1, lay.n_total))
        for edge in self.edge_traces:
            vals = self.basis.eval(edge.points)[:, :self.n_km1]
            wtr = edge.weights[:, None] * edge.trace
            bx += edge.normal[0] * (vals.T @ wtr)
            by += edge.normal[1] * (vals.T @ wtr)
        if self.n_km2:
            dxm = monomial_derivative_map(self.degree - 1, 0, self.geometry.diameter)
            dym = monomial_derivative_map(self.degree - 1, 1, self.geometry.diameter)
            if self.basis.coeffs is not None:
                c11 = self.basis.coeffs[:self.n_km1, :self.n_km1]
                dxm = dxm @ c11
                dym = dym @ c11
            dxm = self._expand_in_interior_basis(dxm)
            dym = self._expand_in_interior_basis(dym)
            bx[:, lay.interior_dofs] -= area * dxm.T
            by[:, lay.interior_dofs] -= area * dym.T
        mass_km1 = mass[:self.n_km1, :self.n_km1]
        self.pi_zero_x = np.linalg.solve(mass_km1, bx)
        self.pi_zero_y = np.linalg.solve(mass_km1, by)

    # -- DOF functionals ------------------------------------------------------

    def dof_functionals(self, fn) -> np.ndarray:
        """Scalar DOFs of a pointwise-evaluable function: vertex values, normalized
        edge moments, normalized interior moments.  The interpolation entry point."""
        lay = self.layout
        out = np.empty(lay.n_total)
        out[:lay.n_vertices] = fn(self.vertex_coords)
        for loc, edge in enumerate(self.edge_traces):
            vals = fn(edge.points)
            rows = lay.edge_dofs(loc)
            for j in range(lay.moments_per_edge):
                out[rows[j]] = (edge.weights * edge.param ** j) @ vals / edge.length
        if lay.n_interior:
            vals = fn(self.rule.points)
            qb = self.basis.eval(self.rule.points)[:, :self.n_km2]
            out[lay.interior_dofs] = (self.rule.weights * vals) @ qb / self.geometry.area
        return out

    # DOF-space projector matrices used by the stabilization terms

    def dof_projector_elliptic(self) -> np.ndarray:
        return self.dof_matrix @ self.pi_nabla

    def dof_projector_l2(self) -> np.ndarray:
        return self.dof_matrix @ self.pi_zero


def build_element_operators(mesh: PolygonalMesh, degree: int, *,
                            basis_kind: str = "monomial",
                            quad_boost: int = 0) -> list[ElementOperators]:
    return [ElementOperators(mesh, ci, degree, basis_kind=basis_kind,
                             quad_boost=quad_boost)
            for ci in range(mesh.n_cells)]
