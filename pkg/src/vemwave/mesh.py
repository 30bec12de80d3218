"""Polygonal meshes: structure, regularity validation, built-in families, periodic
reference cells, and a plain-text file format."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polybasis import polygon_area_centroid, polygon_diameter

INTERIOR = "interior"
DIRICHLET = "dirichlet"
NEUMANN = "neumann"
PERIODIC_MASTER = "periodic-master"
PERIODIC_SLAVE = "periodic-slave"

FAMILIES = ("random_quad", "hexagonal", "nonconvex_octagon")
PERIODIC_GRIDS = ("quad", "tria", "c1", "c2", "c3", "c4")


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


class MeshParseError(MeshError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class ElementGeometry:
    centroid: np.ndarray
    diameter: float
    area: float
    edge_midpoints: np.ndarray
    edge_lengths: np.ndarray
    edge_normals: np.ndarray  # outward unit normals, one per loop edge


@dataclass
class PeriodicPairing:
    """Slave -> (master, offset) maps; offset is the translation slave = master + offset."""

    period: float
    vertex_master: dict = field(default_factory=dict)
    edge_master: dict = field(default_factory=dict)


class PolygonalMesh:
    """Immutable planar mesh of simple polygons with a global, fixed edge orientation.

    Edges are oriented from their lexicographically smaller endpoint (by coordinate),
    which is translation invariant and therefore consistent across periodic images.
    """

    def __init__(self, vertices, cells, boundary_tags=None):
        self.vertices = np.ascontiguousarray(np.asarray(vertices, dtype=float))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        self.cells = [np.asarray(c, dtype=int) for c in cells]
        self.periodic: PeriodicPairing | None = None
        self._geometry_cache: dict[int, ElementGeometry] = {}
        self._build_connectivity()
        self._apply_boundary_tags(boundary_tags)

    # -- construction ------------------------------------------------------

    def _lex_less(self, a: int, b: int) -> bool:
        pa, pb = self.vertices[a], self.vertices[b]
        if pa[0] != pb[0]:
            return pa[0] < pb[0]
        return pa[1] < pb[1]

    def _build_connectivity(self):
        nv = len(self.vertices)
        for ci, cell in enumerate(self.cells):
            if len(cell) < 3:
                raise MeshError(f"cell {ci} has fewer than 3 vertices")
            if cell.min() < 0 or cell.max() >= nv:
                raise MeshError(f"cell {ci} references a missing vertex")
            if len(np.unique(cell)) != len(cell):
                raise MeshError(f"cell {ci} repeats a vertex")
            area = _signed_area(self.vertices[cell])
            if area <= 0:
                raise MeshError(f"cell {ci} is not counterclockwise (signed area {area:g})")

        edge_index: dict[tuple[int, int], int] = {}
        edges = []
        edge_cells = []
        cell_edges = []
        cell_edge_signs = []
        for ci, cell in enumerate(self.cells):
            n = len(cell)
            eids = np.empty(n, dtype=int)
            signs = np.empty(n, dtype=int)
            for k in range(n):
                a, b = int(cell[k]), int(cell[(k + 1) % n])
                key = (min(a, b), max(a, b))
                if key not in edge_index:
                    if self._lex_less(a, b):
                        edges.append((a, b))
                    else:
                        edges.append((b, a))
                    edge_index[key] = len(edges) - 1
                    edge_cells.append([ci])
                else:
                    owners = edge_cells[edge_index[key]]
                    if len(owners) >= 2:
                        raise MeshError(
                            f"edge {key} is shared by more than two cells ({owners + [ci]})")
                    owners.append(ci)
                e = edge_index[key]
                eids[k] = e
                signs[k] = 1 if edges[e][0] == a else -1
            cell_edges.append(eids)
            cell_edge_signs.append(signs)

        self.edges = np.asarray(edges, dtype=int)
        self.cell_edges = cell_edges
        self.cell_edge_signs = cell_edge_signs
        self.edge_cells = np.full((len(edges), 2), -1, dtype=int)
        for e, owners in enumerate(edge_cells):
            for j, c in enumerate(owners):
                self.edge_cells[e, j] = c
        self.bbox = (self.vertices.min(axis=0), self.vertices.max(axis=0))

    def _apply_boundary_tags(self, boundary_tags):
        self.edge_tags = np.array(
            [INTERIOR if self.edge_cells[e, 1] >= 0 else DIRICHLET
             for e in range(self.n_edges)], dtype=object)
        if boundary_tags:
            lookup = {tuple(sorted(k)): v for k, v in boundary_tags.items()}
            for e in range(self.n_edges):
                key = tuple(sorted(map(int, self.edges[e])))
                if key in lookup:
                    if self.edge_cells[e, 1] >= 0:
                        raise MeshError(f"edge {key} is interior but was given a boundary tag")
                    self.edge_tags[e] = lookup[key]

    # -- queries -----------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def boundary_edges(self) -> np.ndarray:
        return np.where(self.edge_cells[:, 1] < 0)[0]

    def edge_vector(self, e: int) -> np.ndarray:
        a, b = self.edges[e]
        return self.vertices[b] - self.vertices[a]

    def edge_normal(self, e: int) -> np.ndarray:
        t = self.edge_vector(e)
        t = t / np.hypot(*t)
        return np.array([t[1], -t[0]])

    def cell_geometry(self, ci: int) -> ElementGeometry:
        geo = self._geometry_cache.get(ci)
        if geo is None:
            v = self.vertices[self.cells[ci]]
            area, centroid = polygon_area_centroid(v)
            vn = np.roll(v, -1, axis=0)
            tang = vn - v
            lengths = np.hypot(tang[:, 0], tang[:, 1])
            normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]
            geo = ElementGeometry(centroid, polygon_diameter(v), area,
                                  0.5 * (v + vn), lengths, normals)
            self._geometry_cache[ci] = geo
        return geo

    def max_diameter(self) -> float:
        return max(self.cell_geometry(c).diameter for c in range(self.n_cells))


def _signed_area(loop: np.ndarray) -> float:
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float((x * np.roll(y, -1) - np.roll(x, -1) * y).sum())


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _is_simple_polygon(loop: np.ndarray) -> bool:
    """O(n^2) segment-intersection check; cells are small so this is cheap."""
    n = len(loop)
    segs = [(loop[i], loop[(i + 1) % n]) for i in range(n)]

    def intersects(p, q, r, s):
        d1 = _cross2(q - p, r - p)
        d2 = _cross2(q - p, s - p)
        d3 = _cross2(s - r, p - r)
        d4 = _cross2(s - r, q - r)
        return (d1 * d2 < 0) and (d3 * d4 < 0)

    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (i + 1) % n == j or (j + 1) % n == i:
                continue  # adjacent segments share a vertex
            if intersects(*segs[i], *segs[j]):
                return False
    return True


def _point_segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.hypot(*(p - a - t * ab)))


@dataclass
class RegularityReport:
    star_shaped_ok: bool
    edge_ratio_min: float
    inradius_ratio_min: float
    smallest_ratio_cell: int
    violations: list


def validate_regularity(mesh: PolygonalMesh, rho_star: float) -> RegularityReport:
    """Check the mesh against the shape-regularity assumptions.

    Star-shapedness is verified with respect to the cell centroid (a sufficient
    condition); the reported inradius is the largest disk about the centroid that
    fits in the cell.  Edges are flagged when h_E < rho_star * h_P.
    """
    if not 0.0 < rho_star < 1.0:
        raise ValueError("rho_star must be in (0, 1)")
    violations = []
    star_ok = True
    edge_ratio_min = np.inf
    inradius_ratio_min = np.inf
    worst_cell = -1
    for ci, cell in enumerate(mesh.cells):
        loop = mesh.vertices[cell]
        if len(np.unique(cell)) != len(cell):
            raise MeshError(f"cell {ci} repeats a vertex")
        dists = np.hypot(*(loop - np.roll(loop, -1, axis=0)).T)
        if dists.min() < 1e-14 * max(dists.max(), 1.0):
            raise MeshError(f"cell {ci} has a degenerate (zero-length) edge")
        if not _is_simple_polygon(loop):
            raise MeshError(f"cell {ci} is not a simple polygon")
        geo = mesh.cell_geometry(ci)
        c = geo.centroid
        n = len(loop)
        inradius = np.inf
        for k in range(n):
            a, b = loop[k], loop[(k + 1) % n]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 0:
                star_ok = False
                violations.append((ci, f"centroid does not see edge {k}"))
            inradius = min(inradius, _point_segment_distance(c, a, b))
        ratios = geo.edge_lengths / geo.diameter
        if ratios.min() < edge_ratio_min:
            edge_ratio_min = float(ratios.min())
            worst_cell = ci
        if ratios.min() < rho_star:
            violations.append((ci, f"edge ratio {ratios.min():.4g} < rho_star"))
        inradius_ratio_min = min(inradius_ratio_min, inradius / geo.diameter)
    return RegularityReport(star_ok, edge_ratio_min, float(inradius_ratio_min),
                            worst_cell, violations)


# ---------------------------------------------------------------------------
# built-in mesh families on (0, 1)^2


def generate_family(family: str, level: int, seed: int = 0) -> PolygonalMesh:
    """Built-in test families on the unit square; each level halves the mesh size.

    random_quad        n x n quadrilaterals, nodes randomly displaced (seeded)
    hexagonal          mainly hexagonal cells, smoothly distorted
    nonconvex_octagon  indented-square octagons, all nonconvex
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    if family == "random_quad":
        return _random_quad_mesh(5 * 2 ** level, seed)
    if family == "hexagonal":
        return _hexagonal_mesh(2 * 2 ** level, seed)
    if family == "nonconvex_octagon":
        return _octagon_mesh(5 * 2 ** level)
    raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")


def _random_quad_mesh(n: int, seed: int) -> PolygonalMesh:
    rng = np.random.default_rng([seed, n, 1])
    h = 1.0 / n
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    verts = np.column_stack([xx.ravel(), yy.ravel()])
    shift = rng.uniform(-0.2 * h, 0.2 * h, size=verts.shape)
    interior_x = (verts[:, 0] > 0) & (verts[:, 0] < 1)
    interior_y = (verts[:, 1] > 0) & (verts[:, 1] < 1)
    # interior nodes move freely; boundary nodes slide along their side only
    verts[:, 0] += np.where(interior_x & interior_y, shift[:, 0],
                            np.where(interior_x, shift[:, 0], 0.0))
    verts[:, 1] += np.where(interior_x & interior_y, shift[:, 1],
                            np.where(interior_y, shift[:, 1], 0.0))
    cells = []
    for i in range(n):
        for j in range(n):
            v00 = i * (n + 1) + j
            v10 = (i + 1) * (n + 1) + j
            cells.append([v00, v10, v10 + 1, v00 + 1])
    return PolygonalMesh(verts, cells)


class _CellCollector:
    """Accumulates vertex loops given by coordinates and snaps shared vertices."""

    def __init__(self, snap: float = 1e-9):
        self.snap = snap
        self._index: dict[tuple[int, int], int] = {}
        self.vertices: list[tuple[float, float]] = []
        self.cells: list[list[int]] = []

    def _vertex(self, p) -> int:
        key = (round(p[0] / self.snap), round(p[1] / self.snap))
        i = self._index.get(key)
        if i is None:
            i = len(self.vertices)
            self._index[key] = i
            self.vertices.append((float(p[0]), float(p[1])))
        return i

    def add(self, loop: np.ndarray):
        loop = np.asarray(loop, dtype=float)
        if _signed_area(loop) < 0:
            loop = loop[::-1]
        ids = []
        for p in loop:
            i = self._vertex(p)
            if not ids or ids[-1] != i:
                ids.append(i)
        if len(ids) > 1 and ids[0] == ids[-1]:
            ids.pop()
        if len(ids) >= 3:
            self.cells.append(ids)

    def mesh(self) -> PolygonalMesh:
        return PolygonalMesh(np.asarray(self.vertices), self.cells)


def _clip_halfplane(loop, normal, offset):
    """Sutherland-Hodgman clip of ``loop`` against normal . x <= offset."""
    out = []
    n = len(loop)
    for i in range(n):
        a, b = loop[i], loop[(i + 1) % n]
        da = normal[0] * a[0] + normal[1] * a[1] - offset
        db = normal[0] * b[0] + normal[1] * b[1] - offset
        if da <= 1e-13:
            out.append(a)
            if db > 1e-13 and da < -1e-13:
                t = da / (da - db)
                out.append(a + t * (b - a))
        elif db < -1e-13:
            t = da / (da - db)
            out.append(a + t * (b - a))
    return np.asarray(out)


def _clip_to_unit_square(loop):
    for normal, offset in (((-1.0, 0.0), 0.0), ((1.0, 0.0), 1.0),
                           ((0.0, -1.0), 0.0), ((0.0, 1.0), 1.0)):
        if len(loop) == 0:
            return loop
        loop = _clip_halfplane(np.asarray(loop, dtype=float), normal, offset)
    return loop


def _honeycomb_cells(m: int):
    """Pointy-top honeycomb with 4 hexagons per 1/m-period, clipped to the unit square.

    Hexagon centers sit on the lattice p*(1/(2m), 0) + q*(1/(4m), 1/(2m)); the window
    corner coincides with a hexagon center so boundary pieces are quads/pentagons.
    """
    w = 1.0 / (4 * m)
    a = 3.0 / (8 * m)
    b = 1.0 / (8 * m)
    pieces = []
    for p in range(-(m + 2), 2 * m + 2):
        for q in range(-1, 2 * m + 2):
            cx = p / (2.0 * m) + q / (4.0 * m)
            cy = q / (2.0 * m)
            if cx < -2 * w or cx > 1 + 2 * w or cy < -a or cy > 1 + a:
                continue
            hexagon = np.array([
                [cx, cy + a], [cx - w, cy + b], [cx - w, cy - b],
                [cx, cy - a], [cx + w, cy - b], [cx + w, cy + b]])
            piece = _clip_to_unit_square(hexagon)
            if len(piece) >= 3 and abs(_signed_area(piece)) > 1e-13 / (m * m):
                pieces.append(piece)
    return pieces


def _hexagonal_mesh(m: int, seed: int) -> PolygonalMesh:
    col = _CellCollector(snap=1e-9 / m)
    for piece in _honeycomb_cells(m):
        col.add(piece)
    mesh = col.mesh()
    verts = mesh.vertices.copy()
    bump = 0.1 * np.sin(2 * np.pi * verts[:, 0]) * np.sin(2 * np.pi * verts[:, 1])
    verts[:, 0] += bump
    verts[:, 1] += bump
    return PolygonalMesh(verts, mesh.cells)


def _octagon_mesh(n: int) -> PolygonalMesh:
    """Indented-square octagons: every cell carries at least one reflex vertex."""
    if n < 2:
        raise ValueError("octagon family needs n >= 2")
    h = 1.0 / n
    d = 0.1 * h

    def hmid(i, j):
        # midpoint of the horizontal edge between cell (i, j-1) and (i, j)
        x, y = (i + 0.5) * h, j * h
        if j == 0 or j == n:
            return (x, y)
        if i == n - 1 and j == 1:
            return (x, y - d)  # indents cell (n-1, 0)
        return (x, y + d)

    def vmid(i, j):
        # midpoint of the vertical edge between cell (i-1, j) and (i, j)
        x, y = i * h, (j + 0.5) * h
        if i == 0 or i == n:
            return (x, y)
        if j == 0:
            return (x - d, y)  # indents cell (i-1, 0)
        return (x + d, y)

    col = _CellCollector(snap=1e-9 * h)
    for i in range(n):
        for j in range(n):
            x0, y0 = i * h, j * h
            x1, y1 = x0 + h, y0 + h
            col.add(np.array([
                (x0, y0), hmid(i, j), (x1, y0), vmid(i + 1, j),
                (x1, y1), hmid(i, j + 1), (x0, y1), vmid(i, j)]))
    return col.mesh()


def is_convex(loop: np.ndarray) -> bool:
    """True when no vertex of the CCW loop is strictly reflex."""
    v = np.asarray(loop, dtype=float)
    prev = v - np.roll(v, 1, axis=0)
    nxt = np.roll(v, -1, axis=0) - v
    cross = prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0]
    scale = max(abs(cross).max(), 1e-300)
    return bool((cross > -1e-12 * scale).all())


# ---------------------------------------------------------------------------
# periodic reference cells


def reference_periodic_cell(grid: str, h: float = 1.0) -> PolygonalMesh:
    """Square periodic cell of side h tiled by the requested pattern, with
    master/slave pairing attached (mesh.periodic) and periodic edge tags."""
    if h <= 0:
        raise ValueError("h must be positive")
    builder = {
        "quad": _cell_quad, "tria": _cell_tria, "c1": _cell_c1,
        "c2": _cell_c2, "c3": _cell_c3, "c4": _cell_c4,
    }.get(grid)
    if builder is None:
        raise ValueError(f"unknown periodic grid {grid!r}; choose from {PERIODIC_GRIDS}")
    col = _CellCollector(snap=1e-9 * h)
    for loop in builder():
        col.add(np.asarray(loop, dtype=float) * h)
    mesh = col.mesh()
    _attach_periodic_pairing(mesh, h)
    return mesh


def _cell_quad():
    return [[(0, 0), (1, 0), (1, 1), (0, 1)]]


def _cell_tria():
    # split along the (1,0)-(0,1) diagonal: a wave at theta = pi/4 then travels
    # along the pattern's mirror-symmetry direction
    return [[(0, 0), (1, 0), (0, 1)], [(1, 0), (1, 1), (0, 1)]]


def _cell_c1():
    """Honeycomb composite: two hexagons, two pentagons, four corner quads."""
    return _honeycomb_cells(1)


def _cell_c2():
    """One rotated square and four pentagons."""
    return [
        [(0.5, 0.25), (0.75, 0.5), (0.5, 0.75), (0.25, 0.5)],
        [(0, 0), (0.5, 0), (0.5, 0.25), (0.25, 0.5), (0, 0.5)],
        [(0.5, 0), (1, 0), (1, 0.5), (0.75, 0.5), (0.5, 0.25)],
        [(0.75, 0.5), (1, 0.5), (1, 1), (0.5, 1), (0.5, 0.75)],
        [(0, 0.5), (0.25, 0.5), (0.5, 0.75), (0.5, 1), (0, 1)],
    ]


def _cell_c3():
    """Four regular octagons; the gaps induce one rotated square, four edge
    triangles and four corner triangles."""
    t = 1.0 / (2.0 * (2.0 + np.sqrt(2.0)))
    oct0 = [(t, 0), (0.5 - t, 0), (0.5, t), (0.5, 0.5 - t),
            (0.5 - t, 0.5), (t, 0.5), (0, 0.5 - t), (0, t)]
    cells = []
    for sx in (0.0, 0.5):
        for sy in (0.0, 0.5):
            cells.append([(x + sx, y + sy) for x, y in oct0])
    cells += [
        [(0.5, 0.5 - t), (0.5 + t, 0.5), (0.5, 0.5 + t), (0.5 - t, 0.5)],  # center square
        [(0.5 - t, 0), (0.5 + t, 0), (0.5, t)],       # bottom edge triangle
        [(0.5 - t, 1), (0.5, 1 - t), (0.5 + t, 1)],   # top edge triangle
        [(0, 0.5 - t), (t, 0.5), (0, 0.5 + t)],       # left edge triangle
        [(1, 0.5 - t), (1, 0.5 + t), (1 - t, 0.5)],   # right edge triangle
        [(0, 0), (t, 0), (0, t)],
        [(1 - t, 0), (1, 0), (1, t)],
        [(1, 1 - t), (1, 1), (1 - t, 1)],
        [(0, 1 - t), (t, 1), (0, 1)],
    ]
    return cells


def _cell_c4():
    """One hexagon and four corner triangles."""
    return [
        [(0.5, 0), (1, 0.25), (1, 0.75), (0.5, 1), (0, 0.75), (0, 0.25)],
        [(0, 0), (0.5, 0), (0, 0.25)],
        [(0.5, 0), (1, 0), (1, 0.25)],
        [(1, 0.75), (1, 1), (0.5, 1)],
        [(0, 0.75), (0.5, 1), (0, 1)],
    ]


def _attach_periodic_pairing(mesh: PolygonalMesh, h: float):
    tol = 1e-12 * h
    pairing = PeriodicPairing(period=h)

    def canonical(x):
        return 0.0 if abs(x - h) < tol else x

    pos_index = {}
    boundary_vertices = set()
    for e in mesh.boundary_edges():
        boundary_vertices.update(map(int, mesh.edges[e]))
    for v in boundary_vertices:
        p = mesh.vertices[v]
        pos_index[(round(p[0] / tol), round(p[1] / tol))] = v
    for v in sorted(boundary_vertices):
        p = mesh.vertices[v]
        mx, my = canonical(p[0]), canonical(p[1])
        if (mx, my) == (p[0], p[1]):
            continue
        key = (round(mx / tol), round(my / tol))
        if key not in pos_index:
            raise MeshError(f"periodic pairing: vertex {v} at {tuple(p)} has no master image")
        pairing.vertex_master[v] = (pos_index[key], (p[0] - mx, p[1] - my))

    edge_mid_index = {}
    for e in mesh.boundary_edges():
        a, b = mesh.edges[e]
        mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        edge_mid_index[(round(mid[0] / tol), round(mid[1] / tol))] = e
    for e in sorted(mesh.boundary_edges()):
        a, b = mesh.edges[e]
        mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        on_right = abs(mesh.vertices[a][0] - h) < tol and abs(mesh.vertices[b][0] - h) < tol
        on_top = abs(mesh.vertices[a][1] - h) < tol and abs(mesh.vertices[b][1] - h) < tol
        if not (on_right or on_top):
            mesh.edge_tags[e] = PERIODIC_MASTER
            continue
        offset = (h if on_right else 0.0, h if on_top else 0.0)
        key = (round((mid[0] - offset[0]) / tol), round((mid[1] - offset[1]) / tol))
        if key not in edge_mid_index:
            raise MeshError(f"periodic pairing: edge {e} has no master image")
        pairing.edge_master[e] = (edge_mid_index[key], offset)
        mesh.edge_tags[e] = PERIODIC_SLAVE
    mesh.periodic = pairing


# ---------------------------------------------------------------------------
# text file format


def write_mesh(mesh: PolygonalMesh, path) -> None:
    """polymesh 1 text format; boundary section lists tagged boundary edges only."""
    with open(path, "w", encoding="ascii") as f:
        f.write("polymesh 1\n")
        f.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        f.write(f"cells {mesh.n_cells}\n")
        for cell in mesh.cells:
            f.write(str(len(cell)) + " " + " ".join(str(int(v)) for v in cell) + "\n")
        boundary = [e for e in mesh.boundary_edges()
                    if mesh.edge_tags[e] in (DIRICHLET, NEUMANN)]
        f.write(f"boundary {len(boundary)}\n")
        for e in boundary:
            a, b = mesh.edges[e]
            f.write(f"{a} {b} {mesh.edge_tags[e]}\n")


def read_mesh(path) -> PolygonalMesh:
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()

    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            line = lines[pos].strip()
            pos += 1
            if line:
                return line, pos
        raise MeshParseError(path, pos if pos else 1, "unexpected end of file")

    line, ln = next_line()
    if line != "polymesh 1":
        raise MeshParseError(path, ln, f"expected header 'polymesh 1', got {line!r}")

    line, ln = next_line()
    parts = line.split()
    if len(parts) != 2 or parts[0] != "vertices":
        raise MeshParseError(path, ln, "expected 'vertices N'")
    n_vertices = int(parts[1])
    verts = np.empty((n_vertices, 2))
    for i in range(n_vertices):
        line, ln = next_line()
        try:
            x, y = map(float, line.split())
        except ValueError:
            raise MeshParseError(path, ln, f"bad vertex line {line!r}") from None
        verts[i] = (x, y)

    line, ln = next_line()
    parts = line.split()
    if len(parts) != 2 or parts[0] != "cells":
        raise MeshParseError(path, ln, "expected 'cells M'")
    cells = []
    for _ in range(int(parts[1])):
        line, ln = next_line()
        nums = line.split()
        try:
            count = int(nums[0])
            ids = [int(v) for v in nums[1:]]
        except (ValueError, IndexError):
            raise MeshParseError(path, ln, f"bad cell line {line!r}") from None
        if len(ids) != count:
            raise MeshParseError(path, ln, f"cell declares {count} vertices, lists {len(ids)}")
        if any(v < 0 or v >= n_vertices for v in ids):
            raise MeshParseError(path, ln, "cell references a missing vertex")
        cells.append(ids)

    line, ln = next_line()
    parts = line.split()
    if len(parts) != 2 or parts[0] != "boundary":
        raise MeshParseError(path, ln, "expected 'boundary B'")
    tags = {}
    for _ in range(int(parts[1])):
        line, ln = next_line()
        parts = line.split()
        if len(parts) != 3 or parts[2] not in (DIRICHLET, NEUMANN):
            raise MeshParseError(path, ln, f"bad boundary line {line!r}")
        tags[(int(parts[0]), int(parts[1]))] = parts[2]

    try:
        return PolygonalMesh(verts, cells, boundary_tags=tags)
    except MeshError as exc:
        raise MeshParseError(path, ln, str(exc)) from exc
