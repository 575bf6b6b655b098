"""Simplicial 2D meshes with facet topology, normals, and boundary tags.

A mesh is a conforming triangulation: cells are counterclockwise vertex
triples, facets are the edges shared by one (boundary) or two (interior)
cells.  Boundary facets carry a tag, ``D`` (Dirichlet) or ``N`` (Neumann);
interior facets are tagged ``interior``.  Cell and facet diameters are the
longest-edge / edge lengths, which coincide with the geometric diameters for
simplices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshFormatError, TopologyError

INTERIOR = "interior"
DIRICHLET = "D"
NEUMANN = "N"

_AREA_RTOL = 1e-12


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation with precomputed facet topology.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array, counterclockwise triples
    facets : (nf, 2) int array, vertex pairs with ``a < b``
    facet_cells : (nf, 2) int array, adjacent cells (second entry -1 on the
        boundary)
    cell_facets : (nc, 3) int array, facet index of local edge ``e``
        (connecting local vertices ``e`` and ``e+1 mod 3``)
    cell_facet_signs : (nc, 3) float array, ``sign * facet_normal`` is the
        outward normal of the cell on that edge
    facet_normal : (nf, 2) float array, unit normals with a fixed global
        orientation per facet
    facet_tag : (nf,) str array, ``interior`` / ``D`` / ``N``
    h_cell, h_facet : per-cell / per-facet diameters
    cell_area : (nc,) float array
    domain_area : float
    """

    vertices: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    facet_cells: np.ndarray
    cell_facets: np.ndarray
    cell_facet_signs: np.ndarray
    facet_normal: np.ndarray
    facet_tag: np.ndarray
    h_cell: np.ndarray
    h_facet: np.ndarray
    cell_area: np.ndarray
    domain_area: float = field(default=0.0)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def num_facets(self) -> int:
        return self.facets.shape[0]

    @property
    def h_max(self) -> float:
        return float(self.h_cell.max())

    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] < 0)

    def interior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] >= 0)

    def facets_tagged(self, tag: str) -> np.ndarray:
        return np.flatnonzero(self.facet_tag == tag)

    def facet_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.facets[:, 0]] + self.vertices[self.facets[:, 1]])


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def build_mesh(vertices, cells, boundary_tags=None) -> Mesh:
    """Construct a :class:`Mesh` from raw vertex/cell arrays.

    ``boundary_tags`` maps a sorted vertex pair to ``D`` or ``N``; untagged
    boundary facets default to Dirichlet.  Clockwise cells are reoriented;
    degenerate cells, duplicate cells, and facets shared by more than two
    cells are rejected.
    """
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
        raise TopologyError("cell refers to a vertex index out of range")

    v = vertices
    e1 = v[cells[:, 1]] - v[cells[:, 0]]
    e2 = v[cells[:, 2]] - v[cells[:, 0]]
    twice_area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(twice_area == 0.0):
        bad = int(np.flatnonzero(twice_area == 0.0)[0])
        raise TopologyError(f"cell {bad} is degenerate (zero area)")
    flip = twice_area < 0
    if np.any(flip):
        cells = cells.copy()
        cells[flip, 1], cells[flip, 2] = cells[flip, 2], cells[flip, 1]
        twice_area = np.abs(twice_area)

    seen = set()
    for c, tri in enumerate(cells):
        key = tuple(sorted(tri))
        if len(set(key)) != 3:
            raise TopologyError(f"cell {c} repeats a vertex")
        if key in seen:
            raise TopologyError(f"cell {c} duplicates an earlier cell")
        seen.add(key)

    # Facets in first-seen order while scanning cells: deterministic numbering.
    facet_index: dict[tuple[int, int], int] = {}
    facet_list: list[tuple[int, int]] = []
    adjacency: list[list[int]] = []
    cell_facets = np.empty((len(cells), 3), dtype=np.int64)
    for c, tri in enumerate(cells):
        for e in range(3):
            a, b = int(tri[e]), int(tri[(e + 1) % 3])
            key = (a, b) if a < b else (b, a)
            f = facet_index.get(key)
            if f is None:
                f = len(facet_list)
                facet_index[key] = f
                facet_list.append(key)
                adjacency.append([])
            if len(adjacency[f]) >= 2:
                raise TopologyError(f"facet {key} is shared by more than two cells")
            adjacency[f].append(c)
            cell_facets[c, e] = f

    facets = np.array(facet_list, dtype=np.int64).reshape(-1, 2)
    facet_cells = np.full((len(facets), 2), -1, dtype=np.int64)
    for f, adj in enumerate(adjacency):
        facet_cells[f, : len(adj)] = adj

    tangent = v[facets[:, 1]] - v[facets[:, 0]]
    h_facet = np.linalg.norm(tangent, axis=1)
    facet_normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / h_facet[:, None]

    # Outward normal of cell c on local edge e is the clockwise rotation of
    # the ccw-traversed edge direction; the stored sign reconciles it with the
    # globally oriented facet normal.
    cell_facet_signs = np.empty((len(cells), 3))
    for c, tri in enumerate(cells):
        for e in range(3):
            a, b = int(tri[e]), int(tri[(e + 1) % 3])
            d = v[b] - v[a]
            n_out = np.array([d[1], -d[0]])
            f = cell_facets[c, e]
            cell_facet_signs[c, e] = 1.0 if float(n_out @ facet_normal[f]) > 0 else -1.0

    tags = np.full(len(facets), INTERIOR, dtype=object)
    boundary = facet_cells[:, 1] < 0
    tags[boundary] = DIRICHLET
    if boundary_tags:
        for key, tag in boundary_tags.items():
            key = tuple(sorted(int(i) for i in key))
            f = facet_index.get(key)
            if f is None:
                raise TopologyError(f"tagged facet {key} does not exist")
            if not boundary[f]:
                raise TopologyError(f"tagged facet {key} is not on the boundary")
            if tag not in (DIRICHLET, NEUMANN):
                raise TopologyError(f"unknown boundary tag {tag!r} for facet {key}")
            tags[f] = tag

    edge_len = np.empty((len(cells), 3))
    for e in range(3):
        edge_len[:, e] = h_facet[cell_facets[:, e]]
    h_cell = edge_len.max(axis=1)
    cell_area = 0.5 * twice_area

    return Mesh(
        vertices=_freeze(vertices),
        cells=_freeze(cells),
        facets=_freeze(facets),
        facet_cells=_freeze(facet_cells),
        cell_facets=_freeze(cell_facets),
        cell_facet_signs=_freeze(cell_facet_signs),
        facet_normal=_freeze(facet_normal),
        facet_tag=_freeze(tags),
        h_cell=_freeze(h_cell),
        h_facet=_freeze(h_facet),
        cell_area=_freeze(cell_area),
        domain_area=float(cell_area.sum()),
    )


def generate_structured(n: int, neumann_where=None) -> Mesh:
    """n-by-n grid on the unit square, each square split along its
    lower-left to upper-right diagonal.  All boundary facets are Dirichlet
    unless ``neumann_where(x, y)`` holds at a facet midpoint."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    xs = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            ll, lr = vid(i, j), vid(i + 1, j)
            ur, ul = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((ll, lr, ur))
            cells.append((ll, ur, ul))
    mesh = build_mesh(vertices, cells)
    if neumann_where is not None:
        mesh = retag_boundary(
            mesh, lambda x, y: NEUMANN if neumann_where(x, y) else DIRICHLET
        )
    return mesh


def generate_lshape(n: int) -> Mesh:
    """Structured triangulation of the L-shaped domain
    ``(-1,1)^2`` minus the closed quadrant ``x >= 0, y <= 0``, with the
    re-entrant corner at the origin.  ``n`` (even) is the number of grid
    intervals across the full width."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if n % 2 != 0:
        raise ValueError("n must be even so the re-entrant corner lies on the grid")
    xs = np.linspace(-1.0, 1.0, n + 1)
    index = -np.ones((n + 1, n + 1), dtype=np.int64)
    vertices = []
    cells = []

    def vid(i, j):
        if index[i, j] < 0:
            index[i, j] = len(vertices)
            vertices.append((xs[i], xs[j]))
        return index[i, j]

    for j in range(n):
        for i in range(n):
            xc = 0.5 * (xs[i] + xs[i + 1])
            yc = 0.5 * (xs[j] + xs[j + 1])
            if xc > 0 and yc < 0:
                continue
            ll, lr = vid(i, j), vid(i + 1, j)
            ur, ul = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((ll, lr, ur))
            cells.append((ll, ur, ul))
    return build_mesh(np.array(vertices), cells)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four congruent children (red refinement).
    Boundary children inherit the parent facet's tag."""
    nv = mesh.num_vertices
    mid = 0.5 * (mesh.vertices[mesh.facets[:, 0]] + mesh.vertices[mesh.facets[:, 1]])
    vertices = np.vstack([mesh.vertices, mid])

    cells = []
    for c in range(mesh.num_cells):
        a, b, d = (int(i) for i in mesh.cells[c])
        mab = nv + int(mesh.cell_facets[c, 0])
        mbd = nv + int(mesh.cell_facets[c, 1])
        mda = nv + int(mesh.cell_facets[c, 2])
        cells.extend([(a, mab, mda), (mab, b, mbd), (mda, mbd, d), (mab, mbd, mda)])

    tags = {}
    for f in mesh.boundary_facets():
        tag = mesh.facet_tag[f]
        a, b = (int(i) for i in mesh.facets[f])
        m = nv + int(f)
        tags[tuple(sorted((a, m)))] = tag
        tags[tuple(sorted((m, b)))] = tag
    return build_mesh(vertices, cells, tags)


def retag_boundary(mesh: Mesh, tag_fn) -> Mesh:
    """Return a copy of ``mesh`` whose boundary tags are
    ``tag_fn(x, y)`` evaluated at facet midpoints."""
    mids = mesh.facet_midpoints()
    tags = {}
    for f in mesh.boundary_facets():
        tags[tuple(int(i) for i in mesh.facets[f])] = tag_fn(*mids[f])
    return build_mesh(mesh.vertices, mesh.cells, tags)


def save_mesh(mesh: Mesh) -> str:
    """Serialize to the plain-text mesh format (exact float round trip)."""
    lines = ["hdgmesh 1"]
    lines.append(f"vertices {mesh.num_vertices}")
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    lines.append(f"cells {mesh.num_cells}")
    for a, b, c in mesh.cells:
        lines.append(f"{a} {b} {c}")
    bdry = mesh.boundary_facets()
    lines.append(f"boundary {len(bdry)}")
    for f in bdry:
        a, b = mesh.facets[f]
        lines.append(f"{a} {b} {mesh.facet_tag[f]}")
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> Mesh:
    """Parse the plain-text mesh format produced by :func:`save_mesh`.

    ``#`` starts a comment; tokens are whitespace-delimited.  Malformed
    content raises :class:`MeshFormatError` with the line number;
    non-conforming connectivity raises :class:`TopologyError`.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            rows.append((lineno, stripped.split()))
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(rows):
            raise MeshFormatError("unexpected end of file", rows[-1][0] if rows else 1)
        row = rows[pos]
        pos += 1
        return row

    lineno, tokens = take()
    if tokens != ["hdgmesh", "1"]:
        raise MeshFormatError("expected header 'hdgmesh 1'", lineno)

    def section(name, width, conv):
        lineno, tokens = take()
        if len(tokens) != 2 or tokens[0] != name:
            raise MeshFormatError(f"expected section '{name} <count>'", lineno)
        try:
            count = int(tokens[1])
        except ValueError:
            raise MeshFormatError(f"bad {name} count {tokens[1]!r}", lineno) from None
        if count < 0:
            raise MeshFormatError(f"negative {name} count", lineno)
        out = []
        for _ in range(count):
            lineno, tokens = take()
            if len(tokens) != width:
                raise MeshFormatError(
                    f"expected {width} fields in {name} entry", lineno
                )
            try:
                out.append(conv(tokens))
            except ValueError as exc:
                raise MeshFormatError(str(exc), lineno) from None
        return out

    verts = section("vertices", 2, lambda t: (float(t[0]), float(t[1])))
    if not verts:
        raise MeshFormatError("empty vertex section", rows[min(pos, len(rows)) - 1][0])
    cells = section("cells", 3, lambda t: (int(t[0]), int(t[1]), int(t[2])))
    if not cells:
        raise MeshFormatError("empty cell section", rows[min(pos, len(rows)) - 1][0])

    def bdry_entry(t):
        if t[2] not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary tag {t[2]!r}")
        return (int(t[0]), int(t[1]), t[2])

    boundary = section("boundary", 3, bdry_entry)
    if pos != len(rows):
        raise MeshFormatError("trailing content after boundary section", rows[pos][0])

    tags = {tuple(sorted((a, b))): tag for a, b, tag in boundary}
    return build_mesh(np.array(verts), np.array(cells, dtype=np.int64), tags)


def check_mesh(mesh: Mesh) -> None:
    """Assert the structural invariants of a mesh; raise TopologyError."""
    adj = mesh.facet_cells
    one_or_two = (adj[:, 0] >= 0) & ((adj[:, 1] >= 0) | (adj[:, 1] == -1))
    if not np.all(one_or_two):
        raise TopologyError("facet with no adjacent cell")
    boundary = adj[:, 1] < 0
    if not np.all(mesh.facet_tag[boundary] != INTERIOR):
        raise TopologyError("boundary facet tagged interior")
    if not np.all(mesh.facet_tag[~boundary] == INTERIOR):
        raise TopologyError("interior facet carries a boundary tag")
    if abs(mesh.cell_area.sum() - mesh.domain_area) > _AREA_RTOL * mesh.domain_area:
        raise TopologyError("cell areas do not sum to the domain area")
    norms = np.linalg.norm(mesh.facet_normal, axis=1)
    if np.abs(norms - 1.0).max() > 1e-14:
        raise TopologyError("facet normal is not a unit vector")
    for c in range(mesh.num_cells):
        for e in range(3):
            f = mesh.cell_facets[c, e]
            if not (mesh.h_cell[c] <= 2.0 * mesh.h_facet[f] + 1e-15):
                raise TopologyError(f"h_K > 2 h_F for cell {c}")
            if not (mesh.h_facet[f] <= mesh.h_cell[c] + 1e-15):
                raise TopologyError(f"h_F > h_K for cell {c}")
