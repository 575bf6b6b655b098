"""Global DOF numbering for the HDG spaces.

Scalar equations (Poisson, CDR) use the blocks (u | p | trace); the vector
equations (Stokes, Oseen) use (sigma | u | p | trace | mean-pressure
multiplier).  Cell blocks are numbered in cell order, trace blocks in facet
order; trace DOFs on Dirichlet facets are eliminated and never appear in the
assembled system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import p_dim
from .errors import ConfigError
from .mesh import DIRICHLET, Mesh

SCALAR_EQUATIONS = ("poisson", "cdr")
VECTOR_EQUATIONS = ("stokes", "oseen")
EQUATIONS = SCALAR_EQUATIONS + VECTOR_EQUATIONS


@dataclass(frozen=True)
class SpaceLayout:
    """Block offsets and facet-to-trace maps for one equation/mesh/degree."""

    mesh: Mesh
    k: int
    equation: str
    sigma_offset: int
    sigma_dim: int
    u_offset: int
    u_dim: int
    p_offset: int
    p_dim: int
    trace_offset: int
    trace_dim: int
    constraint_dim: int
    facet_trace_start: np.ndarray  # (nf,), -1 for eliminated (Dirichlet) facets
    dirichlet_facets: np.ndarray

    @property
    def cell_dim(self) -> int:
        """dim P_k per cell."""
        return p_dim(self.k)

    @property
    def ncomp(self) -> int:
        """Field components of u (1 scalar-flux component pair handled via 2)."""
        return 2 if self.equation in VECTOR_EQUATIONS else 1

    @property
    def trace_width(self) -> int:
        """Trace DOFs per kept facet."""
        return (self.k + 1) * (2 if self.equation in VECTOR_EQUATIONS else 1)

    @property
    def total_dim(self) -> int:
        return (
            self.sigma_dim + self.u_dim + self.p_dim + self.trace_dim + self.constraint_dim
        )

    @property
    def constraint_index(self) -> int | None:
        if self.constraint_dim == 0:
            return None
        return self.total_dim - 1

    def sigma_dofs(self, cell: int) -> np.ndarray:
        n = 4 * self.cell_dim
        return self.sigma_offset + cell * n + np.arange(n)

    def u_dofs(self, cell: int) -> np.ndarray:
        n = 2 * self.cell_dim
        return self.u_offset + cell * n + np.arange(n)

    def p_dofs(self, cell: int) -> np.ndarray:
        n = self.cell_dim
        return self.p_offset + cell * n + np.arange(n)

    def trace_dofs(self, facet: int) -> np.ndarray:
        start = self.facet_trace_start[facet]
        if start < 0:
            return np.empty(0, dtype=np.int64)
        return start + np.arange(self.trace_width)


def build_layout(mesh: Mesh, k: int, equation: str) -> SpaceLayout:
    """Deterministic contiguous numbering for the given equation's spaces."""
    if equation not in EQUATIONS:
        raise ConfigError(f"unknown equation {equation!r}")
    if k < 0:
        raise ConfigError("polynomial degree must be nonnegative")
    n = p_dim(k)
    nc = mesh.num_cells
    boundary = mesh.boundary_facets()
    dirichlet = np.array(
        [f for f in boundary if mesh.facet_tag[f] == DIRICHLET], dtype=np.int64
    )

    if equation in SCALAR_EQUATIONS and len(dirichlet) == 0:
        raise ConfigError(f"{equation} requires a nonempty Dirichlet boundary")
    if equation == "cdr" and len(dirichlet) != len(boundary):
        raise ConfigError("cdr requires Dirichlet data on the whole boundary")
    if equation in VECTOR_EQUATIONS and len(dirichlet) != len(boundary):
        raise ConfigError(f"{equation} supports velocity (Dirichlet) data only")

    vector = equation in VECTOR_EQUATIONS
    sigma_dim = 4 * n * nc if vector else 0
    u_dim = 2 * n * nc
    p_dim_total = n * nc
    width = (k + 1) * (2 if vector else 1)

    eliminated = set(int(f) for f in dirichlet)
    facet_trace_start = np.full(mesh.num_facets, -1, dtype=np.int64)
    trace_offset = sigma_dim + u_dim + p_dim_total
    pos = trace_offset
    for f in range(mesh.num_facets):
        if f in eliminated:
            continue
        facet_trace_start[f] = pos
        pos += width
    trace_dim = pos - trace_offset

    return SpaceLayout(
        mesh=mesh,
        k=k,
        equation=equation,
        sigma_offset=0,
        sigma_dim=sigma_dim,
        u_offset=sigma_dim,
        u_dim=u_dim,
        p_offset=sigma_dim + u_dim,
        p_dim=p_dim_total,
        trace_offset=trace_offset,
        trace_dim=trace_dim,
        constraint_dim=1 if vector else 0,
        facet_trace_start=facet_trace_start,
        dirichlet_facets=dirichlet,
    )
