"""Problem data for the four equations, with stability-assumption checks.

Validation distinguishes fatal violations (nonpositive stabilization,
negative effective reaction c - div(beta)/2, indefinite stabilization tensor
after the beta shift) from the soft tau >= C_tau * h^(1/2) condition, which
is evaluated and reported but only logged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .context import FemContext
from .errors import AssemblyError
from .fields import DiffusionTensor, VelocityField, as_scalar_field, as_vector_field
from .mesh import Mesh

log = logging.getLogger(__name__)


def facet_constant(value, mesh: Mesh) -> np.ndarray:
    """Broadcast a scalar (or per-facet array) to one value per facet."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(mesh.num_facets, float(arr))
    if arr.shape != (mesh.num_facets,):
        raise AssemblyError(
            f"facet field has shape {arr.shape}, expected ({mesh.num_facets},)"
        )
    return arr.copy()


def _require_positive(values: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(~(values > 0))
    if bad.size:
        f = int(bad[0])
        raise AssemblyError(f"facet {f}: {what} = {values[f]:g} is not positive")


def stabilization_floor_report(tau_min: float, h: float, c_tau: float = 1.0) -> tuple[bool, float]:
    """Check tau_min >= c_tau * h^(1/2); returns (ok, margin)."""
    floor = c_tau * np.sqrt(h)
    return bool(tau_min >= floor), float(tau_min - floor)


@dataclass
class PoissonProblem:
    """Diffusion problem data: -kappa grad p is the flux unknown."""

    kappa: DiffusionTensor
    f: Callable
    p_dirichlet: Callable = as_scalar_field(0.0)
    p_neumann: Callable = as_scalar_field(0.0)
    tau: object = 1.0

    def tau_on(self, mesh: Mesh) -> np.ndarray:
        return facet_constant(self.tau, mesh)

    def validate(self, mesh: Mesh, ctx: FemContext) -> None:
        tau = self.tau_on(mesh)
        _require_positive(tau, "tau")
        viol = self.kappa.check_bounds(ctx.cell_points.reshape(-1, 2))
        if viol > 1e-10:
            raise AssemblyError(
                f"kappa leaves its declared spectral bounds (violation {viol:.2e})"
            )
        ok, margin = stabilization_floor_report(float(tau.min()), mesh.h_max)
        if not ok:
            log.warning("tau_min below h^(1/2) floor by %.3e", -margin)


@dataclass
class CdrProblem:
    """Convection-diffusion-reaction data; kappa must be constant."""

    kappa: DiffusionTensor
    beta: VelocityField
    c: Callable
    f: Callable
    p_dirichlet: Callable = as_scalar_field(0.0)
    tau: object = 1.0

    def __post_init__(self):
        self.c = as_scalar_field(self.c)

    def tau_on(self, mesh: Mesh) -> np.ndarray:
        return facet_constant(self.tau, mesh)

    def tau_beta_sides(self, ctx: FemContext) -> np.ndarray:
        """tau - (beta . n)/2 per facet side and quadrature point, (nfs, nqf)."""
        tau = self.tau_on(ctx.mesh)[ctx.fs_facet]
        bn = np.einsum("sqa,sa->sq", self.beta.at(ctx.fs_points), ctx.fs_normal)
        return tau[:, None] - 0.5 * bn

    def validate(self, mesh: Mesh, ctx: FemContext) -> None:
        if not self.kappa.constant:
            raise AssemblyError("cdr requires a constant diffusion tensor")
        tau = self.tau_on(mesh)
        _require_positive(tau, "tau")
        pts = ctx.cell_points.reshape(-1, 2)
        c_beta = self.c(pts) - 0.5 * self.beta.div_at(pts)
        if np.any(c_beta < -1e-12):
            i = int(np.argmin(c_beta))
            raise AssemblyError(
                f"effective reaction c - div(beta)/2 = {c_beta[i]:g} < 0 "
                f"at ({pts[i, 0]:.4g}, {pts[i, 1]:.4g})"
            )
        tb = self.tau_beta_sides(ctx)
        bad = np.flatnonzero(~np.all(tb > 0, axis=1))
        if bad.size:
            f = int(ctx.fs_facet[bad[0]])
            raise AssemblyError(
                f"facet {f}: tau - (beta.n)/2 = {tb[bad[0]].min():g} is not positive"
            )
        ok, margin = stabilization_floor_report(float(tb.min()), mesh.h_max)
        if not ok:
            log.warning("tau_beta_min below h^(1/2) floor by %.3e", -margin)


@dataclass(frozen=True)
class TensorStabilization:
    """S = tau_n (n x n) + tau_t (I - n x n) on each facet."""

    tau_n: object = 1.0
    tau_t: object = 1.0

    def tau_n_on(self, mesh: Mesh) -> np.ndarray:
        return facet_constant(self.tau_n, mesh)

    def tau_t_on(self, mesh: Mesh) -> np.ndarray:
        return facet_constant(self.tau_t, mesh)

    def tensor(self, normal: np.ndarray, tau_n, tau_t) -> np.ndarray:
        """S at unit normals of shape (..., 2); taus broadcast over leading axes."""
        nn = normal[..., :, None] * normal[..., None, :]
        eye = np.eye(2)
        tau_n = np.asarray(tau_n)[..., None, None]
        tau_t = np.asarray(tau_t)[..., None, None]
        return tau_n * nn + tau_t * (eye - nn)

    def on_sides(self, ctx: FemContext) -> np.ndarray:
        """(nfs, 2, 2) stabilization tensor per facet side."""
        tn = self.tau_n_on(ctx.mesh)[ctx.fs_facet]
        tt = self.tau_t_on(ctx.mesh)[ctx.fs_facet]
        return self.tensor(ctx.fs_normal, tn, tt)


@dataclass
class StokesProblem:
    nu: float
    f: Callable
    stab: TensorStabilization = field(default_factory=TensorStabilization)

    def __post_init__(self):
        self.f = as_vector_field(self.f)

    def validate(self, mesh: Mesh, ctx: FemContext) -> None:
        if not self.nu > 0:
            raise AssemblyError(f"viscosity nu = {self.nu:g} is not positive")
        tn = self.stab.tau_n_on(mesh)
        tt = self.stab.tau_t_on(mesh)
        _require_positive(tn, "tau_n")
        _require_positive(tt, "tau_t")
        tau_min = float(min(tn.min(), tt.min()))
        ok, margin = stabilization_floor_report(tau_min, mesh.h_max)
        if not ok:
            log.warning("tau_min below h^(1/2) floor by %.3e", -margin)


@dataclass
class OseenProblem:
    nu: float
    f: Callable
    beta: VelocityField
    stab: TensorStabilization = field(default_factory=TensorStabilization)

    def __post_init__(self):
        self.f = as_vector_field(self.f)

    def s_beta_eigen_sides(self, ctx: FemContext) -> np.ndarray:
        """Per-side eigenvalues of S_beta = S - (beta.n)/2 I at facet
        quadrature points, shape (nfs, nqf, 2): (normal, tangential)."""
        tn = self.stab.tau_n_on(ctx.mesh)[ctx.fs_facet]
        tt = self.stab.tau_t_on(ctx.mesh)[ctx.fs_facet]
        bn = np.einsum("sqa,sa->sq", self.beta.at(ctx.fs_points), ctx.fs_normal)
        return np.stack([tn[:, None] - 0.5 * bn, tt[:, None] - 0.5 * bn], axis=-1)

    def tau_beta_min(self, ctx: FemContext) -> float:
        eig = self.s_beta_eigen_sides(ctx)
        return float(eig.min()) if eig.size else np.inf

    def validate(self, mesh: Mesh, ctx: FemContext) -> None:
        if not self.nu > 0:
            raise AssemblyError(f"viscosity nu = {self.nu:g} is not positive")
        tn = self.stab.tau_n_on(mesh)
        tt = self.stab.tau_t_on(mesh)
        _require_positive(tn, "tau_n")
        _require_positive(tt, "tau_t")
        pts = ctx.cell_points.reshape(-1, 2)
        div = np.abs(self.beta.div_at(pts))
        if div.size and div.max() > 1e-10:
            raise AssemblyError(
                f"advection field is not divergence free (max |div beta| = {div.max():.3e})"
            )
        eig = self.s_beta_eigen_sides(ctx)
        per_side = eig.min(axis=(1, 2))
        bad = np.flatnonzero(~(per_side > 0))
        if bad.size:
            f = int(ctx.fs_facet[bad[0]])
            bn_max = float(
                np.abs(np.einsum("sqa,sa->sq", self.beta.at(ctx.fs_points), ctx.fs_normal)).max()
            )
            suggestion = 0.5 * bn_max * 1.05
            raise AssemblyError(
                f"facet {f}: S - (beta.n)/2 I is not positive definite "
                f"(smallest eigenvalue {per_side[bad[0]]:g}); "
                f"a uniform tau_n = tau_t >= {suggestion:.4g} would restore it"
            )
        tau_beta_min = float(per_side.min())
        log.info("tau_beta_min = %.6g", tau_beta_min)
        ok, margin = stabilization_floor_report(tau_beta_min, mesh.h_max)
        if not ok:
            log.warning("tau_beta_min below h^(1/2) floor by %.3e", -margin)
