"""Manufactured-solution catalog.

Each case stores closed-form solution fields, hand-derived forcing, and the
coefficient data needed to build its problem; a finite-difference residual
of the strong form at random interior points guards every stored forcing.
Scalar cases expose the flux u = -kappa grad p; vector cases expose the
velocity u, sigma = nu grad u, and a mean-zero pressure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import (
    DiffusionTensor,
    VelocityField,
    as_scalar_field,
    constant_velocity,
    diagonal_kappa,
    interface_kappa,
    isotropic_kappa,
    rotation_velocity,
)
from .mesh import NEUMANN, Mesh, generate_lshape, generate_structured, retag_boundary
from .problems import CdrProblem, OseenProblem, PoissonProblem, StokesProblem, TensorStabilization


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    equation: str
    regularity: str  # "smooth" | "interface" | "corner-singular"
    mesh_kind: str  # "structured" | "lshape"
    p: Callable
    u: Callable  # flux for scalar equations, velocity for vector ones
    f: Callable
    kappa: DiffusionTensor | None = None
    beta: VelocityField | None = None
    c: Callable | None = None
    nu: float = 1.0
    sigma: Callable | None = None
    grad_u: Callable | None = None
    neumann_where: Callable | None = None
    p_neumann: Callable | None = None
    singular_exponent: float | None = None

    def mesh(self, n: int) -> Mesh:
        if self.mesh_kind == "lshape":
            return generate_lshape(n)
        mesh = generate_structured(n)
        if self.neumann_where is not None:
            mesh = retag_boundary(
                mesh, lambda x, y: NEUMANN if self.neumann_where(x, y) else "D"
            )
        return mesh

    def problem(self, tau=1.0, stab: TensorStabilization | None = None):
        if self.equation == "poisson":
            return PoissonProblem(
                kappa=self.kappa,
                f=self.f,
                p_dirichlet=self.p,
                p_neumann=self.p_neumann or as_scalar_field(0.0),
                tau=tau,
            )
        if self.equation == "cdr":
            return CdrProblem(
                kappa=self.kappa,
                beta=self.beta,
                c=self.c,
                f=self.f,
                p_dirichlet=self.p,
                tau=tau,
            )
        stab = stab or TensorStabilization(tau, tau)
        if self.equation == "stokes":
            return StokesProblem(nu=self.nu, f=self.f, stab=stab)
        return OseenProblem(nu=self.nu, f=self.f, beta=self.beta, stab=stab)


def _sin_pi_case() -> dict:
    def p(x):
        return np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])

    def grad_p(x):
        sx, cx = np.sin(np.pi * x[..., 0]), np.cos(np.pi * x[..., 0])
        sy, cy = np.sin(np.pi * x[..., 1]), np.cos(np.pi * x[..., 1])
        return np.pi * np.stack([cx * sy, sx * cy], axis=-1)

    return {"p": p, "grad_p": grad_p}


def poisson_smooth() -> ManufacturedCase:
    s = _sin_pi_case()
    p, grad_p = s["p"], s["grad_p"]

    def u(x):
        return -grad_p(x)

    def f(x):  # div(kappa grad p) with kappa = I
        return -2.0 * np.pi**2 * p(x)

    return ManufacturedCase(
        "poisson_smooth", "poisson", "smooth", "structured", p, u, f,
        kappa=isotropic_kappa(1.0),
    )


def poisson_smooth_aniso() -> ManufacturedCase:
    s = _sin_pi_case()
    p, grad_p = s["p"], s["grad_p"]
    kappa = diagonal_kappa(1.0, 10.0)

    def u(x):
        g = grad_p(x)
        return -np.stack([g[..., 0], 10.0 * g[..., 1]], axis=-1)

    def f(x):  # p_xx + 10 p_yy
        return -11.0 * np.pi**2 * p(x)

    return ManufacturedCase(
        "poisson_smooth_aniso", "poisson", "smooth", "structured", p, u, f, kappa=kappa
    )


def poisson_mixed_linear() -> ManufacturedCase:
    """p = 1 - x with a Neumann edge at x = 1: u = (1, 0), u.n = 1 there."""

    def p(x):
        return 1.0 - x[..., 0]

    def u(x):
        out = np.zeros(np.asarray(x).shape)
        out[..., 0] = 1.0
        return out

    return ManufacturedCase(
        "poisson_mixed_linear", "poisson", "smooth", "structured",
        p, u, as_scalar_field(0.0),
        kappa=isotropic_kappa(1.0),
        neumann_where=lambda x, y: x > 1.0 - 1e-12,
        p_neumann=as_scalar_field(1.0),
    )


def poisson_interface() -> ManufacturedCase:
    """kappa = 1 for x < 1/2 and 10 beyond; p is piecewise linear with a
    continuous flux u = (-1, 0), so it matches at the interface."""
    k1, k2 = 1.0, 10.0
    a1, a2 = 1.0, 1.0 / 10.0
    c2 = 0.5 * (a1 - a2)

    def p(x):
        xx = np.asarray(x)[..., 0]
        return np.where(xx < 0.5, a1 * xx, c2 + a2 * xx)

    def u(x):
        out = np.zeros(np.asarray(x).shape)
        out[..., 0] = -1.0
        return out

    return ManufacturedCase(
        "poisson_interface", "poisson", "interface", "structured",
        p, u, as_scalar_field(0.0), kappa=interface_kappa(k1, k2, 0.5),
    )


def poisson_lshape() -> ManufacturedCase:
    """Harmonic r^(2/3) sin(2 theta / 3) on the L-shape; the flux is
    singular at the re-entrant corner, u in H^(2/3 - eps) only."""

    def polar(x):
        x = np.asarray(x)
        r = np.hypot(x[..., 0], x[..., 1])
        th = np.arctan2(x[..., 1], x[..., 0])
        th = np.where(th < 0, th + 2.0 * np.pi, th)
        return r, th

    def p(x):
        r, th = polar(x)
        return r ** (2.0 / 3.0) * np.sin(2.0 * th / 3.0)

    def u(x):
        r, th = polar(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = (2.0 / 3.0) * r ** (-1.0 / 3.0)
        mag = np.where(r > 0, mag, 0.0)
        s23, c23 = np.sin(2.0 * th / 3.0), np.cos(2.0 * th / 3.0)
        ct, st = np.cos(th), np.sin(th)
        ur = mag * s23
        ut = mag * c23
        return -np.stack([ur * ct - ut * st, ur * st + ut * ct], axis=-1)

    return ManufacturedCase(
        "poisson_lshape", "poisson", "corner-singular", "lshape",
        p, u, as_scalar_field(0.0), kappa=isotropic_kappa(1.0),
        singular_exponent=2.0 / 3.0,
    )


def cdr_smooth() -> ManufacturedCase:
    s = _sin_pi_case()
    p, grad_p = s["p"], s["grad_p"]
    beta = constant_velocity(1.0, 1.0)

    def u(x):
        return -grad_p(x)

    def f(x):  # -lap p + beta . grad p + c p  with c = 1
        g = grad_p(x)
        return 2.0 * np.pi**2 * p(x) + g[..., 0] + g[..., 1] + p(x)

    return ManufacturedCase(
        "cdr_smooth", "cdr", "smooth", "structured", p, u, f,
        kappa=isotropic_kappa(1.0), beta=beta, c=as_scalar_field(1.0),
    )


def _stokes_fields(nu: float):
    """Streamfunction flow psi = x^2(1-x)^2 y^2(1-y)^2 and mean-zero
    pressure sin(2 pi x) cos(2 pi y)."""

    def poly(x):
        return x**2 * (1 - x) ** 2

    def dpoly(x):
        return 2 * x - 6 * x**2 + 4 * x**3

    def d2poly(x):
        return 2 - 12 * x + 12 * x**2

    def d3poly(x):
        return -12 + 24 * x

    def u(pt):
        x, y = pt[..., 0], pt[..., 1]
        return np.stack([poly(x) * dpoly(y), -dpoly(x) * poly(y)], axis=-1)

    def grad_u(pt):
        x, y = pt[..., 0], pt[..., 1]
        g = np.empty(pt.shape[:-1] + (2, 2))
        g[..., 0, 0] = dpoly(x) * dpoly(y)
        g[..., 0, 1] = poly(x) * d2poly(y)
        g[..., 1, 0] = -d2poly(x) * poly(y)
        g[..., 1, 1] = -dpoly(x) * dpoly(y)
        return g

    def lap_u(pt):
        x, y = pt[..., 0], pt[..., 1]
        return np.stack(
            [
                d2poly(x) * dpoly(y) + poly(x) * d3poly(y),
                -d3poly(x) * poly(y) - dpoly(x) * d2poly(y),
            ],
            axis=-1,
        )

    def p(pt):
        return np.sin(2 * np.pi * pt[..., 0]) * np.cos(2 * np.pi * pt[..., 1])

    def grad_p(pt):
        x, y = pt[..., 0], pt[..., 1]
        tp = 2 * np.pi
        return tp * np.stack(
            [np.cos(tp * x) * np.cos(tp * y), -np.sin(tp * x) * np.sin(tp * y)],
            axis=-1,
        )

    def sigma(pt):
        return nu * grad_u(pt)

    return u, grad_u, lap_u, p, grad_p, sigma


def stokes_smooth(nu: float = 1.0) -> ManufacturedCase:
    u, grad_u, lap_u, p, grad_p, sigma = _stokes_fields(nu)

    def f(pt):  # -nu lap u + grad p
        return -nu * lap_u(pt) + grad_p(pt)

    return ManufacturedCase(
        "stokes_smooth", "stokes", "smooth", "structured", p, u, f,
        nu=nu, sigma=sigma, grad_u=grad_u,
    )


def _oseen_case(name: str, beta: VelocityField, nu: float = 1.0) -> ManufacturedCase:
    u, grad_u, lap_u, p, grad_p, sigma = _stokes_fields(nu)

    def f(pt):  # -nu lap u + (grad u) beta + grad p
        conv = np.einsum("...ab,...b->...a", grad_u(pt), beta.at(pt))
        return -nu * lap_u(pt) + conv + grad_p(pt)

    return ManufacturedCase(
        name, "oseen", "smooth", "structured", p, u, f,
        nu=nu, sigma=sigma, grad_u=grad_u, beta=beta,
    )


def oseen_smooth(nu: float = 1.0) -> ManufacturedCase:
    return _oseen_case("oseen_smooth", constant_velocity(1.0, 0.0), nu)


def oseen_rotation(nu: float = 1.0) -> ManufacturedCase:
    return _oseen_case("oseen_rotation", rotation_velocity(), nu)


CATALOG: dict[str, Callable[[], ManufacturedCase]] = {
    "poisson_smooth": poisson_smooth,
    "poisson_smooth_aniso": poisson_smooth_aniso,
    "poisson_mixed_linear": poisson_mixed_linear,
    "poisson_interface": poisson_interface,
    "poisson_lshape": poisson_lshape,
    "cdr_smooth": cdr_smooth,
    "stokes_smooth": stokes_smooth,
    "oseen_smooth": oseen_smooth,
    "oseen_rotation": oseen_rotation,
}


def get_case(name: str) -> ManufacturedCase:
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(
            f"unknown case {name!r}; available: {', '.join(sorted(CATALOG))}"
        ) from None


def strong_residual(case: ManufacturedCase, points: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Finite-difference residual of the strong form at interior points.

    Second derivatives come from 5-point stencils of the stored closed-form
    fields, so this is an oracle for the hand-derived forcing, independent
    of any assembly code.
    """
    pts = np.asarray(points, dtype=float)

    def d2(fn, a):
        e = np.zeros_like(pts)
        e[..., a] = step
        return (fn(pts + e) - 2.0 * fn(pts) + fn(pts - e)) / step**2

    def d1(fn, a):
        e = np.zeros_like(pts)
        e[..., a] = step
        return (fn(pts + e) - fn(pts - e)) / (2.0 * step)

    if case.equation == "poisson":
        kap = case.kappa.at(pts)
        lhs = kap[..., 0, 0] * d2(case.p, 0) + kap[..., 1, 1] * d2(case.p, 1)
        return lhs - case.f(pts)
    if case.equation == "cdr":
        kap = case.kappa.at(pts)
        diff = kap[..., 0, 0] * d2(case.p, 0) + kap[..., 1, 1] * d2(case.p, 1)
        grad_p = np.stack([d1(case.p, 0), d1(case.p, 1)], axis=-1)
        conv = np.einsum("...a,...a->...", case.beta.at(pts), grad_p)
        return -diff + conv + case.c(pts) * case.p(pts) - case.f(pts)

    lap = np.stack([d2(case.u, 0)[..., a] + d2(case.u, 1)[..., a] for a in range(2)], axis=-1)
    gp = np.stack([d1(case.p, 0), d1(case.p, 1)], axis=-1)
    res = -case.nu * lap + gp - case.f(pts)
    if case.equation == "oseen":
        gu = np.stack([d1(case.u, 0), d1(case.u, 1)], axis=-1)  # (..., a, b)=du_a/dx_b
        res = res + np.einsum("...ab,...b->...a", gu, case.beta.at(pts))
    div_u = d1(case.u, 0)[..., 0] + d1(case.u, 1)[..., 1]
    return np.concatenate([res, div_u[..., None]], axis=-1)
