"""Discrete norms and facet seminorms used by the stability theory.

Cell quantities integrate batched point values over all cells; facet
mismatch seminorms sum tau- (or S-) weighted squared jumps between interior
traces and the skeleton field over every element boundary, with an optional
h_K^(2s) scaling per element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .context import FemContext


@dataclass(frozen=True)
class NormEvaluator:
    """Integrates fields sampled at the context quadrature points."""

    ctx: FemContext

    def l2(self, vals: np.ndarray) -> float:
        """L2 norm of (nc, nq[, ...]) cell point values."""
        sq = np.asarray(vals) ** 2
        while sq.ndim > 2:
            sq = sq.sum(axis=-1)
        return float(np.sqrt(np.einsum("cq,cq->", self.ctx.cell_w, sq)))

    def weighted_l2(self, vals: np.ndarray, weight: np.ndarray) -> float:
        """(v, W v)^(1/2) for vector values (nc, nq, 2), W (nc, nq, 2, 2)."""
        quad = np.einsum("cqa,cqab,cqb->cq", vals, weight, vals)
        return float(np.sqrt(np.einsum("cq,cq->", self.ctx.cell_w, quad)))

    def flux_norm(self, vals: np.ndarray, kappa) -> float:
        """kappa^(-1)-weighted L2 norm of a flux field."""
        return self.weighted_l2(vals, kappa.inverse(self.ctx.cell_points))

    def visc_norm(self, vals: np.ndarray, nu: float) -> float:
        """(nu^-1 tau, tau)^(1/2) for tensor values (nc, nq, 2, 2)."""
        sq = (np.asarray(vals) ** 2).sum(axis=(-1, -2))
        return float(np.sqrt(np.einsum("cq,cq->", self.ctx.cell_w, sq) / nu))

    def facet_mismatch(
        self,
        jump: np.ndarray,
        weight: np.ndarray,
        s: float = 0.0,
        squared: bool = False,
    ) -> float:
        """Facet mismatch seminorm of per-side jump values.

        ``jump`` is (nfs, nqf) scalar or (nfs, nqf, 2) vector; ``weight`` is
        a per-side scalar (nfs,), per-point scalar (nfs, nqf), or a tensor
        (nfs, 2, 2).  The element scaling is h_K^(2s) of the side's cell.
        """
        ctx = self.ctx
        jump = np.asarray(jump)
        weight = np.asarray(weight)
        if jump.ndim == 2:
            if weight.ndim == 1:
                weight = weight[:, None]
            quad = weight * jump**2
        else:
            if weight.ndim == 3 and weight.shape[-2:] == (2, 2):
                quad = np.einsum("sqa,sab,sqb->sq", jump, weight, jump)
            elif weight.ndim == 4:
                quad = np.einsum("sqa,sqab,sqb->sq", jump, weight, jump)
            else:
                w = weight[:, None] if weight.ndim == 1 else weight
                quad = w * (jump**2).sum(axis=-1)
        hs = ctx.fs_hK ** (2.0 * s) if s != 0.0 else np.ones(ctx.num_sides)
        total = float(np.einsum("s,sq,sq->", hs, ctx.fs_w, quad))
        return total if squared else float(np.sqrt(max(total, 0.0)))

    def scalar_composite(self, flux_sq: float, p_sq: float, mismatch_sq: float) -> float:
        """Composite stability norm for the scalar systems."""
        return float(np.sqrt(flux_sq + p_sq + mismatch_sq))
