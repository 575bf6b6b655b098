"""Shared brute-force integration oracles.

These integrate with scipy.integrate adaptive routines, independent of the
package quadrature and assembly paths, so matrix-entry comparisons check the
whole pipeline.
"""

import numpy as np
import pytest
from scipy.integrate import dblquad, quad


def triangle_integral(fn, v0, v1, v2, tol=1e-13):
    """Integral of fn(x, y) over the triangle (v0, v1, v2), adaptively."""
    v0, v1, v2 = (np.asarray(v) for v in (v0, v1, v2))
    e1, e2 = v1 - v0, v2 - v0
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])

    def integrand(xh, yh):
        p = v0 + xh * (v1 - v0) + yh * (v2 - v0)
        return fn(p[0], p[1])

    val, _ = dblquad(
        integrand, 0.0, 1.0, lambda yh: 0.0, lambda yh: 1.0 - yh,
        epsabs=tol, epsrel=tol,
    )
    return jac * val


def edge_integral(fn, a, b, tol=1e-13):
    """Integral of fn(x, y) along the segment a-b with arclength measure."""
    a, b = np.asarray(a), np.asarray(b)
    length = np.linalg.norm(b - a)

    def integrand(t):
        p = a + t * (b - a)
        return fn(p[0], p[1])

    val, _ = quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return length * val


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
