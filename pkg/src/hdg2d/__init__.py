"""2D hybridized discontinuous Galerkin solvers and verification harness."""

__version__ = "0.1.0"
