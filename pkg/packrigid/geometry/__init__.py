"""Numerical core: bodies, graphs, rigidity matrices and packing solvers."""
