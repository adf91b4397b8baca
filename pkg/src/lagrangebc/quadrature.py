"""Composite Gauss-Legendre rules."""

import numpy as np

from .errors import InvalidArgument

PANEL_ORDER = 8


def gauss_legendre(nodes, a=0.0, b=1.0, panel_order=PANEL_ORDER):
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``.

    When ``nodes`` is a multiple of ``panel_order`` the interval is split
    into ``nodes // panel_order`` equal panels of that order; otherwise a
    single panel with ``nodes`` points is used.
    """
    nodes = int(nodes)
    if nodes < 1:
        raise InvalidArgument(f"need at least one quadrature node, got {nodes}")
    if nodes > panel_order and nodes % panel_order == 0:
        panels, order = nodes // panel_order, panel_order
    else:
        panels, order = 1, nodes
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return t, wt
