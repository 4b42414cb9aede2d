"""Finite-difference weights on arbitrary and uniform grids.

All derivative evaluation in the package funnels through this module:
weights for arbitrary node positions come from Fornberg's recursion, and
uniform grids take a vectorized fast path with precomputed integer-offset
stencils (centered in the interior, one-sided windows at the ends).
"""

from __future__ import annotations

import numpy as np

# Interior centered stencils on unit spacing, chosen so every order is at
# least second-order accurate: 3 points for d1/d2, 5 points for d3/d4.
CENTERED = {
    1: (1, np.array([-0.5, 0.0, 0.5])),
    2: (1, np.array([1.0, -2.0, 1.0])),
    3: (2, np.array([-0.5, 1.0, 0.0, -1.0, 0.5])),
    4: (2, np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}


def fd_weights(x: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Weights w with sum(w * f(x)) ~ f^(order)(x0), exact for deg < len(x).

    Fornberg's one-pass recursion; `x` must have distinct entries.
    """
    x = np.asarray(x, dtype=float)
    npts = x.size
    if order >= npts:
        raise ValueError("need more than `order` points")
    w = np.zeros((order + 1, npts))
    w[0, 0] = 1.0
    c1 = 1.0
    for j in range(1, npts):
        c2 = 1.0
        mn = min(j, order)
        for k in range(j):
            c3 = x[j] - x[k]
            c2 *= c3
            if k == j - 1:
                # new node's weights must use row k before it is updated
                for d in range(mn, 0, -1):
                    w[d, j] = c1 * (d * w[d - 1, k] - (x[k] - x0) * w[d, k]) / c2
                w[0, j] = -c1 * (x[k] - x0) * w[0, k] / c2
            for d in range(mn, 0, -1):
                w[d, k] = ((x[j] - x0) * w[d, k] - d * w[d - 1, k]) / c3
            w[0, k] = (x[j] - x0) * w[0, k] / c3
        c1 = c2
    return w[order]


def _one_sided_table(order: int, width: int, row: int) -> np.ndarray:
    # weights on integer grid 0..width-1 evaluated at `row`
    return fd_weights(np.arange(width, dtype=float), float(row), order)


# One-sided boundary windows of width order+2 give uniform O(h^2); built once.
_BOUNDARY: dict[tuple[int, int], np.ndarray] = {}
_ONE_SIDED: dict[tuple[int, int, int], np.ndarray] = {}


def boundary_weights(order: int, row: int) -> np.ndarray:
    key = (order, row)
    if key not in _BOUNDARY:
        _BOUNDARY[key] = _one_sided_table(order, order + 2, row)
    return _BOUNDARY[key]


def one_sided_weights(order: int, width: int, row: int) -> np.ndarray:
    """Cached unit-spacing window weights; scale by h**-order at use site."""
    key = (order, width, row)
    if key not in _ONE_SIDED:
        _ONE_SIDED[key] = _one_sided_table(order, width, row)
    return _ONE_SIDED[key]


def is_uniform(s: np.ndarray, rel_tol: float = 1e-9) -> bool:
    ds = np.diff(s)
    lo = ds.min()
    hi = ds.max()
    return lo > 0 and hi - lo <= rel_tol * hi


def derivative_uniform(f: np.ndarray, h: float, order: int) -> np.ndarray:
    """Derivative of samples on a uniform grid; O(h^2) at every node.

    Stencils are applied to differences against the evaluation node, so
    constant fields map to exactly zero.
    """
    half, w = CENTERED[order]
    out = np.empty_like(f, dtype=float)
    center = f[half : f.size - half]
    acc = np.zeros(f.size - 2 * half)
    for k, c in enumerate(w):
        if c != 0.0 and k != half:
            acc += c * (f[k : k + acc.size] - center)
    out[half:-half] = acc
    width = order + 2
    for row in range(half):
        wl = boundary_weights(order, row)
        out[row] = wl @ (f[:width] - f[row])
        wr = boundary_weights(order, width - 1 - row)
        out[-1 - row] = wr @ (f[-width:] - f[-1 - row])
    return out / h**order


def derivative_nonuniform(f: np.ndarray, s: np.ndarray, order: int) -> np.ndarray:
    """Rowwise Fornberg fallback for irregular grids."""
    n1 = f.size
    half = CENTERED[order][0]
    width = order + 2
    out = np.empty(n1)
    for i in range(n1):
        if half <= i <= n1 - 1 - half:
            lo = i - half
            hi = i + half + 1
        else:
            lo = 0 if i < half else n1 - width
            hi = lo + width
        out[i] = fd_weights(s[lo:hi], s[i], order) @ (f[lo:hi] - f[i])
    return out


def derivative_periodic(f: np.ndarray, s: np.ndarray, total: float, order: int) -> np.ndarray:
    """Centered derivative with periodic wrap; grid may be mildly nonuniform."""
    half = CENTERED[order][0]
    n = f.size
    fe = np.concatenate([f[-half:], f, f[:half]])
    se = np.concatenate([s[-half:] - total, s, s[:half] + total])
    if is_uniform(se):
        h = total / n
        _, w = CENTERED[order]
        acc = np.zeros(n)
        for k, c in enumerate(w):
            if c != 0.0 and k != half:
                acc += c * (fe[k : k + n] - f)
        return acc / h**order
    out = np.empty(n)
    for i in range(n):
        sl = slice(i, i + 2 * half + 1)
        out[i] = fd_weights(se[sl], s[i], order) @ (fe[sl] - f[i])
    return out


def derivative(f: np.ndarray, s: np.ndarray, order: int) -> np.ndarray:
    """Dispatch between the uniform fast path and the Fornberg fallback."""
    if is_uniform(s):
        return derivative_uniform(np.asarray(f, dtype=float), (s[-1] - s[0]) / (s.size - 1), order)
    return derivative_nonuniform(np.asarray(f, dtype=float), s, order)
