"""Numba kernels: 7-point Laplacian with boundary ghosts and Gauss-Seidel sweeps.

Faces are ordered (x-, x+, y-, y+, z-, z+). Face codes:

* ``0`` Dirichlet: the face node is pinned to the face value; the standalone
  Laplacian uses the face value as the ghost.
* ``1`` zero-flux Neumann, mirror ghost (second order): ghost equals the first
  interior neighbour, reflected through the boundary node.
* ``2`` zero-flux Neumann, copied ghost (first order): ghost equals the
  boundary value itself, so the outward half of the stencil drops out.

All sweeps are sequential and deterministic; the red-black ordering visits
even-parity nodes first, then odd, both in lexicographic order.
"""

import numpy as np
from numba import njit

DIRICHLET = 0
NEUMANN_MIRROR = 1
NEUMANN_COPY = 2


@njit(cache=True)
def laplacian_kernel(x, codes, vals, inv_h2, out):
    n1, n2, n3 = x.shape
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                c = x[i, j, k]

                if i == 0:
                    if codes[0] == 0:
                        xm = vals[0]
                    elif codes[0] == 1:
                        xm = x[1, j, k]
                    else:
                        xm = c
                else:
                    xm = x[i - 1, j, k]
                if i == n1 - 1:
                    if codes[1] == 0:
                        xp = vals[1]
                    elif codes[1] == 1:
                        xp = x[n1 - 2, j, k]
                    else:
                        xp = c
                else:
                    xp = x[i + 1, j, k]
                acc = (xm - 2.0 * c + xp) * inv_h2[0]

                if j == 0:
                    if codes[2] == 0:
                        ym = vals[2]
                    elif codes[2] == 1:
                        ym = x[i, 1, k]
                    else:
                        ym = c
                else:
                    ym = x[i, j - 1, k]
                if j == n2 - 1:
                    if codes[3] == 0:
                        yp = vals[3]
                    elif codes[3] == 1:
                        yp = x[i, n2 - 2, k]
                    else:
                        yp = c
                else:
                    yp = x[i, j + 1, k]
                acc += (ym - 2.0 * c + yp) * inv_h2[1]

                if k == 0:
                    if codes[4] == 0:
                        zm = vals[4]
                    elif codes[4] == 1:
                        zm = x[i, j, 1]
                    else:
                        zm = c
                else:
                    zm = x[i, j, k - 1]
                if k == n3 - 1:
                    if codes[5] == 0:
                        zp = vals[5]
                    elif codes[5] == 1:
                        zp = x[i, j, n3 - 2]
                    else:
                        zp = c
                else:
                    zp = x[i, j, k + 1]
                acc += (zm - 2.0 * c + zp) * inv_h2[2]

                out[i, j, k] = acc


@njit(cache=True, inline="always")
def _cn_row(x, rhs, codes, lam, i, j, k, n1, n2, n3):
    """Diagonal and (rhs + off-diagonal) terms of the CN row at one node.

    Row form: diag * x[i,j,k] - nbsum = rhs[i,j,k], returned as (diag, off)
    with off = rhs + nbsum. Dirichlet-pinned nodes never reach this point.
    """
    diag = 1.0
    off = rhs[i, j, k]

    lx = lam[0]
    if i == 0:
        if codes[0] == 1:
            diag += 2.0 * lx
            off += 2.0 * lx * x[1, j, k]
        else:  # copied ghost
            diag += lx
            off += lx * x[1, j, k]
    elif i == n1 - 1:
        if codes[1] == 1:
            diag += 2.0 * lx
            off += 2.0 * lx * x[n1 - 2, j, k]
        else:
            diag += lx
            off += lx * x[n1 - 2, j, k]
    else:
        diag += 2.0 * lx
        off += lx * (x[i - 1, j, k] + x[i + 1, j, k])

    ly = lam[1]
    if j == 0:
        if codes[2] == 1:
            diag += 2.0 * ly
            off += 2.0 * ly * x[i, 1, k]
        else:
            diag += ly
            off += ly * x[i, 1, k]
    elif j == n2 - 1:
        if codes[3] == 1:
            diag += 2.0 * ly
            off += 2.0 * ly * x[i, n2 - 2, k]
        else:
            diag += ly
            off += ly * x[i, n2 - 2, k]
    else:
        diag += 2.0 * ly
        off += ly * (x[i, j - 1, k] + x[i, j + 1, k])

    lz = lam[2]
    if k == 0:
        if codes[4] == 1:
            diag += 2.0 * lz
            off += 2.0 * lz * x[i, j, 1]
        else:
            diag += lz
            off += lz * x[i, j, 1]
    elif k == n3 - 1:
        if codes[5] == 1:
            diag += 2.0 * lz
            off += 2.0 * lz * x[i, j, n3 - 2]
        else:
            diag += lz
            off += lz * x[i, j, n3 - 2]
    else:
        diag += 2.0 * lz
        off += lz * (x[i, j, k - 1] + x[i, j, k + 1])

    return diag, off


@njit(cache=True)
def gs_sweep_lex(x, rhs, codes, lam, pinned):
    n1, n2, n3 = x.shape
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                if pinned[i, j, k]:
                    continue
                diag, off = _cn_row(x, rhs, codes, lam, i, j, k, n1, n2, n3)
                x[i, j, k] = off / diag


@njit(cache=True)
def gs_sweep_rb(x, rhs, codes, lam, pinned, color):
    n1, n2, n3 = x.shape
    for i in range(n1):
        for j in range(n2):
            k0 = (color - ((i + j) & 1)) & 1
            for k in range(k0, n3, 2):
                if pinned[i, j, k]:
                    continue
                diag, off = _cn_row(x, rhs, codes, lam, i, j, k, n1, n2, n3)
                x[i, j, k] = off / diag


@njit(cache=True)
def cn_residual_inf(x, rhs, codes, lam, pinned):
    n1, n2, n3 = x.shape
    worst = 0.0
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                if pinned[i, j, k]:
                    continue
                diag, off = _cn_row(x, rhs, codes, lam, i, j, k, n1, n2, n3)
                r = off - diag * x[i, j, k]
                if r < 0.0:
                    r = -r
                if r > worst:
                    worst = r
    return worst


@njit(cache=True)
def min_plus_holder_max(sensor_xyz, resid_abs, node_xyz, c_gamma):
    """max over nodes of min over sensors of |resid_i| + C_gamma * d_i^(1/2).

    ``sensor_xyz``: (M, 3) sensor coordinates, ``node_xyz``: (N, 3) grid node
    coordinates, ``resid_abs``: (M,) absolute surface residuals.
    """
    m = sensor_xyz.shape[0]
    n = node_xyz.shape[0]
    best = -1.0
    for p in range(n):
        px = node_xyz[p, 0]
        py = node_xyz[p, 1]
        pz = node_xyz[p, 2]
        inner = 1.0e300
        for s in range(m):
            dx = sensor_xyz[s, 0] - px
            dy = sensor_xyz[s, 1] - py
            dz = sensor_xyz[s, 2] - pz
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            v = resid_abs[s] + c_gamma * np.sqrt(d)
            if v < inner:
                inner = v
        if inner > best:
            best = inner
    return best
