"""Compiled inner loops of the deposition simulator.

Particle ``i`` draws from counter-based stream ``i`` (its key is computed once
and stored in the state); step ``k`` uses counter ``k + 1``, counter 0 being
reserved for the initial placement. Lanes per step:

    0      64 bits split as: 32 bits -> u1, 31 bits -> u2, 1 bit -> sign of the
           vertical jump; (u1, u2) is the Box-Muller pair giving s (s_xy = s_z)
    1      direction angle r of the horizontal jump
    2      adhesion / on-top deposition attempt
    3      aggregation attempt
"""

import numba as nb
import numpy as np

from ..rng import keyed_bits, keyed_uniform, stream_key

BULK = 0
TRAPPED = 1
DEPOSITED = 2

CLAMP_P, CLAMP_Q, CLAMP_R, CLAMP_T = 0, 1, 2, 3


_U32 = 1.0 / 4294967296.0
_U31 = 1.0 / 2147483648.0


@nb.njit(cache=True)
def particle_keys(seed, n):
    keys = np.empty(n, dtype=np.uint64)
    for i in range(n):
        keys[i] = stream_key(seed, i)
    return keys


@nb.njit(cache=True)
def place_particles(pos, keys, lx, ly, z_lo, z_hi):
    for i in range(pos.shape[0]):
        key = keys[i]
        pos[i, 0] = lx * keyed_uniform(key, 0, 0)
        pos[i, 1] = ly * keyed_uniform(key, 0, 1)
        pos[i, 2] = z_lo + (z_hi - z_lo) * keyed_uniform(key, 0, 2)


@nb.njit(cache=True, inline="always")
def _wrap(v, length):
    v = v - length * np.floor(v / length)
    if v >= length:
        v = 0.0
    return v


@nb.njit(cache=True, fastmath=True)
def transport(pos, is_ap, status, cell, keys, step, v_ap, v_nap, shear, dt, lx, ly, lz, nx, ny):
    """Random-walk jump plus shear advection for every bulk particle."""
    counter = np.uint64(step + 1)
    two_pi = 2.0 * np.pi
    for i in range(pos.shape[0]):
        if status[i] != BULK:
            continue
        key = keys[i]
        bits = keyed_bits(key, counter, np.uint64(0))
        u1 = (float(bits >> np.uint64(32)) + 1.0) * _U32  # (0, 1]
        u2 = float((bits >> np.uint64(1)) & np.uint64(0x7FFFFFFF)) * _U31
        lam = 1.0 if (bits & np.uint64(1)) else -1.0
        s = abs(np.sqrt(-2.0 * np.log(u1)) * np.cos(two_pi * u2))
        r = keyed_uniform(key, counter, np.uint64(1))
        v = v_ap if is_ap[i] else v_nap
        a = v * s * dt
        z0 = pos[i, 2]
        c = np.cos(two_pi * r)
        sn = np.sqrt(max(0.0, 1.0 - c * c))  # sin(2 pi r), one trig call saved
        if r >= 0.5:
            sn = -sn
        x = pos[i, 0] + a * c + shear * z0 * dt
        y = pos[i, 1] + a * sn
        z = z0 + lam * a
        x = _wrap(x, lx)
        y = _wrap(y, ly)
        if z > lz:
            z = 2.0 * lz - z
        pos[i, 0] = x
        pos[i, 1] = y
        if z < 0.0:
            pos[i, 2] = 0.0
            status[i] = TRAPPED
            ci = min(int(x / lx * nx), nx - 1)
            cj = min(int(y / ly * ny), ny - 1)
            cell[i] = ci * ny + cj
        else:
            pos[i, 2] = z


@nb.njit(cache=True, inline="always")
def _clamp(p, counts, which):
    if p > 1.0:
        counts[which] += 1
        return 1.0
    if p < 0.0:
        counts[which] += 1
        return 0.0
    return p


@nb.njit(cache=True, inline="always")
def _has_neighbour(height, ci, cj):
    nx, ny = height.shape
    return (
        height[(ci + 1) % nx, cj] > 0
        or height[(ci - 1) % nx, cj] > 0
        or height[ci, (cj + 1) % ny] > 0
        or height[ci, (cj - 1) % ny] > 0
    )


@nb.njit(cache=True)
def deposit(is_ap, status, cell, height, albumin, clamps, keys, step,
            p_ad, p_ag, p_t, p_f, a_t, dt):
    """Albumin update then one attempt per CFL-trapped platelet, in index order.

    ``albumin`` is a length-1 array holding the coverage fraction (uniform over
    the substrate). Returns the number of platelets deposited in this call.
    """
    counter = np.uint64(step + 1)
    ny = height.shape[1]

    p_alb = _clamp(p_f * (1.0 - albumin[0]) * dt, clamps, CLAMP_P)
    albumin[0] = min(1.0, albumin[0] + p_alb)

    atten = np.exp(-a_t * albumin[0])
    q = _clamp(p_ad * atten * dt, clamps, CLAMP_Q)
    r = _clamp(p_ag * atten * dt, clamps, CLAMP_R)
    p_top = _clamp(p_t * dt, clamps, CLAMP_T)

    n_dep = 0
    for i in range(status.shape[0]):
        if status[i] != TRAPPED:
            continue
        c = cell[i]
        ci = c // ny
        cj = c - ci * ny
        key = keys[i]
        if height[ci, cj] > 0:
            if keyed_uniform(key, counter, np.uint64(2)) < p_top:
                height[ci, cj] += 1
                status[i] = DEPOSITED
                n_dep += 1
            continue
        done = False
        if is_ap[i] and keyed_uniform(key, counter, np.uint64(2)) < q:
            done = True
        elif _has_neighbour(height, ci, cj) and keyed_uniform(key, counter, np.uint64(3)) < r:
            done = True
        if done:
            height[ci, cj] = 1
            status[i] = DEPOSITED
            n_dep += 1
    return n_dep


@nb.njit(cache=True)
def count_status(status):
    out = np.zeros(3, dtype=np.int64)
    for i in range(status.shape[0]):
        out[status[i]] += 1
    return out


@nb.njit(cache=True)
def run_steps(pos, is_ap, status, cell, height, albumin, clamps, keys, step0, n_steps,
              v_ap, v_nap, shear, dt, lx, ly, lz, p_ad, p_ag, p_t, p_f, a_t, count_log):
    """Advance ``n_steps``; if ``count_log`` has rows, store status counts after each step."""
    nx, ny = height.shape
    log = count_log.shape[0] > 0
    for k in range(n_steps):
        step = step0 + k
        transport(pos, is_ap, status, cell, keys, step, v_ap, v_nap, shear, dt, lx, ly, lz, nx, ny)
        deposit(is_ap, status, cell, height, albumin, clamps, keys, step,
                p_ad, p_ag, p_t, p_f, a_t, dt)
        if log:
            count_log[k, :] = count_status(status)


@nb.njit(cache=True)
def label_grid(occupied):
    """4-connected components with periodic wrap. Returns (labels, sizes).

    Labels are 1-based in raster order of each component's first cell; 0 marks
    empty cells.
    """
    nx, ny = occupied.shape
    labels = np.zeros((nx, ny), dtype=np.int64)
    stack = np.empty(nx * ny, dtype=np.int64)
    sizes = np.empty(nx * ny, dtype=np.int64)
    n = 0
    for i0 in range(nx):
        for j0 in range(ny):
            if not occupied[i0, j0] or labels[i0, j0] != 0:
                continue
            n += 1
            labels[i0, j0] = n
            top = 0
            stack[0] = i0 * ny + j0
            top = 1
            size = 0
            while top > 0:
                top -= 1
                c = stack[top]
                ci = c // ny
                cj = c - ci * ny
                size += 1
                for d in range(4):
                    if d == 0:
                        ni, nj = (ci + 1) % nx, cj
                    elif d == 1:
                        ni, nj = (ci - 1) % nx, cj
                    elif d == 2:
                        ni, nj = ci, (cj + 1) % ny
                    else:
                        ni, nj = ci, (cj - 1) % ny
                    if occupied[ni, nj] and labels[ni, nj] == 0:
                        labels[ni, nj] = n
                        stack[top] = ni * ny + nj
                        top += 1
            sizes[n - 1] = size
    return labels, sizes[:n].copy()
