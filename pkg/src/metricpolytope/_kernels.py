"""Compiled inner loops for the hit-and-run chains.

Randomness is drawn outside (numpy ``Generator``) and passed in, so a chain
is reproducible from its seed whatever the block size or worker count.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sphere_chord(x, u, cons, low, high):
    t_lo = -np.inf
    t_hi = np.inf
    for e in range(x.shape[0]):
        ue = u[e]
        if ue > 0.0:
            t_hi = min(t_hi, (high - x[e]) / ue)
            t_lo = max(t_lo, (low - x[e]) / ue)
        elif ue < 0.0:
            t_hi = min(t_hi, (low - x[e]) / ue)
            t_lo = max(t_lo, (high - x[e]) / ue)
    for r in range(cons.shape[0]):
        l = cons[r, 0]
        a = cons[r, 1]
        b = cons[r, 2]
        au = u[l] - u[a] - u[b]
        slack = x[a] + x[b] - x[l]
        if slack < 0.0:
            slack = 0.0
        if au > 0.0:
            t_hi = min(t_hi, slack / au)
        elif au < 0.0:
            t_lo = max(t_lo, slack / au)
    return t_lo, t_hi


@njit(cache=True, nogil=True)
def run_sphere(x, normals, uniforms, cons, low, high, step0, burn_in, thinning, out, out_pos):
    """Advance ``len(uniforms)`` steps; record retained states into ``out``.

    Returns the next free row of ``out`` and the count of zero-length chords.
    """
    dim = x.shape[0]
    u = np.empty(dim)
    flat = 0
    for s in range(uniforms.shape[0]):
        norm = 0.0
        for e in range(dim):
            norm += normals[s, e] * normals[s, e]
        norm = np.sqrt(norm)
        for e in range(dim):
            u[e] = normals[s, e] / norm
        t_lo, t_hi = sphere_chord(x, u, cons, low, high)
        if t_hi > t_lo:
            t = t_lo + (t_hi - t_lo) * uniforms[s]
            for e in range(dim):
                x[e] += t * u[e]
                if x[e] < low:
                    x[e] = low
                elif x[e] > high:
                    x[e] = high
        else:
            flat += 1
        step = step0 + s + 1
        if step > burn_in and (step - burn_in) % thinning == 0 and out_pos < out.shape[0]:
            out[out_pos, :] = x
            out_pos += 1
    return out_pos, flat


@njit(cache=True, nogil=True)
def run_coordinate(x, coords, uniforms, pair_i, pair_j, index, low, high, step0, burn_in, thinning, out, out_pos):
    """Coordinate-direction hit-and-run: resample one distance on its chord."""
    n = index.shape[0]
    flat = 0
    for s in range(uniforms.shape[0]):
        e = coords[s]
        i = pair_i[e]
        j = pair_j[e]
        lo = low
        hi = high
        for k in range(n):
            if k == i or k == j:
                continue
            a = x[index[i, k]]
            b = x[index[j, k]]
            diff = abs(a - b)
            if diff > lo:
                lo = diff
            if a + b < hi:
                hi = a + b
        if hi > lo:
            x[e] = lo + (hi - lo) * uniforms[s]
        else:
            flat += 1
        step = step0 + s + 1
        if step > burn_in and (step - burn_in) % thinning == 0 and out_pos < out.shape[0]:
            out[out_pos, :] = x
            out_pos += 1
    return out_pos, flat


@njit(cache=True)
def count_inside(x, cons):
    """Rows of ``x`` satisfying every triangle constraint (closed)."""
    hits = 0
    for r in range(x.shape[0]):
        ok = True
        for c in range(cons.shape[0]):
            if x[r, cons[c, 0]] > x[r, cons[c, 1]] + x[r, cons[c, 2]]:
                ok = False
                break
        if ok:
            hits += 1
    return hits
