"""Hot inner loops for batched walk stepping.

A walk consumes pre-drawn step codes (one uint8 in [0, 2d) per step,
code c meaning axis c >> 1, direction +1 for even c and -1 for odd c)
and stops after the first step that fires a stop condition.  Conditions
are checked after each step, in the order: target hit, box exit.

Two implementations with identical semantics are provided: a numba one
(used when numba is importable) and a pure-numpy block fallback.  Both
consume the same code arrays, so results are bit-identical either way.
"""

import numpy as np

try:
    import numba as _nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _nb = None
    HAVE_NUMBA = False

REASON_RUNNING = 0
REASON_EXITED = 1
REASON_HIT_TARGET = 2


def _consume_numpy(pos, codes, lo, hi, use_box, tflat, tlo, tshape,
                   use_target, steps_out, reason_out):
    n, b = codes.shape
    d = pos.shape[1]
    dirs = np.zeros((2 * d, d), dtype=np.int64)
    for a in range(d):
        dirs[2 * a, a] = 1
        dirs[2 * a + 1, a] = -1
    traj = pos[:, None, :] + np.cumsum(dirs[codes], axis=1)
    stop = np.zeros((n, b), dtype=bool)
    reason_grid = np.zeros((n, b), dtype=np.uint8)
    if use_target:
        rel = traj - tlo
        inside = np.all((rel >= 0) & (rel < tshape), axis=2)
        hit_t = np.zeros((n, b), dtype=bool)
        if inside.any():
            ii = np.nonzero(inside)
            flat = np.zeros(ii[0].size, dtype=np.int64)
            for a in range(d):
                flat = flat * tshape[a] + rel[ii][:, a]
            hit_t[ii] = tflat[flat].astype(bool)
        stop |= hit_t
        reason_grid[hit_t] = REASON_HIT_TARGET
    if use_box:
        out = np.any((traj < lo) | (traj > hi), axis=2)
        out &= reason_grid == 0  # target checked first
        stop |= out
        reason_grid[out] = REASON_EXITED
    hit = stop.any(axis=1)
    first = np.where(hit, stop.argmax(axis=1), b - 1)
    rows = np.arange(n)
    pos[:] = traj[rows, first]
    steps_out[:] = first + 1
    reason_out[:] = np.where(hit, reason_grid[rows, first], REASON_RUNNING)


if HAVE_NUMBA:

    @_nb.njit(cache=True)
    def _consume_numba(pos, codes, lo, hi, use_box, tflat, tlo, tshape,
                       use_target, steps_out, reason_out):  # pragma: no cover
        n, b = codes.shape
        d = pos.shape[1]
        for i in range(n):
            used = 0
            reason = REASON_RUNNING
            for t in range(b):
                c = codes[i, t]
                axis = c >> 1
                if c & 1:
                    pos[i, axis] -= 1
                else:
                    pos[i, axis] += 1
                used += 1
                if use_target:
                    ok = True
                    flat = 0
                    for a in range(d):
                        r = pos[i, a] - tlo[a]
                        if r < 0 or r >= tshape[a]:
                            ok = False
                            break
                        flat = flat * tshape[a] + r
                    if ok and tflat[flat]:
                        reason = REASON_HIT_TARGET
                        break
                if use_box:
                    out = False
                    for a in range(d):
                        if pos[i, a] < lo[a] or pos[i, a] > hi[a]:
                            out = True
                            break
                    if out:
                        reason = REASON_EXITED
                        break
            steps_out[i] = used
            reason_out[i] = reason


def consume_steps(pos, codes, lo, hi, use_box, tflat, tlo, tshape,
                  use_target, steps_out, reason_out):
    """Advance each walk through its code row until a stop fires.

    Mutates ``pos`` to the final positions and fills ``steps_out`` /
    ``reason_out`` per walk.  A walk that exhausts its row without
    stopping gets REASON_RUNNING.
    """
    if HAVE_NUMBA:
        _consume_numba(pos, codes, lo, hi, use_box, tflat, tlo, tshape,
                       use_target, steps_out, reason_out)
    else:
        _consume_numpy(pos, codes, lo, hi, use_box, tflat, tlo, tshape,
                       use_target, steps_out, reason_out)
