"""Lattice geometry and simple-random-walk stepping on Z^d, d >= 3.

Sites are integer d-vectors, handled either as plain tuples (hashable,
for small sets) or as (n, d) int64 arrays (for everything vectorized).
Distances are l-infinity throughout: |x| = max_i |x_i|.

Walks are generated in blocks: step codes are drawn from a stream's
Philox generator and consumed by a stop-checking kernel, so a path is a
pure function of (seed, stream_id, arguments) regardless of batching.
Stop rules are evaluated after each step, so a walk stopped by a box
exit ends strictly outside the box.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import _kernels
from .rng import RngStream

MIN_DIMENSION = 3
MAX_DIMENSION = 6

# bits per coordinate when packing a site into one uint64 key
_PACK_BITS = {3: 21, 4: 16, 5: 12, 6: 10}


@lru_cache(maxsize=None)
def directions(d):
    """The 2d unit steps, ordered (+e1, -e1, +e2, -e2, ...)."""
    dirs = np.zeros((2 * d, d), dtype=np.int64)
    for a in range(d):
        dirs[2 * a, a] = 1
        dirs[2 * a + 1, a] = -1
    dirs.setflags(write=False)
    return dirs


def check_dimension(d):
    if not MIN_DIMENSION <= d <= MAX_DIMENSION:
        raise ValueError(
            f"dimension {d} unsupported; need {MIN_DIMENSION} <= d <= {MAX_DIMENSION}"
        )


def chebyshev_distance(x, y):
    """l-infinity distance max_i |x_i - y_i| between two sites."""
    xa = np.asarray(x, dtype=np.int64)
    ya = np.asarray(y, dtype=np.int64)
    if xa.shape != ya.shape:
        raise ValueError(f"dimension mismatch: {xa.shape} vs {ya.shape}")
    return int(np.abs(xa - ya).max())


def as_site_array(sites, d=None):
    """Normalize a site collection to an (n, d) int64 array."""
    if isinstance(sites, np.ndarray):
        arr = sites.astype(np.int64, copy=False)
    else:
        sites = list(sites)
        if not sites:
            return np.empty((0, d or 0), dtype=np.int64)
        arr = np.asarray(sites, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if d is not None and arr.shape[0] and arr.shape[1] != d:
        raise ValueError(f"sites have dimension {arr.shape[1]}, expected {d}")
    return arr


def pack_sites(arr):
    """Pack an (n, d) site array into uint64 keys (order-preserving per axis).

    Coordinates must fit the per-axis budget (e.g. |x_i| < 2^20 for
    d = 3), ample for every desk-scale experiment here.
    """
    arr = np.asarray(arr, dtype=np.int64)
    d = arr.shape[1]
    bits = _PACK_BITS[d]
    half = 1 << (bits - 1)
    if arr.size and (arr.min() <= -half or arr.max() >= half):
        raise ValueError("site coordinates out of packing range")
    keys = np.zeros(arr.shape[0], dtype=np.uint64)
    for a in range(d):
        keys = (keys << np.uint64(bits)) | (arr[:, a] + half).astype(np.uint64)
    return keys


def unpack_sites(keys, d):
    bits = _PACK_BITS[d]
    half = 1 << (bits - 1)
    mask = np.uint64((1 << bits) - 1)
    out = np.empty((len(keys), d), dtype=np.int64)
    k = np.asarray(keys, dtype=np.uint64)
    for a in range(d - 1, -1, -1):
        out[:, a] = (k & mask).astype(np.int64) - half
        k = k >> np.uint64(bits)
    return out


def unique_sites(arr):
    """Deduplicate an (n, d) site array; result is sorted by packed key."""
    arr = np.asarray(arr, dtype=np.int64)
    if arr.shape[0] == 0:
        return arr
    keys = np.unique(pack_sites(arr))
    return unpack_sites(keys, arr.shape[1])


@dataclass(frozen=True)
class LBox:
    """Axis-aligned l-infinity ball: all x with |x - center| <= radius."""

    center: tuple
    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))

    @property
    def d(self):
        return len(self.center)

    @property
    def n_sites(self):
        return (2 * self.radius + 1) ** self.d

    def contains(self, x):
        return chebyshev_distance(x, self.center) <= self.radius

    def contains_points(self, arr):
        arr = np.asarray(arr, dtype=np.int64)
        c = np.asarray(self.center, dtype=np.int64)
        return np.abs(arr - c).max(axis=-1) <= self.radius

    def sites(self):
        """All member sites as an (n, d) array (lexicographic order)."""
        r = self.radius
        ax = [np.arange(c - r, c + r + 1) for c in self.center]
        grid = np.meshgrid(*ax, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)

    def inner_boundary(self):
        """Member sites having at least one neighbor outside the box."""
        s = self.sites()
        c = np.asarray(self.center, dtype=np.int64)
        on_face = (np.abs(s - c) == self.radius).any(axis=1)
        return s[on_face]

    def is_subbox_of(self, other):
        return (
            self.d == other.d
            and chebyshev_distance(self.center, other.center) + self.radius
            <= other.radius
        )


@dataclass(frozen=True)
class StopRule:
    """When a walk stops: after a step count, on box exit, or first of both."""

    max_steps: Optional[int] = None
    box: Optional[LBox] = None

    def __post_init__(self):
        if self.max_steps is None and self.box is None:
            raise ValueError("a stop rule needs a step cap, a box, or both")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("step cap must be nonnegative")

    @classmethod
    def step_cap(cls, n):
        return cls(max_steps=n)

    @classmethod
    def exit_box(cls, box):
        return cls(box=box)

    @classmethod
    def first_of(cls, n, box):
        return cls(max_steps=n, box=box)


@dataclass(frozen=True)
class LatticePath:
    """A nearest-neighbor path, stored as a start site plus step codes.

    Step code c encodes the unit move along axis c >> 1, positive when c
    is even.  Vertices are decoded on demand; the path has n_steps + 1
    vertices.  stop_reason records why generation ended: "step_cap",
    "exited", "hit_target", or "already_outside".
    """

    start: tuple
    codes: np.ndarray
    stop_reason: str = "step_cap"

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(c) for c in self.start))
        codes = np.asarray(self.codes, dtype=np.uint8)
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def d(self):
        return len(self.start)

    @property
    def n_steps(self):
        return len(self.codes)

    @property
    def vertices(self):
        """All n_steps + 1 visited sites, in order, as an (n, d) array."""
        d = self.d
        out = np.empty((self.n_steps + 1, d), dtype=np.int64)
        out[0] = self.start
        if self.n_steps:
            out[1:] = self.start + np.cumsum(directions(d)[self.codes], axis=0)
        return out

    @property
    def end(self):
        return tuple(int(c) for c in self.vertices[-1])

    def is_nearest_neighbor(self):
        """Structural validity: consecutive vertices differ by one unit step."""
        v = self.vertices
        if len(v) == 1:
            return True
        dv = np.diff(v, axis=0)
        return bool((np.abs(dv).sum(axis=1) == 1).all())

    def is_simple(self):
        v = self.vertices
        return len(np.unique(pack_sites(v))) == len(v)


_NO_MASK = np.zeros(1, dtype=np.uint8)
_NO_VEC = np.zeros(1, dtype=np.int64)

_REASON_NAMES = {
    _kernels.REASON_RUNNING: "step_cap",
    _kernels.REASON_EXITED: "exited",
    _kernels.REASON_HIT_TARGET: "hit_target",
}


def walk_batch(starts, gen, *, max_steps, exit_box=None, target_mask=None,
               target_origin=None, block=1024):
    """Run a batch of independent walks from ``starts`` off one generator.

    Codes for all live walks are drawn block-by-block from ``gen`` in walk
    index order, making the batch a deterministic function of the
    generator state.  Stops (checked after each step, target before box):

      * ``target_mask``/``target_origin``: first step landing on a masked
        site (mask is a boolean array whose [0,...,0] corner sits at
        ``target_origin``) -> reason "hit_target",
      * ``exit_box``: first step landing outside the box -> "exited",
      * ``max_steps``: hard cap -> "step_cap".

    Returns (codes_list, reasons, finals): per-walk uint8 code arrays,
    per-walk stop-reason strings, and the (n, d) final positions.
    """
    starts = np.asarray(starts, dtype=np.int64)
    n, d = starts.shape
    pos = starts.copy()
    out_codes = [[] for _ in range(n)]
    reasons = np.full(n, "step_cap", dtype=object)

    use_box = exit_box is not None
    if use_box:
        c = np.asarray(exit_box.center, dtype=np.int64)
        lo = c - exit_box.radius
        hi = c + exit_box.radius
    else:
        lo = hi = _NO_VEC
    use_target = target_mask is not None
    if use_target:
        tflat = np.ascontiguousarray(target_mask, dtype=np.uint8).ravel()
        tlo = np.asarray(target_origin, dtype=np.int64)
        tshape = np.asarray(target_mask.shape, dtype=np.int64)
    else:
        tflat, tlo, tshape = _NO_MASK, _NO_VEC, _NO_VEC

    # walks starting outside the exit box never move
    alive = np.arange(n)
    if use_box:
        outside = ~exit_box.contains_points(starts)
        reasons[alive[outside]] = "already_outside"
        alive = alive[~outside]

    taken = np.zeros(n, dtype=np.int64)
    dirs = directions(d)
    while alive.size:
        remaining = max_steps - taken[alive]
        if remaining.max() <= 0:
            break
        b = int(min(block, remaining.max()))
        codes = gen.integers(0, 2 * d, size=(alive.size, b), dtype=np.uint8)
        steps = np.empty(alive.size, dtype=np.int64)
        why = np.empty(alive.size, dtype=np.uint8)
        p = pos[alive]
        _kernels.consume_steps(p, codes, lo, hi, use_box, tflat, tlo, tshape,
                               use_target, steps, why)
        pos[alive] = p
        # clip walks that ran past their own remaining budget
        over = np.nonzero(steps > remaining)[0]
        for i in over:
            k = int(remaining[i])
            w = alive[i]
            pos[w] -= dirs[codes[i, k:steps[i]]].sum(axis=0)
            steps[i] = k
            why[i] = _kernels.REASON_RUNNING
        for i in range(alive.size):
            if steps[i]:
                out_codes[alive[i]].append(codes[i, :steps[i]])
        taken[alive] += steps
        stopped = (why != _kernels.REASON_RUNNING) | (taken[alive] >= max_steps)
        for i in np.nonzero(stopped)[0]:
            reasons[alive[i]] = _REASON_NAMES[int(why[i])]
        alive = alive[~stopped]

    final_codes = [
        np.concatenate(cs) if cs else np.empty(0, dtype=np.uint8)
        for cs in out_codes
    ]
    return final_codes, reasons, pos


def srw_run(start, rng: RngStream, stop: StopRule) -> LatticePath:
    """Simple random walk from ``start``, stopped by ``stop``.

    Each step is uniform over the 2d neighbors.  The stop rule is checked
    after each step; with an exit-box rule the path therefore ends
    strictly outside the box.  A zero step cap, or a start already
    outside the exit box, yields the single-vertex path.
    """
    start = tuple(int(c) for c in start)
    d = len(start)
    check_dimension(d)
    if stop.box is not None and stop.box.d != d:
        raise ValueError("stop box dimension mismatch")
    cap = stop.max_steps if stop.max_steps is not None else np.iinfo(np.int64).max
    if cap == 0:
        return LatticePath(start, np.empty(0, dtype=np.uint8), "step_cap")
    codes, reasons, _ = walk_batch(
        np.array([start], dtype=np.int64),
        rng.generator(),
        max_steps=cap,
        exit_box=stop.box,
    )
    return LatticePath(start, codes[0], str(reasons[0]))
