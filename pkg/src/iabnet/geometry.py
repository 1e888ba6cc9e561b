"""Germ-grain blockage process and correlated LOS/NLOS link queries.

Blockages are random line segments (uniform midpoints, i.i.d. uniform
orientations); a link is LOS iff no segment crosses it.  Link-state
queries dominate simulator cost, so segments are bucketed on a uniform
grid and each query walks only the cells the link passes through
(exact: a segment is registered in every cell its dilated bounding box
overlaps, so any crossing is found in some visited cell).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "LinkState",
    "Segment",
    "Rect",
    "BlockageField",
    "sample_blockage_field",
    "segments_intersect",
    "link_state",
    "link_states_batch",
    "pathloss",
    "pathloss_from_distance",
    "pair_uniform",
]

_BBOX_DILATION = 1e-3  # m; keeps boundary-touching hits inside candidate cells
_MIN_CELL = 25.0  # m


class LinkState(enum.IntEnum):
    LOS = 0
    NLOS = 1


@dataclass(frozen=True)
class Segment:
    """One blockage: midpoint (m), length (m), orientation in (0, 2*pi]."""

    midpoint: tuple
    length: float
    orientation: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("segment length must be > 0")

    def endpoints(self):
        hx = 0.5 * self.length * math.cos(self.orientation)
        hy = 0.5 * self.length * math.sin(self.orientation)
        (mx, my) = self.midpoint
        return (mx - hx, my - hy), (mx + hx, my + hy)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("degenerate window")

    @classmethod
    def square(cls, side: float, center=(0.0, 0.0)) -> "Rect":
        h = side / 2.0
        return cls(center[0] - h, center[1] - h, center[0] + h, center[1] + h)

    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def area_km2(self) -> float:
        return self.area() * 1e-6

    def center(self):
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def expanded(self, margin: float) -> "Rect":
        return Rect(self.xmin - margin, self.ymin - margin,
                    self.xmax + margin, self.ymax + margin)

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


# ----------------------------------------------------------------------
# Exact segment intersection (orientation-sign test, collinear overlaps
# and shared endpoints count as intersecting).
# ----------------------------------------------------------------------

@njit(cache=True, inline="always")
def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


@njit(cache=True, inline="always")
def _on_segment(px, py, qx, qy, rx, ry):
    # r collinear with pq: is r within the bounding box of pq?
    return (min(px, qx) <= rx <= max(px, qx)) and (min(py, qy) <= ry <= max(py, qy))


@njit(cache=True)
def _segs_cross(ax, ay, bx, by, cx, cy, dx, dy):
    d1 = _cross(ax, ay, bx, by, cx, cy)
    d2 = _cross(ax, ay, bx, by, dx, dy)
    d3 = _cross(cx, cy, dx, dy, ax, ay)
    d4 = _cross(cx, cy, dx, dy, bx, by)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0.0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if d2 == 0.0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    if d3 == 0.0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if d4 == 0.0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    return False


# Shewchuk-style static filter: beyond this relative bound the float
# determinant sign is certain; otherwise fall back to exact rationals.
_ORIENT_EPS = 3.3306690738754716e-16


def _orient_sign(ax, ay, bx, by, cx, cy) -> int:
    t1 = (bx - ax) * (cy - ay)
    t2 = (by - ay) * (cx - ax)
    det = t1 - t2
    if abs(det) > _ORIENT_EPS * (abs(t1) + abs(t2)):
        return 1 if det > 0 else -1
    from fractions import Fraction as F

    det_exact = (F(bx) - F(ax)) * (F(cy) - F(ay)) - (F(by) - F(ay)) * (F(cx) - F(ax))
    return (det_exact > 0) - (det_exact < 0)


def segments_intersect(a_start, a_end, b_start, b_end) -> bool:
    """True iff the closed segments share at least one point.

    Orientation signs are exact (filtered float with rational fallback),
    so touching and collinear-overlap cases are classified consistently
    under any argument or endpoint ordering.
    """
    coords = (*a_start, *a_end, *b_start, *b_end)
    if not all(math.isfinite(c) for c in coords):
        raise ValueError("coordinates must be finite")
    ax, ay, bx, by, cx, cy, dx, dy = (float(c) for c in coords)
    d1 = _orient_sign(ax, ay, bx, by, cx, cy)
    d2 = _orient_sign(ax, ay, bx, by, dx, dy)
    d3 = _orient_sign(cx, cy, dx, dy, ax, ay)
    d4 = _orient_sign(cx, cy, dx, dy, bx, by)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    if d1 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if d2 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    if d3 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if d4 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    return False


# ----------------------------------------------------------------------
# Grid walk: visit the cells a query link passes through and test all
# segments registered there; early exit on the first crossing.
# ----------------------------------------------------------------------

@njit(cache=True)
def _link_blocked(qax, qay, qbx, qby,
                  sx1, sy1, sx2, sy2,
                  cell_start, cell_items, nx, ny, x0, y0, cell):
    ix = int((qax - x0) / cell)
    iy = int((qay - y0) / cell)
    ix_end = int((qbx - x0) / cell)
    iy_end = int((qby - y0) / cell)
    ix = min(max(ix, 0), nx - 1)
    iy = min(max(iy, 0), ny - 1)
    ix_end = min(max(ix_end, 0), nx - 1)
    iy_end = min(max(iy_end, 0), ny - 1)

    dx = qbx - qax
    dy = qby - qay
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    if dx != 0.0:
        nxt = (ix + (1 if step_x > 0 else 0)) * cell + x0
        t_max_x = (nxt - qax) / dx
        t_dx = abs(cell / dx)
    else:
        t_max_x = np.inf
        t_dx = np.inf
    if dy != 0.0:
        nyt = (iy + (1 if step_y > 0 else 0)) * cell + y0
        t_max_y = (nyt - qay) / dy
        t_dy = abs(cell / dy)
    else:
        t_max_y = np.inf
        t_dy = np.inf

    for _ in range(nx + ny + 4):
        c = iy * nx + ix
        for k in range(cell_start[c], cell_start[c + 1]):
            j = cell_items[k]
            if _segs_cross(qax, qay, qbx, qby, sx1[j], sy1[j], sx2[j], sy2[j]):
                return True
        if ix == ix_end and iy == iy_end:
            return False
        if t_max_x < t_max_y:
            t_max_x += t_dx
            ix += step_x
            if ix < 0 or ix >= nx:
                return False
        else:
            t_max_y += t_dy
            iy += step_y
            if iy < 0 or iy >= ny:
                return False
    return False


@njit(cache=True)
def _links_blocked_batch(qax, qay, qbx, qby,
                         sx1, sy1, sx2, sy2,
                         cell_start, cell_items, nx, ny, x0, y0, cell):
    n = qax.shape[0]
    out = np.empty(n, dtype=np.uint8)
    for i in range(n):
        out[i] = 1 if _link_blocked(
            qax[i], qay[i], qbx[i], qby[i],
            sx1, sy1, sx2, sy2,
            cell_start, cell_items, nx, ny, x0, y0, cell,
        ) else 0
    return out


class BlockageField:
    """Sampled blockage process over a window, with a spatial index.

    Midpoints lie inside `window`; endpoints may protrude.  Immutable
    after construction; concurrent read queries are safe.
    """

    def __init__(self, midpoints, lengths, orientations, window: Rect):
        mid = np.atleast_2d(np.asarray(midpoints, dtype=float)).reshape(-1, 2)
        self.midpoints = mid
        self.lengths = np.asarray(lengths, dtype=float).reshape(-1)
        self.orientations = np.asarray(orientations, dtype=float).reshape(-1)
        if not (len(self.lengths) == len(self.orientations) == mid.shape[0]):
            raise ValueError("midpoints, lengths, orientations must align")
        if np.any(self.lengths <= 0):
            raise ValueError("segment lengths must be > 0")
        self.window = window
        for mx, my in mid:
            if not window.contains(mx, my):
                raise ValueError("segment midpoint outside window")
        hx = 0.5 * self.lengths * np.cos(self.orientations)
        hy = 0.5 * self.lengths * np.sin(self.orientations)
        self.x1 = mid[:, 0] - hx
        self.y1 = mid[:, 1] - hy
        self.x2 = mid[:, 0] + hx
        self.y2 = mid[:, 1] + hy
        self._build_grid()

    def _build_grid(self):
        w = self.window
        max_len = float(self.lengths.max()) if len(self.lengths) else 0.0
        self.cell = max(max_len, _MIN_CELL)
        # grid covers every endpoint, protruding ones included
        pad = max_len + 1.0
        self.gx0 = w.xmin - pad
        self.gy0 = w.ymin - pad
        self.nx = max(1, int(math.ceil((w.xmax + pad - self.gx0) / self.cell)))
        self.ny = max(1, int(math.ceil((w.ymax + pad - self.gy0) / self.cell)))
        n_seg = len(self.lengths)
        d = _BBOX_DILATION
        bx0 = np.minimum(self.x1, self.x2) - d
        bx1 = np.maximum(self.x1, self.x2) + d
        by0 = np.minimum(self.y1, self.y2) - d
        by1 = np.maximum(self.y1, self.y2) + d
        ix0 = np.clip(((bx0 - self.gx0) / self.cell).astype(np.int64), 0, self.nx - 1)
        ix1 = np.clip(((bx1 - self.gx0) / self.cell).astype(np.int64), 0, self.nx - 1)
        iy0 = np.clip(((by0 - self.gy0) / self.cell).astype(np.int64), 0, self.ny - 1)
        iy1 = np.clip(((by1 - self.gy0) / self.cell).astype(np.int64), 0, self.ny - 1)
        counts = np.zeros(self.nx * self.ny + 1, dtype=np.int64)
        entries_cell = []
        entries_seg = []
        for j in range(n_seg):
            for iy in range(iy0[j], iy1[j] + 1):
                base = iy * self.nx
                for ix in range(ix0[j], ix1[j] + 1):
                    entries_cell.append(base + ix)
                    entries_seg.append(j)
        cells = np.asarray(entries_cell, dtype=np.int64)
        segs = np.asarray(entries_seg, dtype=np.int64)
        order = np.argsort(cells, kind="stable")
        cells = cells[order]
        np.add.at(counts, cells + 1, 1)
        self.cell_start = np.cumsum(counts)
        self.cell_items = segs[order]

    def __len__(self) -> int:
        return len(self.lengths)

    @classmethod
    def from_segments(cls, segments, window: Rect) -> "BlockageField":
        mids = [s.midpoint for s in segments]
        return cls(
            np.asarray(mids, dtype=float).reshape(-1, 2),
            [s.length for s in segments],
            [s.orientation for s in segments],
            window,
        )

    def segments(self):
        return [
            Segment((x, y), l, o)
            for (x, y), l, o in zip(self.midpoints, self.lengths, self.orientations)
        ]

    def translated(self, dx: float, dy: float) -> "BlockageField":
        w = self.window
        return BlockageField(
            self.midpoints + np.array([dx, dy]),
            self.lengths.copy(),
            self.orientations.copy(),
            Rect(w.xmin + dx, w.ymin + dy, w.xmax + dx, w.ymax + dy),
        )

    def with_extra_segments(self, segments) -> "BlockageField":
        extra = BlockageField.from_segments(segments, self.window)
        return BlockageField(
            np.vstack([self.midpoints, extra.midpoints]),
            np.concatenate([self.lengths, extra.lengths]),
            np.concatenate([self.orientations, extra.orientations]),
            self.window,
        )

    # -- CSV round-trip for reproducibility ----------------------------
    def dump_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["midpoint_x", "midpoint_y", "length", "orientation"])
            wr.writerow(["# window", repr(self.window.xmin), repr(self.window.ymin),
                         f"{self.window.xmax!r}/{self.window.ymax!r}"])
            for (x, y), l, o in zip(self.midpoints, self.lengths, self.orientations):
                wr.writerow([repr(float(x)), repr(float(y)),
                             repr(float(l)), repr(float(o))])

    @classmethod
    def load_csv(cls, path) -> "BlockageField":
        with open(path, "r", newline="", encoding="utf-8") as fh:
            rd = csv.reader(fh)
            next(rd)  # header
            meta = next(rd)
            xmax, ymax = meta[3].split("/")
            window = Rect(float(meta[1]), float(meta[2]), float(xmax), float(ymax))
            rows = [[float(v) for v in row] for row in rd]
        arr = np.asarray(rows, dtype=float).reshape(-1, 4)
        return cls(arr[:, :2], arr[:, 2], arr[:, 3], window)


def sample_blockage_field(density: float, length: float, window: Rect,
                          seed: int) -> BlockageField:
    """Sample the segment process: Poisson count, uniform midpoints,
    uniform orientations in (0, 2*pi].  `density` is per km^2."""
    if not (math.isfinite(density) and density >= 0):
        raise ValueError("density must be finite and >= 0")
    if not (math.isfinite(length) and length > 0):
        raise ValueError("length must be finite and > 0")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xB10C)))
    n = rng.poisson(density * window.area_km2())
    xs = rng.uniform(window.xmin, window.xmax, size=n)
    ys = rng.uniform(window.ymin, window.ymax, size=n)
    orients = 2.0 * math.pi - rng.uniform(0.0, 2.0 * math.pi, size=n)
    return BlockageField(np.column_stack([xs, ys]), np.full(n, float(length)),
                         orients, window)


def link_states_batch(starts, ends, field: BlockageField) -> np.ndarray:
    """LOS/NLOS state codes for many links at once (0 = LOS, 1 = NLOS)."""
    a = np.atleast_2d(np.asarray(starts, dtype=float))
    b = np.atleast_2d(np.asarray(ends, dtype=float))
    if len(field) == 0:
        return np.zeros(a.shape[0], dtype=np.uint8)
    return _links_blocked_batch(
        np.ascontiguousarray(a[:, 0]), np.ascontiguousarray(a[:, 1]),
        np.ascontiguousarray(b[:, 0]), np.ascontiguousarray(b[:, 1]),
        field.x1, field.y1, field.x2, field.y2,
        field.cell_start, field.cell_items,
        field.nx, field.ny, field.gx0, field.gy0, field.cell,
    )


def link_state(x, y, field: BlockageField) -> LinkState:
    """State of the link x-y: LOS iff no field segment crosses it."""
    if tuple(x) == tuple(y):
        raise ValueError("link endpoints must differ")
    blocked = link_states_batch(np.asarray(x, float)[None, :],
                                np.asarray(y, float)[None, :], field)[0]
    return LinkState.NLOS if blocked else LinkState.LOS


def pathloss(x, y, state: LinkState, alpha_los: float, alpha_nlos: float) -> float:
    """Distance-power pathloss with the exponent picked by link state."""
    r = math.dist(tuple(x), tuple(y))
    if r == 0.0:
        raise ValueError("link endpoints must differ")
    return pathloss_from_distance(r, state, alpha_los, alpha_nlos)


def pathloss_from_distance(r, state, alpha_los: float, alpha_nlos: float):
    r = np.asarray(r, dtype=float)
    state = np.asarray(state)
    out = np.where(state == int(LinkState.NLOS), r**alpha_nlos, r**alpha_los)
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------
# Deterministic per-pair uniforms (splitmix64) for the independent
# exponential-blocking mode: i.i.d. across (seed, kind, i, j), stable
# across runs and platforms.
# ----------------------------------------------------------------------

@njit(cache=True, inline="always")
def _splitmix64(z):
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _pair_uniform(seed, kind, i, j):
    z = _splitmix64(np.uint64(seed) ^ np.uint64(0xA5A5A5A55A5A5A5A))
    z = _splitmix64(z ^ np.uint64(kind))
    z = _splitmix64(z ^ np.uint64(i))
    z = _splitmix64(z ^ np.uint64(j))
    return (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _pair_uniform_batch(seed, kind, i_arr, j_arr):
    n = i_arr.shape[0]
    out = np.empty(n, dtype=np.float64)
    for k in range(n):
        out[k] = _pair_uniform(seed, kind, i_arr[k], j_arr[k])
    return out


def pair_uniform(seed: int, kind: int, i, j):
    """U(0,1) draws keyed by (seed, kind, i, j); vectorized over i, j."""
    i_arr = np.atleast_1d(np.asarray(i, dtype=np.int64))
    j_arr = np.atleast_1d(np.asarray(j, dtype=np.int64))
    i_arr, j_arr = np.broadcast_arrays(i_arr, j_arr)
    out = _pair_uniform_batch(
        np.uint64(seed), np.uint64(kind),
        np.ascontiguousarray(i_arr), np.ascontiguousarray(j_arr),
    )
    return out if out.size > 1 else float(out[0])
