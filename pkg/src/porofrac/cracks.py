"""
Crack-pattern measurements on the nodal phase field.

All functions work on the structured-grid image of the field, mirrored to
the full domain when the scenario models only a symmetric part.  A node
belongs to the crack when its phase value exceeds ``threshold``
(0.95 by default).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError
from .mesh import distance_to_segment

CRACK_THRESHOLD = 0.95


@dataclass
class GridField:
    """Nodal values on a structured grid: ``values[j, i]`` sits at (xs[i], ys[j])."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray

    @property
    def points(self):
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.stack([X, Y], axis=-1)

    @property
    def spacing(self):
        return max(np.diff(self.xs).max(initial=0.0), np.diff(self.ys).max(initial=0.0))


def grid_field(mesh, nodal, mirror_x=False, mirror_y=False):
    """Grid image of a nodal field, optionally reflected about the left/bottom edges."""
    nodal = np.asarray(nodal, dtype=float)
    if nodal.shape != (mesh.n_nodes,):
        raise InvalidArgumentError("nodal field does not match the mesh")
    x0, y0, x1, y1 = mesh.extent
    xs = mesh.nodes[: mesh.nx + 1, 0].copy()
    ys = mesh.nodes[:: mesh.nx + 1, 1].copy()
    v = nodal.reshape(mesh.ny + 1, mesh.nx + 1)
    if mirror_x:
        v = np.concatenate([v[:, :0:-1], v], axis=1)
        xs = np.concatenate([2 * x0 - xs[:0:-1], xs])
    if mirror_y:
        v = np.concatenate([v[:0:-1], v], axis=0)
        ys = np.concatenate([2 * y0 - ys[:0:-1], ys])
    return GridField(xs, ys, v)


def crack_mask(field, threshold=CRACK_THRESHOLD):
    return field.values > threshold


def _sample(field, mask, pts):
    """Nearest-node lookup of ``mask`` at points; False outside the grid."""
    xs, ys = field.xs, field.ys
    i = np.rint(np.interp(pts[:, 0], xs, np.arange(len(xs)))).astype(int)
    j = np.rint(np.interp(pts[:, 1], ys, np.arange(len(ys)))).astype(int)
    inside = ((pts[:, 0] >= xs[0]) & (pts[:, 0] <= xs[-1])
              & (pts[:, 1] >= ys[0]) & (pts[:, 1] <= ys[-1]))
    return mask[j, i] & inside


def count_arcs(flags):
    """Number of maximal runs of True in a circular sequence."""
    flags = np.asarray(flags, dtype=bool)
    if not flags.any():
        return 0
    if flags.all():
        return 1
    starts = flags & ~np.roll(flags, 1)
    return int(starts.sum())


def arcs_by_radius(field, center, radii, threshold=CRACK_THRESHOLD):
    """Crack crossings of circles of the given radii around ``center``."""
    mask = crack_mask(field, threshold)
    h = field.spacing
    cx, cy = center
    counts = []
    for r in radii:
        n = max(16, int(np.ceil(2.0 * np.pi * r / (0.25 * h))))
        t = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        pts = np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])
        counts.append(count_arcs(_sample(field, mask, pts)))
    return np.asarray(counts)


def branch_tip_count(field, center, r_min, r_max=None, threshold=CRACK_THRESHOLD):
    """Number of crack branches leaving the region around ``center``.

    Circles of growing radius from ``r_min`` (chosen beyond the seeded
    crack) to ``r_max`` are intersected with the crack.  The count of
    separate crossings that occurs at the most radii (ignoring radii with no
    crossing, ties going to the larger count) is the number of branch tips.
    A straight crack through the centre gives 2 and a crack that forks once
    at each end 4.  The default ``r_max`` keeps the circles clear of the
    outer edges, where boundary damage would add spurious crossings.
    """
    if r_max is None:
        r_max = 0.45 * min(field.xs[-1] - field.xs[0], field.ys[-1] - field.ys[0])
    if not 0 < r_min < r_max:
        raise InvalidArgumentError("need 0 < r_min < r_max")
    radii = np.arange(r_min, r_max, 0.5 * field.spacing)
    counts = arcs_by_radius(field, center, radii, threshold)
    counts = counts[counts > 0]
    if len(counts) == 0:
        return 0
    values, freq = np.unique(counts, return_counts=True)
    return int(values[freq == freq.max()].max())


def component_mask(field, seed_point, threshold=CRACK_THRESHOLD):
    """Connected crack region (8-connectivity) containing the node nearest ``seed_point``."""
    mask = crack_mask(field, threshold)
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    i = int(np.abs(field.xs - seed_point[0]).argmin())
    j = int(np.abs(field.ys - seed_point[1]).argmin())
    lab = labels[j, i]
    if lab == 0:
        return np.zeros_like(mask)
    return labels == lab


def connected(field, point_a, point_b, threshold=CRACK_THRESHOLD):
    """True when the two points lie in the same connected crack region."""
    comp = component_mask(field, point_a, threshold)
    i = int(np.abs(field.xs - point_b[0]).argmin())
    j = int(np.abs(field.ys - point_b[1]).argmin())
    return bool(comp[j, i])


def extent_from_segment(field, segment, seed_point=None, threshold=CRACK_THRESHOLD):
    """Largest distance from ``segment`` reached by the crack region attached to it."""
    if seed_point is None:
        seed_point = 0.5 * (np.asarray(segment[0], float) + np.asarray(segment[1], float))
    comp = component_mask(field, seed_point, threshold)
    if not comp.any():
        return 0.0
    return float(distance_to_segment(field.points[comp], segment).max())


def farthest_point(field, segment, seed_point=None, threshold=CRACK_THRESHOLD):
    """Crack node farthest from ``segment`` within the attached region (None if empty)."""
    if seed_point is None:
        seed_point = 0.5 * (np.asarray(segment[0], float) + np.asarray(segment[1], float))
    comp = component_mask(field, seed_point, threshold)
    if not comp.any():
        return None
    pts = field.points[comp]
    return pts[distance_to_segment(pts, segment).argmax()]


def initiation_time(times, extents, margin):
    """First time the crack extent exceeds its initial value by ``margin`` (None if never)."""
    extents = np.asarray(extents, dtype=float)
    if len(extents) == 0:
        return None
    hit = np.flatnonzero(extents > extents[0] + margin)
    return float(np.asarray(times)[hit[0]]) if len(hit) else None


def pressure_drops(times, values, window):
    """Largest relative fall max(p(t) - p(t')) / p(t) over t < t' <= t + window.

    Returns (relative drop, time at which the fall starts).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    best, when = 0.0, None
    j = 0
    for i in range(len(t)):
        j = max(j, i)
        while j + 1 < len(t) and t[j + 1] <= t[i] + window:
            j += 1
        if j > i and v[i] > 0:
            drop = (v[i] - v[i + 1: j + 1].min()) / v[i]
            if drop > best:
                best, when = float(drop), float(t[i])
    return best, when


@dataclass
class CrackSummary:
    tips: int
    extent: float
    cracked_nodes: int


def summarize(mesh, phi, segment, center, r_min, mirror: Tuple[bool, bool] = (False, False),
              threshold=CRACK_THRESHOLD):
    field = grid_field(mesh, phi, *mirror)
    return CrackSummary(branch_tip_count(field, center, r_min, threshold=threshold),
                        extent_from_segment(field, segment, center, threshold),
                        int(crack_mask(field, threshold).sum()))
