"""Planar slices of a field through the target region, written as CSV."""
import csv
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class PlaneSpec:
    """Slice normal to ``axis`` at ``offset`` metres from the region centre."""

    axis: str = "z"
    offset: float = 0.0
    points_per_axis: int = 21

    def __post_init__(self):
        if self.axis not in AXES:
            raise DomainError(f"axis must be x, y or z, got {self.axis!r}")
        if self.points_per_axis < 1:
            raise DomainError("points_per_axis must be positive")


def plane_points(region, plane):
    """Lattice points of ``plane`` that fall inside ``region``.

    Returns
    -------
    points : (P, 3) ndarray
    uv : (P, 2) ndarray
        In-plane coordinates (the two remaining axes in x, y, z order).
    """
    normal = AXES[plane.axis]
    in_plane = [a for a in range(3) if a != normal]
    c = np.asarray(region.center, dtype=float)
    half = np.full(3, region.radius) if region.shape == "ball" else np.asarray(region.half_extents)
    n = plane.points_per_axis
    if n == 1:
        axes = [np.array([c[a]]) for a in in_plane]
    else:
        axes = [np.linspace(c[a] - half[a], c[a] + half[a], n) for a in in_plane]
    uu, vv = np.meshgrid(*axes, indexing="ij")
    pts = np.empty((uu.size, 3))
    pts[:, in_plane[0]] = uu.ravel()
    pts[:, in_plane[1]] = vv.ravel()
    pts[:, normal] = c[normal] + plane.offset
    keep = region.contains(pts, margin=1e-12)
    if not np.any(keep):
        raise DomainError("the slice plane does not intersect the region")
    pts = pts[keep]
    return pts, pts[:, in_plane]


def write_heatmap_csv(path, uv, values):
    values = np.asarray(values, dtype=complex).ravel()
    if len(values) != len(uv):
        raise DomainError("one value per slice point is required")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "re", "im", "magnitude"])
        for (u, v), p in zip(uv, values):
            writer.writerow([repr(float(u)), repr(float(v)), repr(float(p.real)), repr(float(p.imag)),
                             repr(float(abs(p)))])


def export_heatmap(sampler, region, plane, path):
    """Sample ``sampler`` on a slice of ``region`` and write ``x, y, re, im, magnitude``."""
    pts, uv = plane_points(region, plane)
    values = sampler(pts)
    write_heatmap_csv(path, uv, values)
    return pts, values
