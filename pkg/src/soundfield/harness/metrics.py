"""Error metrics and a finite-difference Helmholtz residual check."""
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

NMSE_FLOOR_DB = -150.0


def nmse(estimate, truth):
    """Normalised mean square error in dB, floored at -150 dB.

    ``10 log10(sum |est - truth|^2 / sum |truth|^2)`` over all points.
    """
    est = np.asarray(estimate, dtype=complex).ravel()
    ref = np.asarray(truth, dtype=complex).ravel()
    if est.size == 0 or est.size != ref.size:
        raise DomainError("estimate and truth must be nonempty and of equal length")
    denom = float(np.sum(np.abs(ref) ** 2))
    if denom == 0.0:
        raise DomainError("NMSE is undefined for an all-zero reference")
    num = float(np.sum(np.abs(est - ref) ** 2))
    if num == 0.0:
        return NMSE_FLOOR_DB
    return max(10.0 * np.log10(num / denom), NMSE_FLOOR_DB)


@dataclass(frozen=True)
class FDGrid:
    """Cubic lattice of ``nodes`` points per axis with spacing ``h`` around ``center``."""

    center: tuple
    h: float
    nodes: int = 7

    def points(self):
        offs = (np.arange(self.nodes) - (self.nodes - 1) / 2.0) * self.h
        mesh = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), axis=-1)
        return mesh + np.asarray(self.center, dtype=float)


def helmholtz_residual(sampler, k, grid):
    """Largest normalised residual of the Helmholtz equation on a lattice.

    The 7-point finite-difference Laplacian is evaluated at interior nodes;
    the result is ``max |lap u + k^2 u| / (k^2 max |u|)``.

    Parameters
    ----------
    sampler : callable
        Maps an (N, 3) array of positions to N complex pressures.
    k : float
    grid : FDGrid
        Spacing must not exceed a fortieth of the wavelength.
    """
    wavelength = 2.0 * np.pi / k
    if grid.h > wavelength / 40.0 * (1 + 1e-12):
        raise DomainError(f"grid spacing {grid.h:.3g} m exceeds wavelength/40 = {wavelength / 40:.3g} m")
    if grid.nodes < 3:
        raise DomainError("at least three nodes per axis are needed")
    pts = grid.points()
    n = grid.nodes
    u = np.asarray(sampler(pts.reshape(-1, 3)), dtype=complex).reshape(n, n, n)
    c = u[1:-1, 1:-1, 1:-1]
    lap = (u[2:, 1:-1, 1:-1] + u[:-2, 1:-1, 1:-1] + u[1:-1, 2:, 1:-1] + u[1:-1, :-2, 1:-1]
           + u[1:-1, 1:-1, 2:] + u[1:-1, 1:-1, :-2] - 6.0 * c) / grid.h**2
    scale = k * k * np.max(np.abs(u))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(lap + k * k * c)) / scale)


def residual_grid(center, k, fraction=100, nodes=7):
    """Lattice with spacing ``wavelength / fraction``."""
    return FDGrid(tuple(center), 2.0 * np.pi / k / fraction, nodes)
