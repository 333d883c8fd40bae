"""Finite basis-expansion estimators.

A sound field inside a source-free region is modelled as a weighted sum of
Helmholtz element solutions (plane waves, spherical wave functions or point
sources on an enclosing surface). Weights are fitted by ridge regression or by
l1-regularised least squares (FISTA).
"""
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .acoustics import SINGULAR_DISTANCE
from .errors import DomainError, IllPosedError, SingularityError
from .specfun import fibonacci_directions, sph_bessel_j_upto, sph_harmonics_upto

KINDS = ("plane_wave", "spherical_wave", "equivalent_source")
EQUIVALENT_SOURCE_INFLATION = 1.2


@dataclass
class BasisSpec:
    kind: str
    directions: np.ndarray = None
    order: int = 0
    center: np.ndarray = None
    sources: np.ndarray = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown basis kind {self.kind!r}")
        if self.kind == "plane_wave":
            self.directions = np.atleast_2d(np.asarray(self.directions, dtype=float))
            norms = np.linalg.norm(self.directions, axis=-1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise DomainError("plane-wave directions must be unit vectors")
        elif self.kind == "spherical_wave":
            if int(self.order) < 0:
                raise DomainError("truncation order must be nonnegative")
            self.order = int(self.order)
            self.center = np.asarray(self.center if self.center is not None else np.zeros(3), dtype=float)
        else:
            self.sources = np.atleast_2d(np.asarray(self.sources, dtype=float))
        if self.size < 1:
            raise DomainError("a basis needs at least one element")

    @property
    def size(self):
        if self.kind == "plane_wave":
            return len(self.directions)
        if self.kind == "spherical_wave":
            return (self.order + 1) ** 2
        return len(self.sources)

    @classmethod
    def plane_waves(cls, n):
        return cls("plane_wave", directions=fibonacci_directions(n))

    @classmethod
    def spherical_waves(cls, order, center):
        return cls("spherical_wave", order=order, center=center)

    @classmethod
    def equivalent_sources(cls, region, n):
        """Point sources on a sphere 1.2x the circumradius of ``region``."""
        radius = EQUIVALENT_SOURCE_INFLATION * region.circumradius
        sources = np.asarray(region.center) + radius * fibonacci_directions(n)
        return cls("equivalent_source", sources=sources)


@dataclass
class Dictionary:
    matrix: np.ndarray
    spec: BasisSpec
    k: float


@dataclass
class ExpansionSolution:
    coefficients: np.ndarray
    lam: float
    residual_norm: float
    converged: bool = True
    iterations: int = 0
    objective_trace: list = field(default_factory=list, repr=False)


def truncation_order(k, radius, rule="ceil_kR"):
    """Spherical-wave truncation order from the kR or e kR / 2 rule of thumb."""
    if k <= 0 or radius <= 0:
        raise DomainError("k and radius must be positive")
    kr = k * radius
    if rule == "ceil_kR":
        return int(math.ceil(kr))
    if rule == "ceil_ekR_over_2":
        return int(math.ceil(math.e * kr / 2.0))
    raise DomainError(f"unknown truncation rule {rule!r}")


def default_plane_wave_count(k, radius):
    return 2 * (truncation_order(k, radius, "ceil_ekR_over_2") + 1) ** 2


def build_dictionary(spec, points, k):
    """Evaluate every basis function of ``spec`` at ``points``.

    Returns
    -------
    Dictionary
        ``matrix`` has one row per point and one column per basis function.
    """
    if k <= 0:
        raise DomainError("wavenumber must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise DomainError("at least one evaluation point is required")
    if spec.kind == "plane_wave":
        phi = np.exp(-1j * k * points @ spec.directions.T)
    elif spec.kind == "spherical_wave":
        rel = points - spec.center
        dist = np.linalg.norm(rel, axis=-1)
        dirs = np.tile([0.0, 0.0, 1.0], (len(points), 1))
        nz = dist > 0
        dirs[nz] = rel[nz] / dist[nz, None]
        radial = sph_bessel_j_upto(spec.order, k * dist)
        orders = np.repeat(np.arange(spec.order + 1), 2 * np.arange(spec.order + 1) + 1)
        phi = radial[orders].T * sph_harmonics_upto(spec.order, dirs)
    else:
        d = np.linalg.norm(points[:, None, :] - spec.sources[None, :, :], axis=-1)
        if d.min() < SINGULAR_DISTANCE:
            raise SingularityError("evaluation point coincides with an equivalent source")
        phi = np.exp(1j * k * d) / (4.0 * np.pi * d)
    return Dictionary(matrix=phi, spec=spec, k=float(k))


def ridge_solve(dictionary, y, lam):
    """Minimise ``||y - Phi g||^2 + lam ||g||^2``.

    Uses the primal normal equations when the dictionary has no more columns
    than rows and the dual form ``Phi^H (Phi Phi^H + lam I)^-1 y`` otherwise,
    both through a Cholesky factorisation.
    """
    phi = dictionary.matrix
    y = np.asarray(y, dtype=complex).ravel()
    n_rows, n_cols = phi.shape
    if len(y) != n_rows:
        raise DomainError(f"expected {n_rows} observations, got {len(y)}")
    if lam < 0:
        raise DomainError("regularisation must be nonnegative")
    if lam == 0:
        if n_cols > n_rows or np.linalg.cond(phi) > 1e12:
            raise IllPosedError("unregularised fit with a rank-deficient dictionary")
        gamma = scipy.linalg.lstsq(phi, y)[0]
    elif n_cols <= n_rows:
        gram = phi.conj().T @ phi
        gram[np.diag_indices(n_cols)] += lam
        gamma = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), phi.conj().T @ y)
    else:
        gram = phi @ phi.conj().T
        gram[np.diag_indices(n_rows)] += lam
        gamma = phi.conj().T @ scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), y)
    residual = float(np.linalg.norm(y - phi @ gamma))
    return ExpansionSolution(coefficients=gamma, lam=float(lam), residual_norm=residual)


def soft_threshold(z, threshold):
    """Shrink complex magnitudes by ``threshold`` while keeping their phase."""
    mag = np.abs(z)
    scale = np.maximum(mag - threshold, 0.0) / np.where(mag > 0, mag, 1.0)
    return z * scale


def spectral_norm_sq(phi, iterations=20):
    """Power-iteration estimate of sigma_max(Phi)^2 from a fixed start vector."""
    v = np.ones(phi.shape[1], dtype=complex) / np.sqrt(phi.shape[1])
    est = 0.0
    for _ in range(iterations):
        w = phi.conj().T @ (phi @ v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


def _l1_objective(phi, y, gamma, lam):
    r = y - phi @ gamma
    return float(np.vdot(r, r).real + lam * np.sum(np.abs(gamma)))


def fista_l1(dictionary, y, lam, max_iter=5000, tol=1e-12, accelerate=True):
    """Minimise ``||y - Phi g||^2 + lam ||g||_1`` with FISTA.

    Momentum is reset whenever an accelerated step would increase the
    objective, in which case a plain proximal-gradient step is taken from the
    current iterate, so the objective trace never increases. With
    ``accelerate=False`` the method reduces to ISTA.

    Non-convergence within ``max_iter`` is reported through the
    ``converged`` flag and a ``RuntimeWarning``.
    """
    if lam <= 0:
        raise DomainError("l1 regularisation must be positive")
    phi = dictionary.matrix
    y = np.asarray(y, dtype=complex).ravel()
    if len(y) != phi.shape[0]:
        raise DomainError(f"expected {phi.shape[0]} observations, got {len(y)}")
    n_cols = phi.shape[1]
    x = np.zeros(n_cols, dtype=complex)
    lipschitz = 2.0 * 1.05 * spectral_norm_sq(phi)
    f_x = _l1_objective(phi, y, x, lam)
    trace = [f_x]
    if lipschitz == 0.0 or not np.any(y):
        return ExpansionSolution(x, float(lam), float(np.linalg.norm(y)), True, 0, trace)
    step = 1.0 / lipschitz
    phi_h = phi.conj().T

    def prox_step(v):
        grad = 2.0 * (phi_h @ (phi @ v - y))
        return soft_threshold(v - step * grad, lam * step)

    z = x.copy()
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        x_new = prox_step(z)
        f_new = _l1_objective(phi, y, x_new, lam)
        if f_new > f_x:
            t = 1.0
            x_new = prox_step(x)
            f_new = _l1_objective(phi, y, x_new, lam)
        if accelerate:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            z = x_new
        change = abs(f_x - f_new) / max(abs(f_x), np.finfo(float).tiny)
        x, f_x = x_new, min(f_new, f_x)
        trace.append(f_x)
        if change < tol and it > 1:
            converged = True
            break
    if not converged:
        warnings.warn(f"FISTA did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=2)
    residual = float(np.linalg.norm(y - phi @ x))
    return ExpansionSolution(x, float(lam), residual, converged, it, trace)


def evaluate_expansion(spec, solution, points, k):
    """Field ``Phi(points) @ gamma`` of a fitted expansion."""
    gamma = np.asarray(getattr(solution, "coefficients", solution), dtype=complex)
    if len(gamma) != spec.size:
        raise DomainError(f"expected {spec.size} coefficients, got {len(gamma)}")
    return build_dictionary(spec, points, k).matrix @ gamma


def write_coefficients_csv(path, coefficients):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "real", "imag"])
        for i, g in enumerate(np.asarray(coefficients, dtype=complex)):
            writer.writerow([i, repr(float(g.real)), repr(float(g.imag))])


def write_dictionary_csv(path, dictionary):
    """Dictionary entries in row-major order as ``row, column, real, imag``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "column", "real", "imag"])
        for (i, j), v in np.ndenumerate(dictionary.matrix):
            writer.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])


def read_coefficients_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([complex(float(r["real"]), float(r["imag"])) for r in rows])
