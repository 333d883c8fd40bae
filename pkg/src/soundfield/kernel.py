"""Kernel ridge regression with kernels that solve the Helmholtz equation.

The uniform kernel j0(k|r - r'|) corresponds to plane waves from all
directions weighted equally; the directional kernel weights arrival
directions with a von Mises-Fisher density around a peak direction. A
Gaussian kernel is included as a physics-agnostic baseline.
"""
import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError
from .specfun import j0_complex, sph_bessel_j, vmf_normalization

FAMILIES = ("uniform_helmholtz", "directional_helmholtz", "gaussian_baseline")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and parameters.

    ``sigma`` is the Gaussian width parameter in 1/m; it defaults to ``k``.
    """

    family: str
    k: float
    direction: tuple = (0.0, 0.0, 1.0)
    beta: float = 0.0
    sigma: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown kernel family {self.family!r}")
        if self.k <= 0:
            raise DomainError("wavenumber must be positive")
        if self.beta < 0:
            raise DomainError("beta must be nonnegative")
        xi = np.asarray(self.direction, dtype=float)
        if xi.shape != (3,) or abs(np.linalg.norm(xi) - 1.0) > 1e-9:
            raise DomainError("peak direction must be a unit 3-vector")
        object.__setattr__(self, "direction", tuple(float(v) for v in xi))
        if self.sigma is None:
            object.__setattr__(self, "sigma", float(self.k))
        if self.sigma <= 0:
            raise DomainError("Gaussian width must be positive")

    def to_dict(self):
        return {"family": self.family, "k": self.k, "direction": list(self.direction),
                "beta": self.beta, "sigma": self.sigma}


@dataclass
class KernelSolution:
    spec: KernelSpec
    positions: np.ndarray
    weights: np.ndarray
    lam: float


def kernel_value(spec, r, rp):
    """Kernel between ``r`` and ``rp``; broadcasts over leading axes."""
    d = np.asarray(r, dtype=float) - np.asarray(rp, dtype=float)
    dist2 = np.sum(d * d, axis=-1)
    if spec.family == "uniform_helmholtz":
        return sph_bessel_j(0, spec.k * np.sqrt(dist2)).astype(complex)
    if spec.family == "directional_helmholtz":
        proj = d @ np.asarray(spec.direction)
        z2 = spec.k**2 * dist2 - spec.beta**2 - 2j * spec.beta * spec.k * proj
        return j0_complex(z2) / vmf_normalization(spec.beta)
    return np.exp(-(spec.sigma**2) * dist2).astype(complex)


def kernel_matrix(spec, points, centers):
    """Cross-kernel matrix with entries kernel_value(points[i], centers[j])."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    return kernel_value(spec, points[:, None, :], centers[None, :, :])


def gram_matrix(spec, positions):
    """Hermitian Gram matrix of ``spec`` over ``positions``.

    The upper triangle is computed and mirrored with conjugation. Coincident
    positions trigger a ``RuntimeWarning`` since the matrix becomes singular.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    m = len(positions)
    iu = np.triu_indices(m)
    gram = np.zeros((m, m), dtype=complex)
    gram[iu] = kernel_value(spec, positions[iu[0]], positions[iu[1]])
    il = (iu[1], iu[0])
    gram[il] = np.conj(gram[iu])
    gram[np.diag_indices(m)] = gram[np.diag_indices(m)].real
    if m > 1:
        d = np.linalg.norm(positions[:, None] - positions[None], axis=-1)
        d[np.diag_indices(m)] = np.inf
        if d.min() < 1e-9:
            warnings.warn("duplicate positions make the Gram matrix singular", RuntimeWarning, stacklevel=2)
    return gram


def default_lambda(gram):
    return 1e-3 * float(np.trace(gram).real) / len(gram)


def kernel_fit(spec, obs, lam=None):
    """Representer weights ``(K + lam I)^-1 y`` by Cholesky factorisation."""
    y = np.asarray(obs.pressures, dtype=complex)
    if not np.all(np.isfinite(y)):
        raise DomainError("observations must be finite")
    gram = gram_matrix(spec, obs.positions)
    if lam is None:
        lam = default_lambda(gram)
    if lam <= 0:
        raise DomainError("kernel ridge regression needs a positive regulariser")
    a = gram.copy()
    a[np.diag_indices(len(a))] += lam
    weights = scipy.linalg.cho_solve(scipy.linalg.cho_factor(a), y)
    return KernelSolution(spec=spec, positions=obs.positions.copy(), weights=weights, lam=float(lam))


def kernel_predict(solution, points, spec=None):
    """Pressure ``sum_i alpha_i kappa(x, x_i)`` at each query point."""
    spec = spec or solution.spec
    return kernel_matrix(spec, points, solution.positions) @ solution.weights


def select_lambda(spec, obs, candidates=None):
    """Pick the regulariser minimising leave-one-microphone-out error.

    Uses the closed-form held-out residual ``alpha_i / [(K + lam I)^-1]_ii``.
    """
    if candidates is None:
        candidates = np.logspace(-8, 0, 17)
    gram = gram_matrix(spec, obs.positions)
    y = obs.pressures
    best, best_err = None, np.inf
    for lam in candidates:
        a = gram.copy()
        a[np.diag_indices(len(a))] += lam
        inv = np.linalg.inv(a)
        loo = (inv @ y) / np.diag(inv)
        err = float(np.sum(np.abs(loo) ** 2))
        if err < best_err:
            best, best_err = float(lam), err
    return best


def kernel_solution_to_dict(solution):
    return {
        "type": "kernel",
        "spec": solution.spec.to_dict(),
        "lambda": solution.lam,
        "positions": solution.positions.tolist(),
        "weights_real": solution.weights.real.tolist(),
        "weights_imag": solution.weights.imag.tolist(),
    }


def save_kernel_solution(path, solution):
    with open(path, "w") as fh:
        json.dump(kernel_solution_to_dict(solution), fh, indent=1)


def kernel_solution_from_dict(payload):
    spec = KernelSpec(**payload["spec"])
    weights = np.asarray(payload["weights_real"]) + 1j * np.asarray(payload["weights_imag"])
    return KernelSolution(spec=spec, positions=np.asarray(payload["positions"], dtype=float),
                          weights=weights, lam=float(payload["lambda"]))


def load_kernel_solution(path):
    with open(path) as fh:
        return kernel_solution_from_dict(json.load(fh))
