"""Special functions and spherical geometry.

Spherical Bessel functions of the first kind, complex orthonormal spherical
harmonics (Condon-Shortley phase), the zeroth-order spherical Bessel function
of a complex squared argument, the von Mises-Fisher normalisation and
Fibonacci-lattice point sets on the sphere and in the ball.

All functions are vectorised over their position/argument inputs.
"""
import numpy as np

from .errors import DomainError

MAX_ORDER = 60

_J0_SERIES_THRESHOLD = 1e-4
_VMF_SERIES_THRESHOLD = 1e-6
# below this argument the three-term ascending series is exact to double precision
_BESSEL_SERIES_THRESHOLD = 1e-3
_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def sph_bessel_j_upto(nmax, x):
    """Spherical Bessel functions j_0 .. j_nmax.

    Orders above the argument use a downward (Miller) recurrence normalised
    against the closed forms of j_0 and j_1; orders at or below the argument
    use the upward recurrence.

    Parameters
    ----------
    nmax : int
        Highest order, ``0 <= nmax <= MAX_ORDER``.
    x : array_like
        Nonnegative finite arguments.

    Returns
    -------
    ndarray of shape (nmax + 1, *x.shape)
    """
    nmax = int(nmax)
    if nmax < 0 or nmax > MAX_ORDER:
        raise DomainError(f"order must be in [0, {MAX_ORDER}], got {nmax}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("spherical Bessel argument must be finite")
    if np.any(x < 0):
        raise DomainError("spherical Bessel argument must be nonnegative")

    shape = x.shape
    xf = x.ravel()
    out = np.zeros((nmax + 1, xf.size))
    zero = xf == 0.0
    out[0, zero] = 1.0
    pos = ~zero
    if not np.any(pos):
        return out.reshape((nmax + 1,) + shape)

    small = pos & (xf < _BESSEL_SERIES_THRESHOLD)
    if np.any(small):
        out[:, small] = _bessel_series(nmax, xf[small])
    pos &= ~small
    if not np.any(pos):
        return out.reshape((nmax + 1,) + shape)

    xp = xf[pos]
    s, c = np.sin(xp), np.cos(xp)
    j0 = s / xp
    tiny = xp < 0.05
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        j1 = np.where(tiny, 0.0, s / xp**2 - c / xp)
    xt = xp[tiny]
    j1[tiny] = xt / 3.0 - xt**3 / 30.0 + xt**5 / 840.0 - xt**7 / 45360.0

    up = np.empty((nmax + 1, xp.size))
    up[0] = j0
    if nmax >= 1:
        up[1] = j1
    with np.errstate(over="ignore", invalid="ignore"):
        # blows up for n > x; those entries are replaced below
        for n in range(1, nmax):
            up[n + 1] = (2 * n + 1) / xp * up[n] - up[n - 1]

    start = int(max(nmax, np.ceil(xp.max()))) + 50
    down = np.zeros((nmax + 1, xp.size))
    f_hi = np.zeros_like(xp)
    f = np.full_like(xp, 1e-300)
    for n in range(start, 0, -1):
        f_lo = (2 * n + 1) / xp * f - f_hi
        f_hi, f = f, f_lo
        # f now holds order n - 1, f_hi order n
        if n <= nmax:
            down[n] = f_hi
        big = np.abs(f) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            f = f * scale
            f_hi = f_hi * scale
            down *= scale
    down[0] = f
    f1 = f_hi
    # least-squares match to (j0, j1) is robust where either has a zero
    mag = np.maximum(np.abs(f), np.abs(f1))
    fs, f1s = f / mag, f1 / mag
    norm = (j0 * fs + j1 * f1s) / (fs * fs + f1s * f1s) / mag
    down *= norm

    orders = np.arange(nmax + 1)[:, None]
    out[:, pos] = np.where(orders <= xp[None, :], up, down)
    return out.reshape((nmax + 1,) + shape)


def _bessel_series(nmax, x):
    """Ascending series x^n / (2n+1)!! (1 - t / (2n+3) + t^2 / (2 (2n+3)(2n+5))), t = x^2 / 2."""
    out = np.empty((nmax + 1, x.size))
    lead = np.ones_like(x)
    t = 0.5 * x * x
    for n in range(nmax + 1):
        if n > 0:
            lead = lead * x / (2 * n + 1)
        out[n] = lead * (1.0 - t / (2 * n + 3) + t * t / (2.0 * (2 * n + 3) * (2 * n + 5)))
    return out


def sph_bessel_j(order, x):
    """Spherical Bessel function of the first kind, j_order(x)."""
    return sph_bessel_j_upto(order, x)[int(order)]


def j0_complex(z2):
    """Evaluate sin(sqrt(z2)) / sqrt(z2) for complex z2.

    The result does not depend on the square-root branch since the function
    is even in its argument. A Taylor series is used for ``|z2| < 1e-4``.
    """
    z2 = np.asarray(z2, dtype=complex)
    out = np.empty_like(z2)
    small = np.abs(z2) < _J0_SERIES_THRESHOLD
    zs = z2[small]
    out[small] = 1.0 - zs / 6.0 + zs**2 / 120.0 - zs**3 / 5040.0
    root = np.sqrt(z2[~small])
    out[~small] = np.sin(root) / root
    return out if out.ndim else out[()]


def vmf_normalization(beta):
    """Normalisation C(beta) of the von Mises-Fisher weighting: sinh(b)/b, 1 at 0."""
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise DomainError(f"beta must be finite and nonnegative, got {beta}")
    if beta < _VMF_SERIES_THRESHOLD:
        return 1.0 + beta * beta / 6.0
    return float(np.sinh(beta) / beta)


def _angles(dirs):
    dirs = np.asarray(dirs, dtype=float)
    if dirs.shape[-1] != 3:
        raise DomainError("directions must have a trailing axis of length 3")
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    norm = np.sqrt(x * x + y * y + z * z)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise DomainError("directions must be unit vectors")
    cos_t = np.clip(z / norm, -1.0, 1.0)
    sin_t = np.hypot(x, y) / norm
    phi = np.arctan2(y, x)
    return cos_t, sin_t, phi


def _legendre_normalized(nmax, cos_t, sin_t):
    """Orthonormal associated Legendre values P[n][m] for 0 <= m <= n."""
    p = np.zeros((nmax + 1, nmax + 1) + cos_t.shape)
    p[0, 0] = np.sqrt(1.0 / (4.0 * np.pi))
    for m in range(1, nmax + 1):
        p[m, m] = -np.sqrt((2 * m + 1) / (2.0 * m)) * sin_t * p[m - 1, m - 1]
    for m in range(0, nmax):
        p[m + 1, m] = np.sqrt(2 * m + 3.0) * cos_t * p[m, m]
    for m in range(0, nmax + 1):
        for n in range(m + 2, nmax + 1):
            a_n = np.sqrt((4.0 * n * n - 1) / (n * n - m * m))
            a_prev = np.sqrt((4.0 * (n - 1) ** 2 - 1) / ((n - 1) ** 2 - m * m))
            p[n, m] = a_n * (cos_t * p[n - 1, m] - p[n - 2, m] / a_prev)
    return p


def sph_harmonics_upto(nmax, dirs):
    """All spherical harmonics up to order nmax.

    Parameters
    ----------
    nmax : int
    dirs : array_like of shape (..., 3)
        Unit vectors.

    Returns
    -------
    ndarray of shape (..., (nmax + 1)**2)
        Column ``n*n + n + m`` holds Y_{n,m}.
    """
    nmax = int(nmax)
    if nmax < 0 or nmax > MAX_ORDER:
        raise DomainError(f"order must be in [0, {MAX_ORDER}], got {nmax}")
    cos_t, sin_t, phi = _angles(dirs)
    p = _legendre_normalized(nmax, cos_t, sin_t)
    out = np.empty(cos_t.shape + ((nmax + 1) ** 2,), dtype=complex)
    for m in range(0, nmax + 1):
        phase = np.exp(1j * m * phi)
        sign = -1.0 if m % 2 else 1.0
        for n in range(m, nmax + 1):
            y = p[n, m] * phase
            out[..., n * n + n + m] = y
            if m > 0:
                out[..., n * n + n - m] = sign * np.conj(y)
    return out


def sph_harmonic(nu, mu, dirs):
    """Complex orthonormal spherical harmonic Y_{nu,mu} at unit vectors ``dirs``."""
    nu, mu = int(nu), int(mu)
    if nu < 0 or abs(mu) > nu:
        raise DomainError(f"invalid harmonic index (nu={nu}, mu={mu})")
    return sph_harmonics_upto(nu, dirs)[..., nu * nu + nu + mu]


def harmonic_indices(nmax):
    """(nu, mu) pairs in the column order of :func:`sph_harmonics_upto`."""
    return [(n, m) for n in range(nmax + 1) for m in range(-n, n + 1)]


def fibonacci_directions(n):
    """Quasi-uniform unit vectors on the sphere from the Fibonacci lattice.

    Returns
    -------
    ndarray of shape (n, 3)
    """
    n = int(n)
    if n < 1:
        raise DomainError("number of directions must be positive")
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = _GOLDEN_ANGLE * i
    dirs = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def fibonacci_ball(n, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Deterministic quasi-uniform points inside a ball.

    Radii follow the cube-root law of a uniform volume density; the angular
    part reuses the Fibonacci lattice.
    """
    n = int(n)
    if n < 1:
        raise DomainError("number of points must be positive")
    if radius <= 0:
        raise DomainError("radius must be positive")
    radii = radius * ((np.arange(n) + 0.5) / n) ** (1.0 / 3.0)
    return np.asarray(center, dtype=float) + radii[:, None] * fibonacci_directions(n)
