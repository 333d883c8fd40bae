"""Ground-truth generation: free-field Green's function, frequency-domain
image source method for shoebox rooms, array geometries and sensor noise.

Time convention is exp(-j omega t), so ``exp(+j k d)`` is an outgoing wave.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInputError, DomainError, InfeasibleError, SingularityError
from .specfun import fibonacci_directions

SINGULAR_DISTANCE = 1e-9
DEFAULT_MAX_ORDER_CAP = 25


def wavenumber(freq_hz, c=343.0):
    return 2.0 * np.pi * np.asarray(freq_hz, dtype=float) / c


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room with one frequency-independent wall reflection magnitude."""

    dimensions: tuple
    reflection: float = 0.0
    c: float = 343.0

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != 3 or min(dims) <= 0:
            raise DomainError(f"room dimensions must be three positive lengths, got {dims}")
        if not 0.0 <= self.reflection < 1.0:
            raise DomainError(f"reflection must lie in [0, 1), got {self.reflection}")
        if self.c <= 0:
            raise DomainError("sound speed must be positive")
        object.__setattr__(self, "dimensions", dims)

    @property
    def volume(self):
        lx, ly, lz = self.dimensions
        return lx * ly * lz

    @property
    def surface(self):
        lx, ly, lz = self.dimensions
        return 2.0 * (lx * ly + ly * lz + lx * lz)

    def contains(self, points, margin=0.0):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        dims = np.asarray(self.dimensions)
        return np.all((p > margin) & (p < dims - margin), axis=-1)


@dataclass(frozen=True)
class RegionSpec:
    """Target region: a ball (``radius``) or an axis-aligned box (``half_extents``)."""

    shape: str
    center: tuple
    radius: float = 0.0
    half_extents: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.shape == "ball":
            if self.radius <= 0:
                raise DomainError("ball radius must be positive")
        elif self.shape == "box":
            he = tuple(float(h) for h in self.half_extents)
            if len(he) != 3 or min(he) <= 0:
                raise DomainError("box half extents must be three positive lengths")
            object.__setattr__(self, "half_extents", he)
        else:
            raise DomainError(f"unknown region shape {self.shape!r}")

    @property
    def circumradius(self):
        """Radius of the smallest centred ball containing the region."""
        if self.shape == "ball":
            return float(self.radius)
        return float(np.linalg.norm(self.half_extents))

    def contains(self, points, margin=0.0):
        p = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.center)
        if self.shape == "ball":
            return np.linalg.norm(p, axis=-1) <= self.radius + margin
        return np.all(np.abs(p) <= np.asarray(self.half_extents) + margin, axis=-1)

    def grid(self, n_per_axis, shrink=1.0):
        """Regular lattice of points inside the region (scaled by ``shrink``)."""
        c = np.asarray(self.center)
        half = (np.full(3, self.radius) if self.shape == "ball" else np.asarray(self.half_extents)) * shrink
        axes = [np.linspace(-h, h, n_per_axis) for h in half]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3) + c
        if self.shape == "ball":
            pts = pts[np.linalg.norm(pts - c, axis=-1) <= self.radius * shrink + 1e-12]
        return pts


@dataclass
class ObservationSet:
    """Complex pressures observed at microphone positions for one wavenumber."""

    k: float
    positions: np.ndarray
    pressures: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.pressures = np.asarray(self.pressures, dtype=complex).ravel()
        if self.k <= 0:
            raise DomainError("wavenumber must be positive")
        if self.positions.shape[-1] != 3 or len(self.positions) < 1:
            raise DomainError("positions must be an (M, 3) array with M >= 1")
        if len(self.pressures) != len(self.positions):
            raise DomainError("one pressure per position is required")
        if len(self.positions) > 1:
            nearest = cKDTree(self.positions).query(self.positions, k=2)[0][:, 1]
            if nearest.min() <= SINGULAR_DISTANCE:
                raise DomainError("microphone positions must be pairwise distinct")

    def __len__(self):
        return len(self.positions)


def green_free_field(r, r_src, k):
    """Free-field Green's function exp(j k d) / (4 pi d).

    ``r`` and ``r_src`` broadcast against each other over leading axes.
    """
    if k <= 0:
        raise DomainError("wavenumber must be positive")
    d = np.linalg.norm(np.asarray(r, dtype=float) - np.asarray(r_src, dtype=float), axis=-1)
    if np.any(d < SINGULAR_DISTANCE):
        raise SingularityError("evaluation point coincides with the source")
    return np.exp(1j * k * d) / (4.0 * np.pi * d)


def default_max_order(reflection, cap=DEFAULT_MAX_ORDER_CAP):
    """Smallest image order whose residual energy proxy drops below 1e-3."""
    if reflection <= 0:
        return 0
    for order in range(cap + 1):
        if reflection**order * (2 * order + 1) ** 2 < 1e-3:
            return order
    return cap


def image_sources(room, src, max_order):
    """Image positions and reflection counts for per-axis indices |q| <= max_order.

    Along one axis of length L, index q places the image at ``q L + x`` for
    even q and ``q L + (L - x)`` for odd q, after |q| wall reflections.
    """
    src = np.asarray(src, dtype=float)
    q = np.arange(-max_order, max_order + 1)
    per_axis = []
    for axis in range(3):
        length = room.dimensions[axis]
        x = src[axis]
        pos = np.where(q % 2 == 0, q * length + x, q * length + length - x)
        per_axis.append(pos)
    qx, qy, qz = np.meshgrid(q, q, q, indexing="ij")
    ix, iy, iz = np.meshgrid(*per_axis, indexing="ij")
    positions = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=-1)
    orders = (np.abs(qx) + np.abs(qy) + np.abs(qz)).ravel()
    return positions, orders


def shoebox_atf(room, src, mics, k, max_order=None, amplitude=1.0):
    """Acoustic transfer function from a point source to microphones in a shoebox room.

    Sums ``reflection**n * green_free_field`` over image sources, ``n`` being
    the number of reflections of each image.

    Parameters
    ----------
    room : RoomSpec
    src : array_like of shape (3,)
    mics : array_like of shape (M, 3)
    k : float
        Wavenumber in rad/m.
    max_order : int, optional
        Per-axis image index bound; chosen by :func:`default_max_order` if omitted.
    amplitude : complex
        Source strength.

    Returns
    -------
    ndarray of shape (M,), complex
    """
    mics = np.atleast_2d(np.asarray(mics, dtype=float))
    if not room.contains(src)[0]:
        raise DomainError("source must lie strictly inside the room")
    if not np.all(room.contains(mics)):
        raise DomainError("microphones must lie strictly inside the room")
    if max_order is None:
        max_order = default_max_order(room.reflection)
    if max_order < 0:
        raise DomainError("max_order must be nonnegative")
    if room.reflection == 0.0:
        max_order = 0
    positions, orders = image_sources(room, src, int(max_order))
    gains = room.reflection ** orders.astype(float)
    out = np.empty(len(mics), dtype=complex)
    for i, mic in enumerate(mics):
        d = np.linalg.norm(positions - mic, axis=-1)
        if d.min() < SINGULAR_DISTANCE:
            raise SingularityError("an image source coincides with a microphone")
        out[i] = np.sum(gains * np.exp(1j * k * d) / (4.0 * np.pi * d))
    return amplitude * out


def t60_to_reflection(dimensions, t60):
    """Uniform wall reflection magnitude producing ``t60`` under Eyring's formula."""
    if t60 <= 0:
        raise DomainError("T60 must be positive")
    lx, ly, lz = (float(d) for d in dimensions)
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + ly * lz + lx * lz)
    absorption = 1.0 - np.exp(-0.161 * volume / (surface * t60))
    if absorption >= 1.0:
        raise InfeasibleError(f"T60 = {t60} s is unreachable in this room")
    return float(np.sqrt(1.0 - absorption))


def make_array(kind, params, seed=0):
    """Microphone positions for one of the supported array layouts.

    ``dual_sphere``
        ``radii`` (two values), ``counts`` (two values), ``center``.
        Points on concentric spheres from the Fibonacci lattice.
    ``grid``
        ``shape`` (nx, ny, nz), ``lower`` and ``upper`` corners of the box.
    ``random_in_region``
        ``count``, ``center``, and either ``radius`` (ball) or ``half_extents`` (box).
    """
    center = np.asarray(params.get("center", (0.0, 0.0, 0.0)), dtype=float)
    if kind == "dual_sphere":
        radii = [float(r) for r in params["radii"]]
        counts = [int(n) for n in params["counts"]]
        if len(radii) != len(counts):
            raise DomainError("radii and counts must have equal length")
        if min(counts) < 1:
            raise DomainError("every sphere needs at least one microphone")
        if min(radii) <= 0:
            raise DomainError("radii must be positive")
        # rotate the inner lattice so the two shells do not align radially
        shells = []
        for i, (r, n) in enumerate(zip(radii, counts)):
            dirs = fibonacci_directions(n)
            if i % 2 == 1:
                dirs = dirs * np.array([-1.0, -1.0, 1.0])
            shells.append(center + r * dirs)
        return np.concatenate(shells)
    if kind == "grid":
        shape = [int(n) for n in params["shape"]]
        if len(shape) != 3 or min(shape) < 1:
            raise DomainError("grid shape must be three positive counts")
        lower = np.asarray(params["lower"], dtype=float)
        upper = np.asarray(params["upper"], dtype=float)
        if np.any(upper < lower):
            raise DomainError("grid upper corner must dominate the lower corner")
        axes = [np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2])
                for lo, hi, n in zip(lower, upper, shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    if kind == "random_in_region":
        count = int(params["count"])
        if count < 1:
            raise DomainError("count must be positive")
        rng = np.random.default_rng(seed)
        if "radius" in params:
            radius = float(params["radius"])
            if radius <= 0:
                raise DomainError("radius must be positive")
            dirs = rng.normal(size=(count, 3))
            dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
            radii = radius * rng.uniform(size=count) ** (1.0 / 3.0)
            return center + radii[:, None] * dirs
        half = np.asarray(params["half_extents"], dtype=float)
        if np.any(half <= 0):
            raise DomainError("half extents must be positive")
        return center + rng.uniform(-1.0, 1.0, size=(count, 3)) * half
    raise DomainError(f"unknown array kind {kind!r}")


def add_noise(obs, snr_db, seed=0):
    """Add circular complex Gaussian noise at the given SNR (dB).

    ``snr_db = inf`` returns an unchanged copy.
    """
    if snr_db is None or np.isposinf(snr_db):
        return replace(obs, pressures=obs.pressures.copy())
    if not np.isfinite(snr_db):
        raise DomainError("SNR must be finite or +inf")
    power = np.mean(np.abs(obs.pressures) ** 2)
    if power == 0:
        raise DegenerateInputError("cannot scale noise against all-zero observations")
    noise_power = power / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=(len(obs), 2)) @ np.array([1.0, 1j])
    noisy = obs.pressures + np.sqrt(noise_power / 2.0) * noise
    return replace(obs, pressures=noisy)


@dataclass
class Scene:
    """One room, one point source, one target region and one microphone array."""

    room: RoomSpec
    source: np.ndarray
    region: RegionSpec
    mics: np.ndarray
    snr_db: float = float("inf")
    max_order: int = None
    seed: int = 0

    def __post_init__(self):
        self.source = np.asarray(self.source, dtype=float)
        self.mics = np.atleast_2d(np.asarray(self.mics, dtype=float))
        if self.region.contains(self.source)[0]:
            raise DomainError("the source must lie outside the target region")

    def wavenumber(self, freq_hz):
        return float(wavenumber(freq_hz, self.room.c))

    def field(self, points, k, source=None):
        src = self.source if source is None else source
        return shoebox_atf(self.room, src, points, k, self.max_order)

    def observe(self, k, seed=None, source=None):
        """Noisy observations at the array; noise seed defaults to the scene seed."""
        clean = ObservationSet(k=k, positions=self.mics, pressures=self.field(self.mics, k, source))
        return add_noise(clean, self.snr_db, self.seed if seed is None else seed)
