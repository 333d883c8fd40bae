"""Supervised networks mapping a microphone observation vector to a field.

Two target kinds are supported: dense field samples on a fixed grid, and
expansion coefficients of a plane-wave basis. The latter (a physics-
constrained network) always yields a field that solves the Helmholtz
equation, because the network output only weights element solutions.
"""
from dataclasses import dataclass, field

import numpy as np

from ..acoustics import ObservationSet, add_noise
from ..errors import DomainError, InfeasibleError
from ..expansion import BasisSpec, build_dictionary, evaluate_expansion, ridge_solve
from . import mlp
from .optim import make_optimizer

TARGET_KINDS = ("field_samples", "expansion_coeffs")
MAX_REJECTIONS = 100


@dataclass
class SupervisedDataset:
    """Pairs of observation vectors and targets sharing one geometry.

    ``inputs`` has shape (D, M) and ``targets`` (D, J) or (D, L). Clean
    (noise-free) observations and source positions are kept for inspection.
    """

    inputs: np.ndarray
    targets: np.ndarray
    target_kind: str
    k: float
    mic_positions: np.ndarray
    target_points: np.ndarray
    basis: BasisSpec = None
    clean_inputs: np.ndarray = None
    sources: np.ndarray = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=complex))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=complex))
        if self.target_kind not in TARGET_KINDS:
            raise DomainError(f"unknown target kind {self.target_kind!r}")
        if len(self.inputs) < 1 or len(self.inputs) != len(self.targets):
            raise DomainError("inputs and targets must pair up and be nonempty")
        if self.inputs.shape[1] != len(self.mic_positions):
            raise DomainError("observation length must equal the microphone count")
        if self.target_kind == "expansion_coeffs":
            if self.basis is None or self.targets.shape[1] != self.basis.size:
                raise DomainError("coefficient targets need a basis of matching size")

    def __len__(self):
        return len(self.inputs)


@dataclass
class NetConfig:
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    iterations: int = 2000
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0


@dataclass
class SupervisedModel:
    net: mlp.MlpModel
    target_kind: str
    basis: BasisSpec = None
    k: float = None
    loss_trace: list = field(default_factory=list, repr=False)

    def predict(self, y):
        """Complex targets for one observation vector or a batch (D, M)."""
        y = np.asarray(y, dtype=complex)
        single = y.ndim == 1
        out = mlp.forward(self.net, _complex_to_real(np.atleast_2d(y)))
        pred = _real_to_complex(out)
        return pred[0] if single else pred

    def predict_field(self, y, points):
        """Continuous field at ``points`` (coefficient targets only)."""
        if self.target_kind != "expansion_coeffs":
            raise DomainError("only coefficient-predicting networks define a continuous field")
        return evaluate_expansion(self.basis, self.predict(y), points, self.k)


def _complex_to_real(z):
    return np.concatenate([z.real, z.imag], axis=-1)


def _real_to_complex(x):
    half = x.shape[-1] // 2
    return x[..., :half] + 1j * x[..., half:]


def supervised_train(data, target_kind=None, config=None):
    """Fit a dense network by minimising ``sum_d ||t_d - g(y_d)||^2``.

    Inputs are centred and scaled by their dataset statistics; outputs are
    scaled by the target RMS.
    """
    config = config or NetConfig()
    target_kind = target_kind or data.target_kind
    if target_kind != data.target_kind:
        raise DomainError(f"dataset holds {data.target_kind!r} targets, not {target_kind!r}")
    x = _complex_to_real(data.inputs)
    t = _complex_to_real(data.targets)
    center = x.mean(axis=0)
    scale = float(np.sqrt(np.mean((x - center) ** 2))) or 1.0
    out_scale = float(np.sqrt(np.mean(t**2))) or 1.0
    widths = [x.shape[1], *config.hidden, t.shape[1]]
    net = mlp.init_mlp(widths, config.activation, seed=config.seed, center=center, scale=scale,
                       output_scale=out_scale)
    opt = make_optimizer(config.optimizer, config.lr)
    trace = []
    for it in range(config.iterations + 1):
        cache = []
        err = mlp.forward(net, x, cache) - t
        loss = float(np.sum(err * err))
        trace.append(loss)
        if it == config.iterations:
            break
        grads = mlp.backward(net, cache, 2.0 * err)
        net = net.with_params(opt.step(net.params(), grads))
    return SupervisedModel(net=net, target_kind=target_kind, basis=data.basis, k=data.k, loss_trace=trace)


def sample_source(scene, rng, wall_margin=0.2, region_margin=0.1):
    """Uniform source position in the room, away from walls and outside the region.

    Raises
    ------
    InfeasibleError
        After ``MAX_REJECTIONS`` consecutive draws fall inside the region.
    """
    dims = np.asarray(scene.room.dimensions)
    for _ in range(MAX_REJECTIONS):
        src = rng.uniform(wall_margin, dims - wall_margin)
        inside = np.linalg.norm(src - np.asarray(scene.region.center)) <= scene.region.circumradius + region_margin
        if not inside:
            return src
    raise InfeasibleError(f"no admissible source position after {MAX_REJECTIONS} draws")


def generate_training_set(scene, k, n_pairs, seed=0, target_kind="field_samples", target_points=None,
                          basis=None, lam=1e-6):
    """Simulate ``n_pairs`` scenes with random source positions.

    Source positions are uniform in the room (0.2 m from the walls) and are
    redrawn while they fall within 0.1 m of the region's circumscribed ball.
    Observations are noisy array pressures; targets are the clean field at
    ``target_points`` or, for ``expansion_coeffs``, the ridge fit of those
    samples onto ``basis``.
    """
    if n_pairs < 1:
        raise DomainError("at least one training pair is required")
    if target_points is None:
        target_points = scene.region.grid(7)
    target_points = np.atleast_2d(np.asarray(target_points, dtype=float))
    rng = np.random.default_rng(seed)
    noise_seeds = rng.integers(0, 2**63 - 1, size=n_pairs)
    inputs, clean, targets, sources = [], [], [], []
    dictionary = None
    if target_kind == "expansion_coeffs":
        if basis is None:
            raise DomainError("coefficient targets need a basis")
        dictionary = build_dictionary(basis, target_points, k)
    for d in range(n_pairs):
        src = sample_source(scene, rng)
        obs_clean = scene.field(scene.mics, k, source=src)
        noisy = add_noise(ObservationSet(k=k, positions=scene.mics, pressures=obs_clean),
                          scene.snr_db, int(noise_seeds[d]))
        field_samples = scene.field(target_points, k, source=src)
        if target_kind == "field_samples":
            targets.append(field_samples)
        elif target_kind == "expansion_coeffs":
            targets.append(ridge_solve(dictionary, field_samples, lam).coefficients)
        else:
            raise DomainError(f"unknown target kind {target_kind!r}")
        inputs.append(noisy.pressures)
        clean.append(obs_clean)
        sources.append(src)
    return SupervisedDataset(inputs=np.array(inputs), targets=np.array(targets), target_kind=target_kind,
                             k=float(k), mic_positions=scene.mics.copy(), target_points=target_points,
                             basis=basis, clean_inputs=np.array(clean), sources=np.array(sources))
