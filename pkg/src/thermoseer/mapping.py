"""Thermal-field mapping model.

A fully connected network with a residual connection maps the measured curve
of a point one layer up: the network consumes the curve's N temperatures
plus four process features and outputs the N-value correction added to the
input curve, so with zero weights the mapping is the identity.  Hidden sizes
are 3N, 6N, 12N, 6N, 3N with ReLU activations, dropout 0.1 sits before the
final N-output affine map, and training runs mini-batch Adam on a mean
squared error loss over scaled temperatures.

Everything is plain numpy with explicit seeds: identical seeds give
bit-identical trained weights on one platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Curve, DomainError, MappingFeatures, ShapeError

TEMP_SCALE = 1000.0  # degC per network unit; keeps 1500 degC inputs O(1)
DROPOUT_RATE = 0.1
N_AFFINE_MAPS = 6


def _hidden_widths(n: int) -> list[int]:
    return [3 * n, 6 * n, 12 * n, 6 * n, 3 * n]


def layer_dims(n: int) -> list[int]:
    """Sizes along the affine chain: N+4 inputs through the hidden widths to
    the N outputs."""
    return [n + 4] + _hidden_widths(n) + [n]


@dataclass(eq=False)
class MappingModel:
    """Weights/biases of the six affine maps plus input scaling statistics.

    Weight ``weights[l][i, j]`` connects input ``i`` of map ``l`` to its
    output ``j``.  A model is treated as immutable once returned by
    :func:`init_model`, :func:`train`, or :func:`finetune`.
    """

    n: int
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    scaler_fitted: bool
    seed: int
    dropout_rate: float = DROPOUT_RATE
    temp_scale: float = TEMP_SCALE
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        dims = layer_dims(self.n)
        if len(self.weights) != N_AFFINE_MAPS or len(self.biases) != N_AFFINE_MAPS:
            raise ShapeError(f"model needs exactly {N_AFFINE_MAPS} affine maps")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[l], dims[l + 1]) or b.shape != (dims[l + 1],):
                raise ShapeError(
                    f"affine map {l + 1} must be {dims[l]}x{dims[l + 1]}, got "
                    f"{w.shape} with bias {b.shape}"
                )

    def copy(self) -> "MappingModel":
        return MappingModel(
            n=self.n,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            feature_mean=self.feature_mean.copy(),
            feature_std=self.feature_std.copy(),
            scaler_fitted=self.scaler_fitted,
            seed=self.seed,
            dropout_rate=self.dropout_rate,
            temp_scale=self.temp_scale,
            training_meta=dict(self.training_meta),
        )


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch Adam training schedule."""

    epochs: int = 500
    batch_size: int = 256
    initial_lr: float = 0.001
    lr_decay_ratio: float = 0.5
    lr_decay_epochs: tuple[int, ...] = (100, 200, 300, 400)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise DomainError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.initial_lr <= 0.0:
            raise DomainError(f"initial_lr must be positive, got {self.initial_lr}")

    def lr_at(self, epoch_index: int) -> float:
        """Learning rate used during the 0-indexed epoch: the initial rate
        shrunk once for every decay epoch already completed."""
        decays = sum(1 for d in self.lr_decay_epochs if d <= epoch_index)
        return self.initial_lr * self.lr_decay_ratio ** decays


@dataclass(frozen=True, eq=False)
class CurvePairSample:
    """One supervised pair: the lower point's curve plus features, and the
    upper point's overlap-truncated curve as the target."""

    input_curve: Curve
    features: MappingFeatures
    target_partial: Curve

    def __post_init__(self) -> None:
        if self.input_curve.n != self.target_partial.n:
            raise ShapeError(
                f"input and target must share N, got {self.input_curve.n} "
                f"vs {self.target_partial.n}"
            )


def init_model(n: int, seed: int = 0) -> MappingModel:
    """Fresh model: fan-in-scaled uniform weights, zero biases."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    rng = np.random.default_rng(seed)
    dims = layer_dims(n)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MappingModel(
        n=n,
        weights=weights,
        biases=biases,
        feature_mean=np.zeros(4),
        feature_std=np.ones(4),
        scaler_fitted=False,
        seed=seed,
    )


def param_count(model: MappingModel) -> int:
    """Exact number of scalar weights and biases."""
    return sum(w.size for w in model.weights) + sum(b.size for b in model.biases)


def _scale_features(model: MappingModel, features: np.ndarray) -> np.ndarray:
    return (features - model.feature_mean) / model.feature_std


def _net_forward(model: MappingModel, x: np.ndarray,
                 dropout_mask: np.ndarray | None = None):
    """Scaled network output plus the intermediate activations needed for
    backpropagation.  ``x`` is (batch, N+4)."""
    pre, post = [], []
    h = x
    for l in range(N_AFFINE_MAPS - 1):
        z = h @ model.weights[l] + model.biases[l]
        h = np.maximum(z, 0.0)
        pre.append(z)
        post.append(h)
    if dropout_mask is not None:
        h = h * dropout_mask / (1.0 - model.dropout_rate)
        post[-1] = h
    out = h @ model.weights[-1] + model.biases[-1]
    return out, pre, post


def _assemble_input(model: MappingModel, temps: np.ndarray,
                    features: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [temps / model.temp_scale, _scale_features(model, features)], axis=-1
    )


def forward(model: MappingModel, input_curve: Curve, features: MappingFeatures,
            train_mode: bool = False, rng: np.random.Generator | None = None) -> Curve:
    """Predicted partial curve of the point one layer up, in degC.

    The residual connection adds the input curve after de-scaling, so a
    zero-weight model returns the input curve exactly.  Dropout is active
    only in train mode; inference is deterministic.
    """
    if input_curve.n != model.n:
        raise ShapeError(f"curve has N={input_curve.n}, model expects {model.n}")
    x = _assemble_input(model, input_curve.temps, features.as_array())[None, :]
    mask = None
    if train_mode:
        if rng is None:
            raise DomainError("train_mode forward needs an rng for dropout")
        mask = rng.random((1, 3 * model.n)) >= model.dropout_rate
    out, _, _ = _net_forward(model, x, mask)
    temps = out[0] * model.temp_scale + input_curve.temps
    return Curve(temps, input_curve.duration, input_curve.curve_index)


def forward_raw(model: MappingModel, temps: np.ndarray,
                features: np.ndarray) -> np.ndarray:
    """Batched inference on plain arrays: (B, N) curve temperatures plus
    (B, 4) features to (B, N) predicted temperatures in degC.

    No physical-range validation is applied to the output, so this is the
    path for scoring a model that may still predict nonsense (for example a
    simulation-trained model applied to clamped pyrometer curves before
    fine-tuning)."""
    temps = np.atleast_2d(np.asarray(temps, dtype=np.float64))
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if temps.shape[1] != model.n or features.shape != (temps.shape[0], 4):
        raise ShapeError(
            f"expected temps (B, {model.n}) with features (B, 4), got "
            f"{temps.shape} and {features.shape}"
        )
    if not (np.all(np.isfinite(temps)) and np.all(np.isfinite(features))):
        raise DomainError("inputs must be finite")
    x = _assemble_input(model, temps, features)
    out, _, _ = _net_forward(model, x)
    return out * model.temp_scale + temps


def forward_many(model: MappingModel, curves: list[Curve],
                 features: list[MappingFeatures]) -> list[Curve]:
    """Batched inference over many curves in one matrix pass."""
    if len(curves) != len(features):
        raise ShapeError("curves and features must pair up one-to-one")
    if not curves:
        return []
    if any(c.n != model.n for c in curves):
        raise ShapeError(f"all curves must have N={model.n}")
    temps = np.stack([c.temps for c in curves])
    feats = np.stack([f.as_array() for f in features])
    preds = forward_raw(model, temps, feats)
    return [
        Curve(preds[i], curves[i].duration, curves[i].curve_index)
        for i in range(len(curves))
    ]


def recursive_predict(model: MappingModel, start_curve: Curve,
                      feature_sequence: list[MappingFeatures]) -> Curve:
    """Fold the mapping over a feature sequence: each step feeds the previous
    prediction back in, climbing one layer per step."""
    if not feature_sequence:
        raise DomainError("feature_sequence must be nonempty")
    curve = start_curve
    for feats in feature_sequence:
        curve = forward(model, curve, feats)
    return curve


def _training_matrices(model: MappingModel, samples: list[CurvePairSample]):
    temps = np.stack([s.input_curve.temps for s in samples])
    feats = np.stack([s.features.as_array() for s in samples])
    targets = np.stack([s.target_partial.temps for s in samples])
    x = _assemble_input(model, temps, feats)
    # regression target of the network: the scaled residual correction
    r = (targets - temps) / model.temp_scale
    return x, r


def mse_loss(model: MappingModel, samples: list[CurvePairSample]) -> float:
    """Training loss on scaled targets with dropout disabled."""
    x, r = _training_matrices(model, samples)
    out, _, _ = _net_forward(model, x)
    return float(np.mean((out - r) ** 2))


def loss_gradients(model: MappingModel, samples: list[CurvePairSample],
                   dropout_mask: np.ndarray | None = None):
    """Analytic gradients of the batch MSE with respect to every weight and
    bias, via backpropagation.  Returns (weight grads, bias grads, loss)."""
    x, r = _training_matrices(model, samples)
    return _backprop(model, x, r, dropout_mask)


def _backprop(model: MappingModel, x: np.ndarray, r: np.ndarray,
              dropout_mask: np.ndarray | None):
    out, pre, post = _net_forward(model, x, dropout_mask)
    diff = out - r
    loss = float(np.mean(diff ** 2))

    d_weights = [None] * N_AFFINE_MAPS
    d_biases = [None] * N_AFFINE_MAPS
    grad = (2.0 / diff.size) * diff
    d_weights[-1] = post[-1].T @ grad
    d_biases[-1] = grad.sum(axis=0)
    grad = grad @ model.weights[-1].T
    if dropout_mask is not None:
        grad = grad * dropout_mask / (1.0 - model.dropout_rate)
    for l in range(N_AFFINE_MAPS - 2, -1, -1):
        grad = grad * (pre[l] > 0.0)
        below = post[l - 1] if l > 0 else x
        d_weights[l] = below.T @ grad
        d_biases[l] = grad.sum(axis=0)
        if l > 0:
            grad = grad @ model.weights[l].T
    return d_weights, d_biases, loss


def train(model: MappingModel, samples: list[CurvePairSample],
          config: TrainConfig) -> tuple[MappingModel, list[float]]:
    """Mini-batch Adam training.

    Each epoch shuffles the samples, partitions them into batches (the last
    may be short), and applies one Adam step per batch; the learning rate
    shrinks by the decay ratio after each decay epoch.  Feature scaling
    statistics are fitted from the samples unless the model already carries
    fitted statistics (as a pretrained model does).  Returns the trained
    model and the per-epoch loss history.
    """
    if not samples:
        raise DomainError("samples must be nonempty")
    sizes = {s.input_curve.n for s in samples}
    if sizes != {model.n}:
        raise ShapeError(f"samples have N {sorted(sizes)}, model expects {model.n}")
    if config.epochs == 0:
        return model, []

    out = model.copy()
    if not out.scaler_fitted:
        feats = np.stack([s.features.as_array() for s in samples])
        std = feats.std(axis=0)
        std[std < 1e-12] = 1.0
        out.feature_mean = feats.mean(axis=0)
        out.feature_std = std
        out.scaler_fitted = True

    x_all, r_all = _training_matrices(out, samples)
    n_samples = x_all.shape[0]
    rng = np.random.default_rng(config.seed)

    m_w = [np.zeros_like(w) for w in out.weights]
    v_w = [np.zeros_like(w) for w in out.weights]
    m_b = [np.zeros_like(b) for b in out.biases]
    v_b = [np.zeros_like(b) for b in out.biases]
    step = 0

    loss_history: list[float] = []
    lr_history: list[float] = []
    for epoch in range(config.epochs):
        lr = config.lr_at(epoch)
        lr_history.append(lr)
        order = rng.permutation(n_samples)
        sse = 0.0
        for lo in range(0, n_samples, config.batch_size):
            batch = order[lo:lo + config.batch_size]
            xb, rb = x_all[batch], r_all[batch]
            mask = rng.random((batch.size, 3 * out.n)) >= out.dropout_rate
            d_w, d_b, loss = _backprop(out, xb, rb, mask)
            sse += loss * batch.size
            step += 1
            correct1 = 1.0 - config.beta1 ** step
            correct2 = 1.0 - config.beta2 ** step
            for l in range(N_AFFINE_MAPS):
                for grads, params, ms, vs in (
                    (d_w[l], out.weights[l], m_w[l], v_w[l]),
                    (d_b[l], out.biases[l], m_b[l], v_b[l]),
                ):
                    ms *= config.beta1
                    ms += (1.0 - config.beta1) * grads
                    vs *= config.beta2
                    vs += (1.0 - config.beta2) * grads ** 2
                    params -= lr * (ms / correct1) / (np.sqrt(vs / correct2) + config.epsilon)
        loss_history.append(sse / n_samples)

    out.training_meta = {
        "epochs_run": config.epochs,
        "final_loss": loss_history[-1],
        "lr_history": lr_history,
    }
    return out, loss_history


def finetune(pretrained: MappingModel, samples: list[CurvePairSample],
             config: TrainConfig) -> MappingModel:
    """Continue training all parameters of a pretrained model on a small
    dataset with the same procedure as :func:`train`; the pretrained input
    scaling statistics are retained."""
    model, _ = train(pretrained, samples, config)
    return model
