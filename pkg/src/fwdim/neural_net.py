"""
Feed-forward ReLU network fitted by mini-batch gradient descent.

Hidden layers use ReLU, the output layer is linear. Gradients come from a
hand-written reverse pass; ReLU'(0) is taken as 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from fwdim import rng
from fwdim.errors import TrainingDiverged, ValidationError
from fwdim.regression import RegressionData

PARAMS_SCHEMA = "fwdim.mlp/1"


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths ``[d_in, N_1, ..., N_L, 1]`` and the initialisation seed."""

    widths: tuple[int, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 3:
            raise ValidationError("need an input layer, at least one hidden layer and an output")
        if min(widths) < 1:
            raise ValidationError(f"all widths must be >= 1, got {widths}")
        if widths[-1] != 1:
            raise ValidationError("output layer must have width 1")
        object.__setattr__(self, "widths", widths)

    @classmethod
    def hidden(cls, hidden: list[int] | tuple[int, ...], d_in: int = 1, seed: int = 0) -> MlpSpec:
        return cls((d_in, *hidden, 1), seed)


@dataclass
class MlpParams:
    """Weights ``W[l]`` of shape ``(n_in, n_out)`` and biases ``b[l]`` of shape ``(n_out,)``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> MlpParams:
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> MlpParams:
        out = self.copy()
        pos = 0
        for a in out.arrays():
            a[...] = vec[pos : pos + a.size].reshape(a.shape)
            pos += a.size
        return out


def init_params(spec: MlpSpec) -> MlpParams:
    """He-normal weights (variance ``2 / fan_in``) and zero biases."""
    gen = rng.substream(spec.seed, rng.NN_INIT)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        weights.append(gen.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _as_batch(params: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d_in = params.weights[0].shape[0]
    if x.ndim == 1:
        x = x[:, None] if d_in == 1 else x[None, :]
    if x.ndim != 2 or x.shape[1] != d_in:
        raise ValidationError(f"input width {x.shape[-1]} does not match d_in={d_in}")
    return x


def _forward_cache(params: MlpParams, x: np.ndarray):
    acts = [x]
    pre = []
    a = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pre.append(z)
        a = z if l == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts, pre


def forward(params: MlpParams, x) -> np.ndarray:
    """Network output for a batch ``x`` of shape ``(n, d_in)``; returns ``(n,)``."""
    acts, _ = _forward_cache(params, _as_batch(params, x))
    return acts[-1][:, 0]


def loss_and_gradients(params: MlpParams, x, y) -> tuple[float, MlpParams]:
    """Mean squared error and its exact gradient with respect to every parameter."""
    x = _as_batch(params, x)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] == 0 or y.size != x.shape[0]:
        raise ValidationError("batch must be non-empty with one target per row")
    acts, pre = _forward_cache(params, x)
    resid = acts[-1][:, 0] - y
    n = y.size
    mse = float(np.mean(resid * resid))
    delta = (2.0 / n) * resid[:, None]
    gw = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    for l in range(len(params.weights) - 1, -1, -1):
        gw[l] = acts[l].T @ delta
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l].T) * (pre[l - 1] > 0)
    return mse, MlpParams(gw, gb)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 256
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    standardize_x: bool = True
    standardize_y: bool = True
    patience: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValidationError("epochs, batch_size and patience must be positive")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass
class FittedMlp:
    """Trained parameters plus the affine maps applied around them.

    ``history`` holds the full-data training MSE per epoch in target units.
    """

    params: MlpParams
    x_shift: float = 0.0
    x_scale: float = 1.0
    y_shift: float = 0.0
    y_scale: float = 1.0
    history: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def to_json(self) -> str:
        doc = {
            "schema": PARAMS_SCHEMA,
            "x_shift": self.x_shift,
            "x_scale": self.x_scale,
            "y_shift": self.y_shift,
            "y_scale": self.y_scale,
            "best_epoch": self.best_epoch,
            "layers": [
                {"weights": w.T.tolist(), "bias": b.tolist()}
                for w, b in zip(self.params.weights, self.params.biases)
            ],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> FittedMlp:
        doc = json.loads(text)
        if doc.get("schema") != PARAMS_SCHEMA:
            raise ValidationError(f"unsupported parameter schema {doc.get('schema')!r}")
        weights = [np.asarray(layer["weights"], dtype=float).T for layer in doc["layers"]]
        biases = [np.asarray(layer["bias"], dtype=float) for layer in doc["layers"]]
        return cls(
            MlpParams(weights, biases),
            doc["x_shift"],
            doc["x_scale"],
            doc["y_shift"],
            doc["y_scale"],
            best_epoch=doc.get("best_epoch", 0),
        )


def _affine(v: np.ndarray, enabled: bool) -> tuple[float, float]:
    if not enabled:
        return 0.0, 1.0
    scale = float(v.std())
    return float(v.mean()), scale if scale > 0 else 1.0


def train(spec: MlpSpec, cfg: TrainConfig, data: RegressionData) -> FittedMlp:
    """
    Fit the network to ``data`` by minimising the mean squared error.

    Training stops after ``cfg.epochs`` or once the epoch MSE has not improved
    for ``cfg.patience`` epochs; the best parameters seen are returned.

    Raises
    ------
    TrainingDiverged
        If the loss becomes non-finite.
    """
    if spec.widths[0] != 1:
        raise ValidationError("RegressionData carries a single regressor; d_in must be 1")
    x_shift, x_scale = _affine(data.x, cfg.standardize_x)
    y_shift, y_scale = _affine(data.y, cfg.standardize_y)
    xs = ((data.x - x_shift) / x_scale)[:, None]
    ys = (data.y - y_shift) / y_scale

    params = init_params(spec)
    if not np.any(ys):
        # a vanishing target is fit exactly by a silent output layer
        params.weights[-1][...] = 0.0
    arrays = params.arrays()
    m = [np.zeros_like(a) for a in arrays]
    v = [np.zeros_like(a) for a in arrays]
    gen = rng.substream(cfg.shuffle_seed, rng.NN_SHUFFLE)
    n = ys.size
    step = 0
    history: list[float] = []
    best_mse, best_epoch, best = np.inf, 0, params.copy()
    last_finite: tuple[int, float] | None = None

    for epoch in range(1, cfg.epochs + 1):
        order = gen.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = loss_and_gradients(params, xs[idx], ys[idx])
            step += 1
            for a, g, mi, vi in zip(arrays, grads.arrays(), m, v):
                if cfg.optimizer == "sgd":
                    a -= cfg.learning_rate * g
                    continue
                mi *= cfg.beta1
                mi += (1 - cfg.beta1) * g
                vi *= cfg.beta2
                vi += (1 - cfg.beta2) * g * g
                m_hat = mi / (1 - cfg.beta1**step)
                v_hat = vi / (1 - cfg.beta2**step)
                a -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
        resid = forward(params, xs) - ys
        mse = float(np.mean(resid * resid)) * y_scale**2
        if not np.isfinite(mse):
            raise TrainingDiverged(epoch, *(last_finite if last_finite else (None, None)))
        last_finite = (epoch, mse)
        history.append(mse)
        if mse < best_mse:
            best_mse, best_epoch, best = mse, epoch, params.copy()
        elif epoch - best_epoch >= cfg.patience:
            break
    return FittedMlp(best, x_shift, x_scale, y_shift, y_scale, history, best_epoch)


def predict_nn(fitted: FittedMlp, x_query) -> np.ndarray:
    """Predictions in target units, undoing the training standardisation."""
    x = np.asarray(x_query, dtype=float)
    z = (x.reshape(-1) - fitted.x_shift) / fitted.x_scale
    out = forward(fitted.params, z) * fitted.y_scale + fitted.y_shift
    return out.reshape(x.shape)
