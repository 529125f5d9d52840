"""Weak-label window classifier with MC-dropout uncertainty.

A small multilabel network (one tanh hidden layer, dropout on the hidden
units, an independent sigmoid per class) stands in for any utterance-level
dysfluency classifier. Output index 0 is the fluent class; indices 1..K are
the dysfluent classes. Anything satisfying this interface can replace it in
the pipeline.

Gradients are computed analytically and are verified against central finite
differences in the test suite, so the loss and backward pass must stay in
exact correspondence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .validation import check_embeddings

CHECKPOINT_MAGIC = b"SCUTORC1"


class CheckpointFormatError(ValueError):
    """Checkpoint file does not start with the expected magic/header."""


class CheckpointTruncatedError(ValueError):
    """Checkpoint file ends before all parameter blobs are read."""


@dataclass(frozen=True)
class OracleModel:
    """Parameters of the two-layer multilabel classifier."""

    w1: np.ndarray  # (input_dim, hidden_dim)
    b1: np.ndarray  # (hidden_dim,)
    w2: np.ndarray  # (hidden_dim, class_count)
    b2: np.ndarray  # (class_count,)
    dropout_rate: float = 0.2

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("weight matrices must be 2-D")
        d, h = self.w1.shape
        h2, c = self.w2.shape
        if h != h2 or self.b1.shape != (h,) or self.b2.shape != (c,):
            raise ValueError("inconsistent parameter shapes")
        if c < 2:
            raise ValueError(f"need at least two classes (fluent + one dysfluent), got {c}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")
        for name in ("w1", "b1", "w2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"parameter {name} contains NaN or Inf")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def class_count(self) -> int:
        return self.w2.shape[1]


def init_model(
    input_dim: int,
    class_count: int,
    hidden_dim: int = 128,
    dropout_rate: float = 0.2,
    rng: np.random.Generator | None = None,
) -> OracleModel:
    """Glorot-normal initialization from a seeded generator."""
    rng = np.random.default_rng(rng)
    s1 = np.sqrt(2.0 / (input_dim + hidden_dim))
    s2 = np.sqrt(2.0 / (hidden_dim + class_count))
    return OracleModel(
        w1=rng.normal(0.0, s1, size=(input_dim, hidden_dim)),
        b1=np.zeros(hidden_dim),
        w2=rng.normal(0.0, s2, size=(hidden_dim, class_count)),
        b2=np.zeros(class_count),
        dropout_rate=dropout_rate,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _dropout_scale(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted-dropout multiplier: zero with probability rate, else 1/(1-rate)."""
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def forward(
    model: OracleModel,
    embedding,
    dropout_active: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-class sigmoid probabilities for one embedding or a batch.

    With dropout active, hidden units are zeroed independently with
    probability dropout_rate and survivors are scaled by 1/(1 - rate);
    a seeded generator makes this reproducible.
    """
    x = np.asarray(embedding, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != model.input_dim:
        raise ValueError(
            f"embedding dim {x2.shape[1]} does not match model input dim {model.input_dim}"
        )
    h = np.tanh(x2 @ model.w1 + model.b1)
    if dropout_active and model.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("dropout-active forward pass needs a random generator")
        h = h * _dropout_scale(rng, h.shape, model.dropout_rate)
    probs = _sigmoid(h @ model.w2 + model.b2)
    return probs[0] if single else probs


_PT_FLOOR = 1e-12  # keeps log(pt) finite for saturated sigmoids


def focal_loss(probs, targets, gamma: float = 2.0) -> float:
    """Mean over classes (and batch) of -(1 - pt)^gamma * log(pt).

    pt is the probability assigned to the true binary outcome of each class.
    gamma = 0 reduces to mean binary cross-entropy.
    """
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if p.shape != t.shape:
        raise ValueError(f"probs shape {p.shape} does not match targets shape {t.shape}")
    if p.min() <= 0.0 or p.max() >= 1.0:
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    pt = np.where(t == 1.0, p, 1.0 - p)
    pt = np.maximum(pt, _PT_FLOOR)
    terms = -((1.0 - pt) ** gamma) * np.log(pt)
    return float(terms.mean(axis=1).mean())


def loss_and_grads(
    model: OracleModel,
    x,
    targets,
    gamma: float = 2.0,
    dropout_scale: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Focal loss and analytic parameter gradients for a batch.

    dropout_scale, when given, is the per-unit multiplier drawn for this
    batch (the same array must scale forward and backward passes).
    """
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n, c = t.shape

    h = np.tanh(x2 @ model.w1 + model.b1)
    h_used = h if dropout_scale is None else h * dropout_scale
    p = _sigmoid(h_used @ model.w2 + model.b2)

    pt = np.where(t == 1.0, p, 1.0 - p)
    pt = np.maximum(pt, _PT_FLOOR)
    log_pt = np.log(pt)
    one_minus = 1.0 - pt
    loss = float((-(one_minus**gamma) * log_pt).mean(axis=1).mean())

    # d loss / d pt, including the 1/(n*c) averaging factor.
    if gamma == 0.0:
        dpt = -1.0 / pt
    else:
        dpt = gamma * one_minus ** (gamma - 1.0) * log_pt - one_minus**gamma / pt
    dpt /= n * c
    dp = np.where(t == 1.0, dpt, -dpt)
    dz2 = dp * p * (1.0 - p)

    grads = {
        "w2": h_used.T @ dz2,
        "b2": dz2.sum(axis=0),
    }
    dh_used = dz2 @ model.w2.T
    dh = dh_used if dropout_scale is None else dh_used * dropout_scale
    dz1 = dh * (1.0 - h * h)
    grads["w1"] = x2.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings for the reference trainer."""

    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 100
    focal_gamma: float = 2.0
    seed: int = 0
    lr_halving_patience_epochs: int = 2

    def __post_init__(self):
        if not (self.learning_rate > 0):
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr_halving_patience_epochs < 1:
            raise ValueError("lr halving patience must be >= 1 epoch")


def train_oracle(
    model: OracleModel,
    x_train,
    y_train,
    x_val,
    y_val,
    cfg: TrainConfig,
    train_speakers: Sequence[str] | None = None,
    val_speakers: Sequence[str] | None = None,
) -> tuple[OracleModel, list[dict]]:
    """Adam training with focal loss and validation-driven learning-rate halving.

    When speaker ids are given for both sides, any overlap is rejected: the
    classifier must never see evaluation speakers. Returns a new model and a
    per-epoch history; the input model is left untouched. Zero epochs return
    the model unchanged.
    """
    if train_speakers is not None and val_speakers is not None:
        overlap = set(train_speakers) & set(val_speakers)
        if overlap:
            raise ValueError(f"speaker overlap between train and validation sets: {sorted(overlap)}")

    x_tr = check_embeddings(x_train, "training embeddings")
    y_tr = np.atleast_2d(np.asarray(y_train, dtype=np.float64))
    x_va = check_embeddings(x_val, "validation embeddings")
    y_va = np.atleast_2d(np.asarray(y_val, dtype=np.float64))
    if len(x_tr) != len(y_tr) or len(x_va) != len(y_va):
        raise ValueError("embedding/target row counts disagree")

    rng = np.random.default_rng(cfg.seed)
    params = {"w1": model.w1.copy(), "b1": model.b1.copy(),
              "w2": model.w2.copy(), "b2": model.b2.copy()}
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    lr = cfg.learning_rate
    step = 0

    def current() -> OracleModel:
        return OracleModel(params["w1"], params["b1"], params["w2"], params["b2"],
                           dropout_rate=model.dropout_rate)

    history: list[dict] = []
    best_val = np.inf
    stale_epochs = 0
    n = len(x_tr)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            scale = None
            if model.dropout_rate > 0.0:
                scale = _dropout_scale(rng, (len(idx), model.hidden_dim), model.dropout_rate)
            loss, grads = loss_and_grads(current(), x_tr[idx], y_tr[idx],
                                         gamma=cfg.focal_gamma, dropout_scale=scale)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, batch starting {lo} "
                    f"(lr={lr:.3g}); aborting"
                )
            step += 1
            for k in params:
                g = grads[k]
                m[k] = beta1 * m[k] + (1 - beta1) * g
                v[k] = beta2 * v[k] + (1 - beta2) * g * g
                m_hat = m[k] / (1 - beta1**step)
                v_hat = v[k] / (1 - beta2**step)
                params[k] = params[k] - lr * m_hat / (np.sqrt(v_hat) + eps)
            batch_losses.append(loss)

        val_probs = forward(current(), x_va)
        val_loss = focal_loss(val_probs, y_va, gamma=cfg.focal_gamma)
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(batch_losses)) if batch_losses else np.nan,
            "val_loss": val_loss,
            "lr": lr,
        })
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= cfg.lr_halving_patience_epochs:
                lr /= 2.0
                stale_epochs = 0

    return current(), history


@dataclass(frozen=True)
class McPrediction:
    """Mean class probabilities, predictive entropy, and confidence mask for one node."""

    mean_probs: np.ndarray = field(repr=False)
    entropy: float = 0.0
    mask: float = 1.0

    @property
    def p_fluent(self) -> float:
        return float(self.mean_probs[0])

    @property
    def p_dysfluent_max(self) -> float:
        return float(self.mean_probs[1:].max())

    @property
    def is_dysfluent(self) -> bool:
        # Ties favour fluent, biasing against false alarms.
        return self.p_dysfluent_max > self.p_fluent


def predictive_entropy(mean_probs, support: str = "all") -> tuple[float, float]:
    """Entropy of the normalized mean probabilities and its maximum.

    support selects which outputs form the distribution: "all" uses every
    class (fluent included), "dysfluent" restricts to indices 1..K. The
    maximum is computed as the entropy of the exactly uniform vector of the
    same size, so a uniform input maps to the maximum without float slop.
    """
    p = np.asarray(mean_probs, dtype=np.float64)
    if support == "dysfluent":
        p = p[1:]
    elif support != "all":
        raise ValueError(f"unknown entropy support {support!r}")
    if p.size < 2:
        raise ValueError("entropy needs at least two classes")
    total = p.sum()
    if not (total > 0):
        raise ValueError("cannot normalize an all-zero probability vector")
    q = p / total
    h_max = float(np.log(len(q)))
    if np.ptp(q) == 0.0:
        return h_max, h_max
    nz = q[q > 0.0]
    return float(-(nz * np.log(nz)).sum()), h_max


def confidence_mask(mean_probs, support: str = "all") -> float:
    """1 - entropy/max_entropy, clamped to [0, 1]."""
    h, h_max = predictive_entropy(mean_probs, support=support)
    return float(min(1.0, max(0.0, 1.0 - h / h_max)))


def mc_predict(
    model: OracleModel,
    embedding,
    passes: int,
    rng: np.random.Generator | None,
    entropy_support: str = "all",
) -> McPrediction | list[McPrediction]:
    """Average of stochastic dropout-active forward passes plus uncertainty.

    Accepts one embedding (returns one prediction) or a batch (returns a
    list). With dropout_rate = 0 every pass is identical.
    """
    if passes < 1:
        raise ValueError(f"need at least one stochastic pass, got {passes}")
    x = np.asarray(embedding, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != model.input_dim:
        raise ValueError(
            f"embedding dim {x2.shape[1]} does not match model input dim {model.input_dim}"
        )
    if model.dropout_rate > 0.0 and rng is None:
        raise ValueError("MC dropout needs a random generator")

    h = np.tanh(x2 @ model.w1 + model.b1)
    acc = np.zeros((x2.shape[0], model.class_count))
    for _ in range(passes):
        if model.dropout_rate > 0.0:
            hd = h * _dropout_scale(rng, h.shape, model.dropout_rate)
        else:
            hd = h
        acc += _sigmoid(hd @ model.w2 + model.b2)
    mean = acc / passes

    preds = []
    for row in mean:
        ent, _ = predictive_entropy(row, support=entropy_support)
        preds.append(McPrediction(mean_probs=row, entropy=ent,
                                  mask=confidence_mask(row, support=entropy_support)))
    return preds[0] if single else preds


def p_fluent_vector(preds: Sequence[McPrediction]) -> np.ndarray:
    return np.array([p.p_fluent for p in preds])


def p_dysfluent_max_vector(preds: Sequence[McPrediction]) -> np.ndarray:
    return np.array([p.p_dysfluent_max for p in preds])


def entropy_mask_vector(preds: Sequence[McPrediction]) -> np.ndarray:
    return np.array([p.mask for p in preds])


def dysfluent_flags(preds: Sequence[McPrediction]) -> np.ndarray:
    return np.array([p.is_dysfluent for p in preds], dtype=bool)


def top_dysfluent_classes(preds: Sequence[McPrediction]) -> np.ndarray:
    """Index (0-based over dysfluent classes only) of each node's strongest class."""
    return np.array([int(np.argmax(p.mean_probs[1:])) for p in preds], dtype=int)


def prediction_similarity_matrix(preds) -> np.ndarray:
    """Similarity from prediction agreement: outer(p0, p0) + outer(pmax, pmax).

    Accepts a list of predictions or a (p_fluent, p_dysfluent_max) pair of
    vectors. The result is symmetric bit for bit and positive semidefinite,
    with entries in [0, 2].
    """
    if isinstance(preds, tuple):
        p0, pmax = (np.asarray(v, dtype=np.float64) for v in preds)
    else:
        p0, pmax = p_fluent_vector(preds), p_dysfluent_max_vector(preds)
    if p0.shape != pmax.shape or p0.ndim != 1:
        raise ValueError("probability vectors must be 1-D and the same length")
    return np.outer(p0, p0) + np.outer(pmax, pmax)


def probability_mask(preds: Sequence[McPrediction]) -> np.ndarray:
    """Probability-thresholded mask: max mean probability if >= 0.5, else 0."""
    pbar = np.array([p.mean_probs.max() for p in preds])
    return np.where(pbar >= 0.5, pbar, 0.0)


def save_model(model: OracleModel, path) -> None:
    """Write a checkpoint: magic, dims, dropout rate, float32 parameter blobs."""
    path = Path(path)
    header = CHECKPOINT_MAGIC + struct.pack(
        "<IIIf", model.input_dim, model.hidden_dim, model.class_count, model.dropout_rate
    )
    with path.open("wb") as fh:
        fh.write(header)
        for arr in (model.w1, model.b1, model.w2, model.b2):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_model(path) -> OracleModel:
    """Read a checkpoint written by save_model. Parameters come back float64."""
    path = Path(path)
    blob = path.read_bytes()
    head = len(CHECKPOINT_MAGIC) + struct.calcsize("<IIIf")
    if len(blob) < head or blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path} is not an oracle checkpoint")
    d, h, c, rate = struct.unpack("<IIIf", blob[len(CHECKPOINT_MAGIC) : head])
    sizes = [d * h, h, h * c, c]
    expected = head + 4 * sum(sizes)
    if len(blob) < expected:
        raise CheckpointTruncatedError(
            f"{path}: expected {expected} bytes, found {len(blob)}"
        )
    if len(blob) > expected:
        raise CheckpointFormatError(f"{path}: {len(blob) - expected} trailing bytes")
    offset = head
    arrays = []
    for size, shape in zip(sizes, [(d, h), (h,), (h, c), (c,)]):
        arr = np.frombuffer(blob, dtype="<f4", count=size, offset=offset)
        arrays.append(arr.astype(np.float64).reshape(shape))
        offset += 4 * size
    return OracleModel(*arrays, dropout_rate=float(rate))


class WindowOracle(BaseEstimator):
    """Estimator wrapper around the reference classifier.

    fit expects window embeddings X of shape (n, dim) and multilabel targets
    Y of shape (n, class_count) with class 0 = fluent. Speaker ids, when
    passed for both fit data and the validation split, enforce the
    no-speaker-overlap rule.
    """

    def __init__(
        self,
        hidden_dim: int = 128,
        dropout_rate: float = 0.2,
        learning_rate: float = 1e-4,
        batch_size: int = 64,
        epochs: int = 100,
        focal_gamma: float = 2.0,
        lr_halving_patience: int = 2,
        random_state: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.focal_gamma = focal_gamma
        self.lr_halving_patience = lr_halving_patience
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            focal_gamma=self.focal_gamma,
            seed=self.random_state,
            lr_halving_patience_epochs=self.lr_halving_patience,
        )

    def fit(self, X, Y, speakers=None, validation=None):
        X = check_embeddings(X, "X")
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        if validation is None:
            x_val, y_val, val_speakers = X, Y, None
            speakers = None  # identical data, the overlap check does not apply
        else:
            x_val, y_val = validation[0], validation[1]
            val_speakers = validation[2] if len(validation) > 2 else None
        init = init_model(
            X.shape[1], Y.shape[1], hidden_dim=self.hidden_dim,
            dropout_rate=self.dropout_rate, rng=np.random.default_rng(self.random_state),
        )
        self.model_, self.history_ = train_oracle(
            init, X, Y, x_val, y_val, self._train_config(),
            train_speakers=speakers, val_speakers=val_speakers,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X) -> np.ndarray:
        return forward(self.model_, X)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)

    def mc_predict(self, X, passes: int = 100, random_state: int | None = None):
        rng = np.random.default_rng(
            self.random_state if random_state is None else random_state
        )
        return mc_predict(self.model_, X, passes, rng)

    def save(self, path) -> None:
        save_model(self.model_, path)

    @classmethod
    def load(cls, path, **params) -> "WindowOracle":
        est = cls(**params)
        est.model_ = load_model(path)
        est.n_features_in_ = est.model_.input_dim
        return est
