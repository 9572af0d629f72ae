"""Evidence-sufficiency gate: a small feed-forward net over two features.

The two inputs are a syntactic feature (mean entity coverage of the pool) and
a semantic feature (scalar relevance of the pool to the question). The net is
2 -> hidden -> hidden -> 1 with ReLU hidden layers and a sigmoid output read
against a decision threshold. Forward, backward, and the training loop are
written out explicitly so the gradients can be checked against finite
differences.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError
from .evidence import EvidencePool
from .gaps import QuestionAnalysis, entity_coverage
from .scorers import RelevanceScorer

MODEL_VERSION = 1
DEFAULT_HIDDEN = (16, 8)
DEFAULT_TAU = 0.5


@dataclass(frozen=True)
class FeatureVector:
    syntactic: float
    semantic: float

    def as_array(self) -> np.ndarray:
        return np.array([self.syntactic, self.semantic], dtype=np.float64)


@dataclass(frozen=True)
class FeedbackDecision:
    logit: float
    probability: float
    sufficient: bool


def syntactic_feature(analysis: QuestionAnalysis, pool: EvidencePool) -> float:
    """Mean per-entity coverage over the question's extracted entities."""
    if not analysis.entities:
        raise ValueError("analysis carries no entities")
    total = sum(entity_coverage(pool, e) for e in analysis.entities)
    return total / len(analysis.entities)


def semantic_feature(scorer: RelevanceScorer, question: str,
                     pool: EvidencePool) -> float:
    """Relevance of the whole rendered pool to the question; empty pool is 0."""
    if len(pool) == 0:
        return 0.0
    return scorer.score(question, pool.render())


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class FeedbackNet:
    """Two-hidden-layer ReLU net with sigmoid output and decision threshold."""

    def __init__(self, hidden: tuple[int, int] = DEFAULT_HIDDEN,
                 tau: float = DEFAULT_TAU, seed: int = 0):
        if len(hidden) != 2 or min(hidden) < 1:
            raise ValueError(f"hidden sizes must be two positive ints, got {hidden}")
        if not 0.0 < tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {tau}")
        h1, h2 = hidden
        self.hidden = (h1, h2)
        self.tau = float(tau)
        rng = np.random.default_rng(seed)
        # He initialization for the ReLU layers, small uniform for the head.
        self.w1 = rng.normal(0.0, np.sqrt(2.0 / 2.0), size=(h1, 2))
        self.b1 = np.zeros(h1)
        self.w2 = rng.normal(0.0, np.sqrt(2.0 / h1), size=(h2, h1))
        self.b2 = np.zeros(h2)
        self.w3 = rng.uniform(-np.sqrt(1.0 / h2), np.sqrt(1.0 / h2), size=h2)
        self.b3 = 0.0

    @classmethod
    def from_linear(cls, w_syntactic: float, w_semantic: float, bias: float,
                    hidden: tuple[int, int] = DEFAULT_HIDDEN,
                    tau: float = DEFAULT_TAU) -> "FeedbackNet":
        """Net computing exactly `w_s * syntactic + w_g * semantic + bias`.

        Both features are non-negative, so routing each through one ReLU unit
        keeps the map affine. Useful for calibrated fixtures and baselines.
        """
        net = cls(hidden=hidden, tau=tau, seed=0)
        net.w1[:] = 0.0
        net.b1[:] = 0.0
        net.w2[:] = 0.0
        net.b2[:] = 0.0
        net.w3[:] = 0.0
        net.w1[0, 0] = 1.0
        net.w1[1, 1] = 1.0
        net.w2[0, 0] = 1.0
        net.w2[1, 1] = 1.0
        net.w3[0] = float(w_syntactic)
        net.w3[1] = float(w_semantic)
        net.b3 = float(bias)
        return net

    # --- forward -----------------------------------------------------------

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        z1 = x @ self.w1.T + self.b1
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ self.w2.T + self.b2
        h2 = np.maximum(z2, 0.0)
        return h2 @ self.w3 + self.b3

    def decide(self, features: FeatureVector) -> FeedbackDecision:
        """Single-sample decision: sufficient iff sigmoid(logit) >= tau."""
        x = features.as_array().reshape(1, 2)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite features: {features}")
        logit = float(self.forward_batch(x)[0])
        if not np.isfinite(logit):
            raise NumericError("non-finite logit; model parameters may be corrupt")
        probability = float(_sigmoid(np.array([logit]))[0])
        return FeedbackDecision(logit, probability, probability >= self.tau)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (_sigmoid(self.forward_batch(x)) >= self.tau).astype(np.int64)

    # --- loss and gradients ------------------------------------------------

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray
                       ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean binary cross-entropy and its analytic parameter gradients.

        The loss is computed from logits via softplus(z) - y*z, which equals
        the cross-entropy of the sigmoid output but stays finite for any z.
        """
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = x.shape[0]
        z1 = x @ self.w1.T + self.b1
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ self.w2.T + self.b2
        h2 = np.maximum(z2, 0.0)
        z3 = h2 @ self.w3 + self.b3
        loss = float(np.mean(np.logaddexp(0.0, z3) - y * z3))

        dz3 = (_sigmoid(z3) - y) / n
        grads = {
            "w3": h2.T @ dz3,
            "b3": np.array(dz3.sum()),
        }
        dh2 = np.outer(dz3, self.w3)
        dz2 = dh2 * (z2 > 0.0)
        grads["w2"] = dz2.T @ h1
        grads["b2"] = dz2.sum(axis=0)
        dh1 = dz2 @ self.w2
        dz1 = dh1 * (z1 > 0.0)
        grads["w1"] = dz1.T @ x
        grads["b1"] = dz1.sum(axis=0)
        return loss, grads

    def apply_grads(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.w1 -= lr * grads["w1"]
        self.b1 -= lr * grads["b1"]
        self.w2 -= lr * grads["w2"]
        self.b2 -= lr * grads["b2"]
        self.w3 -= lr * grads["w3"]
        self.b3 -= lr * float(grads["b3"])

    # --- flat parameter access, used by the finite-difference check --------

    def get_params(self) -> np.ndarray:
        return np.concatenate([
            self.w1.ravel(), self.b1, self.w2.ravel(), self.b2,
            self.w3, np.array([self.b3]),
        ])

    def set_params(self, flat: np.ndarray) -> None:
        h1, h2 = self.hidden
        sizes = [h1 * 2, h1, h2 * h1, h2, h2, 1]
        if flat.shape != (sum(sizes),):
            raise ValueError(f"expected {sum(sizes)} parameters, got {flat.shape}")
        chunks = np.split(np.asarray(flat, dtype=np.float64), np.cumsum(sizes)[:-1])
        self.w1 = chunks[0].reshape(h1, 2).copy()
        self.b1 = chunks[1].copy()
        self.w2 = chunks[2].reshape(h2, h1).copy()
        self.b2 = chunks[3].copy()
        self.w3 = chunks[4].copy()
        self.b3 = float(chunks[5][0])

    def flat_grads(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([
            grads["w1"].ravel(), grads["b1"], grads["w2"].ravel(), grads["b2"],
            grads["w3"], np.atleast_1d(grads["b3"]),
        ])

    # --- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "hidden": list(self.hidden),
            "tau": self.tau,
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
            "w3": self.w3.tolist(),
            "b3": self.b3,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeedbackNet":
        if payload.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {payload.get('version')!r}")
        net = cls(hidden=tuple(payload["hidden"]), tau=payload["tau"])
        net.w1 = np.array(payload["w1"], dtype=np.float64)
        net.b1 = np.array(payload["b1"], dtype=np.float64)
        net.w2 = np.array(payload["w2"], dtype=np.float64)
        net.b2 = np.array(payload["b2"], dtype=np.float64)
        net.w3 = np.array(payload["w3"], dtype=np.float64)
        net.b3 = float(payload["b3"])
        return net

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FeedbackNet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --- training ---------------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 0.05
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    val_fraction: float = 0.1


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    final_loss: float = float("nan")
    val_accuracy: float | None = None
    n_train: int = 0
    n_val: int = 0
    warnings: list[str] = field(default_factory=list)


def train_on_features(net: FeedbackNet, x: np.ndarray, y: np.ndarray,
                      cfg: TrainConfig) -> TrainReport:
    """Mini-batch gradient descent on precomputed feature rows.

    A validation slice of `val_fraction` is held out by the seeded shuffle
    before training. Single-class data trains anyway but is flagged in the
    report warnings.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 2 or x.shape[0] != y.shape[0]:
        raise DataError(f"bad training shapes x={x.shape} y={y.shape}")
    if x.shape[0] == 0:
        raise DataError("empty training set")

    report = TrainReport()
    if len(np.unique(y)) < 2:
        report.warnings.append("training data contains a single class")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(x.shape[0])
    n_val = int(round(x.shape[0] * cfg.val_fraction))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if train_idx.size == 0:
        raise DataError("validation fraction leaves no training data")
    x_train, y_train = x[train_idx], y[train_idx]
    report.n_train, report.n_val = int(train_idx.size), int(n_val)

    n = x_train.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = net.loss_and_grads(x_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise NumericError("training loss became non-finite")
            net.apply_grads(grads, cfg.lr)
            batch_losses.append(loss)
        report.epoch_losses.append(float(np.mean(batch_losses)))
    report.final_loss = report.epoch_losses[-1] if report.epoch_losses else float("nan")

    if n_val:
        predictions = net.predict(x[val_idx])
        report.val_accuracy = float(np.mean(predictions == y[val_idx]))
    return report
