from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from autodiff import Tensor, backward, input_gradient, softmax_array, softmax_cross_entropy
from common.errors import DimensionError, DivergenceError, EmptyDatasetError
from framing.types import PaddedFrame
from models.checkpoint import Checkpoint
from models.classifiers import Classifier
from models.config import TrainConfig

logger = logging.getLogger(__name__)


class Adam:
    def __init__(self, params: list[Tensor], cfg: TrainConfig) -> None:
        self.params = params
        self.lr = cfg.learning_rate
        self.beta1 = cfg.beta1
        self.beta2 = cfg.beta2
        self.eps = cfg.eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.step_count += 1
        bias1 = 1.0 - self.beta1 ** self.step_count
        bias2 = 1.0 - self.beta2 ** self.step_count
        for k, p in enumerate(self.params):
            if p.grad is None:
                continue
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * p.grad
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * p.grad * p.grad
            m_hat = self.m[k] / bias1
            v_hat = self.v[k] / bias2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _as_batch(frames: np.ndarray | PaddedFrame | list[PaddedFrame]) -> np.ndarray:
    if isinstance(frames, PaddedFrame):
        return frames.data[None]
    if isinstance(frames, list):
        return np.stack([f.data if isinstance(f, PaddedFrame) else np.asarray(f) for f in frames])
    batch = np.asarray(frames, dtype=np.float64)
    return batch[None] if batch.ndim == 2 else batch


def evaluate(model: Classifier, frames: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    logits = model.logits(frames)
    loss = softmax_cross_entropy(Tensor(logits), labels).item()
    acc = float(np.mean(np.argmax(logits, axis=1) == labels))
    return loss, acc


def train(
    model: Classifier,
    frames: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    *,
    fingerprint: str = "",
    eval_frames: Optional[np.ndarray] = None,
    eval_labels: Optional[np.ndarray] = None,
) -> Checkpoint:
    """Mini-batch Adam on cross-entropy; the lowest full-train-loss parameters are kept.

    Epoch 0 (before any update) counts as a candidate, so the returned loss never
    exceeds the initial one. Batch order comes from ``cfg.seed`` alone.
    """
    x = _as_batch(frames)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if x.shape[0] == 0:
        raise EmptyDatasetError("training set is empty")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"{x.shape[0]} frames but {y.shape[0]} labels")
    has_eval = eval_frames is not None and eval_labels is not None and len(eval_labels) > 0

    model.set_trainable(True)
    params = model.parameters()
    optimizer = Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)

    def record(epoch: int) -> dict:
        loss, acc = evaluate(model, x, y)
        if not np.isfinite(loss):
            raise DivergenceError(epoch, loss)
        row = {"epoch": epoch, "loss": loss, "accuracy": acc}
        if has_eval:
            _, eval_acc = evaluate(model, _as_batch(eval_frames), np.asarray(eval_labels, dtype=np.int64))
            row["eval_accuracy"] = eval_acc
        return row

    history = [record(0)]
    best_loss = history[0]["loss"]
    best_params = model.flat_parameters()
    stale = 0
    n = x.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss = softmax_cross_entropy(model(Tensor(x[idx])), y[idx])
            if not np.isfinite(loss.item()):
                raise DivergenceError(epoch, loss.item())
            backward(loss)
            optimizer.step()
        row = record(epoch)
        history.append(row)
        logger.info(
            "arch=%s epoch=%d loss=%.4f acc=%.3f%s",
            model.config.arch, epoch, row["loss"], row["accuracy"],
            f" eval_acc={row['eval_accuracy']:.3f}" if has_eval else "",
        )
        if row["loss"] < best_loss:
            best_loss = row["loss"]
            best_params = model.flat_parameters()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                logger.info("arch=%s early_stop epoch=%d best_loss=%.4f", model.config.arch, epoch, best_loss)
                break

    model.load_flat_parameters(best_params)
    model.set_trainable(False)
    return Checkpoint(
        config=model.config,
        params=best_params,
        train_config=cfg,
        history=history,
        fingerprint=fingerprint,
    )


def predict_proba(model: Classifier, frame: np.ndarray | PaddedFrame) -> np.ndarray:
    single = isinstance(frame, PaddedFrame) or np.ndim(frame) == 2
    probs = softmax_array(model.logits(_as_batch(frame)), axis=1)
    return probs[0] if single else probs


def predict(model: Classifier, frames: np.ndarray | PaddedFrame) -> np.ndarray:
    return np.argmax(model.logits(_as_batch(frames)), axis=1)


def accuracy(model: Classifier, frames: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return float("nan")
    return float(np.mean(predict(model, frames) == labels))


def score_gradient(
    model: Classifier,
    frame: np.ndarray | PaddedFrame,
    target_class: int,
    score: str = "logit",
) -> np.ndarray:
    data = frame.data if isinstance(frame, PaddedFrame) else np.asarray(frame, dtype=np.float64)
    with model.frozen():
        grad = input_gradient(model.forward, data, target_class, score=score)
    return grad
