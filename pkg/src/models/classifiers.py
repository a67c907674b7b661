from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from typing import Any, Iterator

import numpy as np

import autodiff.functional as F
from autodiff import Tensor
from common.errors import DimensionError
from models.config import Arch, ClassifierConfig

logger = logging.getLogger(__name__)


class Classifier:
    """Base class: named float64 parameters and a ``forward`` producing logits.

    Input frames are ``(alpha, T)`` or a batch ``(B, alpha, T)``; the output is
    the pre-softmax score matrix ``(B, C)``.
    """

    def __init__(self, config: ClassifierConfig) -> None:
        self.config = config
        self.params: dict[str, Tensor] = {}
        self._rng = np.random.default_rng(config.seed)
        self._build()
        del self._rng

    def _build(self) -> None:
        raise NotImplementedError

    def _forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def _param(self, name: str, shape: tuple[int, ...], fan_in: int, init: str = "uniform") -> Tensor:
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        else:
            bound = 1.0 / math.sqrt(fan_in)
            data = self._rng.uniform(-bound, bound, size=shape)
        tensor = Tensor(data, requires_grad=True)
        self.params[name] = tensor
        return tensor

    def _linear(self, x: Tensor, prefix: str) -> Tensor:
        weight, bias = self.params[f"{prefix}.weight"], self.params[f"{prefix}.bias"]
        out = x @ weight
        return out + bias.expand(out.shape)

    def _add_linear(self, prefix: str, fan_in: int, fan_out: int) -> None:
        self._param(f"{prefix}.weight", (fan_in, fan_out), fan_in)
        self._param(f"{prefix}.bias", (fan_out,), fan_in)

    def forward(self, x: Tensor) -> Tensor:
        expected = (self.config.input_features, self.config.seq_len)
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        if x.ndim != 3 or tuple(x.shape[1:]) != expected:
            raise DimensionError(f"{self.arch.display_name} expects frames of shape {expected}, got {x.shape}")
        return self._forward(x)

    __call__ = forward

    def logits(self, frames: np.ndarray, chunk: int = 256) -> np.ndarray:
        batch = np.asarray(frames, dtype=np.float64)
        if batch.ndim == 2:
            batch = batch[None]
        with self.frozen():
            parts = [self.forward(Tensor(batch[s:s + chunk])).data for s in range(0, batch.shape[0], chunk)]
        return np.concatenate(parts, axis=0)

    @property
    def arch(self) -> Arch:
        return Arch.parse(self.config.arch)

    @property
    def trainable(self) -> bool:
        return any(p.requires_grad for p in self.params.values())

    def set_trainable(self, flag: bool) -> None:
        for p in self.params.values():
            p.requires_grad = flag
            if not flag:
                p.grad = None

    @contextmanager
    def frozen(self) -> Iterator["Classifier"]:
        trainable = self.trainable
        self.set_trainable(False)
        try:
            yield self
        finally:
            self.set_trainable(trainable)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.params.values()])

    def load_flat_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.size != self.num_parameters:
            raise DimensionError(f"expected {self.num_parameters} parameters, got {flat.size}")
        offset = 0
        for p in self.params.values():
            n = p.size
            p.data = flat[offset:offset + n].reshape(p.shape).copy()
            offset += n


class RecurrentClassifier(Classifier):
    def _build(self) -> None:
        cfg = self.config
        h = cfg.hidden_size
        fan_in = cfg.input_features
        for layer in range(cfg.num_layers):
            self._param(f"lstm{layer}.w_ih", (fan_in, 4 * h), h)
            self._param(f"lstm{layer}.w_hh", (h, 4 * h), h)
            self._param(f"lstm{layer}.b_ih", (4 * h,), h)
            self._param(f"lstm{layer}.b_hh", (4 * h,), h)
            fan_in = h
        self._add_linear("head", h, cfg.num_classes)

    def _forward(self, x: Tensor) -> Tensor:
        h_size = self.config.hidden_size
        batch, steps = x.shape[0], x.shape[2]
        seq = x.transpose(0, 2, 1)
        h = Tensor.zeros((batch, h_size))
        for layer in range(self.config.num_layers):
            w_ih, w_hh, b_ih, b_hh = (self.params[f"lstm{layer}.{n}"] for n in ("w_ih", "w_hh", "b_ih", "b_hh"))
            projected = seq @ w_ih
            bias = b_ih + b_hh
            projected = projected + bias.expand(projected.shape)
            h = Tensor.zeros((batch, h_size))
            c = Tensor.zeros((batch, h_size))
            outputs = []
            for t in range(steps):
                gates = projected[:, t, :] + h @ w_hh
                i = F.sigmoid(gates[:, 0:h_size])
                f = F.sigmoid(gates[:, h_size:2 * h_size])
                g = F.tanh(gates[:, 2 * h_size:3 * h_size])
                o = F.sigmoid(gates[:, 3 * h_size:])
                c = f * c + i * g
                h = o * F.tanh(c)
                outputs.append(h)
            if layer + 1 < self.config.num_layers:
                seq = F.stack(outputs, axis=1)
        return self._linear(h, "head")


class TemporalConvClassifier(Classifier):
    def _build(self) -> None:
        cfg = self.config
        h, k = cfg.hidden_size, cfg.kernel_size
        fan_in = cfg.input_features
        for b, _ in enumerate(cfg.dilations):
            channels = fan_in
            for layer in range(cfg.num_layers):
                self._param(f"block{b}.conv{layer}.weight", (k, channels, h), k * channels)
                self._param(f"block{b}.conv{layer}.bias", (h,), k * channels)
                channels = h
            if fan_in != h:
                self._add_linear(f"block{b}.downsample", fan_in, h)
            fan_in = h
        self._add_linear("head", h, cfg.num_classes)

    def _causal_conv(self, x: Tensor, prefix: str, dilation: int) -> Tensor:
        weight, bias = self.params[f"{prefix}.weight"], self.params[f"{prefix}.bias"]
        k = self.config.kernel_size
        steps = x.shape[1]
        padded = F.pad_left(x, (k - 1) * dilation, axis=1)
        out = None
        for j in range(k):
            # tap j looks back (k - 1 - j) * dilation steps
            start = j * dilation
            term = padded[:, start:start + steps, :] @ weight[j]
            out = term if out is None else out + term
        return out + bias.expand(out.shape)

    def _forward(self, x: Tensor) -> Tensor:
        z = x.transpose(0, 2, 1)
        for b, dilation in enumerate(self.config.dilations):
            y = z
            for layer in range(self.config.num_layers):
                y = F.relu(self._causal_conv(y, f"block{b}.conv{layer}", dilation))
            residual = self._linear(z, f"block{b}.downsample") if f"block{b}.downsample.weight" in self.params else z
            z = F.relu(y + residual)
        return self._linear(z.mean(axis=1), "head")


class AttentionClassifier(Classifier):
    def _build(self) -> None:
        cfg = self.config
        d = cfg.hidden_size
        self._add_linear("embed", cfg.input_features, d)
        self._param("pos", (cfg.seq_len, d), d)
        for layer in range(cfg.num_layers):
            for name in ("query", "key", "value", "out"):
                self._add_linear(f"enc{layer}.{name}", d, d)
            self._param(f"enc{layer}.norm1.gain", (d,), d, init="ones")
            self._param(f"enc{layer}.norm1.bias", (d,), d, init="zeros")
            self._add_linear(f"enc{layer}.ff1", d, 2 * d)
            self._add_linear(f"enc{layer}.ff2", 2 * d, d)
            self._param(f"enc{layer}.norm2.gain", (d,), d, init="ones")
            self._param(f"enc{layer}.norm2.bias", (d,), d, init="zeros")
        self._add_linear("head", d, cfg.num_classes)

    def _split_heads(self, x: Tensor) -> Tensor:
        batch, steps, width = x.shape
        heads = self.config.num_heads
        return x.reshape(batch, steps, heads, width // heads).transpose(0, 2, 1, 3)

    def _attention(self, z: Tensor, prefix: str) -> Tensor:
        batch, steps, width = z.shape
        head_dim = width // self.config.num_heads
        q = self._split_heads(self._linear(z, f"{prefix}.query"))
        k = self._split_heads(self._linear(z, f"{prefix}.key"))
        v = self._split_heads(self._linear(z, f"{prefix}.value"))
        scores = F.scale(q @ k.transpose(0, 1, 3, 2), 1.0 / math.sqrt(head_dim))
        mixed = F.softmax(scores, axis=-1) @ v
        merged = mixed.transpose(0, 2, 1, 3).reshape(batch, steps, width)
        return self._linear(merged, f"{prefix}.out")

    def _forward(self, x: Tensor) -> Tensor:
        z = self._linear(x.transpose(0, 2, 1), "embed")
        pos = self.params["pos"]
        z = z + pos.expand(z.shape)
        for layer in range(self.config.num_layers):
            prefix = f"enc{layer}"
            z = F.layer_norm(
                z + self._attention(z, prefix),
                self.params[f"{prefix}.norm1.gain"],
                self.params[f"{prefix}.norm1.bias"],
            )
            ff = self._linear(F.relu(self._linear(z, f"{prefix}.ff1")), f"{prefix}.ff2")
            z = F.layer_norm(z + ff, self.params[f"{prefix}.norm2.gain"], self.params[f"{prefix}.norm2.bias"])
        return self._linear(z.mean(axis=1), "head")


_REGISTRY: dict[Arch, type[Classifier]] = {
    Arch.RECURRENT: RecurrentClassifier,
    Arch.TEMPORAL_CONV: TemporalConvClassifier,
    Arch.ATTENTION: AttentionClassifier,
}


def build(config: ClassifierConfig | dict[str, Any]) -> Classifier:
    if isinstance(config, dict):
        config = ClassifierConfig.from_dict(config)
    model = _REGISTRY[Arch.parse(config.arch)](config)
    expected = expected_parameter_count(config)
    if model.num_parameters != expected:
        raise DimensionError(f"{config.arch}: built {model.num_parameters} parameters, expected {expected}")
    logger.debug("built arch=%s params=%d seed=%d", config.arch, model.num_parameters, config.seed)
    return model


def expected_parameter_count(config: ClassifierConfig) -> int:
    h, c, a = config.hidden_size, config.num_classes, config.input_features
    head = h * c + c
    arch = Arch.parse(config.arch)
    if arch is Arch.RECURRENT:
        total, fan_in = 0, a
        for _ in range(config.num_layers):
            total += 4 * (h * (fan_in + h) + 2 * h)
            fan_in = h
        return total + head
    if arch is Arch.TEMPORAL_CONV:
        k = config.kernel_size
        total, fan_in = 0, a
        for _ in config.dilations:
            channels = fan_in
            for _ in range(config.num_layers):
                total += k * channels * h + h
                channels = h
            if fan_in != h:
                total += fan_in * h + h
            fan_in = h
        return total + head
    per_layer = 4 * (h * h + h) + 2 * (2 * h) + (h * 2 * h + 2 * h) + (2 * h * h + h)
    return (a * h + h) + config.seq_len * h + config.num_layers * per_layer + head
