"""Multi-stream neural binary classifier with hand-written backprop.

Each enabled input stream (abstract text embedding, claims text, citation
count vectors, ...) passes through its own ReLU dense layer; the stream
outputs are concatenated and fed through a 300-64-1 dense stack with
sigmoid output. Dropout (inverted scaling, so inference needs no rescale)
follows the 300 and 64 layers at train time. Count-valued streams are
log(1+x)-transformed before their dense layer to bound magnitudes.

No autograd: forward, backward, and the Adam update are explicit, and the
gradients are validated against central finite differences in the tests.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import PatentscapeError, TrainingError

STREAM_KINDS = (
    "abstract_text",
    "claims_text",
    "description_text",
    "citation_1hop",
    "citation_2hop",
    "cpc_seq",
    "cpc_avg",
)
COUNT_STREAM_KINDS = ("citation_1hop", "citation_2hop")

PROB_CLAMP = 1e-7

_MAGIC = b"NLCM"
_VERSION = 1

DEFAULT_LR = 1e-4
DEFAULT_EPOCHS = 5
DEFAULT_BATCH = 64
DEFAULT_DROPOUT = 0.4
DEFAULT_WIDTHS = (300, 64)


@dataclass(frozen=True)
class StreamSpec:
    kind: str
    input_dim: int
    width: int = 64
    enabled: bool = True

    def __post_init__(self):
        if self.kind not in STREAM_KINDS:
            raise PatentscapeError(f"unknown stream kind {self.kind!r}")
        if self.input_dim < 1 or self.width < 1:
            raise PatentscapeError(f"stream {self.kind}: dimensions must be >= 1")


def _check_streams(streams: Sequence[StreamSpec]) -> tuple[StreamSpec, ...]:
    kinds = [s.kind for s in streams]
    if len(set(kinds)) != len(kinds):
        raise PatentscapeError("duplicate stream kinds")
    enabled = [s for s in streams if s.enabled]
    if not any(s.kind == "abstract_text" for s in enabled):
        raise PatentscapeError("the abstract_text stream must be present and enabled")
    return tuple(streams)


@dataclass
class ClassifierModel:
    """Parameter container; all weights are float64 ndarrays keyed by name."""

    streams: tuple[StreamSpec, ...]
    combined_widths: tuple[int, int]
    dropout: float
    rng_seed: int
    params: dict[str, np.ndarray]

    @property
    def enabled_streams(self) -> tuple[StreamSpec, ...]:
        return tuple(s for s in self.streams if s.enabled)

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def parameter_order(self) -> list[str]:
        """Canonical ordering used by checkpoints and the optimizer."""
        names = []
        for s in self.enabled_streams:
            names += [f"stream/{s.kind}/W", f"stream/{s.kind}/b"]
        for i in range(len(self.combined_widths)):
            names += [f"dense{i}/W", f"dense{i}/b"]
        names += ["out/W", "out/b"]
        return names


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def build_model(
    streams: Sequence[StreamSpec],
    combined_widths: tuple[int, int] = DEFAULT_WIDTHS,
    dropout: float = DEFAULT_DROPOUT,
    rng_seed: int = 0,
) -> ClassifierModel:
    """Seeded Glorot-uniform weights, zero biases."""
    streams = _check_streams(streams)
    if not 0.0 <= dropout < 1.0:
        raise PatentscapeError(f"dropout must be in [0, 1), got {dropout}")
    rng = np.random.default_rng(rng_seed)
    params: dict[str, np.ndarray] = {}
    concat_width = 0
    for s in streams:
        if not s.enabled:
            continue
        params[f"stream/{s.kind}/W"] = _glorot(rng, s.input_dim, s.width)
        params[f"stream/{s.kind}/b"] = np.zeros(s.width)
        concat_width += s.width
    prev = concat_width
    for i, width in enumerate(combined_widths):
        params[f"dense{i}/W"] = _glorot(rng, prev, width)
        params[f"dense{i}/b"] = np.zeros(width)
        prev = width
    params["out/W"] = _glorot(rng, prev, 1)
    params["out/b"] = np.zeros(1)
    return ClassifierModel(
        streams=streams,
        combined_widths=tuple(combined_widths),
        dropout=dropout,
        rng_seed=rng_seed,
        params=params,
    )


# ---------------------------------------------------------------------------
# Forward / loss / backward
# ---------------------------------------------------------------------------


def _stack_inputs(model: ClassifierModel, batch_inputs) -> dict[str, np.ndarray]:
    """Validate and stack per-example input dicts into (B, d) matrices."""
    stacked = {}
    for s in model.enabled_streams:
        rows = []
        for inputs in batch_inputs:
            if s.kind not in inputs:
                raise PatentscapeError(f"missing input for enabled stream {s.kind!r}")
            x = np.asarray(inputs[s.kind], dtype=np.float64).reshape(-1)
            if x.shape[0] != s.input_dim:
                raise PatentscapeError(
                    f"stream {s.kind!r}: expected dimension {s.input_dim}, got {x.shape[0]}"
                )
            rows.append(x)
        mat = np.stack(rows)
        if s.kind in COUNT_STREAM_KINDS:
            mat = np.log1p(mat)
        stacked[s.kind] = mat
    return stacked


def _forward_batch(
    model: ClassifierModel,
    batch_inputs,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Probabilities plus the cache needed by backward.

    Dropout fires only when a generator is supplied (training); inference
    is dropout-inert by construction.
    """
    p = model.params
    X = _stack_inputs(model, batch_inputs)
    cache: dict = {"X": X, "pre": {}, "h": {}}
    parts = []
    for s in model.enabled_streams:
        a = X[s.kind] @ p[f"stream/{s.kind}/W"] + p[f"stream/{s.kind}/b"]
        cache["pre"][s.kind] = a
        h = np.maximum(a, 0.0)
        cache["h"][s.kind] = h
        parts.append(h)
    z = np.concatenate(parts, axis=1)
    cache["concat"] = z
    cache["dense"] = []
    keep = 1.0 - model.dropout
    for i in range(len(model.combined_widths)):
        a = z @ p[f"dense{i}/W"] + p[f"dense{i}/b"]
        h = np.maximum(a, 0.0)
        if dropout_rng is not None and model.dropout > 0.0:
            mask = (dropout_rng.random(h.shape) < keep) / keep
        else:
            mask = None
        out = h if mask is None else h * mask
        cache["dense"].append({"input": z, "pre": a, "mask": mask})
        z = out
    logits = z @ p["out/W"] + p["out/b"]
    cache["out_input"] = z
    probs = 1.0 / (1.0 + np.exp(-logits[:, 0]))
    cache["probs"] = probs
    return probs, cache


def forward(
    model: ClassifierModel,
    stream_inputs: Mapping[str, np.ndarray],
    dropout_rng: np.random.Generator | None = None,
) -> float:
    """Probability for one example. Always in (0, 1)."""
    probs, _ = _forward_batch(model, [stream_inputs], dropout_rng)
    return float(probs[0])


def loss(probability: float, label: int) -> float:
    """Binary cross-entropy with the probability clamped to [1e-7, 1-1e-7]."""
    if label not in (0, 1):
        raise PatentscapeError(f"label must be 0 or 1, got {label!r}")
    p = min(max(probability, PROB_CLAMP), 1.0 - PROB_CLAMP)
    return -(label * np.log(p) + (1 - label) * np.log(1.0 - p))


def batch_loss(model: ClassifierModel, batch) -> float:
    """Mean BCE over (stream_inputs, label) pairs, dropout off."""
    probs, _ = _forward_batch(model, [b[0] for b in batch])
    return float(np.mean([loss(p, y) for p, (_, y) in zip(probs, batch)]))


def backward(
    model: ClassifierModel,
    batch,
    dropout_rng: np.random.Generator | None = None,
) -> dict[str, np.ndarray]:
    """Gradients of the mean BCE over the batch w.r.t. every parameter.

    The logit gradient is the exact (p - y)/B, so the probability clamp in
    ``loss`` never zeroes a gradient.
    """
    if not batch:
        raise TrainingError("empty batch")
    params = model.params
    labels = np.array([y for _, y in batch], dtype=np.float64)
    if not set(np.unique(labels)) <= {0.0, 1.0}:
        raise TrainingError("labels must be 0/1")
    probs, cache = _forward_batch(model, [b[0] for b in batch], dropout_rng)
    grads: dict[str, np.ndarray] = {}
    delta = ((probs - labels) / len(batch))[:, None]

    grads["out/W"] = cache["out_input"].T @ delta
    grads["out/b"] = delta.sum(axis=0)
    d = delta @ params["out/W"].T
    for i in reversed(range(len(model.combined_widths))):
        layer = cache["dense"][i]
        if layer["mask"] is not None:
            d = d * layer["mask"]
        d = d * (layer["pre"] > 0.0)
        grads[f"dense{i}/W"] = layer["input"].T @ d
        grads[f"dense{i}/b"] = d.sum(axis=0)
        d = d @ params[f"dense{i}/W"].T

    offset = 0
    for s in model.enabled_streams:
        ds = d[:, offset : offset + s.width] * (cache["pre"][s.kind] > 0.0)
        grads[f"stream/{s.kind}/W"] = cache["X"][s.kind].T @ ds
        grads[f"stream/{s.kind}/b"] = ds.sum(axis=0)
        offset += s.width

    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in {name}")
    return grads


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_model(cls, model: ClassifierModel, lr: float = DEFAULT_LR) -> "AdamState":
        state = cls(lr=lr)
        for name, p in model.params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(
    model: ClassifierModel, grads: Mapping[str, np.ndarray], state: AdamState
) -> ClassifierModel:
    """Standard bias-corrected Adam update, applied in place."""
    state.step_count += 1
    t = state.step_count
    for name in model.parameter_order():
        g = grads[name]
        state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = state.m[name] / (1 - state.beta1**t)
        v_hat = state.v[name] / (1 - state.beta2**t)
        model.params[name] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return model


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def train(
    streams: Sequence[StreamSpec],
    dataset,
    epochs: int = DEFAULT_EPOCHS,
    batch_size: int = DEFAULT_BATCH,
    lr: float = DEFAULT_LR,
    rng_seed: int = 0,
    dropout: float = DEFAULT_DROPOUT,
    combined_widths: tuple[int, int] = DEFAULT_WIDTHS,
) -> tuple[ClassifierModel, list[float]]:
    """Minibatch Adam training; returns the model and per-epoch mean loss.

    Everything stochastic (init, shuffling, dropout masks) derives from
    rng_seed, so a rerun is bit-identical.
    """
    labels = {y for _, y in dataset}
    if labels != {0, 1}:
        raise TrainingError("training data must contain both classes (labels 0 and 1)")
    if batch_size < 1:
        raise TrainingError(f"batch_size must be >= 1, got {batch_size}")
    model = build_model(streams, combined_widths, dropout, rng_seed)
    state = AdamState.for_model(model, lr=lr)
    rng = np.random.default_rng(np.random.SeedSequence([rng_seed, 1]))
    history: list[float] = []
    n = len(dataset)
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = [dataset[i] for i in order[start : start + batch_size]]
            probs, cache = _forward_batch(model, [b[0] for b in batch], None)
            # grads recompute the forward pass with dropout live
            grads = backward(model, batch, dropout_rng=rng)
            adam_step(model, grads, state)
            total += sum(loss(p, y) for p, (_, y) in zip(probs, batch))
        history.append(total / n)
    return model, history


def predict_proba(model: ClassifierModel, stream_inputs: Mapping[str, np.ndarray]) -> float:
    return forward(model, stream_inputs)


def classify(
    model: ClassifierModel,
    stream_inputs: Mapping[str, np.ndarray],
    threshold: float = 0.5,
) -> str:
    """"positive" iff probability >= threshold."""
    return "positive" if predict_proba(model, stream_inputs) >= threshold else "negative"


# ---------------------------------------------------------------------------
# Checkpoint: NLCM binary, JSON header + float32 parameter blocks
# ---------------------------------------------------------------------------


def save_checkpoint(model: ClassifierModel, path: str | Path) -> None:
    header = {
        "streams": [
            {"kind": s.kind, "input_dim": s.input_dim, "width": s.width, "enabled": s.enabled}
            for s in model.streams
        ],
        "combined_widths": list(model.combined_widths),
        "dropout": model.dropout,
        "rng_seed": model.rng_seed,
        "parameters": [
            {"name": name, "shape": list(model.params[name].shape)}
            for name in model.parameter_order()
        ],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(blob)))
        f.write(blob)
        for name in model.parameter_order():
            f.write(model.params[name].astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> ClassifierModel:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise PatentscapeError(f"{path}: not an NLCM checkpoint")
        version, blob_len = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise PatentscapeError(f"{path}: unsupported NLCM version {version}")
        header = json.loads(f.read(blob_len).decode("utf-8"))
        params = {}
        for entry in header["parameters"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(4 * count)
            params[entry["name"]] = (
                np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
            )
    streams = tuple(
        StreamSpec(s["kind"], s["input_dim"], s["width"], s["enabled"])
        for s in header["streams"]
    )
    return ClassifierModel(
        streams=streams,
        combined_widths=tuple(header["combined_widths"]),
        dropout=header["dropout"],
        rng_seed=header["rng_seed"],
        params=params,
    )
