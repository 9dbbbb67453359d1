"""Training of the LSTM language model: cross-entropy loss, exact BPTT
gradients, plain SGD, perplexity tracking, sentence scoring, and binary
model persistence."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import TrainingPair, end_token_id, start_token_id
from .lm import (
    GATE_PARAM_FIELDS,
    LstmLayerParams,
    LstmStackParams,
    stack_forward,
    stack_forward_trace,
)

# Probability floor inside the loss so a zero-probability target cannot
# produce an infinite loss.
LOSS_EPS = 1e-12


class DivergenceError(RuntimeError):
    """Raised when training produces non-finite losses or gradients."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ModelFormatError(ValueError):
    """Raised when a model file is corrupt or has an unknown layout."""


# ---------------------------------------------------------------------------
# Loss, perplexity, scoring
# ---------------------------------------------------------------------------

def cross_entropy(prediction: np.ndarray, target: int) -> float:
    """Negative log probability of the target token, in nats.

    The predicted probability is floored at LOSS_EPS, which keeps the loss
    finite and non-negative (a perfect prediction scores exactly 0).
    """
    prediction = np.asarray(prediction)
    if not 0 <= target < prediction.shape[0]:
        raise ValueError(f"target id {target} out of range [0, {prediction.shape[0]})")
    return -math.log(max(float(prediction[target]), LOSS_EPS))


def sequence_loss(outputs, labels) -> float:
    """Sum of per-step cross-entropies over a sequence, in nats."""
    labels = list(labels)
    if len(outputs) != len(labels):
        raise ValueError(f"{len(outputs)} outputs vs {len(labels)} labels")
    return sum(cross_entropy(o, y) for o, y in zip(outputs, labels))


def perplexity(total_loss: float, token_count: int) -> float:
    """exp of the mean per-token loss."""
    if token_count < 1:
        raise ValueError("token_count must be >= 1")
    return math.exp(total_loss / token_count)


def score_sentence(params: LstmStackParams, sentence) -> float:
    """Chain-rule log probability of a sentence, in nats (always <= 0).

    Token t is predicted from the start marker plus the sentence prefix, so
    a sentence of T tokens contributes exactly T conditional factors. The
    value equals minus the sequence loss of that prediction problem.
    """
    ids = [int(i) for i in sentence]
    if not ids:
        raise ValueError("sentence is empty")
    inputs = [start_token_id(params.vocab)] + ids[:-1]
    outputs, _ = stack_forward(params, inputs)
    return -sequence_loss(outputs, ids)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

@dataclass
class Gradients:
    """Loss gradients, one array per parameter array (same shapes)."""

    layers: list[LstmLayerParams]
    V: np.ndarray


def zero_gradients(params: LstmStackParams) -> Gradients:
    layers = [
        LstmLayerParams(**{name: np.zeros_like(getattr(layer, name)) for name in GATE_PARAM_FIELDS})
        for layer in params.layers
    ]
    return Gradients(layers=layers, V=np.zeros_like(params.V))


def named_arrays(obj: LstmStackParams | Gradients) -> dict[str, np.ndarray]:
    """Flat name -> array view of a parameter or gradient container."""
    arrays: dict[str, np.ndarray] = {}
    for l, layer in enumerate(obj.layers):
        for name in GATE_PARAM_FIELDS:
            arrays[f"layer{l}.{name}"] = getattr(layer, name)
    arrays["V"] = obj.V
    return arrays


def bptt_gradients(params: LstmStackParams, pair: TrainingPair):
    """Exact loss gradients by backpropagation through time.

    Runs the stack forward over ``pair.input``, then walks time steps in
    reverse, pushing gradients down through the three layers and back
    through the recurrent connections. Returns (loss, Gradients).
    """
    if len(pair.input) != len(pair.label):
        raise ValueError("input and label lengths differ")
    outputs, traces, _ = stack_forward_trace(params, pair.input)
    loss = sequence_loss(outputs, pair.label)

    grads = zero_gradients(params)
    n_layers = len(params.layers)
    hidden = params.hidden
    dh_next = [np.zeros(hidden) for _ in range(n_layers)]
    dc_next = [np.zeros(hidden) for _ in range(n_layers)]

    for t in reversed(range(len(pair.input))):
        # Softmax + cross-entropy collapse to (p - onehot) at the logits.
        dz_out = outputs[t].copy()
        dz_out[pair.label[t]] -= 1.0
        grads.V += np.outer(dz_out, traces[t][-1].h)
        dx = params.V.T @ dz_out

        for l in reversed(range(n_layers)):
            tr = traces[t][l]
            p = params.layers[l]
            g = grads.layers[l]

            dh = dh_next[l] + dx
            dc = dc_next[l] + dh * tr.o * (1.0 - tr.tanh_c**2)
            dzo = dh * tr.tanh_c * tr.o_deriv
            dzf = dc * tr.c_prev * tr.f_deriv
            dzi = dc * tr.g * tr.i_deriv
            dzg = dc * tr.i * (1.0 - tr.g**2)
            dc_next[l] = dc * tr.f
            dh_next[l] = p.Wf.T @ dzf + p.Wi.T @ dzi + p.Wo.T @ dzo + p.Wg.T @ dzg

            g.Wf += np.outer(dzf, tr.h_prev)
            g.Wi += np.outer(dzi, tr.h_prev)
            g.Wo += np.outer(dzo, tr.h_prev)
            g.Wg += np.outer(dzg, tr.h_prev)
            g.bf += dzf
            g.bi += dzi
            g.bo += dzo
            g.bg += dzg
            if l == 0:
                # One-hot input: only the token's column receives gradient.
                g.Uf[:, tr.x] += dzf
                g.Ui[:, tr.x] += dzi
                g.Uo[:, tr.x] += dzo
                g.Ug[:, tr.x] += dzg
            else:
                g.Uf += np.outer(dzf, tr.x)
                g.Ui += np.outer(dzi, tr.x)
                g.Uo += np.outer(dzo, tr.x)
                g.Ug += np.outer(dzg, tr.x)
                dx = p.Uf.T @ dzf + p.Ui.T @ dzi + p.Uo.T @ dzo + p.Ug.T @ dzg
    return loss, grads


def sgd_step(params: LstmStackParams, grads: Gradients, learning_rate: float) -> LstmStackParams:
    """In-place SGD update of every parameter array.

    All gradients are checked before anything is touched, so a divergence
    error leaves the parameters unmodified.
    """
    if learning_rate <= 0:
        raise ValueError("learning_rate must be > 0")
    pairs = list(zip(named_arrays(params).values(), named_arrays(grads).values()))
    for _, g in pairs:
        if not np.all(np.isfinite(g)):
            raise DivergenceError("diverged: non-finite gradient")
    for p, g in pairs:
        p -= learning_rate * g
    return params


# ---------------------------------------------------------------------------
# Training loop and log
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    epochs: int = 245
    eval_interval: int = 100  # steps between perplexity records
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be >= 1")


@dataclass(frozen=True)
class TrainRecord:
    epoch: int
    step: int
    mean_loss: float  # nats per token
    perplexity: float
    kind: str  # "epoch" or "interval"


CSV_HEADER = "epoch,step,mean_loss,perplexity"


@dataclass
class TrainingLog:
    """Chronological loss/perplexity records collected during training."""

    records: list[TrainRecord] = field(default_factory=list)

    def add(self, epoch: int, step: int, mean_loss: float, kind: str) -> TrainRecord:
        record = TrainRecord(epoch, step, mean_loss, math.exp(mean_loss), kind)
        self.records.append(record)
        return record

    def epoch_records(self) -> list[TrainRecord]:
        return [r for r in self.records if r.kind == "epoch"]

    def interval_records(self) -> list[TrainRecord]:
        return [r for r in self.records if r.kind == "interval"]

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.records:
            lines.append(f"{r.epoch},{r.step},{r.mean_loss:.17g},{r.perplexity:.17g}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def train(params: LstmStackParams, pairs: list[TrainingPair], config: TrainConfig):
    """SGD over shuffled sentence pairs, one update per sentence.

    Deterministic for a fixed ``config.rng_seed`` (the seed drives the
    shuffle order; initialization is seeded by the caller). Records the
    per-token mean loss at every ``eval_interval`` steps and at each epoch
    end. Aborts with DivergenceError if a loss or gradient goes non-finite.
    """
    if not pairs:
        raise ValueError("no training pairs")
    rng = np.random.default_rng(config.rng_seed)
    log = TrainingLog()
    step = 0
    window_nats = 0.0
    window_tokens = 0

    for epoch in range(1, config.epochs + 1):
        epoch_nats = 0.0
        epoch_tokens = 0
        for idx in rng.permutation(len(pairs)):
            pair = pairs[idx]
            loss, grads = bptt_gradients(params, pair)
            if not math.isfinite(loss):
                raise DivergenceError(f"diverged: non-finite loss at step {step + 1}", step=step + 1)
            try:
                sgd_step(params, grads, config.learning_rate)
            except DivergenceError as err:
                raise DivergenceError(f"{err} at step {step + 1}", step=step + 1) from None
            step += 1
            tokens = len(pair.label)
            epoch_nats += loss
            epoch_tokens += tokens
            window_nats += loss
            window_tokens += tokens
            if step % config.eval_interval == 0:
                log.add(epoch, step, window_nats / window_tokens, kind="interval")
                window_nats = 0.0
                window_tokens = 0
        log.add(epoch, step, epoch_nats / epoch_tokens, kind="epoch")
    return params, log


def evaluate(params: LstmStackParams, pairs: list[TrainingPair]):
    """Mean per-token loss and perplexity of a model over sentence pairs."""
    if not pairs:
        raise ValueError("no evaluation pairs")
    total = 0.0
    tokens = 0
    for pair in pairs:
        outputs, _ = stack_forward(params, pair.input)
        total += sequence_loss(outputs, pair.label)
        tokens += len(pair.label)
    mean = total / tokens
    return mean, math.exp(mean)


# ---------------------------------------------------------------------------
# Model persistence
#
# Binary layout (little-endian):
#   magic "DRNN" | version u32 | array count u32
#   per array: name length u16 | name utf-8 | dtype code u8 (0=f64, 1=f32)
#              | rank u8 | dims u64 each | raw row-major data
# ---------------------------------------------------------------------------

MODEL_MAGIC = b"DRNN"
MODEL_VERSION = 1
_DTYPE_CODE = {"f64": 0, "f32": 1}
_DTYPE_NP = {0: np.dtype("<f8"), 1: np.dtype("<f4")}


def save_model(params: LstmStackParams, path, dtype: str = "f64") -> None:
    """Write all parameter arrays to the uncompressed named-array container."""
    if dtype not in _DTYPE_CODE:
        raise ValueError(f"dtype must be one of {sorted(_DTYPE_CODE)}")
    code = _DTYPE_CODE[dtype]
    np_dtype = _DTYPE_NP[code]
    arrays = named_arrays(params)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_VERSION, len(arrays)))
        for name, arr in arrays.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BB", code, arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(np.ascontiguousarray(arr, dtype=np_dtype).tobytes())


def load_model(path) -> LstmStackParams:
    """Read a model container back into float64 parameters."""
    data = Path(path).read_bytes()
    offset = 0

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise ModelFormatError("truncated model file")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    if take(4) != MODEL_MAGIC:
        raise ModelFormatError("bad magic: not a model file")
    version, count = struct.unpack("<II", take(8))
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unknown model version {version}")

    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        code, rank = struct.unpack("<BB", take(2))
        if code not in _DTYPE_NP:
            raise ModelFormatError(f"unknown dtype code {code}")
        shape = tuple(struct.unpack("<Q", take(8))[0] for _ in range(rank))
        np_dtype = _DTYPE_NP[code]
        raw = take(int(np.prod(shape, dtype=np.int64)) * np_dtype.itemsize)
        arrays[name] = np.frombuffer(raw, dtype=np_dtype).reshape(shape).astype(np.float64)
    if offset != len(data):
        raise ModelFormatError("trailing bytes after last array")

    if "V" not in arrays:
        raise ModelFormatError("missing output projection array V")
    V = arrays.pop("V")
    vocab, hidden = V.shape
    layer_count = 0
    while f"layer{layer_count}.Wf" in arrays:
        layer_count += 1
    layers = []
    for l in range(layer_count):
        fields = {}
        for name in GATE_PARAM_FIELDS:
            key = f"layer{l}.{name}"
            if key not in arrays:
                raise ModelFormatError(f"missing array {key}")
            fields[name] = arrays.pop(key)
        layers.append(LstmLayerParams(**fields))
    if arrays:
        raise ModelFormatError(f"unexpected arrays: {sorted(arrays)}")
    params = LstmStackParams(layers=layers, V=V, hidden=hidden, vocab=vocab)
    for name, arr in named_arrays(params).items():
        if not np.all(np.isfinite(arr)):
            raise ModelFormatError(f"non-finite values in array {name}")
    return params
