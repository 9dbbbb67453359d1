"""Floating-point forward path of the language model.

Holds the parameter containers and the step functions for the vanilla RNN
cell, the LSTM cell (hard-sigmoid gates, tanh candidate), and the 3-layer
LSTM stack with a softmax output projection. Everything here is pure
float64 and side-effect free; the fixed-point path lives in ``accel``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_LAYERS = 3
DEFAULT_HIDDEN = 50
DEFAULT_VOCAB = 4000

# Field order mirrors the gate wiring: recurrent weights, input weights, biases.
GATE_PARAM_FIELDS = ("Wf", "Wi", "Wo", "Wg", "Uf", "Ui", "Uo", "Ug", "bf", "bi", "bo", "bg")

# hard_sigmoid(x) = clamp(0.2 x + 0.5, 0, 1); its slope is 0.2 strictly
# inside |x| < 2.5 and 0 in the saturated regions.
_HS_SLOPE = 0.2
_HS_KNEE = 2.5


def hard_sigmoid(x):
    """Piecewise-linear sigmoid approximation clamp(0.2 x + 0.5, 0, 1)."""
    return np.clip(_HS_SLOPE * np.asarray(x, dtype=np.float64) + 0.5, 0.0, 1.0)


def hard_sigmoid_deriv(x):
    """Derivative of hard_sigmoid w.r.t. its pre-activation (0.2 or 0)."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < _HS_KNEE, _HS_SLOPE, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtraction before exponentiation)."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass
class RnnParams:
    """Weights of the single-layer vanilla RNN cell.

    ``s`` is the hidden state carried between steps; it starts at zero and
    is used when ``rnn_step`` is called without an explicit previous state.
    """

    U: np.ndarray  # hidden x vocab
    W: np.ndarray  # hidden x hidden
    V: np.ndarray  # vocab x hidden
    s: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        hidden, vocab = self.U.shape
        if self.W.shape != (hidden, hidden):
            raise ValueError(f"W shape {self.W.shape} != ({hidden}, {hidden})")
        if self.V.shape != (vocab, hidden):
            raise ValueError(f"V shape {self.V.shape} != ({vocab}, {hidden})")
        if self.s is None:
            self.s = np.zeros(hidden)
        elif self.s.shape != (hidden,):
            raise ValueError(f"state shape {self.s.shape} != ({hidden},)")


def rnn_step(params: RnnParams, x_id: int, s_prev: np.ndarray | None = None):
    """One vanilla RNN step: s = tanh(U[:, x] + W s_prev), o = softmax(V s).

    The one-hot input multiplication is realized as column selection of U,
    which is arithmetically identical. Returns (s, o).
    """
    vocab = params.U.shape[1]
    _check_token_id(x_id, vocab)
    if s_prev is None:
        s_prev = params.s
    s = np.tanh(params.U[:, x_id] + params.W @ s_prev)
    return s, softmax(params.V @ s)


@dataclass
class LstmLayerParams:
    """One LSTM layer: four gate blocks of (recurrent W, input U, bias b)."""

    Wf: np.ndarray
    Wi: np.ndarray
    Wo: np.ndarray
    Wg: np.ndarray
    Uf: np.ndarray
    Ui: np.ndarray
    Uo: np.ndarray
    Ug: np.ndarray
    bf: np.ndarray
    bi: np.ndarray
    bo: np.ndarray
    bg: np.ndarray

    def __post_init__(self):
        hidden = self.bf.shape[0]
        input_dim = self.Uf.shape[1]
        for name in ("Wf", "Wi", "Wo", "Wg"):
            if getattr(self, name).shape != (hidden, hidden):
                raise ValueError(f"{name} shape {getattr(self, name).shape} != ({hidden}, {hidden})")
        for name in ("Uf", "Ui", "Uo", "Ug"):
            if getattr(self, name).shape != (hidden, input_dim):
                raise ValueError(f"{name} shape {getattr(self, name).shape} != ({hidden}, {input_dim})")
        for name in ("bf", "bi", "bo", "bg"):
            if getattr(self, name).shape != (hidden,):
                raise ValueError(f"{name} shape {getattr(self, name).shape} != ({hidden},)")

    @property
    def hidden(self) -> int:
        return self.bf.shape[0]

    @property
    def input_dim(self) -> int:
        return self.Uf.shape[1]


@dataclass
class LstmStackParams:
    """Three stacked LSTM layers plus the vocab-sized output projection V."""

    layers: list[LstmLayerParams]
    V: np.ndarray  # vocab x hidden
    hidden: int
    vocab: int

    def __post_init__(self):
        if len(self.layers) != N_LAYERS:
            raise ValueError(f"expected {N_LAYERS} layers, got {len(self.layers)}")
        if self.V.shape != (self.vocab, self.hidden):
            raise ValueError(f"V shape {self.V.shape} != ({self.vocab}, {self.hidden})")
        for l, layer in enumerate(self.layers):
            want_in = self.vocab if l == 0 else self.hidden
            if layer.hidden != self.hidden or layer.input_dim != want_in:
                raise ValueError(
                    f"layer {l} dims ({layer.hidden}, {layer.input_dim}) != ({self.hidden}, {want_in})"
                )


@dataclass
class LstmState:
    """Per-layer hidden and cell vectors."""

    h: list[np.ndarray]
    c: list[np.ndarray]

    def copy(self) -> "LstmState":
        return LstmState([v.copy() for v in self.h], [v.copy() for v in self.c])


def zero_state(params: LstmStackParams) -> LstmState:
    return LstmState(
        [np.zeros(params.hidden) for _ in params.layers],
        [np.zeros(params.hidden) for _ in params.layers],
    )


@dataclass
class CellTrace:
    """Everything a backward pass needs from one cell evaluation."""

    x: object  # token id (layer 0) or input vector
    h_prev: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray
    f_deriv: np.ndarray
    i_deriv: np.ndarray
    o_deriv: np.ndarray


def _input_term(U: np.ndarray, x) -> np.ndarray:
    # One-hot input reduces U @ x to a column pick.
    if isinstance(x, (int, np.integer)):
        return U[:, x]
    return U @ x


def lstm_cell_trace(layer: LstmLayerParams, x, h_prev: np.ndarray, c_prev: np.ndarray) -> CellTrace:
    """Forward one LSTM cell, keeping gate values and slope masks.

    Gate order: forget and input gates scale the cell update, the tanh
    candidate provides new content, the output gate scales tanh(c). Biases
    sit inside the nonlinearities.
    """
    if isinstance(x, (int, np.integer)):
        _check_token_id(int(x), layer.input_dim)
    zf = layer.Wf @ h_prev + _input_term(layer.Uf, x) + layer.bf
    zi = layer.Wi @ h_prev + _input_term(layer.Ui, x) + layer.bi
    zo = layer.Wo @ h_prev + _input_term(layer.Uo, x) + layer.bo
    zg = layer.Wg @ h_prev + _input_term(layer.Ug, x) + layer.bg
    f = hard_sigmoid(zf)
    i = hard_sigmoid(zi)
    o = hard_sigmoid(zo)
    g = np.tanh(zg)
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return CellTrace(
        x=x, h_prev=h_prev, c_prev=c_prev, f=f, i=i, g=g, o=o, c=c, tanh_c=tanh_c, h=h,
        f_deriv=hard_sigmoid_deriv(zf), i_deriv=hard_sigmoid_deriv(zi), o_deriv=hard_sigmoid_deriv(zo),
    )


def lstm_cell_forward(layer: LstmLayerParams, x, h_prev: np.ndarray, c_prev: np.ndarray):
    """One LSTM cell step; returns (h, c)."""
    trace = lstm_cell_trace(layer, x, h_prev, c_prev)
    return trace.h, trace.c


def stack_forward_trace(params: LstmStackParams, input_ids, state0: LstmState | None = None):
    """Run the 3-layer stack over a token sequence, keeping cell traces.

    Returns (outputs, traces, states): softmax output per step, the
    per-step per-layer CellTrace list used by backpropagation, and the
    stack state snapshot after each step.
    """
    ids = list(input_ids)
    if not ids:
        raise ValueError("input sequence is empty")
    for x in ids:
        _check_token_id(int(x), params.vocab)
    state = state0.copy() if state0 is not None else zero_state(params)

    outputs: list[np.ndarray] = []
    traces: list[list[CellTrace]] = []
    states: list[LstmState] = []
    for x in ids:
        step_traces = []
        layer_input: object = int(x)
        for l, layer in enumerate(params.layers):
            trace = lstm_cell_trace(layer, layer_input, state.h[l], state.c[l])
            state.h[l] = trace.h
            state.c[l] = trace.c
            step_traces.append(trace)
            layer_input = trace.h
        outputs.append(softmax(params.V @ state.h[-1]))
        traces.append(step_traces)
        states.append(state.copy())
    return outputs, traces, states


def stack_forward(params: LstmStackParams, input_ids, state0: LstmState | None = None):
    """Forward over a token sequence; returns (outputs, per-step states)."""
    outputs, _, states = stack_forward_trace(params, input_ids, state0)
    return outputs, states


def stack_step(params: LstmStackParams, x_id: int, state: LstmState):
    """Advance the stack by one token; returns (output distribution, new state)."""
    outputs, states = stack_forward(params, [x_id], state)
    return outputs[0], states[0]


def init_params(hidden: int = DEFAULT_HIDDEN, vocab: int = DEFAULT_VOCAB, seed: int = 0) -> LstmStackParams:
    """Seeded initialization: each matrix uniform in +-1/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(seed)

    def mat(rows: int, cols: int) -> np.ndarray:
        bound = 1.0 / math.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    layers = []
    for l in range(N_LAYERS):
        input_dim = vocab if l == 0 else hidden
        layers.append(
            LstmLayerParams(
                Wf=mat(hidden, hidden), Wi=mat(hidden, hidden),
                Wo=mat(hidden, hidden), Wg=mat(hidden, hidden),
                Uf=mat(hidden, input_dim), Ui=mat(hidden, input_dim),
                Uo=mat(hidden, input_dim), Ug=mat(hidden, input_dim),
                bf=np.zeros(hidden), bi=np.zeros(hidden),
                bo=np.zeros(hidden), bg=np.zeros(hidden),
            )
        )
    return LstmStackParams(layers=layers, V=mat(vocab, hidden), hidden=hidden, vocab=vocab)


def _check_token_id(x_id: int, vocab: int) -> None:
    if not 0 <= x_id < vocab:
        raise ValueError(f"token id {x_id} out of range [0, {vocab})")
