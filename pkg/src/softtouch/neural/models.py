"""From-scratch regression models: MLP, vanilla RNN, LSTM, GRU.

All parameters live in one flat float64 array per model.  Layout, in
order, per layer l (input dim d_l = in_dim for l=0, else hidden):

    W_x (d_l, G*hidden)   input kernel, row-major
    W_h (hidden, G*hidden) recurrent kernel (absent for MLP)
    b   (G*hidden,)        single bias per gate

followed by the linear readout W_out (hidden, 3) and b_out (3,).  G is
the gate count: 1 (MLP, RNN), 4 (LSTM: i, f, g, o), 3 (GRU: r, z, n).

Cell equations (h' is the new hidden state, all activations elementwise):

    RNN   h' = tanh(x W_x + h W_h + b)
    LSTM  i,f,o = sigmoid(gate pre-activations); g = tanh(...)
          c' = f*c + i*g;  h' = o*tanh(c')
    GRU   r,z = sigmoid(...);  n = tanh(x W_xn + r*(h W_hn) + b_n)
          h' = (1-z)*n + z*h

The GRU keeps one bias per gate, applied outside the reset product.  The
MLP reads only the final frame of a window through tanh hidden layers.
Readout is linear from the top layer's state at the last step.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ..core import ForceVector
from ..preprocess import FeatureSet, RobustScalerParams

LAYOUT_VERSION = 1
OUT_DIM = 3


class Arch(str, Enum):
    MLP = "mlp"
    RNN = "rnn"
    LSTM = "lstm"
    GRU = "gru"

    @property
    def gate_count(self) -> int:
        return {Arch.MLP: 1, Arch.RNN: 1, Arch.LSTM: 4, Arch.GRU: 3}[self]

    @property
    def recurrent(self) -> bool:
        return self != Arch.MLP


@dataclass(frozen=True)
class ModelSpec:
    """Architecture hyperparameters; fully determines the parameter layout."""

    arch: Arch
    layers: int
    hidden: int
    in_dim: int
    out_dim: int = OUT_DIM

    def __post_init__(self):
        object.__setattr__(self, "arch", Arch(self.arch))
        if self.layers < 1 or self.hidden < 1 or self.in_dim < 1:
            raise ValueError("layers, hidden and in_dim must be >= 1")
        if self.out_dim != OUT_DIM:
            raise ValueError(f"out_dim is fixed at {OUT_DIM} force components")

    def layer_input_dim(self, layer: int) -> int:
        return self.in_dim if layer == 0 else self.hidden

    def layer_param_count(self, layer: int) -> int:
        d = self.layer_input_dim(layer)
        g, h = self.arch.gate_count, self.hidden
        recurrent = g * h * h if self.arch.recurrent else 0
        return g * d * h + recurrent + g * h

    @property
    def param_count(self) -> int:
        layers = sum(self.layer_param_count(l) for l in range(self.layers))
        return layers + self.hidden * self.out_dim + self.out_dim

    def to_dict(self) -> dict:
        return {
            "arch": self.arch.value,
            "layers": self.layers,
            "hidden": self.hidden,
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        return ModelSpec(
            arch=Arch(d["arch"]),
            layers=int(d["layers"]),
            hidden=int(d["hidden"]),
            in_dim=int(d["in_dim"]),
            out_dim=int(d["out_dim"]),
        )


@dataclass(frozen=True)
class PreprocessBundle:
    """Everything needed to run a trained model on raw sensor frames."""

    feature_set: FeatureSet
    window_length: int
    scaler: RobustScalerParams

    def to_dict(self) -> dict:
        return {
            "feature_set": FeatureSet(self.feature_set).value,
            "window_length": self.window_length,
            "scaler": self.scaler.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "PreprocessBundle":
        return PreprocessBundle(
            feature_set=FeatureSet(d["feature_set"]),
            window_length=int(d["window_length"]),
            scaler=RobustScalerParams.from_dict(d["scaler"]),
        )


@dataclass
class ModelWeights:
    """A model's flat parameter vector, optionally with its preprocessing."""

    spec: ModelSpec
    params: np.ndarray
    preprocess: PreprocessBundle | None = None

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.spec.param_count,):
            raise ValueError(
                f"params length {self.params.shape} does not match spec "
                f"count {self.spec.param_count}"
            )

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.spec, self.params.copy(), self.preprocess)


@dataclass
class _LayerView:
    """Views into the flat array; writes through to the owning vector."""

    w_x: np.ndarray
    w_h: np.ndarray | None
    b: np.ndarray


def _unpack(spec: ModelSpec, flat: np.ndarray) -> tuple[list[_LayerView], np.ndarray, np.ndarray]:
    off = 0

    def take(shape):
        nonlocal off
        size = int(np.prod(shape))
        view = flat[off : off + size].reshape(shape)
        off += size
        return view

    layers = []
    g, h = spec.arch.gate_count, spec.hidden
    for l in range(spec.layers):
        d = spec.layer_input_dim(l)
        w_x = take((d, g * h))
        w_h = take((h, g * h)) if spec.arch.recurrent else None
        b = take((g * h,))
        layers.append(_LayerView(w_x=w_x, w_h=w_h, b=b))
    w_out = take((h, spec.out_dim))
    b_out = take((spec.out_dim,))
    if off != len(flat):
        raise ValueError("flat parameter array does not match layout")
    return layers, w_out, b_out


def init_weights(spec: ModelSpec, seed: int = 0) -> ModelWeights:
    """Xavier-uniform kernels (per matrix), zero biases, seeded."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(spec.param_count, dtype=np.float64)
    layers, w_out, _ = _unpack(spec, flat)
    for view in layers:
        for m in (view.w_x, view.w_h):
            if m is not None:
                limit = np.sqrt(6.0 / (m.shape[0] + m.shape[1]))
                m[...] = rng.uniform(-limit, limit, m.shape)
    limit = np.sqrt(6.0 / (w_out.shape[0] + w_out.shape[1]))
    w_out[...] = rng.uniform(-limit, limit, w_out.shape)
    return ModelWeights(spec=spec, params=flat)


def _sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def _check_input(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != spec.in_dim:
        raise ValueError(
            f"expected input (batch, window, {spec.in_dim}), got {x.shape}"
        )
    return x


def _mlp_forward(views, x_last):
    acts = [x_last]
    for v in views:
        acts.append(np.tanh(acts[-1] @ v.w_x + v.b))
    return acts


def _rnn_layer_forward(v, x):
    n, length, _ = x.shape
    h_dim = v.w_h.shape[0]
    hs = np.empty((n, length, h_dim))
    pre = x @ v.w_x + v.b
    h = np.zeros((n, h_dim))
    for t in range(length):
        h = np.tanh(pre[:, t] + h @ v.w_h)
        hs[:, t] = h
    return hs, {"x": x, "hs": hs}


def _lstm_layer_forward(v, x):
    n, length, _ = x.shape
    h_dim = v.w_h.shape[0]
    gates = np.empty((n, length, 4, h_dim))  # i, f, g, o
    cs = np.empty((n, length, h_dim))
    tcs = np.empty((n, length, h_dim))
    hs = np.empty((n, length, h_dim))
    pre = x @ v.w_x + v.b
    h = np.zeros((n, h_dim))
    c = np.zeros((n, h_dim))
    for t in range(length):
        a = pre[:, t] + h @ v.w_h
        i = _sigmoid(a[:, :h_dim])
        f = _sigmoid(a[:, h_dim : 2 * h_dim])
        g = np.tanh(a[:, 2 * h_dim : 3 * h_dim])
        o = _sigmoid(a[:, 3 * h_dim :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[:, t, 0], gates[:, t, 1], gates[:, t, 2], gates[:, t, 3] = i, f, g, o
        cs[:, t] = c
        tcs[:, t] = tc
        hs[:, t] = h
    return hs, {"x": x, "hs": hs, "gates": gates, "cs": cs, "tcs": tcs}


def _gru_layer_forward(v, x):
    n, length, _ = x.shape
    h_dim = v.w_h.shape[0]
    rs = np.empty((n, length, h_dim))
    zs = np.empty((n, length, h_dim))
    ns = np.empty((n, length, h_dim))
    ss = np.empty((n, length, h_dim))  # candidate recurrent term h W_hn
    hs = np.empty((n, length, h_dim))
    pre = x @ v.w_x + v.b
    h = np.zeros((n, h_dim))
    for t in range(length):
        rz = pre[:, t, : 2 * h_dim] + h @ v.w_h[:, : 2 * h_dim]
        r = _sigmoid(rz[:, :h_dim])
        z = _sigmoid(rz[:, h_dim:])
        s = h @ v.w_h[:, 2 * h_dim :]
        cand = np.tanh(pre[:, t, 2 * h_dim :] + r * s)
        h = (1.0 - z) * cand + z * h
        rs[:, t], zs[:, t], ns[:, t], ss[:, t], hs[:, t] = r, z, cand, s, h
    return hs, {"x": x, "hs": hs, "rs": rs, "zs": zs, "ns": ns, "ss": ss}


_LAYER_FORWARD = {
    Arch.RNN: _rnn_layer_forward,
    Arch.LSTM: _lstm_layer_forward,
    Arch.GRU: _gru_layer_forward,
}


def forward_batch(w: ModelWeights, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Predict (batch, 3) forces; the cache feeds backward_batch."""
    x = _check_input(w.spec, x)
    views, w_out, b_out = _unpack(w.spec, w.params)
    if w.spec.arch == Arch.MLP:
        acts = _mlp_forward(views, x[:, -1, :])
        top = acts[-1]
        cache = {"acts": acts}
    else:
        seq = x
        layer_caches = []
        for v in views:
            seq, c = _LAYER_FORWARD[w.spec.arch](v, seq)
            layer_caches.append(c)
        top = seq[:, -1, :]
        cache = {"layers": layer_caches}
    y = top @ w_out + b_out
    cache["top"] = top
    return y, cache


def predict(w: ModelWeights, x: np.ndarray) -> np.ndarray:
    """Forward pass without keeping the cache."""
    y, _ = forward_batch(w, x)
    return y


def forward(w: ModelWeights, window: np.ndarray) -> ForceVector:
    """Estimate the force for one (window, in_dim) feature sequence."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ValueError(f"expected a (window, features) matrix, got {window.shape}")
    y = predict(w, window[None])
    return ForceVector.from_array(y[0])


def _mlp_backward(views, acts, d_top, grads):
    dh = d_top
    for l in range(len(views) - 1, -1, -1):
        h = acts[l + 1]
        da = dh * (1.0 - h * h)
        grads[l].w_x += acts[l].T @ da
        grads[l].b += da.sum(axis=0)
        dh = da @ views[l].w_x.T


def _rnn_layer_backward(v, cache, dhs, g):
    x, hs = cache["x"], cache["hs"]
    n, length, h_dim = hs.shape
    dx = np.empty_like(x)
    carry = np.zeros((n, h_dim))
    zeros = np.zeros((n, h_dim))
    for t in range(length - 1, -1, -1):
        dh = dhs[:, t] + carry
        h = hs[:, t]
        da = dh * (1.0 - h * h)
        h_prev = hs[:, t - 1] if t > 0 else zeros
        g.w_x += x[:, t].T @ da
        g.w_h += h_prev.T @ da
        g.b += da.sum(axis=0)
        dx[:, t] = da @ v.w_x.T
        carry = da @ v.w_h.T
    return dx


def _lstm_layer_backward(v, cache, dhs, g):
    x, hs = cache["x"], cache["hs"]
    gates, cs, tcs = cache["gates"], cache["cs"], cache["tcs"]
    n, length, h_dim = hs.shape
    dx = np.empty_like(x)
    dh_carry = np.zeros((n, h_dim))
    dc_carry = np.zeros((n, h_dim))
    zeros = np.zeros((n, h_dim))
    for t in range(length - 1, -1, -1):
        i, f, gg, o = (gates[:, t, k] for k in range(4))
        tc = tcs[:, t]
        dh = dhs[:, t] + dh_carry
        dc = dh * o * (1.0 - tc * tc) + dc_carry
        c_prev = cs[:, t - 1] if t > 0 else zeros
        h_prev = hs[:, t - 1] if t > 0 else zeros
        da = np.empty((n, 4 * h_dim))
        da[:, :h_dim] = dc * gg * i * (1.0 - i)
        da[:, h_dim : 2 * h_dim] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * h_dim : 3 * h_dim] = dc * i * (1.0 - gg * gg)
        da[:, 3 * h_dim :] = dh * tc * o * (1.0 - o)
        g.w_x += x[:, t].T @ da
        g.w_h += h_prev.T @ da
        g.b += da.sum(axis=0)
        dx[:, t] = da @ v.w_x.T
        dh_carry = da @ v.w_h.T
        dc_carry = dc * f
    return dx


def _gru_layer_backward(v, cache, dhs, g):
    x, hs = cache["x"], cache["hs"]
    rs, zs, ns, ss = cache["rs"], cache["zs"], cache["ns"], cache["ss"]
    n, length, h_dim = hs.shape
    dx = np.empty_like(x)
    carry = np.zeros((n, h_dim))
    zeros = np.zeros((n, h_dim))
    for t in range(length - 1, -1, -1):
        r, z, cand, s = rs[:, t], zs[:, t], ns[:, t], ss[:, t]
        h_prev = hs[:, t - 1] if t > 0 else zeros
        dh = dhs[:, t] + carry
        dn = dh * (1.0 - z)
        dz = dh * (h_prev - cand)
        da_n = dn * (1.0 - cand * cand)
        da_z = dz * z * (1.0 - z)
        da_r = da_n * s * r * (1.0 - r)
        ds = da_n * r
        da_pre = np.concatenate([da_r, da_z, da_n], axis=1)  # vs x kernel and bias
        da_rec = np.concatenate([da_r, da_z, ds], axis=1)  # vs recurrent kernel
        g.w_x += x[:, t].T @ da_pre
        g.b += da_pre.sum(axis=0)
        g.w_h += h_prev.T @ da_rec
        dx[:, t] = da_pre @ v.w_x.T
        carry = dh * z + da_rec @ v.w_h.T
    return dx


_LAYER_BACKWARD = {
    Arch.RNN: _rnn_layer_backward,
    Arch.LSTM: _lstm_layer_backward,
    Arch.GRU: _gru_layer_backward,
}


def backward_batch(
    w: ModelWeights, cache: dict, d_y: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """Gradient of a scalar loss with upstream d_y = dL/dy, flat layout."""
    views, w_out, _ = _unpack(w.spec, w.params)
    flat = np.zeros_like(w.params)
    grads, g_out, g_bout = _unpack(w.spec, flat)
    top = cache["top"]
    g_out += top.T @ d_y
    g_bout += d_y.sum(axis=0)
    d_top = d_y @ w_out.T
    if w.spec.arch == Arch.MLP:
        _mlp_backward(views, cache["acts"], d_top, grads)
    else:
        n, length = x.shape[0], x.shape[1]
        dhs = np.zeros((n, length, w.spec.hidden))
        dhs[:, -1, :] = d_top
        for l in range(w.spec.layers - 1, -1, -1):
            dhs = _LAYER_BACKWARD[w.spec.arch](
                views[l], cache["layers"][l], dhs, grads[l]
            )
    return flat


def mse_loss_and_gradient(
    w: ModelWeights, x: np.ndarray, y_true: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean squared error over batch and axes, plus its parameter gradient."""
    x = _check_input(w.spec, x)
    y_true = np.asarray(y_true, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty batch")
    if y_true.shape != (x.shape[0], w.spec.out_dim):
        raise ValueError(f"labels must be ({x.shape[0]}, {w.spec.out_dim})")
    y, cache = forward_batch(w, x)
    err = y - y_true
    loss = float(np.mean(err * err))
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss {loss} (|err| max "
            f"{np.max(np.abs(err[np.isfinite(err)]), initial=0.0):g}); "
            "check inputs and learning rate"
        )
    d_y = 2.0 * err / err.size
    return loss, backward_batch(w, cache, d_y, x), y


def save_weights(w: ModelWeights, path: Path) -> None:
    """JSON with the spec, base64 little-endian float64 params, preprocessing."""
    payload = {
        "layout_version": LAYOUT_VERSION,
        "spec": w.spec.to_dict(),
        "params_b64": base64.b64encode(
            np.ascontiguousarray(w.params, dtype="<f8").tobytes()
        ).decode("ascii"),
        "preprocess": w.preprocess.to_dict() if w.preprocess else None,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_weights(path: Path) -> ModelWeights:
    payload = json.loads(Path(path).read_text())
    version = payload.get("layout_version")
    if version != LAYOUT_VERSION:
        raise ValueError(f"unsupported weights layout version: {version}")
    spec = ModelSpec.from_dict(payload["spec"])
    params = np.frombuffer(
        base64.b64decode(payload["params_b64"]), dtype="<f8"
    ).astype(np.float64)
    preprocess = None
    if payload.get("preprocess"):
        preprocess = PreprocessBundle.from_dict(payload["preprocess"])
    return ModelWeights(spec=spec, params=params, preprocess=preprocess)
