"""Convolutional autoencoder (forward, analytic gradients, Adam) in plain numpy.

The 10-layer stack maps a 100x100 image to a 128-d bottleneck and back:
encoder 100 -> 49 -> 23 -> 10 -> 4 (stride-2 valid convs, 4x4 kernels,
channels 32/64/128/256) -> fc 4096 -> 128; decoder fc 128 -> 4096 ->
stride-2 transposed convs 1 -> 7 -> 20 -> 47 -> 100 (kernels 7/8/9/8),
sigmoid output. Decoder sizes only work out with the transposed-conv
formula H_out = (H_in - 1) * 2 + k, so the decoder uses transposed convs.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

EMBED_DIM = 128
CHECKPOINT_MAGIC = b"AECK1\n"


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv" | "tconv" | "fc"
    act: str  # "relu" | "sigmoid" | "none"
    k: int = 0
    stride: int = 2
    cin: int = 0
    cout: int = 0
    din: int = 0
    dout: int = 0


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size <= 0 or self.epochs <= 0 or self.learning_rate < 0:
            raise ValueError("hyperparameters must be positive (learning_rate >= 0)")


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activate(x, act):
    if act == "relu":
        return _relu(x)
    if act == "sigmoid":
        return _sigmoid(x)
    return x


def _activate_bwd(dy, pre, post, act):
    if act == "relu":
        return dy * (pre > 0)
    if act == "sigmoid":
        return dy * post * (1.0 - post)
    return dy


def _conv_fwd(x, W, b, stride):
    k = W.shape[0]
    sw = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    sw = sw[:, ::stride, ::stride]  # (B, Ho, Wo, C, k, k)
    return np.tensordot(sw, W, axes=([3, 4, 5], [2, 0, 1])) + b


def _conv_bwd(x, W, dy, stride):
    k = W.shape[0]
    sw = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    sw = sw[:, ::stride, ::stride]
    dW = np.tensordot(sw, dy, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
    db = dy.sum(axis=(0, 1, 2))
    dx = np.zeros_like(x)
    ho, wo = dy.shape[1], dy.shape[2]
    for ki in range(k):
        for kj in range(k):
            dx[:, ki : ki + ho * stride : stride, kj : kj + wo * stride : stride, :] += (
                dy @ W[ki, kj].T
            )
    return dx, dW, db


def _tconv_fwd(x, W, b, stride):
    # x (B, Hi, Wi, Cin), W (k, k, Cin, Cout); H_out = (Hi - 1) * stride + k
    bsz, hi, wi, _ = x.shape
    k, cout = W.shape[0], W.shape[3]
    ho = (hi - 1) * stride + k
    wo = (wi - 1) * stride + k
    y = np.zeros((bsz, ho, wo, cout), dtype=x.dtype)
    for ki in range(k):
        for kj in range(k):
            y[:, ki : ki + hi * stride : stride, kj : kj + wi * stride : stride, :] += (
                x @ W[ki, kj]
            )
    return y + b


def _tconv_bwd(x, W, dy, stride):
    bsz, hi, wi, _ = x.shape
    k = W.shape[0]
    dx = np.zeros_like(x)
    dW = np.zeros_like(W)
    for ki in range(k):
        for kj in range(k):
            dy_slice = dy[:, ki : ki + hi * stride : stride, kj : kj + wi * stride : stride, :]
            dx += dy_slice @ W[ki, kj].T
            dW[ki, kj] = np.tensordot(x, dy_slice, axes=([0, 1, 2], [0, 1, 2]))
    db = dy.sum(axis=(0, 1, 2))
    return dx, dW, db


def _build_specs(width_div: int) -> list[LayerSpec]:
    def c(n):
        if n % width_div:
            raise ValueError(f"channel width {n} not divisible by {width_div}")
        return n // width_div

    flat = 4 * 4 * c(256)
    return [
        LayerSpec("conv", "relu", k=4, cin=1, cout=c(32)),
        LayerSpec("conv", "relu", k=4, cin=c(32), cout=c(64)),
        LayerSpec("conv", "relu", k=4, cin=c(64), cout=c(128)),
        LayerSpec("conv", "relu", k=4, cin=c(128), cout=c(256)),
        LayerSpec("fc", "none", din=flat, dout=c(EMBED_DIM)),
        LayerSpec("fc", "none", din=c(EMBED_DIM), dout=flat),
        LayerSpec("tconv", "relu", k=7, cin=flat, cout=c(128)),
        LayerSpec("tconv", "relu", k=8, cin=c(128), cout=c(64)),
        LayerSpec("tconv", "relu", k=9, cin=c(64), cout=c(32)),
        LayerSpec("tconv", "sigmoid", k=8, cin=c(32), cout=1),
    ]


# expected spatial sizes through the stack, asserted at construction
_ENCODER_SIZES = [100, 49, 23, 10, 4]
_DECODER_SIZES = [1, 7, 20, 47, 100]


class ConvAutoencoder:
    """Stride-2 valid-padding convolutional autoencoder with a 128-d bottleneck.

    ``width_div`` divides every channel width (and the bottleneck) for cheap
    double-precision gradient checking; 1 is the real model.
    """

    def __init__(self, width_div: int = 1, dtype=np.float32, seed: int | None = None):
        self.width_div = width_div
        self.dtype = np.dtype(dtype)
        self.specs = _build_specs(width_div)
        self._check_shapes()
        self.params: list[dict] = []
        if seed is not None:
            self.init_params(seed)

    @property
    def embed_dim(self) -> int:
        return EMBED_DIM // self.width_div

    def _check_shapes(self):
        h = _ENCODER_SIZES[0]
        for i, spec in enumerate(self.specs[:4]):
            h = (h - spec.k) // spec.stride + 1
            assert h == _ENCODER_SIZES[i + 1], f"encoder layer {i}: {h}"
        h = _DECODER_SIZES[0]
        for i, spec in enumerate(self.specs[6:]):
            h = (h - 1) * spec.stride + spec.k
            assert h == _DECODER_SIZES[i + 1], f"decoder layer {i}: {h}"
        assert self.specs[4].din == 4 * 4 * self.specs[3].cout
        assert self.specs[5].dout == self.specs[6].cin

    def init_params(self, seed: int) -> None:
        """He-uniform for relu layers, Glorot-uniform otherwise; zero biases."""
        rng = np.random.default_rng(seed)
        self.params = []
        for spec in self.specs:
            if spec.kind == "fc":
                fan_in, fan_out = spec.din, spec.dout
                shape_w, shape_b = (spec.din, spec.dout), (spec.dout,)
            else:
                fan_in = spec.k * spec.k * spec.cin
                fan_out = spec.k * spec.k * spec.cout
                shape_w = (spec.k, spec.k, spec.cin, spec.cout)
                shape_b = (spec.cout,)
            if spec.act == "relu":
                limit = np.sqrt(6.0 / fan_in)
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=shape_w).astype(self.dtype)
            b = np.zeros(shape_b, dtype=self.dtype)
            self.params.append({"W": w, "b": b})

    # ---------------------------------------------------------------- forward

    def _layer_fwd(self, i: int, x):
        spec, p = self.specs[i], self.params[i]
        if spec.kind == "conv":
            pre = _conv_fwd(x, p["W"], p["b"], spec.stride)
        elif spec.kind == "tconv":
            pre = _tconv_fwd(x, p["W"], p["b"], spec.stride)
        else:
            pre = x @ p["W"] + p["b"]
        return pre, _activate(pre, spec.act)

    def forward(self, x_batch: np.ndarray, want_cache: bool = False):
        """x_batch (B, 100, 100) -> reconstruction (B, 100, 100)."""
        x = np.asarray(x_batch, dtype=self.dtype)
        if x.ndim != 3 or x.shape[1:] != (100, 100):
            raise ValueError(f"expected (B, 100, 100), got {x.shape}")
        cache = []
        h = x[..., None]  # (B, 100, 100, 1)
        for i in range(4):
            inp = h
            pre, h = self._layer_fwd(i, h)
            cache.append((inp, pre, h))
        conv_out_shape = h.shape
        h = h.reshape(h.shape[0], -1)
        for i in (4, 5):
            inp = h
            pre, h = self._layer_fwd(i, h)
            cache.append((inp, pre, h))
        h = h.reshape(h.shape[0], 1, 1, -1)
        for i in range(6, 10):
            inp = h
            pre, h = self._layer_fwd(i, h)
            cache.append((inp, pre, h))
        recon = h[..., 0]
        if want_cache:
            return recon, cache, conv_out_shape
        return recon

    def encode_batch(self, x_batch: np.ndarray) -> np.ndarray:
        x = np.asarray(x_batch, dtype=self.dtype)
        if x.ndim != 3 or x.shape[1:] != (100, 100):
            raise ValueError(f"expected (B, 100, 100), got {x.shape}")
        h = x[..., None]
        for i in range(4):
            _, h = self._layer_fwd(i, h)
        h = h.reshape(h.shape[0], -1)
        _, h = self._layer_fwd(4, h)
        return h

    def encode(self, spec_values: np.ndarray) -> np.ndarray:
        return self.encode_batch(spec_values[None])[0]

    def decode_batch(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=self.dtype)
        if z.ndim != 2 or z.shape[1] != self.embed_dim:
            raise ValueError(f"expected (B, {self.embed_dim}), got {z.shape}")
        _, h = self._layer_fwd(5, z)
        h = h.reshape(h.shape[0], 1, 1, -1)
        for i in range(6, 10):
            _, h = self._layer_fwd(i, h)
        return h[..., 0]

    def decode(self, z: np.ndarray) -> np.ndarray:
        return self.decode_batch(z[None])[0]

    # --------------------------------------------------------------- training

    def loss(self, x_batch: np.ndarray) -> float:
        recon = self.forward(x_batch)
        x = np.asarray(x_batch, dtype=self.dtype)
        return float(np.mean((recon - x) ** 2))

    def loss_and_grads(self, x_batch: np.ndarray):
        x = np.asarray(x_batch, dtype=self.dtype)
        recon, cache, conv_out_shape = self.forward(x, want_cache=True)
        bsz = x.shape[0]
        loss = float(np.mean((recon - x) ** 2))
        d = (2.0 / (bsz * 100 * 100)) * (recon - x)
        d = d[..., None]  # (B, 100, 100, 1)
        grads = [None] * 10
        for i in range(9, 5, -1):
            inp, pre, post = cache[i]
            d = _activate_bwd(d, pre, post, self.specs[i].act)
            d, dw, db = _tconv_bwd(inp, self.params[i]["W"], d, self.specs[i].stride)
            grads[i] = {"W": dw, "b": db}
        d = d.reshape(bsz, -1)
        for i in (5, 4):
            inp, pre, post = cache[i]
            d = _activate_bwd(d, pre, post, self.specs[i].act)
            grads[i] = {"W": inp.T @ d, "b": d.sum(axis=0)}
            d = d @ self.params[i]["W"].T
        d = d.reshape(conv_out_shape)
        for i in range(3, -1, -1):
            inp, pre, post = cache[i]
            d = _activate_bwd(d, pre, post, self.specs[i].act)
            d, dw, db = _conv_bwd(inp, self.params[i]["W"], d, self.specs[i].stride)
            grads[i] = {"W": dw, "b": db}
        return loss, grads


class AdamState:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        self.v = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            for k in p:
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k]
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] ** 2
                p[k] -= c.learning_rate * (m[k] / bc1) / (np.sqrt(v[k] / bc2) + c.eps)


def train(
    model: ConvAutoencoder, dataset: np.ndarray, cfg: TrainConfig
) -> list[float]:
    """Mini-batch Adam on analytic gradients; returns the per-epoch loss curve.

    Deterministic for a fixed (seed, data, config): the shuffle order is drawn
    from cfg.seed.
    """
    data = np.asarray(dataset, dtype=model.dtype)
    if data.ndim != 3 or len(data) == 0:
        raise ValueError("dataset must be a nonempty (N, 100, 100) array")
    rng = np.random.default_rng(cfg.seed)
    opt = AdamState(model.params, cfg)
    curve = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(data))
        losses = []
        for lo in range(0, len(data), cfg.batch_size):
            batch = data[order[lo : lo + cfg.batch_size]]
            loss, grads = model.loss_and_grads(batch)
            if not np.isfinite(loss):
                raise RuntimeError(f"training diverged: loss={loss} at step {opt.t}")
            losses.append(loss)
            opt.step(model.params, grads)
        curve.append(float(np.mean(losses)))
    return curve


def gradient_check(
    model: ConvAutoencoder,
    x: np.ndarray,
    layer_subset=None,
    n_samples: int = 100,
    h: float = 1e-5,
    seed: int = 0,
) -> dict[int, float]:
    """Max relative error of analytic vs central finite-difference gradients.

    Run on a reduced-width model in float64; returns {layer index: max rel err}.
    """
    if model.dtype != np.float64:
        raise ValueError("gradient_check requires a float64 model")
    rng = np.random.default_rng(seed)
    layers = list(layer_subset) if layer_subset is not None else list(range(10))
    _, grads = model.loss_and_grads(x)
    result = {}
    for li in layers:
        w = model.params[li]["W"]
        analytic = grads[li]["W"]
        flat = w.reshape(-1)
        idx = rng.choice(flat.size, size=min(n_samples, flat.size), replace=False)
        worst = 0.0
        for j in idx:
            orig = flat[j]
            flat[j] = orig + h
            lp = model.loss(x)
            flat[j] = orig - h
            lm = model.loss(x)
            flat[j] = orig
            numeric = (lp - lm) / (2.0 * h)
            a = analytic.reshape(-1)[j]
            denom = max(abs(a) + abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
        result[li] = worst
    return result


# ------------------------------------------------------------- checkpoint I/O


def save_checkpoint(model: ConvAutoencoder, path) -> None:
    """AECK1 format: magic, u32 width_div, u32 tensor count, then per tensor
    u32 ndim + u32 dims + little-endian float32 payload, in layer order W, b."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        tensors = [t for p in model.params for t in (p["W"], p["b"])]
        f.write(struct.pack("<II", model.width_div, len(tensors)))
        for t in tensors:
            f.write(struct.pack("<I", t.ndim))
            f.write(struct.pack(f"<{t.ndim}I", *t.shape))
            f.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_checkpoint(path) -> ConvAutoencoder:
    data = Path(path).read_bytes()
    off = len(CHECKPOINT_MAGIC)
    if data[:off] != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic in {path}", offset=0)
    width_div, n_tensors = struct.unpack_from("<II", data, off)
    off += 8
    model = ConvAutoencoder(width_div=width_div)
    model.init_params(0)
    tensors = []
    for _ in range(n_tensors):
        if off + 4 > len(data):
            raise FormatError(f"truncated checkpoint {path}", offset=off)
        (ndim,) = struct.unpack_from("<I", data, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        end = off + 4 * count
        if end > len(data):
            raise FormatError(f"truncated checkpoint {path}", offset=off)
        tensors.append(np.frombuffer(data[off:end], dtype="<f4").reshape(shape).copy())
        off = end
    if len(tensors) != 2 * len(model.params):
        raise FormatError(f"checkpoint {path} has {len(tensors)} tensors, expected "
                          f"{2 * len(model.params)}")
    for i, p in enumerate(model.params):
        w, b = tensors[2 * i], tensors[2 * i + 1]
        if w.shape != p["W"].shape or b.shape != p["b"].shape:
            raise FormatError(f"checkpoint {path}: layer {i} shape mismatch")
        p["W"], p["b"] = w.astype(model.dtype), b.astype(model.dtype)
    return model
