"""Small convolutional keyword classifier with exact analytic gradients.

Architecture: three 3x3 same-padding conv layers, each followed by ReLU and
2x2 max pooling (floor semantics), then two fully connected layers and a
binary softmax. Everything runs in float64 numpy. The output of the first FC
layer (after its ReLU) doubles as the embedding used by the covariance
alignment loss; backward() accepts an externally computed gradient on that
embedding and folds it into the parameter gradients.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"KWSM"
CHECKPOINT_VERSION = 1

# Flag for exhaustive finite-value asserts on every activation. Off by
# default; the cheap checks on logits/probabilities always run under debug.
DEBUG_FINITE_CHECKS = False

PARAM_FIELDS = (
    "conv1_w", "conv1_b", "conv2_w", "conv2_b", "conv3_w", "conv3_b",
    "fc1_w", "fc1_b", "fc2_w", "fc2_b",
)


@dataclass(frozen=True)
class Architecture:
    """Channel counts and sizes; stored in checkpoints so files are
    self-describing."""

    in_h: int = 121
    in_w: int = 80
    channels: tuple[int, int, int] = (32, 32, 64)
    d_emb: int = 128
    n_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) != 3 or any(c < 1 for c in self.channels):
            raise ValueError(f"need three positive channel counts, got {self.channels}")
        if self.in_h // 8 < 1 or self.in_w // 8 < 1:
            raise ValueError(f"input {self.in_h}x{self.in_w} too small for 3 poolings")
        if self.d_emb < 1 or self.n_classes < 2:
            raise ValueError("d_emb must be >= 1 and n_classes >= 2")

    @property
    def flat_dim(self) -> int:
        return self.channels[2] * (self.in_h // 8) * (self.in_w // 8)


@dataclass
class ModelParams:
    arch: Architecture
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    conv3_w: np.ndarray
    conv3_b: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray

    def __post_init__(self):
        a = self.arch
        c1, c2, c3 = a.channels
        expected = _shapes_for(a)
        for name in PARAM_FIELDS:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, arr)
            if arr.shape != expected[name]:
                raise ValueError(
                    f"{name}: expected shape {expected[name]}, got {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch,
                           *(getattr(self, f).copy() for f in PARAM_FIELDS))


@dataclass
class Gradients:
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    conv3_w: np.ndarray
    conv3_b: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray


def _shapes_for(a: Architecture) -> dict:
    c1, c2, c3 = a.channels
    return {
        "conv1_w": (c1, 1, 3, 3), "conv1_b": (c1,),
        "conv2_w": (c2, c1, 3, 3), "conv2_b": (c2,),
        "conv3_w": (c3, c2, 3, 3), "conv3_b": (c3,),
        "fc1_w": (a.d_emb, a.flat_dim), "fc1_b": (a.d_emb,),
        "fc2_w": (a.n_classes, a.d_emb), "fc2_b": (a.n_classes,),
    }


# Fan-in init assumes roughly unit-RMS inputs, but the network consumes raw
# log-energy features whose RMS is a few times larger (the log floor sits
# near -23). The first conv's init is damped by this factor so initial
# logits start in the soft region of the softmax instead of saturating.
FIRST_CONV_INIT_DAMP = 0.25


def init_params(arch: Architecture, rng: np.random.Generator) -> ModelParams:
    """Scaled-normal weight init (std sqrt(2/fan_in)), zero biases.

    The first conv layer's std is additionally multiplied by
    FIRST_CONV_INIT_DAMP; see the note above.
    """
    shapes = _shapes_for(arch)
    vals = {}
    for name, shape in shapes.items():
        if name.endswith("_b"):
            vals[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            if name == "conv1_w":
                std *= FIRST_CONV_INIT_DAMP
            vals[name] = rng.normal(0.0, std, shape)
    return ModelParams(arch, *(vals[n] for n in PARAM_FIELDS))


# ---------------------------------------------------------------------------
# Layer primitives
# ---------------------------------------------------------------------------

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 cross-correlation, stride 1, zero padding 1 (same-size output)."""
    if x.ndim != 4 or w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ValueError(f"bad conv shapes: input {x.shape}, kernel {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ValueError(
            f"channel mismatch: input has {x.shape[1]}, kernel expects {w.shape[1]}"
        )
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))
    return out.transpose(0, 3, 1, 2) + b[None, :, None, None]


def conv2d_backward(x: np.ndarray, w: np.ndarray, dout: np.ndarray,
                    compute_dx: bool = True):
    """Gradients of conv2d_forward w.r.t. input, weights and bias.

    compute_dx=False skips the input gradient (for the first layer, whose
    input is data, not an activation).
    """
    db = dout.sum(axis=(0, 2, 3))
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    # win: (B, Cin, H, W, 3, 3), dout: (B, Cout, H, W)
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))
    if not compute_dx:
        return None, dw, db
    dp = np.pad(dout, ((0, 0), (0, 0), (1, 1), (1, 1)))
    dwin = np.lib.stride_tricks.sliding_window_view(dp, (3, 3), axis=(2, 3))
    dx = np.tensordot(dwin, w[:, :, ::-1, ::-1], axes=([1, 4, 5], [0, 2, 3]))
    return dx.transpose(0, 3, 1, 2), dw, db


def maxpool2x2_forward(x: np.ndarray):
    """2x2 max pooling, stride 2, odd trailing rows/columns dropped.

    Returns the pooled tensor and the in-window argmax (ties to the first
    element in row-major window order), cached for the backward pass.
    """
    b, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    win = x[:, :, :ho * 2, :wo * 2].reshape(b, c, ho, 2, wo, 2)
    win = win.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho, wo, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2x2_backward(dout: np.ndarray, idx: np.ndarray,
                        in_shape: tuple) -> np.ndarray:
    """Route each upstream gradient to its cached argmax position."""
    b, c, h, w = in_shape
    ho, wo = dout.shape[2], dout.shape[3]
    dwin = np.zeros((b, c, ho, wo, 4))
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dx = np.zeros(in_shape)
    dx[:, :, :ho * 2, :wo * 2] = (
        dwin.reshape(b, c, ho, wo, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, ho * 2, wo * 2)
    )
    return dx


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Full network
# ---------------------------------------------------------------------------

@dataclass
class ForwardTrace:
    """Cached activations from one forward pass, enough for exact backprop."""

    x: np.ndarray
    conv_pre: tuple          # pre-ReLU conv outputs z1, z2, z3
    pool_in_shapes: tuple    # shapes of the ReLU outputs fed to each pool
    pool_idx: tuple          # argmax caches
    pool_out: tuple          # pooled outputs p1, p2 (conv2/conv3 inputs)
    flat: np.ndarray         # flattened p3, channel-major then time then mel
    fc1_pre: np.ndarray
    embedding: np.ndarray    # ReLU(fc1) output; the alignment-loss tap
    logits: np.ndarray
    probs: np.ndarray


def forward(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Run the network; returns (class probabilities, trace)."""
    x = np.asarray(x, dtype=np.float64)
    a = params.arch
    if x.ndim != 4 or x.shape[1] != 1 or x.shape[2:] != (a.in_h, a.in_w):
        raise ValueError(
            f"expected input (batch, 1, {a.in_h}, {a.in_w}), got {x.shape}"
        )

    z1 = conv2d_forward(x, params.conv1_w, params.conv1_b)
    a1 = np.maximum(z1, 0.0)
    p1, i1 = maxpool2x2_forward(a1)

    z2 = conv2d_forward(p1, params.conv2_w, params.conv2_b)
    a2 = np.maximum(z2, 0.0)
    p2, i2 = maxpool2x2_forward(a2)

    z3 = conv2d_forward(p2, params.conv3_w, params.conv3_b)
    a3 = np.maximum(z3, 0.0)
    p3, i3 = maxpool2x2_forward(a3)

    flat = p3.reshape(x.shape[0], -1)
    zf = flat @ params.fc1_w.T + params.fc1_b
    emb = np.maximum(zf, 0.0)
    logits = emb @ params.fc2_w.T + params.fc2_b
    probs = softmax(logits)

    if DEBUG_FINITE_CHECKS:
        for t in (z1, z2, z3, flat, zf, emb, logits, probs):
            assert np.all(np.isfinite(t))

    trace = ForwardTrace(
        x=x,
        conv_pre=(z1, z2, z3),
        pool_in_shapes=(a1.shape, a2.shape, a3.shape),
        pool_idx=(i1, i2, i3),
        pool_out=(p1, p2),
        flat=flat,
        fc1_pre=zf,
        embedding=emb,
        logits=logits,
        probs=probs,
    )
    return probs, trace


def backward(params: ModelParams, trace: ForwardTrace, dlogits: np.ndarray,
             demb: np.ndarray | None = None) -> Gradients:
    """Exact gradients for all parameters given upstream gradients on the
    logits, plus an optional extra gradient on the embedding (the alignment
    loss contribution) added before backprop continues into the convs."""
    if trace.logits.shape != dlogits.shape:
        raise ValueError(
            f"upstream gradient {dlogits.shape} does not match logits "
            f"{trace.logits.shape}"
        )
    if trace.flat.shape[1] != params.arch.flat_dim:
        raise ValueError("trace does not match this parameter set")

    emb = trace.embedding
    dfc2_w = dlogits.T @ emb
    dfc2_b = dlogits.sum(axis=0)
    demb_total = dlogits @ params.fc2_w
    if demb is not None:
        if demb.shape != emb.shape:
            raise ValueError(
                f"embedding gradient {demb.shape} does not match {emb.shape}"
            )
        demb_total = demb_total + demb

    dzf = demb_total * (trace.fc1_pre > 0)
    dfc1_w = dzf.T @ trace.flat
    dfc1_b = dzf.sum(axis=0)
    dflat = dzf @ params.fc1_w

    z1, z2, z3 = trace.conv_pre
    i1, i2, i3 = trace.pool_idx
    s1, s2, s3 = trace.pool_in_shapes
    p1, p2 = trace.pool_out

    b = trace.x.shape[0]
    c3 = params.arch.channels[2]
    dp3 = dflat.reshape(b, c3, s3[2] // 2, s3[3] // 2)
    da3 = maxpool2x2_backward(dp3, i3, s3)
    dz3 = da3 * (z3 > 0)
    dp2, dconv3_w, dconv3_b = conv2d_backward(p2, params.conv3_w, dz3)

    da2 = maxpool2x2_backward(dp2, i2, s2)
    dz2 = da2 * (z2 > 0)
    dp1, dconv2_w, dconv2_b = conv2d_backward(p1, params.conv2_w, dz2)

    da1 = maxpool2x2_backward(dp1, i1, s1)
    dz1 = da1 * (z1 > 0)
    _, dconv1_w, dconv1_b = conv2d_backward(trace.x, params.conv1_w, dz1,
                                            compute_dx=False)

    return Gradients(
        conv1_w=dconv1_w, conv1_b=dconv1_b,
        conv2_w=dconv2_w, conv2_b=dconv2_b,
        conv3_w=dconv3_w, conv3_b=dconv3_b,
        fc1_w=dfc1_w, fc1_b=dfc1_b,
        fc2_w=dfc2_w, fc2_b=dfc2_b,
    )


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over a batch plus the gradient on the logits."""
    labels = np.asarray(labels)
    n = logits.shape[0]
    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    logp = logits - lse
    loss = -float(logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


# ---------------------------------------------------------------------------
# Checkpoints: magic, u32 version, u32 descriptor (in_h, in_w, c1, c2, c3,
# d_emb, n_classes), then per parameter u32 rank, u32 dims, float64 data.
# All integers and floats little-endian.
# ---------------------------------------------------------------------------

def save_checkpoint(params: ModelParams, path) -> None:
    a = params.arch
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    parts.append(struct.pack("<7I", a.in_h, a.in_w, *a.channels, a.d_emb,
                             a.n_classes))
    for name in PARAM_FIELDS:
        arr = np.ascontiguousarray(getattr(params, name), dtype="<f8")
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> ModelParams:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    off = 8
    try:
        in_h, in_w, c1, c2, c3, d_emb, n_classes = struct.unpack_from("<7I", data, off)
        off += 28
        arch = Architecture(in_h, in_w, (c1, c2, c3), d_emb, n_classes)
        values = []
        for name in PARAM_FIELDS:
            (rank,) = struct.unpack_from("<I", data, off)
            off += 4
            if rank > 4:
                raise ValueError(f"{path}: bad rank {rank} for {name}")
            dims = struct.unpack_from(f"<{rank}I", data, off)
            off += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            end = off + 8 * count
            if end > len(data):
                raise ValueError(f"{path}: truncated while reading {name}")
            values.append(
                np.frombuffer(data, dtype="<f8", count=count, offset=off)
                .reshape(dims).copy()
            )
            off = end
    except struct.error as exc:
        raise ValueError(f"{path}: corrupt checkpoint ({exc})") from exc
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes")
    return ModelParams(arch, *values)
