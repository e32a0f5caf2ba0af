"""Dense tensor primitives: forward/backward math for every layer type.

All operations are pure functions on numpy arrays. Arrays are float32 in
production; float64 inputs are accepted too (gradient checks run in double
precision). Reductions accumulate in float64 and results are cast back to
the input dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Operation received tensors with incompatible shapes."""


@dataclass
class ConvKernelSet:
    """One convolution stage: weights [out_ch, in_ch, kh, kw], bias [out_ch]."""

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ShapeError(f"conv weights must be 4-D, got shape {self.weights.shape}")
        oc, _, kh, kw = self.weights.shape
        if kh < 1 or kw < 1:
            raise ShapeError(f"kernel dims must be >= 1, got {kh}x{kw}")
        if self.bias.shape != (oc,):
            raise ShapeError(f"bias shape {self.bias.shape} does not match {oc} output channels")
        if self.stride < 1:
            raise ShapeError(f"stride must be positive, got {self.stride}")
        if self.padding < 0:
            raise ShapeError(f"padding must be non-negative, got {self.padding}")


@dataclass
class PoolIndexMap:
    """Winning flat input index per pooled cell; routes gradients in backward."""

    input_shape: tuple[int, int, int]
    argmax: np.ndarray  # [C, H/2, W/2], flat indices into the input tensor


def _conv_geometry(x: np.ndarray, k: ConvKernelSet) -> tuple[int, int]:
    c, h, w = x.shape
    oc, ic, kh, kw = k.weights.shape
    if c != ic:
        raise ShapeError(f"input has {c} channels but kernels expect {ic}")
    if h + 2 * k.padding < kh or w + 2 * k.padding < kw:
        raise ShapeError(
            f"padded input {h + 2 * k.padding}x{w + 2 * k.padding} smaller than kernel {kh}x{kw}"
        )
    out_h = (h + 2 * k.padding - kh) // k.stride + 1
    out_w = (w + 2 * k.padding - kw) // k.stride + 1
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"zero-sized convolution output {out_h}x{out_w}")
    return out_h, out_w


def _window_matrix(xpad: np.ndarray, kh: int, kw: int, stride: int,
                   out_h: int, out_w: int) -> np.ndarray:
    """Gather all kernel windows into a (out_h*out_w, c*kh*kw) matrix."""
    c = xpad.shape[0]
    cols = np.empty((out_h, out_w, c, kh, kw), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, :, u, v] = xpad[
                :, u : u + stride * out_h : stride, v : v + stride * out_w : stride
            ].transpose(1, 2, 0)
    return cols.reshape(out_h * out_w, c * kh * kw)


def conv2d_forward(x: np.ndarray, k: ConvKernelSet) -> np.ndarray:
    """Cross-correlate x [C,H,W] with k, zero-padded, plus per-channel bias."""
    if x.ndim != 3:
        raise ShapeError(f"conv input must be [C,H,W], got shape {x.shape}")
    out_h, out_w = _conv_geometry(x, k)
    oc, ic, kh, kw = k.weights.shape
    p = k.padding
    xpad = np.pad(x, ((0, 0), (p, p), (p, p))) if p else x
    cols = _window_matrix(xpad, kh, kw, k.stride, out_h, out_w)
    wmat = k.weights.reshape(oc, ic * kh * kw).astype(np.float64)
    y = cols @ wmat.T + k.bias.astype(np.float64)
    return y.reshape(out_h, out_w, oc).transpose(2, 0, 1).astype(x.dtype)


def conv2d_backward(x: np.ndarray, k: ConvKernelSet,
                    grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. conv input, weights, and bias."""
    out_h, out_w = _conv_geometry(x, k)
    oc, ic, kh, kw = k.weights.shape
    if grad_out.shape != (oc, out_h, out_w):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match conv output ({oc},{out_h},{out_w})"
        )
    p, s = k.padding, k.stride
    xpad = np.pad(x, ((0, 0), (p, p), (p, p))) if p else x
    cols = _window_matrix(xpad, kh, kw, s, out_h, out_w)
    gmat = grad_out.transpose(1, 2, 0).reshape(out_h * out_w, oc).astype(np.float64)

    grad_bias = gmat.sum(axis=0)
    grad_weights = (gmat.T @ cols).reshape(oc, ic, kh, kw)

    wmat = k.weights.reshape(oc, ic * kh * kw).astype(np.float64)
    dcols = (gmat @ wmat).reshape(out_h, out_w, ic, kh, kw)
    dxpad = np.zeros((ic, xpad.shape[1], xpad.shape[2]), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            dxpad[:, u : u + s * out_h : s, v : v + s * out_w : s] += dcols[
                :, :, :, u, v
            ].transpose(2, 0, 1)
    grad_input = dxpad[:, p : p + x.shape[1], p : p + x.shape[2]] if p else dxpad
    return (
        grad_input.astype(x.dtype),
        grad_weights.astype(k.weights.dtype),
        grad_bias.astype(k.bias.dtype),
    )


def relu_forward(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pass grad_out where x > 0; subgradient at exactly 0 is 0."""
    if x.shape != grad_out.shape:
        raise ShapeError(f"relu grad shape {grad_out.shape} != input shape {x.shape}")
    return np.where(x > 0, grad_out, 0).astype(grad_out.dtype)


def maxpool2_forward(x: np.ndarray) -> tuple[np.ndarray, PoolIndexMap]:
    """2x2 stride-2 max pooling; ties break to the lowest flat input index."""
    if x.ndim != 3:
        raise ShapeError(f"pool input must be [C,H,W], got shape {x.shape}")
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"pool input spatial dims must be even, got {h}x{w}")
    oh, ow = h // 2, w // 2
    # Windows flattened row-major: offsets (0,0),(0,1),(1,0),(1,1) are in
    # increasing flat-index order, so argmax's first-match rule is the tie-break.
    wins = x.reshape(c, oh, 2, ow, 2).transpose(0, 1, 3, 2, 4).reshape(c, oh, ow, 4)
    local = wins.argmax(axis=3)
    out = np.take_along_axis(wins, local[..., None], axis=3)[..., 0]
    ci = np.arange(c)[:, None, None]
    yi = np.arange(oh)[None, :, None]
    xi = np.arange(ow)[None, None, :]
    rows = 2 * yi + local // 2
    cols = 2 * xi + local % 2
    flat = ci * (h * w) + rows * w + cols
    return out.astype(x.dtype), PoolIndexMap((c, h, w), flat)


def maxpool2_backward(idx: PoolIndexMap, grad_out: np.ndarray) -> np.ndarray:
    """Route grad_out back to the recorded argmax positions; zeros elsewhere."""
    if grad_out.shape != idx.argmax.shape:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} != pooled shape {idx.argmax.shape}"
        )
    flat = np.zeros(int(np.prod(idx.input_shape)), dtype=grad_out.dtype)
    np.add.at(flat, idx.argmax.ravel(), grad_out.ravel())
    return flat.reshape(idx.input_shape)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fully connected layer: y_i = b_i + sum_j w_ij * x_j."""
    if x.ndim != 1 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError(f"dense expects x[n], w[m,n], b[m]; got {x.shape}, {w.shape}, {b.shape}")
    m, n = w.shape
    if x.shape[0] != n or b.shape[0] != m:
        raise ShapeError(f"dense shapes disagree: x{x.shape}, w{w.shape}, b{b.shape}")
    y = w.astype(np.float64) @ x.astype(np.float64) + b.astype(np.float64)
    return y.astype(x.dtype)


def dense_backward(x: np.ndarray, w: np.ndarray,
                   grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chain rule for dense_forward; grad_b equals grad_out."""
    if x.ndim != 1 or w.ndim != 2:
        raise ShapeError(f"dense expects x[n], w[m,n]; got {x.shape}, {w.shape}")
    m, n = w.shape
    if x.shape[0] != n or grad_out.shape != (m,):
        raise ShapeError(f"dense grad shapes disagree: x{x.shape}, w{w.shape}, g{grad_out.shape}")
    g = grad_out.astype(np.float64)
    grad_x = (w.astype(np.float64).T @ g).astype(x.dtype)
    grad_w = np.outer(g, x.astype(np.float64)).astype(w.dtype)
    grad_b = grad_out.copy()
    return grad_x, grad_w, grad_b


def softmax(logits: np.ndarray) -> np.ndarray:
    """Overflow-safe softmax; outputs in (0,1] summing to 1."""
    if logits.ndim != 1 or logits.shape[0] < 1:
        raise ShapeError(f"softmax expects a non-empty vector, got shape {logits.shape}")
    z = logits.astype(np.float64)
    e = np.exp(z - z.max())
    return (e / e.sum()).astype(logits.dtype)


def cross_entropy(probs: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of the target class plus the logit gradient.

    probs must come from softmax. The probability is floored at 1e-12 so the
    loss stays finite; the gradient w.r.t. the logits is probs - one_hot(target).
    """
    k = probs.shape[0]
    if not 0 <= target < k:
        raise ValueError(f"target {target} out of range for {k} classes")
    p = min(max(float(probs[target]), 1e-12), 1.0)
    loss = -np.log(p)
    grad = probs.copy()
    grad[target] -= 1
    return float(loss), grad
