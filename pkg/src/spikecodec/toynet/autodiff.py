"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps an ndarray and records the operation that produced it.
``backward()`` walks the recorded graph once, in reverse topological order,
accumulating gradients into every tensor created with ``requires_grad=True``.
Graphs are rebuilt per forward pass; nothing here retains state between
calls, so a training step is just forward, ``backward()``, parameter update.

All ops preserve the dtype of their inputs.  Running everything in float64
makes the analytic gradients agree with central finite differences to high
precision, which is how the op set is tested; float32 is used for speed once
the gradients are trusted.
"""

from __future__ import annotations

import numpy as np

from .binarize import heaviside_forward, heaviside_backward


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """An ndarray plus the closure that routes gradients to its parents."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple, backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype).reshape(self.data.shape))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        out_data = a.data + b.data

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.data.shape))

        return Tensor._make(out_data, (a, b), backward)

    def __sub__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        out_data = a.data - b.data

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g, b.data.shape))

        return Tensor._make(out_data, (a, b), backward)

    def __mul__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        out_data = a.data * b.data

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._make(out_data, (a, b), backward)

    def scale(self, k: float) -> "Tensor":
        """Multiply by a python scalar (no tensor wrapper, no broadcast cost)."""
        a = self
        k = a.data.dtype.type(k)
        out_data = a.data * k

        def backward(g):
            a._accumulate(g * k)

        return Tensor._make(out_data, (a,), backward)

    def shift(self, k: float) -> "Tensor":
        """Add a python scalar."""
        a = self
        out_data = a.data + a.data.dtype.type(k)

        def backward(g):
            a._accumulate(g)

        return Tensor._make(out_data, (a,), backward)

    def __neg__(self) -> "Tensor":
        return self.scale(-1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        out_data = a.data @ b.data

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

        return Tensor._make(out_data, (a, b), backward)

    # -- shape ops -----------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        a = self
        out_data = a.data.reshape(*shape)

        def backward(g):
            a._accumulate(g.reshape(a.data.shape))

        return Tensor._make(out_data, (a,), backward)

    def swapaxes(self, ax1: int, ax2: int) -> "Tensor":
        a = self
        out_data = np.swapaxes(a.data, ax1, ax2)

        def backward(g):
            a._accumulate(np.swapaxes(g, ax1, ax2))

        return Tensor._make(out_data, (a,), backward)

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False))

        return Tensor._make(out_data, (a,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self
        count = a.data.size if axis is None else np.prod([a.data.shape[i] for i in np.atleast_1d(axis)])
        return a.sum(axis=axis, keepdims=keepdims).scale(1.0 / float(count))

    # -- nonlinearities ------------------------------------------------------

    def tanh(self) -> "Tensor":
        a = self
        out_data = np.tanh(a.data)

        def backward(g):
            a._accumulate(g * (1.0 - out_data * out_data))

        return Tensor._make(out_data, (a,), backward)

    def relu(self) -> "Tensor":
        a = self
        out_data = np.maximum(a.data, 0.0)

        def backward(g):
            a._accumulate(g * (a.data > 0.0))

        return Tensor._make(out_data, (a,), backward)

    def abs(self) -> "Tensor":
        a = self
        out_data = np.abs(a.data)

        def backward(g):
            a._accumulate(g * np.sign(a.data))

        return Tensor._make(out_data, (a,), backward)

    def softmax(self, axis: int = -1) -> "Tensor":
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            a._accumulate(out_data * (g - inner))

        return Tensor._make(out_data, (a,), backward)

    def heaviside(self) -> "Tensor":
        """Step nonlinearity; backward uses the triangular surrogate."""
        a = self
        out_data = heaviside_forward(a.data)

        def backward(g):
            a._accumulate(heaviside_backward(a.data, g))

        return Tensor._make(out_data, (a,), backward)

    # -- indexing ------------------------------------------------------------

    def take_rows(self, index: np.ndarray) -> "Tensor":
        """Row lookup ``self[index]`` for embedding tables."""
        a = self
        index = np.asarray(index)
        out_data = a.data[index]

        def backward(g):
            grad = np.zeros_like(a.data)
            np.add.at(grad, index, g)
            a._accumulate(grad)

        return Tensor._make(out_data, (a,), backward)


# -- composite ops -----------------------------------------------------------


def conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Same-length 1-d convolution (cross-correlation), stride 1, odd kernel.

    ``x`` is (batch, c_in, t); ``weight`` is (c_out, c_in, k); output is
    (batch, c_out, t).  Forward and both gradient passes reduce to one large
    matmul each over an unfolded window view, which keeps the whole graph on
    BLAS instead of python loops.
    """
    b_sz, c_in, t = x.data.shape
    c_out, c_in_w, k = weight.data.shape
    if c_in_w != c_in:
        raise ValueError(f"weight expects {c_in_w} input channels, got {c_in}")
    if k % 2 != 1:
        raise ValueError("kernel length must be odd for same-length output")
    pad = (k - 1) // 2

    def _unfold(arr: np.ndarray) -> np.ndarray:
        # (batch, c, t) -> (batch, t, c*k) with zero padding at both ends.
        padded = np.pad(arr, ((0, 0), (0, 0), (pad, pad)))
        win = np.lib.stride_tricks.sliding_window_view(padded, k, axis=2)
        return np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(arr.shape[0], arr.shape[2], -1)

    unfolded = _unfold(x.data)  # (b, t, c_in*k)
    w_flat = weight.data.reshape(c_out, c_in * k)
    out_data = (unfolded @ w_flat.T + bias.data).transpose(0, 2, 1)

    def backward(g):
        g_bt = np.ascontiguousarray(g.transpose(0, 2, 1))  # (b, t, c_out)
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))
        if weight.requires_grad:
            gw = g_bt.reshape(-1, c_out).T @ unfolded.reshape(-1, c_in * k)
            weight._accumulate(gw.reshape(c_out, c_in, k))
        if x.requires_grad:
            # Gradient wrt input is the same-conv of g with the kernel
            # flipped along k and transposed in its channel axes.
            w_rot = weight.data[:, :, ::-1].transpose(1, 0, 2)  # (c_in, c_out, k)
            g_unf = _unfold(g)  # (b, t, c_out*k)
            gx = g_unf @ w_rot.reshape(c_in, c_out * k).T
            x._accumulate(np.ascontiguousarray(gx.transpose(0, 2, 1)))

    return Tensor._make(out_data, (x, weight, bias), backward)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.99,
    eps: float = 1e-5,
) -> Tensor:
    """Batch normalisation over a (batch, channels, t) tensor, per channel.

    In training mode the batch statistics are used and folded into the
    running averages in place; in eval mode the running averages are used
    and nothing is updated.
    """
    dt = x.data.dtype
    if training:
        mean = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean = running_mean.astype(dt, copy=False)
        var = running_var.astype(dt, copy=False)
    inv_std = 1.0 / np.sqrt(var + dt.type(eps))
    x_hat = (x.data - mean[:, None]) * inv_std[:, None]
    out_data = gamma.data[:, None] * x_hat + beta.data[:, None]

    def backward(g):
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=(0, 2)))
        if gamma.requires_grad:
            gamma._accumulate((g * x_hat).sum(axis=(0, 2)))
        if x.requires_grad:
            gxh = g * gamma.data[:, None]
            if training:
                m = x.data.shape[0] * x.data.shape[2]
                sum_gxh = gxh.sum(axis=(0, 2), keepdims=True)
                sum_gxh_xhat = (gxh * x_hat).sum(axis=(0, 2), keepdims=True)
                gx = (inv_std[:, None] / m) * (m * gxh - sum_gxh - x_hat * sum_gxh_xhat)
            else:
                gx = gxh * inv_std[:, None]
            x._accumulate(gx)

    return Tensor._make(out_data, (x, gamma, beta), backward)
