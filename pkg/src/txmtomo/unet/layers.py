"""Network building blocks with explicit forward/backward passes.

Every layer caches the intermediates it needs when called with train=True
and consumes them in backward(), accumulating parameter gradients into
Parameter.grad. All arithmetic is float64 so analytic gradients can be
checked against central finite differences to tight tolerances.
"""

from __future__ import annotations

import numpy as np


class Parameter:
    """Trainable tensor with a gradient buffer.

    decay marks whether the weight-decay term applies (convolution and SE
    weights yes, biases and batch-norm parameters no).
    """

    def __init__(self, data: np.ndarray, decay: bool = True):
        self.data = np.asarray(data, dtype=float)
        self.grad = np.zeros_like(self.data)
        self.decay = decay


class Layer:
    """Base: parameters() yields (name, Parameter); buffers() non-trainable state."""

    def parameters(self):
        return []

    def buffers(self):
        return []

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _im2col(x, kh, kw, pad_before, pad_after):
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + pad_before + pad_after, w + pad_before + pad_after))
    xp[:, :, pad_before:pad_before + h, pad_before:pad_before + w] = x
    cols = np.empty((n, c, kh * kw, h * w))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i * kw + j] = xp[:, :, i:i + h, j:j + w].reshape(n, c, h * w)
    return cols.reshape(n, c * kh * kw, h * w)


def _col2im(cols, shape, kh, kw, pad_before, pad_after):
    n, c, h, w = shape
    xp = np.zeros((n, c, h + pad_before + pad_after, w + pad_before + pad_after))
    cols = cols.reshape(n, c, kh, kw, h, w)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + h, j:j + w] += cols[:, :, i, j]
    return xp[:, :, pad_before:pad_before + h, pad_before:pad_before + w]


class Conv2d(Layer):
    """Zero-padded convolution preserving spatial size.

    Padding is (k-1)//2 before and k-1-(k-1)//2 after, so odd kernels pad
    symmetrically and the 2x2 decoder kernel pads one row/column at the
    bottom-right.
    """

    def __init__(self, in_channels, out_channels, kernel_size, rng=None,
                 zero_init=False, name="conv"):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.pad_before = (kernel_size - 1) // 2
        self.pad_after = kernel_size - 1 - self.pad_before
        self.name = name
        fan_in = in_channels * kernel_size * kernel_size
        if zero_init:
            w = np.zeros((out_channels, in_channels, kernel_size, kernel_size))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in),
                           size=(out_channels, in_channels, kernel_size, kernel_size))
        self.weight = Parameter(w, decay=True)
        self.bias = Parameter(np.zeros(out_channels), decay=False)
        self._cache = None

    def parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def forward(self, x, train):
        if x.shape[1] != self.in_channels:
            raise ValueError(f"{self.name}: expected {self.in_channels} channels, "
                             f"got {x.shape[1]}")
        n, _, h, w = x.shape
        k = self.kernel_size
        cols = _im2col(x, k, k, self.pad_before, self.pad_after)
        wflat = self.weight.data.reshape(self.out_channels, -1)
        out = np.matmul(wflat, cols) + self.bias.data[None, :, None]
        if train:
            self._cache = (cols, x.shape)
        return out.reshape(n, self.out_channels, h, w)

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward without recorded forward")
        cols, x_shape = self._cache
        self._cache = None
        n, _, h, w = x_shape
        k = self.kernel_size
        gflat = grad_out.reshape(n, self.out_channels, h * w)
        self.weight.grad += np.matmul(gflat, cols.transpose(0, 2, 1)).sum(axis=0).reshape(
            self.weight.data.shape)
        self.bias.grad += grad_out.sum(axis=(0, 2, 3))
        wflat = self.weight.data.reshape(self.out_channels, -1)
        dcols = np.matmul(wflat.T, gflat)
        return _col2im(dcols, x_shape, k, k, self.pad_before, self.pad_after)


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, train):
        out = np.maximum(x, 0.0)
        if train:
            self._mask = x > 0.0
        return out

    def backward(self, grad_out):
        if self._mask is None:
            raise RuntimeError("relu: backward without recorded forward")
        mask, self._mask = self._mask, None
        return grad_out * mask


class BatchNorm2d(Layer):
    """Per-channel normalization over batch and spatial dims.

    Train mode normalizes with the biased batch variance and updates the
    running statistics by exponential moving average; eval mode is a fixed
    affine map using the running statistics. Needs at least two
    normalization samples (batch * height * width) per channel.
    """

    def __init__(self, channels, eps=1e-5, momentum=0.1, name="bn"):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.name = name
        self.gamma = Parameter(np.ones(channels), decay=False)
        self.beta = Parameter(np.zeros(channels), decay=False)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._cache = None

    def parameters(self):
        return [(f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]

    def buffers(self):
        return [(f"{self.name}.running_mean", self.running_mean),
                (f"{self.name}.running_var", self.running_var)]

    def forward(self, x, train):
        if x.shape[1] != self.channels:
            raise ValueError(f"{self.name}: channel mismatch")
        if train:
            n, _, h, w = x.shape
            if n * h * w < 2:
                raise ValueError(f"{self.name}: need >= 2 samples per channel "
                                 "in train mode")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        if train:
            self._cache = (xhat, inv_std, x - mean[None, :, None, None])
        return self.gamma.data[None, :, None, None] * xhat + self.beta.data[None, :, None, None]

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward without recorded forward")
        xhat, inv_std, xm = self._cache
        self._cache = None
        m = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]
        self.gamma.grad += (grad_out * xhat).sum(axis=(0, 2, 3))
        self.beta.grad += grad_out.sum(axis=(0, 2, 3))
        dxhat = grad_out * self.gamma.data[None, :, None, None]
        ivs = inv_std[None, :, None, None]
        dvar = (dxhat * xm).sum(axis=(0, 2, 3)) * (-0.5) * inv_std ** 3
        dmean = (-(dxhat * ivs).sum(axis=(0, 2, 3))
                 + dvar * (-2.0 / m) * xm.sum(axis=(0, 2, 3)))
        return (dxhat * ivs
                + dvar[None, :, None, None] * 2.0 * xm / m
                + dmean[None, :, None, None] / m)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class SEBlock(Layer):
    """Squeeze-and-excitation channel gating.

    Global average pooling squeezes each channel to a descriptor; a two-layer
    bottleneck (reduction ratio r) with ReLU then sigmoid produces per-channel
    gates in (0, 1) that rescale the input.
    """

    def __init__(self, channels, reduction, rng, name="se"):
        if channels % reduction != 0:
            raise ValueError(f"{self.__class__.__name__}: channels ({channels}) "
                             f"not divisible by reduction ({reduction})")
        reduced = channels // reduction
        self.channels = channels
        self.name = name
        self.w1 = Parameter(rng.normal(0.0, np.sqrt(2.0 / channels),
                                       size=(reduced, channels)), decay=True)
        self.b1 = Parameter(np.zeros(reduced), decay=False)
        self.w2 = Parameter(rng.normal(0.0, np.sqrt(2.0 / reduced),
                                       size=(channels, reduced)), decay=True)
        self.b2 = Parameter(np.zeros(channels), decay=False)
        self._cache = None

    def parameters(self):
        return [(f"{self.name}.w1", self.w1), (f"{self.name}.b1", self.b1),
                (f"{self.name}.w2", self.w2), (f"{self.name}.b2", self.b2)]

    def forward(self, x, train):
        if x.shape[1] != self.channels:
            raise ValueError(f"{self.name}: channel mismatch")
        s = x.mean(axis=(2, 3))                       # (n, c)
        z1 = s @ self.w1.data.T + self.b1.data        # (n, r)
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ self.w2.data.T + self.b2.data       # (n, c)
        gate = _sigmoid(z2)
        if train:
            self._cache = (x, s, z1, a1, gate)
        return x * gate[:, :, None, None]

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward without recorded forward")
        x, s, z1, a1, gate = self._cache
        self._cache = None
        h, w = x.shape[2], x.shape[3]
        dgate = (grad_out * x).sum(axis=(2, 3))
        dx = grad_out * gate[:, :, None, None]
        dz2 = dgate * gate * (1.0 - gate)
        self.w2.grad += dz2.T @ a1
        self.b2.grad += dz2.sum(axis=0)
        da1 = dz2 @ self.w2.data
        dz1 = da1 * (z1 > 0.0)
        self.w1.grad += dz1.T @ s
        self.b1.grad += dz1.sum(axis=0)
        ds = dz1 @ self.w1.data
        dx += ds[:, :, None, None] / (h * w)
        return dx


class MaxPool2(Layer):
    """2x2 max pooling; ties resolve to the first window element."""

    def __init__(self):
        self._cache = None

    def forward(self, x, train):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError("maxpool2 requires even spatial dimensions")
        win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        win = win.reshape(n, c, h // 2, w // 2, 4)
        idx = win.argmax(axis=-1)
        out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        if train:
            self._cache = (idx, x.shape)
        return out

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError("maxpool2: backward without recorded forward")
        idx, x_shape = self._cache
        self._cache = None
        n, c, h, w = x_shape
        scattered = np.zeros((n, c, h // 2, w // 2, 4))
        np.put_along_axis(scattered, idx[..., None], grad_out[..., None], axis=-1)
        return scattered.reshape(n, c, h // 2, w // 2, 2, 2).transpose(
            0, 1, 2, 4, 3, 5).reshape(n, c, h, w)


def _upsample_matrix(size: int) -> np.ndarray:
    # factor-2 bilinear resize, sample-center (align-corners-false) grid,
    # edges clamped so a constant input stays constant everywhere
    src = np.clip((np.arange(2 * size) + 0.5) / 2.0 - 0.5, 0.0, size - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, size - 1)
    frac = src - i0
    mat = np.zeros((2 * size, size))
    rows = np.arange(2 * size)
    np.add.at(mat, (rows, i0), 1.0 - frac)
    np.add.at(mat, (rows, i1), frac)
    return mat


class BilinearUpsample2(Layer):
    """Separable factor-2 bilinear up-sampling (no parameters)."""

    def __init__(self):
        self._mats = {}
        self._cache = None

    def _mat(self, size):
        if size not in self._mats:
            self._mats[size] = _upsample_matrix(size)
        return self._mats[size]

    def forward(self, x, train):
        h, w = x.shape[2], x.shape[3]
        rh, rw = self._mat(h), self._mat(w)
        out = np.matmul(np.matmul(rh, x), rw.T)
        if train:
            self._cache = (h, w)
        return out

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError("upsample: backward without recorded forward")
        h, w = self._cache
        self._cache = None
        rh, rw = self._mat(h), self._mat(w)
        return np.matmul(np.matmul(rh.T, grad_out), rw)


class ConvBlock(Layer):
    """One blue arrow: 3x3 zero-padded conv, then ReLU, BN and SE in that order."""

    def __init__(self, in_channels, out_channels, se_reduction, rng, name):
        self.conv = Conv2d(in_channels, out_channels, 3, rng, name=f"{name}.conv")
        self.relu = ReLU()
        self.bn = BatchNorm2d(out_channels, name=f"{name}.bn")
        self.se = SEBlock(out_channels, min(se_reduction, out_channels), rng,
                          name=f"{name}.se")

    def parameters(self):
        return (self.conv.parameters() + self.bn.parameters()
                + self.se.parameters())

    def buffers(self):
        return self.bn.buffers()

    def forward(self, x, train):
        x = self.conv.forward(x, train)
        x = self.relu.forward(x, train)
        x = self.bn.forward(x, train)
        return self.se.forward(x, train)

    def backward(self, grad_out):
        grad_out = self.se.backward(grad_out)
        grad_out = self.bn.backward(grad_out)
        grad_out = self.relu.backward(grad_out)
        return self.conv.backward(grad_out)
