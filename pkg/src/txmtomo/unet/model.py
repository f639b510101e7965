"""Modified U-Net for artifact prediction.

Encoder levels apply two conv blocks (3x3 zero-padded conv -> ReLU -> BN ->
SE) and 2x2 max pooling; the decoder mirrors them with bilinear up-sampling
followed by a 2x2 convolution (checkerboard-free), concatenating the
matching encoder features before each pair of conv blocks. A final 1x1
convolution, zero-initialized so an untrained network predicts a zero
artifact, maps to the single-channel output without any activation. The
network regresses the artifact image; the reconstruction is the input minus
the predicted artifact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..phantom import Slice
from .layers import BilinearUpsample2, Conv2d, ConvBlock, MaxPool2


@dataclass(frozen=True)
class UNetConfig:
    depth: int = 3
    base_channels: int = 8
    se_reduction: int = 8
    input_size: int = 64

    def __post_init__(self):
        if self.depth < 1 or self.base_channels < 1:
            raise ValueError("depth and base_channels must be >= 1")
        if self.input_size % (2 ** self.depth) != 0:
            raise ValueError(
                f"input_size {self.input_size} not divisible by 2^depth "
                f"({2 ** self.depth})")


@dataclass(frozen=True)
class NormalizationSpec:
    """Intensity scale mapping images into the [-1, 1] training range."""

    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("normalization scale must be positive")


class UNet:
    def __init__(self, config: UNetConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config.base_channels
        r = config.se_reduction
        self.enc_blocks = []
        self.pools = []
        in_ch = 1
        for level in range(config.depth):
            out_ch = c * 2 ** level
            self.enc_blocks.append([
                ConvBlock(in_ch, out_ch, r, rng, f"enc{level}a"),
                ConvBlock(out_ch, out_ch, r, rng, f"enc{level}b")])
            self.pools.append(MaxPool2())
            in_ch = out_ch
        bottom = c * 2 ** config.depth
        self.bottleneck = [ConvBlock(in_ch, bottom, r, rng, "bott_a"),
                           ConvBlock(bottom, bottom, r, rng, "bott_b")]
        self.upsamples = []
        self.up_convs = []
        self.dec_blocks = []
        for level in reversed(range(config.depth)):
            skip_ch = c * 2 ** level
            self.upsamples.append(BilinearUpsample2())
            self.up_convs.append(Conv2d(skip_ch * 2, skip_ch, 2, rng,
                                        name=f"up{level}"))
            self.dec_blocks.append([
                ConvBlock(skip_ch * 2, skip_ch, r, rng, f"dec{level}a"),
                ConvBlock(skip_ch, skip_ch, r, rng, f"dec{level}b")])
        self.out_conv = Conv2d(c, 1, 1, zero_init=True, name="out")
        self._recorded = False

    def _layers(self):
        for blocks in self.enc_blocks:
            yield from blocks
        yield from self.bottleneck
        for conv, blocks in zip(self.up_convs, self.dec_blocks):
            yield conv
            yield from blocks
        yield self.out_conv

    def parameters(self):
        params = []
        for layer in self._layers():
            params.extend(layer.parameters())
        return params

    def buffers(self):
        bufs = []
        for layer in self._layers():
            bufs.extend(layer.buffers())
        return bufs

    def zero_grad(self):
        for _, p in self.parameters():
            p.grad[...] = 0.0

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """(batch, 1, s, s) normalized input -> same-shape artifact prediction."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError("input must have shape (batch, 1, height, width)")
        if (x.shape[2] % (2 ** self.config.depth)
                or x.shape[3] % (2 ** self.config.depth)):
            raise ValueError("input size must be divisible by 2^depth")
        skips = []
        for blocks, pool in zip(self.enc_blocks, self.pools):
            for b in blocks:
                x = b.forward(x, train)
            skips.append(x)
            x = pool.forward(x, train)
        for b in self.bottleneck:
            x = b.forward(x, train)
        for up, conv, blocks, skip in zip(self.upsamples, self.up_convs,
                                          self.dec_blocks, reversed(skips)):
            x = up.forward(x, train)
            x = conv.forward(x, train)
            x = np.concatenate([skip, x], axis=1)
            for b in blocks:
                x = b.forward(x, train)
        x = self.out_conv.forward(x, train)
        self._recorded = train
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Propagate d(loss)/d(output) back, accumulating parameter grads."""
        if not self._recorded:
            raise RuntimeError("backward called without a recorded train-mode forward")
        self._recorded = False
        g = self.out_conv.backward(np.asarray(grad_out, dtype=float))
        skip_grads = []
        for up, conv, blocks in zip(reversed(self.upsamples),
                                    reversed(self.up_convs),
                                    reversed(self.dec_blocks)):
            for b in reversed(blocks):
                g = b.backward(g)
            half = g.shape[1] // 2  # concat order was [skip, upsampled]
            skip_grads.append(g[:, :half])
            g = conv.backward(g[:, half:])
            g = up.backward(g)
        for b in reversed(self.bottleneck):
            g = b.backward(g)
        for blocks, pool, sg in zip(reversed(self.enc_blocks),
                                    reversed(self.pools), reversed(skip_grads)):
            g = pool.backward(g)
            g = g + sg
            for b in reversed(blocks):
                g = b.backward(g)
        return g


def infer(slc: Slice, model: UNet, norm: NormalizationSpec) -> Slice:
    """Subtract the predicted artifact from a reconstruction slice.

    The slice is scaled by 1/norm.scale, run through the network in eval
    mode, and the prediction is scaled back before subtraction. With
    all-zero output-layer weights this is exactly the identity.
    """
    x = slc.data[None, None, :, :] / norm.scale
    artifact = model.forward(x, train=False)[0, 0] * norm.scale
    return Slice(width=slc.width, height=slc.height,
                 pixel_size=slc.pixel_size, data=slc.data - artifact)
