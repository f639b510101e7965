"""Versioned binary checkpoint for network parameters.

Layout (all integers little-endian):
  magic    8 bytes   b"TXMUNET\\0"
  version  uint32    currently 1
  header   uint32 length + UTF-8 JSON: network config and normalization scale
  count    uint32    number of named tensors
  tensors  repeated: uint16 name length, name bytes, uint8 ndim,
           uint32 dims..., float64 little-endian payload

Tensors cover trainable parameters and batch-norm running statistics, in
the model's deterministic traversal order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .model import NormalizationSpec, UNet, UNetConfig

MAGIC = b"TXMUNET\x00"
VERSION = 1


def _named_tensors(model: UNet):
    for name, param in model.parameters():
        yield name, param.data
    for name, buf in model.buffers():
        yield name, buf


def save_checkpoint(path, model: UNet, norm: NormalizationSpec) -> None:
    cfg = model.config
    header = json.dumps({
        "depth": cfg.depth,
        "base_channels": cfg.base_channels,
        "se_reduction": cfg.se_reduction,
        "input_size": cfg.input_size,
        "norm_scale": norm.scale,
    }, sort_keys=True).encode("utf-8")
    tensors = list(_named_tensors(model))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(struct.pack("<I", len(tensors)))
        for name, data in tensors:
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            arr = np.ascontiguousarray(data, dtype="<f8")
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (UNet, NormalizationSpec)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", blob, 12)
    header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset:offset + nlen].decode("utf-8")
        offset += nlen
        (ndim,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        dims = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        size = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        tensors[name] = arr.reshape(dims).astype(float)

    config = UNetConfig(depth=header["depth"],
                        base_channels=header["base_channels"],
                        se_reduction=header["se_reduction"],
                        input_size=header["input_size"])
    model = UNet(config, seed=0)
    for name, param in model.parameters():
        if name not in tensors:
            raise ValueError(f"checkpoint missing tensor {name}")
        param.data[...] = tensors[name]
    for name, buf in model.buffers():
        if name not in tensors:
            raise ValueError(f"checkpoint missing tensor {name}")
        buf[...] = tensors[name]
    return model, NormalizationSpec(scale=header["norm_scale"])
