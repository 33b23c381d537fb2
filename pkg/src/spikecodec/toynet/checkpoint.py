"""Model checkpoint file format.

Layout (all header integers big-endian, payload floats little-endian):

    magic   4 bytes  "SPKN"
    version u8       1
    n_units u32
    features u32
    hidden  u32
    kernel  u32
    n_mu    u32
    mu_sites u8      0=encoder 1=decoder 2=both
    dtype   u8       0=float32 1=float64 (training dtype; payload is f64)
    payload          every array in ToyAutoencoder.PARAM_ORDER, then
                     STATE_ORDER, as float64 little-endian C-order

Array shapes are fully determined by the header, so no per-array metadata
is stored; a size mismatch is reported as corruption.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CorruptStreamError
from .model import MU_SITES, ModelConfig, ToyAutoencoder

_MAGIC = b"SPKN"
_VERSION = 1
_HEADER = struct.Struct(">4sBIIIIIBB")
_DTYPES = ("float32", "float64")


def save_checkpoint(model: ToyAutoencoder) -> bytes:
    cfg = model.cfg
    head = _HEADER.pack(
        _MAGIC, _VERSION,
        cfg.n_units, cfg.features, cfg.hidden, cfg.kernel, cfg.n_mu,
        MU_SITES.index(cfg.mu_sites), _DTYPES.index(cfg.dtype),
    )
    chunks = [head]
    for name in model.PARAM_ORDER:
        chunks.append(getattr(model, name).data.astype("<f8").tobytes(order="C"))
    for name in model.STATE_ORDER:
        chunks.append(getattr(model, name).astype("<f8").tobytes(order="C"))
    return b"".join(chunks)


def load_checkpoint(blob: bytes) -> ToyAutoencoder:
    if len(blob) < _HEADER.size:
        raise CorruptStreamError(f"checkpoint shorter than its {_HEADER.size}-byte header")
    magic, version, n, f, h, k, n_mu, sites_i, dtype_i = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise CorruptStreamError(f"bad checkpoint magic {magic!r}")
    if version != _VERSION:
        raise CorruptStreamError(f"unsupported checkpoint version {version}")
    if sites_i >= len(MU_SITES) or dtype_i >= len(_DTYPES):
        raise CorruptStreamError("unknown mu_sites or dtype code")
    cfg = ModelConfig(
        n_units=n, features=f, hidden=h, kernel=k, n_mu=n_mu,
        mu_sites=MU_SITES[sites_i], dtype=_DTYPES[dtype_i],
    )
    model = ToyAutoencoder(cfg, seed=0)
    offset = _HEADER.size
    for name in model.PARAM_ORDER + model.STATE_ORDER:
        target = getattr(model, name)
        arr = target.data if name in model.PARAM_ORDER else target
        nbytes = arr.size * 8
        if offset + nbytes > len(blob):
            raise CorruptStreamError(f"checkpoint truncated inside {name}")
        values = np.frombuffer(blob, dtype="<f8", count=arr.size, offset=offset).reshape(arr.shape)
        arr[...] = values.astype(arr.dtype)
        offset += nbytes
    if offset != len(blob):
        raise CorruptStreamError(f"{len(blob) - offset} trailing bytes after checkpoint payload")
    return model
