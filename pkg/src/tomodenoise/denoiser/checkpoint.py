"""Binary model checkpoints with a JSON sidecar manifest.

Layout (all integers little-endian):

    magic       8 bytes  b"TDNZCKP1"
    version     u32      format version, currently 1
    arch        u32      0 transformer, 1 cnn2, 2 cnn4
    d           u32      state dimension
    kernels     u32      K (transformer) or channel count (CNN)
    width       u32      kernel width (transformer conv / CNN hidden)
    heads       u32      attention heads (0 for CNN)
    head_dim    u32      per-head width (0 for CNN)
    n_layers    u32      CNN conv layers (0 for transformer)
    layer dims  3*u32 each (c_out, c_in, width), CNN only
    n_blocks    u64
    blocks      u64 element count + raw little-endian float64 data,
                one block per tensor in tree order

The sidecar `<path>.manifest.json` records the same geometry in text plus
optional training config and metrics.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import MissingModelError
from .network import Architecture, CnnParams, NetworkParams, TransformerParams, tree

MAGIC = b"TDNZCKP1"
VERSION = 1

_ARCH_CODE = {
    Architecture.TRANSFORMER: 0,
    Architecture.CNN2: 1,
    Architecture.CNN4: 2,
}
_CODE_ARCH = {v: k for k, v in _ARCH_CODE.items()}


def save_checkpoint(
    path, params: NetworkParams, manifest_extra: dict | None = None
) -> None:
    """Write the binary checkpoint and its JSON manifest sidecar."""
    path = Path(path)
    blocks = tree(params)
    if isinstance(params, TransformerParams):
        geo = (params.kernels, params.kernel_width, params.heads, params.head_dim, 0)
        layer_dims = []
    else:
        hidden = params.weights[0].shape[0]
        width = params.weights[-1].shape[2] if len(params.weights) == 2 else params.weights[1].shape[2]
        geo = (hidden, width, 0, 0, len(params.weights))
        layer_dims = [W.shape for W in params.weights]

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIIIIII", VERSION, _ARCH_CODE[params.arch],
                             params.dim, *geo))
        for shape in layer_dims:
            fh.write(struct.pack("<III", *shape))
        fh.write(struct.pack("<Q", len(blocks)))
        for _, arr in blocks:
            fh.write(struct.pack("<Q", arr.size))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    manifest = {
        "format_version": VERSION,
        "architecture": params.arch.value,
        "dim": params.dim,
        "parameter_count": sum(arr.size for _, arr in blocks),
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in blocks],
    }
    if isinstance(params, TransformerParams):
        manifest["geometry"] = {
            "kernels": params.kernels, "kernel_width": params.kernel_width,
            "heads": params.heads, "head_dim": params.head_dim,
        }
    else:
        manifest["geometry"] = {"layers": [list(s) for s in layer_dims]}
    if manifest_extra:
        manifest.update(manifest_extra)
    Path(str(path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def load_checkpoint(path) -> NetworkParams:
    """Read a checkpoint written by save_checkpoint."""
    path = Path(path)
    if not path.exists():
        raise MissingModelError(f"no checkpoint at {path}")
    try:
        raw = path.read_bytes()
        off = 0

        def take(fmt: str):
            nonlocal off
            size = struct.calcsize(fmt)
            vals = struct.unpack_from(fmt, raw, off)
            off += size
            return vals

        if raw[:8] != MAGIC:
            raise ValueError("bad magic")
        off = 8
        version, arch_code, d, kernels, width, heads, head_dim, n_layers = take("<IIIIIIII")
        if version != VERSION:
            raise ValueError(f"unsupported version {version}")
        arch = _CODE_ARCH[arch_code]
        layer_dims = [take("<III") for _ in range(n_layers)]
        (n_blocks,) = take("<Q")
        blocks = []
        for _ in range(n_blocks):
            (count,) = take("<Q")
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy()
            off += 8 * count
            blocks.append(arr)
    except (struct.error, ValueError, KeyError, IndexError) as exc:
        raise MissingModelError(f"checkpoint {path} failed to parse: {exc}") from exc

    D = d * d
    if arch is Architecture.TRANSFORMER:
        K, w, h = kernels, width, heads
        shapes = [
            (K, 1, w), (K,), (h, D, head_dim), (h, D, head_dim),
            (h, D, head_dim), (h, head_dim, D), (1, K, w), (1,), (D, D), (D,),
        ]
        tensors = _shape_blocks(path, blocks, shapes)
        return TransformerParams(
            dim=d, heads=h, head_dim=head_dim,
            conv_in_w=tensors[0], conv_in_b=tensors[1],
            wq=tensors[2], wk=tensors[3], wv=tensors[4], wo=tensors[5],
            conv_out_w=tensors[6], conv_out_b=tensors[7],
            lin_w=tensors[8], lin_b=tensors[9],
        )

    shapes = []
    for c_out, c_in, w in layer_dims:
        shapes.append((c_out, c_in, w))
        shapes.append((c_out,))
    tensors = _shape_blocks(path, blocks, shapes)
    return CnnParams(
        dim=d, variant=arch,
        weights=tensors[0::2], biases=tensors[1::2],
    )


def _shape_blocks(path, blocks: list, shapes: list) -> list:
    if len(blocks) != len(shapes):
        raise MissingModelError(
            f"checkpoint {path}: expected {len(shapes)} tensors, found {len(blocks)}"
        )
    out = []
    for arr, shape in zip(blocks, shapes):
        if arr.size != int(np.prod(shape)):
            raise MissingModelError(
                f"checkpoint {path}: tensor size {arr.size} does not fit shape {shape}"
            )
        out.append(arr.reshape(shape))
    return out
