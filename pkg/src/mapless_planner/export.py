"""Checkpoint files for networks.

Network file layout (version 1, all integers little-endian):

    magic      4 bytes   b"MLPN"
    version    uint32    1
    hlen       uint32    length of the header in bytes
    header     hlen      UTF-8 JSON: {"layers": [{"in", "out", "act"}...],
                         "merge_point", "aux_width"} with sorted keys
    params     float64   W then b for every layer in order, row-major, little-endian
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path

import numpy as np

from mapless_planner.constants import NETWORK_FORMAT_VERSION, NETWORK_MAGIC, NETWORK_SUFFIX
from mapless_planner.tensor_nn import Layer, Mlp, ShapeError

logger = logging.getLogger(__name__)

_PREFIX = struct.Struct("<4sII")


class CheckpointError(ValueError):
    """A checkpoint file is missing, truncated or of an unknown format."""


def network_to_bytes(net: Mlp) -> bytes:
    """Serialize a network to the versioned binary layout."""
    header = json.dumps(net.describe(), sort_keys=True).encode("utf-8")
    body = b"".join(p.astype("<f8").tobytes(order="C") for p in net.params())
    return _PREFIX.pack(NETWORK_MAGIC, NETWORK_FORMAT_VERSION, len(header)) + header + body


def network_from_bytes(data: bytes) -> Mlp:
    """Parse bytes produced by :func:`network_to_bytes`."""
    if len(data) < _PREFIX.size:
        raise CheckpointError("truncated network file")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != NETWORK_MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != NETWORK_FORMAT_VERSION:
        raise CheckpointError(f"unsupported network format version {version}")
    try:
        header = json.loads(data[_PREFIX.size : _PREFIX.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError("corrupt network header") from exc
    if not isinstance(header, dict) or not {"layers", "merge_point", "aux_width"} <= header.keys():
        raise CheckpointError("network header is missing fields")

    offset = _PREFIX.size + hlen
    layers = []
    try:
        for spec in header["layers"]:
            n_out, n_in = int(spec["out"]), int(spec["in"])
            if n_out < 1 or n_in < 1:
                raise CheckpointError("corrupt network header: non-positive layer width")
            n_w = n_out * n_in
            end = offset + 8 * (n_w + n_out)
            if end > len(data):
                raise CheckpointError("truncated network parameters")
            flat = np.frombuffer(data, dtype="<f8", count=n_w + n_out, offset=offset)
            weights = flat[:n_w].reshape(n_out, n_in).astype(np.float64)
            b = flat[n_w:].astype(np.float64)
            layers.append(Layer(weights, b, spec["act"]))
            offset = end
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupt network header: {exc!r}") from exc
    if offset != len(data):
        raise CheckpointError("trailing bytes after network parameters")
    try:
        return Mlp(layers, merge_point=header["merge_point"], aux_width=header["aux_width"])
    except (ShapeError, TypeError, ValueError) as exc:
        raise CheckpointError(f"inconsistent network header: {exc}") from exc


def export_network(net: Mlp, filename: str | Path) -> Path:
    """
    Write a network checkpoint.

    Args:
        net: Network to save
        filename: Target path; ``.mlp`` is appended if the suffix is missing

    Returns:
        Path to the written file
    """
    filepath = Path(filename)
    if filepath.suffix.lower() != NETWORK_SUFFIX:
        filepath = filepath.with_suffix(NETWORK_SUFFIX)

    filepath.write_bytes(network_to_bytes(net))
    logger.debug("Wrote network checkpoint %s", filepath)
    return filepath


def load_network(filename: str | Path) -> Mlp:
    """Read a network checkpoint written by :func:`export_network`."""
    filepath = Path(filename)
    try:
        data = filepath.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {filepath}: {exc}") from exc
    return network_from_bytes(data)
