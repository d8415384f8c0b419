"""Inference-only PointNet global-feature extractor.

Runtime graph (batch norm folded into the linear layers beforehand)::

    points (P, 3)
      -> x @ (I + input T-net(x))
      -> mlp1: 3 -> 64 -> 64, ReLU
      -> h @ (I + feature T-net(h))
      -> mlp2: 64 -> 64 -> 128 -> 1024, ReLU
      -> max over points                      => global feature (1024,)

Each T-net is a per-point stack ``k -> 64 -> 128 -> 1024`` (ReLU), a max over
points, then ``1024 -> 512 -> 256`` (ReLU) and a linear ``256 -> k*k``.
Every dot product accumulates in ascending input index, so extraction is
bitwise reproducible and the max-pool makes it invariant to point order.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ._kernels import dense
from .errors import FileFormatError, NumericalOverflowError, WeightsCorruptError, WeightsShapeError
from .rng import Xoshiro256

FEATURE_DIM = 1024
WEIGHTS_MAGIC = b"PNETW001"
ARCHITECTURE_NAME = "pointnet-global-1024"


def _tnet_layout(prefix, k):
    return [
        (f"{prefix}.conv[0]", 64, k),
        (f"{prefix}.conv[1]", 128, 64),
        (f"{prefix}.conv[2]", 1024, 128),
        (f"{prefix}.fc[0]", 512, 1024),
        (f"{prefix}.fc[1]", 256, 512),
        (f"{prefix}.fc[2]", k * k, 256),
    ]


# (name, out_dim, in_dim) in file order.
ARCHITECTURE = (
    _tnet_layout("input_tnet", 3)
    + [("mlp1[0]", 64, 3), ("mlp1[1]", 64, 64)]
    + _tnet_layout("feature_tnet", 64)
    + [("mlp2[0]", 64, 64), ("mlp2[1]", 128, 64), ("mlp2[2]", FEATURE_DIM, 128)]
)
LAYER_NAMES = [name for name, _, _ in ARCHITECTURE]


@dataclass
class LinearLayer:
    weight: np.ndarray  # (out_dim, in_dim), float32
    bias: np.ndarray  # (out_dim,), float32

    @property
    def shape(self):
        return tuple(self.weight.shape)


@dataclass
class TNet:
    conv: list
    fc: list

    @property
    def k(self):
        return self.conv[0].weight.shape[1]


@dataclass
class PointNetWeights:
    input_tnet: TNet
    mlp1: list
    feature_tnet: TNet
    mlp2: list
    dataset: Optional[str] = None

    def layers(self):
        """``(name, LinearLayer)`` pairs in file order."""
        ordered = (
            self.input_tnet.conv + self.input_tnet.fc + self.mlp1
            + self.feature_tnet.conv + self.feature_tnet.fc + self.mlp2
        )
        return list(zip(LAYER_NAMES, ordered))

    @classmethod
    def from_layers(cls, layers: dict, dataset=None):
        for name, out_dim, in_dim in ARCHITECTURE:
            if name not in layers:
                raise WeightsShapeError(name, (out_dim, in_dim), None)
            layer = layers[name]
            if layer.weight.shape != (out_dim, in_dim):
                raise WeightsShapeError(name, (out_dim, in_dim), tuple(layer.weight.shape))
            if layer.bias.shape != (out_dim,):
                raise WeightsShapeError(name, (out_dim,), tuple(layer.bias.shape))
            if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
                raise WeightsCorruptError(name)
        get = lambda names: [layers[n] for n in names]  # noqa: E731
        return cls(
            input_tnet=TNet(get(LAYER_NAMES[0:3]), get(LAYER_NAMES[3:6])),
            mlp1=get(LAYER_NAMES[6:8]),
            feature_tnet=TNet(get(LAYER_NAMES[8:11]), get(LAYER_NAMES[11:14])),
            mlp2=get(LAYER_NAMES[14:17]),
            dataset=dataset,
        )


def zero_weights() -> PointNetWeights:
    return PointNetWeights.from_layers({
        name: LinearLayer(np.zeros((o, i), np.float32), np.zeros(o, np.float32))
        for name, o, i in ARCHITECTURE
    })


def random_weights(seed: int = 0) -> PointNetWeights:
    """Deterministic stand-in weights.

    Layers are filled in file order, weight (row-major) then bias, each entry
    uniform in ``[-sqrt(1/in_dim), sqrt(1/in_dim)]`` from one xoshiro256**
    stream, then stored as float32.
    """
    rng = Xoshiro256(seed)
    layers = {}
    for name, o, i in ARCHITECTURE:
        bound = math.sqrt(1.0 / i)
        w = rng.uniform(-bound, bound, o * i).reshape(o, i)
        b = rng.uniform(-bound, bound, o)
        layers[name] = LinearLayer(w.astype(np.float32), b.astype(np.float32))
    return PointNetWeights.from_layers(layers)


# -- file format ---------------------------------------------------------------

def encode_weights(weights: PointNetWeights) -> bytes:
    header = {
        "architecture": ARCHITECTURE_NAME,
        "dataset": weights.dataset,
        "layers": [
            {"name": name, "weight": list(layer.weight.shape), "bias": list(layer.bias.shape)}
            for name, layer in weights.layers()
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [WEIGHTS_MAGIC, struct.pack("<I", len(blob)), blob]
    for _, layer in weights.layers():
        parts.append(np.ascontiguousarray(layer.weight, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_weights(data: bytes) -> PointNetWeights:
    if data[:8] != WEIGHTS_MAGIC:
        raise FileFormatError(f"bad weights magic {data[:8]!r}")
    if len(data) < 12:
        raise FileFormatError("truncated weights header")
    (hlen,) = struct.unpack_from("<I", data, 8)
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
        entries = header["layers"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FileFormatError(f"unreadable weights header: {exc}") from None
    offset = 12 + hlen
    layers = {}
    for entry in entries:
        name = entry["name"]
        wshape = tuple(int(d) for d in entry["weight"])
        bshape = tuple(int(d) for d in entry["bias"])
        arrays = []
        for shape in (wshape, bshape):
            count = int(np.prod(shape))
            end = offset + 4 * count
            if end > len(data):
                raise FileFormatError(f"weights file truncated in layer {name!r}")
            arrays.append(np.frombuffer(data, dtype="<f4", count=count, offset=offset)
                          .reshape(shape).astype(np.float32))
            offset = end
        layers[name] = LinearLayer(*arrays)
    if offset != len(data):
        raise FileFormatError(f"{len(data) - offset} trailing bytes after weights")
    expected = [n for n, _, _ in ARCHITECTURE]
    names = [e["name"] for e in entries]
    for pos, (name, o, i) in enumerate(ARCHITECTURE):
        if pos >= len(names) or names[pos] != name:
            raise WeightsShapeError(name, (o, i), "missing or out of order")
    if len(names) != len(expected):
        raise FileFormatError(f"unexpected extra layers {names[len(expected):]}")
    return PointNetWeights.from_layers(layers, dataset=header.get("dataset"))


def save_weights(weights: PointNetWeights, path) -> None:
    Path(path).write_bytes(encode_weights(weights))


def load_weights(path) -> PointNetWeights:
    """Read and validate a PNETW001 weights file."""
    return decode_weights(Path(path).read_bytes())


# -- forward pass ----------------------------------------------------------------

def _check(x, stage):
    if not np.all(np.isfinite(x)):
        raise NumericalOverflowError(f"non-finite activations after {stage}")
    return x


def _layer(x, layer, relu):
    return dense(x, layer.weight, layer.bias, relu)


def _transform(x, tnet: TNet, stage):
    h = x
    for layer in tnet.conv:
        h = _layer(h, layer, True)
    g = h.max(axis=0, keepdims=True)
    for j, layer in enumerate(tnet.fc):
        g = _layer(g, layer, j < len(tnet.fc) - 1)
    k = tnet.k
    T = _check(g.reshape(k, k) + np.eye(k), stage)
    # x @ T as a per-point layer with weight T^T.
    return _check(dense(x, T.T, np.zeros(k), False), stage)


def extract_features(cloud, weights: PointNetWeights) -> np.ndarray:
    """1024-d global feature of a point cloud (``PointCloud`` or (P, 3) array)."""
    pts = getattr(cloud, "points", cloud)
    x = np.asarray(pts, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 3 or x.shape[0] == 0:
        raise ValueError(f"expected a nonempty (P, 3) point array, got {x.shape}")
    x = _transform(x, weights.input_tnet, "input transform")
    for layer in weights.mlp1:
        x = _layer(x, layer, True)
    x = _transform(_check(x, "mlp1"), weights.feature_tnet, "feature transform")
    for layer in weights.mlp2:
        x = _layer(x, layer, True)
    return _check(x, "mlp2").max(axis=0)
