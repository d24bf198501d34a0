"""Weight storage, deterministic initialization and the binary weight file.

File layout (all integers little-endian, no padding)::

    "YMUW" | u32 version=1 | u32 tensor_count | u32 num_classes
    per tensor: u16 name_len | name (utf-8) | u8 rank | rank x u32 dims | f32 payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional

import numpy as np

from .graph import ModelGraph, tensor_specs

MAGIC = b"YMUW"
VERSION = 1
HEADER = struct.Struct("<4sIII")


class WeightFormatError(ValueError):
    """Malformed, truncated or mismatched weight file."""


@dataclass
class WeightStore:
    num_classes: int
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.num_classes != other.num_classes or list(self.tensors) != list(other.tensors):
            return False
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.tensors.values(), other.tensors.values())
        )

    def validate(self, graph: ModelGraph) -> None:
        """Raise WeightFormatError unless every graph tensor is present with the right shape."""
        if self.num_classes != graph.num_classes:
            raise WeightFormatError(
                f"weights are for {self.num_classes} classes, graph has {graph.num_classes}"
            )
        for spec in tensor_specs(graph):
            t = self.tensors.get(spec.name)
            if t is None:
                raise WeightFormatError(f"missing tensor {spec.name}")
            if tuple(t.shape) != spec.shape:
                raise WeightFormatError(f"{spec.name}: shape {t.shape}, graph expects {spec.shape}")


def init_weights(graph: ModelGraph, seed: int = 0) -> WeightStore:
    """Uniform(+-1/sqrt(fan_in)) conv weights and biases; identity batch norm.

    Tensors are drawn in graph order from one generator, so the store is a
    pure function of (graph, seed).
    """
    rng = np.random.default_rng(seed)
    store = WeightStore(graph.num_classes)
    fan_in = 1
    for spec in tensor_specs(graph):
        role = spec.name.rsplit(".", 1)[-1]
        if spec.name.endswith("dfl.weight"):
            arr = np.arange(graph.reg_max, dtype=np.float32).reshape(spec.shape)
        elif role == "weight":
            fan_in = spec.shape[1] * spec.shape[2] * spec.shape[3]
            bound = 1.0 / np.sqrt(fan_in)
            arr = rng.uniform(-bound, bound, spec.shape).astype(np.float32)
        elif role == "bias":
            # bias follows its conv weight, so fan_in is still current
            bound = 1.0 / np.sqrt(fan_in)
            arr = rng.uniform(-bound, bound, spec.shape).astype(np.float32)
        elif role in ("gamma", "var"):
            arr = np.ones(spec.shape, dtype=np.float32)
        else:
            arr = np.zeros(spec.shape, dtype=np.float32)
        store.tensors[spec.name] = arr
    return store


def expected_file_size(store: WeightStore) -> int:
    size = HEADER.size
    for name, t in store.tensors.items():
        size += 2 + len(name.encode("utf-8")) + 1 + 4 * t.ndim + 4 * t.size
    return size


def save_weights(store: WeightStore, path) -> None:
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, VERSION, len(store.tensors), store.num_classes))
        for name, t in store.tensors.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", t.ndim))
            f.write(struct.pack(f"<{t.ndim}I", *t.shape))
            f.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_weights(path, graph: Optional[ModelGraph] = None) -> WeightStore:
    """Read a weight file; if ``graph`` is given the store is validated against it."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < HEADER.size:
        raise WeightFormatError("truncated header")
    magic, version, count, num_classes = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version}")
    pos = HEADER.size
    store = WeightStore(num_classes)

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise WeightFormatError("truncated tensor record")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(dims, dtype=np.int64))
        arr = np.frombuffer(take(4 * n), dtype="<f4").astype(np.float32).reshape(dims)
        store.tensors[name] = arr
    if pos != len(data):
        raise WeightFormatError(f"{len(data) - pos} trailing bytes")
    if graph is not None:
        store.validate(graph)
    return store
