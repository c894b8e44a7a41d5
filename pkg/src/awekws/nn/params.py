"""Named parameter storage, seeded initialization, and checkpoint files.

Checkpoint layout: an ASCII format tag line, a JSON header line carrying the
dtype, optional metadata, and the (name, shape) manifest, then the raw
little-endian float payloads concatenated in manifest order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import InvalidManifest, MissingFile, NonFiniteValue, ShapeMismatch
from .tensor import Tensor

FORMAT_TAG = "AWEKWS-CKPT-1"

_DTYPES = {"f32": np.float32, "f64": np.float64}
_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}


class ParameterStore:
    """Ordered collection of named float tensors with seeded initializers."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        if self.dtype not in _DTYPE_NAMES:
            raise ValueError(f"unsupported parameter dtype {dtype}")
        self._arrays: dict[str, np.ndarray] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __len__(self) -> int:
        return len(self._arrays)

    def names(self) -> list[str]:
        return list(self._arrays)

    def get(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def set(self, name: str, value: np.ndarray) -> None:
        if name in self._arrays and self._arrays[name].shape != value.shape:
            raise ShapeMismatch(
                f"parameter {name!r}: shape fixed at {self._arrays[name].shape}, "
                f"got {value.shape}"
            )
        self._arrays[name] = np.ascontiguousarray(value, dtype=self.dtype)

    def items(self):
        return self._arrays.items()

    def add_glorot(self, name: str, shape: tuple[int, int], rng: np.random.Generator) -> None:
        """uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
        bound = np.sqrt(6.0 / (shape[0] + shape[1]))
        self.set(name, rng.uniform(-bound, bound, size=shape))

    def add_zeros(self, name: str, shape) -> None:
        self.set(name, np.zeros(shape))

    def add_ones(self, name: str, shape) -> None:
        self.set(name, np.ones(shape))

    def tensors(self, requires_grad: bool = False) -> dict[str, Tensor]:
        """Wrap every parameter as a Tensor (shared storage, no copy)."""
        return {name: Tensor(arr, requires_grad=requires_grad)
                for name, arr in self._arrays.items()}

    def copy(self) -> "ParameterStore":
        dup = ParameterStore(self.dtype)
        for name, arr in self._arrays.items():
            dup.set(name, arr.copy())
        return dup

    def astype(self, dtype) -> "ParameterStore":
        out = ParameterStore(dtype)
        for name, arr in self._arrays.items():
            out.set(name, arr)
        return out

    def check_finite(self) -> None:
        for name, arr in self._arrays.items():
            if not np.isfinite(arr).all():
                raise NonFiniteValue(f"parameter {name!r} contains non-finite values")


def save_checkpoint(store: ParameterStore, path: str | Path, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "dtype": _DTYPE_NAMES[store.dtype],
        "meta": meta or {},
        "entries": [{"name": n, "shape": list(a.shape)} for n, a in store.items()],
    }
    with open(path, "wb") as fh:
        fh.write(FORMAT_TAG.encode() + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for _, arr in store.items():
            fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path: str | Path) -> tuple[ParameterStore, dict]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        tag = fh.readline().decode().strip()
        if tag != FORMAT_TAG:
            raise InvalidManifest(f"{path}: unknown checkpoint format tag {tag!r}")
        header = json.loads(fh.readline().decode())
        dtype = _DTYPES[header["dtype"]]
        store = ParameterStore(dtype)
        itemsize = np.dtype(dtype).itemsize
        for entry in header["entries"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * itemsize)
            if len(raw) != count * itemsize:
                raise InvalidManifest(f"{path}: truncated payload for {entry['name']!r}")
            arr = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).reshape(shape)
            store.set(entry["name"], arr)
    return store, header.get("meta", {})
