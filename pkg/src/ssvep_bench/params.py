"""Named-tensor parameter store with per-tensor freeze flags.

Values live in float64 for training; the on-disk container ("SSVT",
version 1) stores each tensor as little-endian float32, so files written
from loaded parameters round-trip byte-exactly:

    magic "SSVT" | u8 version | u32 n_tensors
    | per tensor: u16 name_len + UTF-8 name | u8 ndim | u32 dims... | f32 data

Freeze flags and momentum buffers are runtime state and are not serialized.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from . import binio

SSVT_MAGIC = b"SSVT"
SSVT_VERSION = 1


@dataclass
class ParamTensor:
    value: np.ndarray
    frozen: bool = False
    momentum: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.momentum is None:
            self.momentum = np.zeros_like(self.value)

    def copy(self) -> "ParamTensor":
        return ParamTensor(self.value.copy(), self.frozen, self.momentum.copy())


class ModelParams:
    """Ordered mapping of tensor name to ParamTensor."""

    def __init__(self, tensors: dict[str, ParamTensor] | None = None):
        self._tensors: dict[str, ParamTensor] = dict(tensors) if tensors else {}

    def add(self, name: str, value: np.ndarray, frozen: bool = False) -> None:
        if name in self._tensors:
            raise ValueError(f"duplicate tensor name {name!r}")
        self._tensors[name] = ParamTensor(value, frozen=frozen)

    def __getitem__(self, name: str) -> ParamTensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self) -> Iterable[tuple[str, ParamTensor]]:
        return self._tensors.items()

    def copy(self) -> "ModelParams":
        return ModelParams({name: t.copy() for name, t in self._tensors.items()})

    def set_frozen(self, names: Iterable[str] | Callable[[str], bool], frozen: bool = True) -> None:
        """Freeze or unfreeze tensors by name list or name predicate."""
        if callable(names):
            selected = [n for n in self._tensors if names(n)]
        else:
            selected = list(names)
        for n in selected:
            if n not in self._tensors:
                raise KeyError(f"unknown tensor {n!r}")
            self._tensors[n].frozen = frozen

    def frozen_names(self) -> list[str]:
        return [n for n, t in self._tensors.items() if t.frozen]

    def n_values(self) -> int:
        return sum(t.value.size for t in self._tensors.values())


def params_to_bytes(params: ModelParams) -> bytes:
    parts = [SSVT_MAGIC, binio.pack_u8(SSVT_VERSION), binio.pack_u32(len(params))]
    for name, tensor in params.items():
        parts.append(binio.pack_utf8(name))
        parts.append(binio.pack_u8(tensor.value.ndim))
        for d in tensor.value.shape:
            parts.append(binio.pack_u32(d))
        parts.append(binio.pack_f32_array(tensor.value))
    return b"".join(parts)


def params_from_bytes(data: bytes) -> ModelParams:
    r = binio.ByteReader(data)
    r.expect_magic(SSVT_MAGIC)
    r.expect_version(SSVT_VERSION)
    n_tensors = r.u32()
    params = ModelParams()
    for _ in range(n_tensors):
        name = r.utf8()
        ndim = r.u8()
        shape = tuple(r.u32() for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        value = r.f32_array(count).reshape(shape)
        params.add(name, value)
    return params


def save_params(params: ModelParams, path: str | Path) -> None:
    Path(path).write_bytes(params_to_bytes(params))


def load_params(path: str | Path) -> ModelParams:
    return params_from_bytes(Path(path).read_bytes())
