"""MAT-file reading for both encodings the benchmark ships in.

Legacy (v5/v7) files go through scipy.io; v7.3 files are HDF5 and go
through h5py, transposing back from MATLAB's column-major dimension order.
"""
from __future__ import annotations

from pathlib import Path

import h5py
import numpy as np
import scipy.io

HDF5_MAGIC = b"\x89HDF\r\n\x1a\n"


class MatReadError(Exception):
    pass


def is_hdf5(path: str | Path) -> bool:
    with open(path, "rb") as fh:
        head = fh.read(len(HDF5_MAGIC))
    # v7.3 MAT-files put the HDF5 superblock at a 512-byte offset
    if head == HDF5_MAGIC:
        return True
    with open(path, "rb") as fh:
        fh.seek(512)
        return fh.read(len(HDF5_MAGIC)) == HDF5_MAGIC


def read_epoch_array(path: str | Path, data_key: str = "data") -> np.ndarray:
    """Read the [channels x samples x conditions x blocks] epoch array."""
    path = Path(path)
    if not path.exists():
        raise MatReadError(f"missing file {path}")
    try:
        if is_hdf5(path):
            with h5py.File(path, "r") as fh:
                if data_key not in fh:
                    raise MatReadError(f"{path.name}: no variable {data_key!r}")
                arr = np.asarray(fh[data_key])
            arr = arr.T  # MATLAB column-major storage reverses the axes
        else:
            mat = scipy.io.loadmat(path, variable_names=[data_key])
            if data_key not in mat:
                raise MatReadError(f"{path.name}: no variable {data_key!r}")
            arr = np.asarray(mat[data_key])
    except MatReadError:
        raise
    except Exception as exc:
        raise MatReadError(f"{path.name}: unreadable MAT-file ({exc})") from exc
    if arr.ndim != 4:
        raise MatReadError(
            f"{path.name}: expected a 4-D [channels x samples x conditions x blocks] "
            f"array, got shape {arr.shape}"
        )
    return arr
