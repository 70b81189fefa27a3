import h5py
import numpy as np
import pytest
import scipy.io

from ssvep_convert.layout import BenchmarkLayout

REDUCED_CHANNELS = ("Pz", "PO5", "PO3", "POz", "PO4", "PO6", "O1", "Oz", "O2", "Cz")


@pytest.fixture
def reduced_layout():
    """Small layout for fast fixtures: 10 channels, 2 conditions, 50-sample cue."""
    return BenchmarkLayout(
        channel_names=REDUCED_CHANNELS,
        frequency_conditions={12.0: 0, 15.0: 1},
        samples_per_trial=1250,
        trim_offset_samples=50,
    )


def make_epochs(subject_id, n_channels=10, n_samples=1300, n_conditions=2, n_blocks=6):
    """Deterministic epoch array [channels x samples x conditions x blocks]."""
    rng = np.random.default_rng(1000 + subject_id)
    return rng.standard_normal((n_channels, n_samples, n_conditions, n_blocks)).astype(
        np.float32
    )


def write_mat_v5(path, arr, key="data"):
    scipy.io.savemat(path, {key: arr})


def write_mat_hdf5(path, arr, key="data"):
    # v7.3 files are HDF5 with MATLAB's column-major axis order
    with h5py.File(path, "w") as fh:
        fh.create_dataset(key, data=np.asarray(arr).T)


def write_subject_dir(tmp_path, subject_ids, writer=write_mat_v5, **epoch_kwargs):
    for sid in subject_ids:
        writer(tmp_path / f"S{sid}.mat", make_epochs(sid, **epoch_kwargs))
    return tmp_path
