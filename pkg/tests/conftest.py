import numpy as np
import pytest

from ssvep_bench.synth import generate_store


@pytest.fixture(scope="session")
def small_store():
    """3 subjects x 2 frequencies x 6 trials at a workable SNR."""
    return generate_store(n_subjects=3, trials_per_freq=6, snr_db=5.0, seed=11)


@pytest.fixture(scope="session")
def clean_store():
    """Noiseless 2-subject store for exact classification checks."""
    return generate_store(n_subjects=2, trials_per_freq=6, snr_db=np.inf, seed=4)
