"""MAT-to-SSVB converter for the public 35-subject SSVEP benchmark."""

from .convert import convert_directory, discover_subjects, extract_subject_trials
from .layout import BENCHMARK_CHANNELS, BenchmarkLayout, load_layout
from .matread import MatReadError, read_epoch_array
from .ssvb import TrialRecord, store_bytes, write_store

__version__ = "0.1.0"
