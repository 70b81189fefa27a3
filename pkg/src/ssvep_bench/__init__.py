"""Single-channel SSVEP classification benchmark.

Library + CLI implementing a spectrogram preprocessing pipeline, enumerated
mask augmentation, a filter bank CCA classifier, a linear SVM, a
from-scratch convolutional network with transfer mechanics, and a
leave-one-subject-out evaluation harness.
"""

from .data import (
    ELECTRODES_9,
    Label,
    RawTrial,
    TrialStore,
    WindowSlice,
    label_for_class,
    label_for_frequency,
    load_store,
    save_store,
    select_channels,
)
from .synth import SynthConfig, generate_components, generate_store, generate_trial
from .preprocess import (
    BandSpec,
    Spectrogram,
    StftConfig,
    WindowConfig,
    band_select,
    car_filter,
    db_normalize,
    flatten_for_svm,
    resize_nearest,
    slice_windows,
    stft_magnitude,
    window_to_image,
    write_pgm,
)
from .augment import AugmentMode, MaskVariant, apply_mask, enumerate_variants, expand_dataset
from .fbcca import FbccaConfig, cca_max_corr, fbcca_classify, fbcca_score, reference_signals, subband_filter
from .svm import SvmModel, SvmTrainConfig, svm_loss, svm_predict, svm_train
from .params import ModelParams, ParamTensor, load_params, save_params
from .harness import (
    EvalReport,
    ExperimentConfig,
    SplitSpec,
    build_image_set,
    build_window_set,
    loso_split,
    metrics,
    run_experiment,
)
from .report import write_report

__version__ = "0.1.0"
