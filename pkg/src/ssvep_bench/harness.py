"""Leave-one-subject-out experiment driver.

For every test subject, that subject's windows form the test set; the rest
are shuffled and split (stratified per class) into training and validation
partitions. Masking augmentation is applied to the training partition only,
after the split, so no variant of a validation or test window ever reaches
training. Each classifier consumes its own view of the data: the
correlation classifier takes raw window slices, the SVM takes flattened
8x3 vectors, the CNN takes resized images.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import net
from .augment import AugmentMode, expand_dataset
from .data import TrialStore, WindowSlice, label_for_frequency, select_channels
from .dataset import ImageSet, WindowSet
from .fbcca import FbccaConfig, fbcca_classify
from .params import load_params
from .preprocess import (
    BandSpec,
    StftConfig,
    WindowConfig,
    car_filter,
    flatten_for_svm,
    resize_nearest_values,
    window_starts,
    window_to_image,
)
from .svm import SvmModel, SvmTrainConfig, svm_predict_batch, svm_train

CLASSIFIERS = ("fbcca", "svm", "cnn", "cnn-scratch", "majority")
NETWORKS = ("default", "small", "tiny")


@dataclass(frozen=True)
class SplitSpec:
    """Subject-held-out split with stratified train/validation fractions.

    Default fractions are exact thirds (the 66.6%/33.3% protocol); each
    class pool is floored into the validation share with the remainder
    going to training.
    """

    test_subject_id: int
    train_fraction: float = 2.0 / 3.0
    val_fraction: float = 1.0 / 3.0
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if self.train_fraction <= 0 or self.val_fraction <= 0:
            raise ValueError("split fractions must be positive")
        if self.train_fraction + self.val_fraction > 1.0 + 1e-9:
            raise ValueError(
                f"fractions sum to {self.train_fraction + self.val_fraction:.4f} > 1"
            )


def _partition_counts(n: int, spec: SplitSpec) -> tuple[int, int]:
    # 1e-9 guard keeps exact thirds from flooring one short in float math.
    train = int(n * spec.train_fraction + 1e-9)
    val = int(n * spec.val_fraction + 1e-9)
    train += n - train - val  # rounding residue goes to training
    return train, val


def loso_split(
    ds: ImageSet | WindowSet, spec: SplitSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index triple (train, val, test) over the dataset rows."""
    subject_id = np.asarray(ds.subject_id)
    class_idx = np.asarray(ds.class_idx)
    if spec.test_subject_id not in subject_id:
        raise KeyError(
            f"unknown test subject {spec.test_subject_id}; "
            f"available: {sorted(set(int(s) for s in subject_id))}"
        )
    test_mask = subject_id == spec.test_subject_id
    test_idx = np.flatnonzero(test_mask)
    rest_idx = np.flatnonzero(~test_mask)

    rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))
    train_parts, val_parts = [], []
    if spec.stratified:
        pools = [rest_idx[class_idx[rest_idx] == c] for c in np.unique(class_idx[rest_idx])]
    else:
        pools = [rest_idx]
    for pool in pools:
        perm = rng.permutation(pool)
        n_train, n_val = _partition_counts(len(pool), spec)
        train_parts.append(perm[:n_train])
        val_parts.append(perm[n_train:n_train + n_val])
    train_idx = np.sort(np.concatenate(train_parts)) if train_parts else np.zeros(0, dtype=int)
    val_idx = np.sort(np.concatenate(val_parts)) if val_parts else np.zeros(0, dtype=int)
    return train_idx, val_idx, test_idx


@dataclass
class MetricsResult:
    """Confusion-matrix summary for one prediction set (rows true, cols predicted)."""

    n: int
    accuracy: float
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    f1_macro: float

    @property
    def tp(self) -> int:  # class 1 treated as the positive class
        return int(self.confusion[1, 1])

    @property
    def fp(self) -> int:
        return int(self.confusion[0, 1])

    @property
    def fn(self) -> int:
        return int(self.confusion[1, 0])

    @property
    def tn(self) -> int:
        return int(self.confusion[0, 0])


def metrics(preds: Sequence[int], labels: Sequence[int], n_classes: int = 2) -> MetricsResult:
    """Accuracy, per-class precision/recall/F1 and macro F1."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(preds) != len(labels):
        raise ValueError(f"{len(preds)} predictions for {len(labels)} labels")
    if len(preds) == 0:
        raise ValueError("cannot compute metrics on an empty set")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(labels, preds):
        confusion[t, p] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(confusion.sum(0) > 0, np.diag(confusion) / confusion.sum(0), 0.0)
        recall = np.where(confusion.sum(1) > 0, np.diag(confusion) / confusion.sum(1), 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / np.where(denom > 0, denom, 1.0), 0.0)
    return MetricsResult(
        n=len(preds),
        accuracy=float(np.trace(confusion) / confusion.sum()),
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        f1_macro=float(f1.mean()),
    )


@dataclass
class SubjectResult:
    subject_id: int
    classifier: str
    result: MetricsResult

    @property
    def accuracy_pct(self) -> float:
        return 100.0 * self.result.accuracy


@dataclass
class EvalReport:
    classifier: str
    rows: list[SubjectResult] = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([r.result.accuracy for r in self.rows]))

    @property
    def mean_f1(self) -> float:
        return float(np.mean([r.result.f1_macro for r in self.rows]))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one leave-one-subject-out run."""

    classifier: str = "fbcca"
    channels: tuple[str, ...] = ("Oz",)
    apply_car: bool | None = None  # None = apply when the store is multichannel
    window: WindowConfig = WindowConfig()
    stft: StftConfig = StftConfig()
    bands: BandSpec = BandSpec()
    augment_mode: AugmentMode = AugmentMode.NONE
    train_fraction: float = 2.0 / 3.0
    val_fraction: float = 1.0 / 3.0
    seed: int = 0
    subjects: tuple[int, ...] | None = None
    fbcca: FbccaConfig = FbccaConfig()
    svm: SvmTrainConfig = SvmTrainConfig()
    cnn: net.TrainConfig = net.TrainConfig()
    network: str = "default"
    pretrained_path: str | None = None
    freeze_prefix: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if self.network not in NETWORKS:
            raise ValueError(f"network must be one of {NETWORKS}, got {self.network!r}")
        if len(self.channels) < 1:
            raise ValueError("need at least one channel")
        if self.classifier in ("svm", "cnn", "cnn-scratch", "majority") and len(self.channels) != 1:
            raise ValueError(f"{self.classifier} is single-channel; got {self.channels}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")

    def network_spec(self) -> net.NetworkSpec:
        if self.network == "default":
            return net.default_cnn_spec()
        if self.network == "small":
            return net.small_cnn_spec()
        return net.tiny_cnn_spec()


def _prepared_trial(trial, channels: tuple[str, ...], apply_car: bool | None):
    do_car = trial.n_channels >= 2 if apply_car is None else apply_car
    if do_car:
        trial = car_filter(trial)
    return select_channels(trial, channels)


def build_image_set(
    store: TrialStore,
    window_cfg: WindowConfig = WindowConfig(),
    stft_cfg: StftConfig = StftConfig(),
    bands: BandSpec = BandSpec(),
    channel: str = "Oz",
    apply_car: bool | None = None,
) -> ImageSet:
    """Run the spectrogram chain over every trial window in the store."""
    freqs = store.stimulus_frequencies()
    images, class_idx, stim, subj, trial_no, start = [], [], [], [], [], []
    row_freqs = None
    for trial in store:
        prepared = _prepared_trial(trial, (channel,), apply_car)
        signal = prepared.samples[0].astype(np.float64)
        label = None
        for s in window_starts(prepared.n_samples, window_cfg):
            window = WindowSlice(
                subject_id=trial.subject_id,
                stimulus_hz=trial.stimulus_hz,
                trial_index=trial.trial_index,
                start_sample=s,
                samples=signal[s:s + window_cfg.window_len_samples],
                sample_rate_hz=store.sample_rate_hz,
            )
            spec = window_to_image(window, stft_cfg, bands)
            if label is None:
                label = label_for_frequency(trial.stimulus_hz, freqs)
            if row_freqs is None:
                row_freqs = spec.row_freqs_hz
            images.append(spec.values)
            class_idx.append(label.class_index)
            stim.append(trial.stimulus_hz)
            subj.append(trial.subject_id)
            trial_no.append(trial.trial_index)
            start.append(s)
    if not images:
        raise ValueError("store produced no windows")
    return ImageSet(
        images=np.stack(images),
        class_idx=np.array(class_idx),
        stimulus_hz=np.array(stim),
        subject_id=np.array(subj),
        trial_index=np.array(trial_no),
        start_sample=np.array(start),
        row_freqs_hz=row_freqs,
    )


def build_window_set(
    store: TrialStore,
    window_cfg: WindowConfig = WindowConfig(),
    channels: tuple[str, ...] = ("Oz",),
    apply_car: bool | None = None,
) -> WindowSet:
    """Raw window slices (no STFT) for the correlation classifier."""
    freqs = store.stimulus_frequencies()
    windows, class_idx, stim, subj, trial_no, start = [], [], [], [], [], []
    for trial in store:
        prepared = _prepared_trial(trial, tuple(channels), apply_car)
        label = label_for_frequency(trial.stimulus_hz, freqs)
        samples = prepared.samples.astype(np.float64)
        for s in window_starts(prepared.n_samples, window_cfg):
            windows.append(samples[:, s:s + window_cfg.window_len_samples])
            class_idx.append(label.class_index)
            stim.append(trial.stimulus_hz)
            subj.append(trial.subject_id)
            trial_no.append(trial.trial_index)
            start.append(s)
    if not windows:
        raise ValueError("store produced no windows")
    return WindowSet(
        windows=np.stack(windows),
        class_idx=np.array(class_idx),
        stimulus_hz=np.array(stim),
        subject_id=np.array(subj),
        trial_index=np.array(trial_no),
        start_sample=np.array(start),
        sample_rate_hz=store.sample_rate_hz,
    )


def subject_seed(seed: int, subject_id: int) -> int:
    return int(np.random.SeedSequence([seed, subject_id]).generate_state(1)[0])


def _class_to_pm1(class_idx: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(class_idx) > 0, 1.0, -1.0)


def _cnn_inputs(images: np.ndarray, spec: net.NetworkSpec) -> np.ndarray:
    _, rows, cols = spec.input_shape
    resized = resize_nearest_values(np.asarray(images, dtype=np.float64), rows, cols)
    return resized[:, np.newaxis, :, :]


def _evaluate_subject_images(
    imgset: ImageSet, subject_id: int, cfg: ExperimentConfig
) -> SubjectResult:
    sub_seed = subject_seed(cfg.seed, subject_id)
    split = SplitSpec(
        test_subject_id=subject_id,
        train_fraction=cfg.train_fraction,
        val_fraction=cfg.val_fraction,
        seed=sub_seed,
    )
    train_idx, val_idx, test_idx = loso_split(imgset, split)
    train_set = imgset.subset(train_idx)
    if cfg.augment_mode != AugmentMode.NONE:
        train_set = expand_dataset(train_set, cfg.augment_mode)
    val_set = imgset.subset(val_idx)
    test_set = imgset.subset(test_idx)

    if cfg.classifier == "majority":
        counts = np.bincount(train_set.class_idx, minlength=2)
        constant = int(np.argmax(counts))  # argmax takes the lower class on ties
        preds = np.full(len(test_set), constant)
    elif cfg.classifier == "svm":
        x_train = np.stack([flatten_for_svm(im) for im in train_set.images])
        x_val = np.stack([flatten_for_svm(im) for im in val_set.images])
        x_test = np.stack([flatten_for_svm(im) for im in test_set.images])
        model, _ = svm_train(
            x_train, _class_to_pm1(train_set.class_idx),
            x_val, _class_to_pm1(val_set.class_idx),
            replace(cfg.svm, seed=sub_seed),
        )
        preds = (svm_predict_batch(model, x_test) + 1) // 2
    else:  # cnn / cnn-scratch
        spec = cfg.network_spec()
        if cfg.classifier == "cnn" and cfg.pretrained_path:
            params = net.replace_head(load_params(cfg.pretrained_path), spec, seed=sub_seed)
            if cfg.freeze_prefix:
                params.set_frozen(lambda n: n.startswith("conv"))
        else:
            params = net.init_params(spec, seed=sub_seed)
        best, _ = net.train(
            spec, params,
            _cnn_inputs(train_set.images, spec), train_set.class_idx.astype(np.int64),
            _cnn_inputs(val_set.images, spec), val_set.class_idx.astype(np.int64),
            replace(cfg.cnn, seed=sub_seed),
        )
        preds = net.predict(spec, best, _cnn_inputs(test_set.images, spec))

    return SubjectResult(
        subject_id=subject_id,
        classifier=cfg.classifier,
        result=metrics(preds, test_set.class_idx),
    )


def _evaluate_subject_windows(
    ws: WindowSet, subject_id: int, cfg: ExperimentConfig
) -> SubjectResult:
    test_idx = np.flatnonzero(np.asarray(ws.subject_id) == subject_id)
    if len(test_idx) == 0:
        raise KeyError(f"unknown test subject {subject_id}")
    preds = [
        fbcca_classify(ws.windows[i], cfg.fbcca, ws.sample_rate_hz).class_index
        for i in test_idx
    ]
    return SubjectResult(
        subject_id=subject_id,
        classifier=cfg.classifier,
        result=metrics(preds, ws.class_idx[test_idx]),
    )


def _run_one(args) -> SubjectResult:
    dataset, subject_id, cfg = args
    if cfg.classifier == "fbcca":
        return _evaluate_subject_windows(dataset, subject_id, cfg)
    return _evaluate_subject_images(dataset, subject_id, cfg)


def run_experiment(store: TrialStore, cfg: ExperimentConfig) -> EvalReport:
    """Iterate test subjects and assemble per-subject metrics plus means.

    Deterministic in cfg.seed: per-subject work is seeded independently, so
    the report does not depend on the number of worker processes.
    """
    if len(store.stimulus_frequencies()) < 2:
        raise ValueError("store must contain at least two stimulus frequencies")
    if cfg.classifier == "fbcca":
        dataset: ImageSet | WindowSet = build_window_set(
            store, cfg.window, tuple(cfg.channels), cfg.apply_car
        )
    else:
        dataset = build_image_set(
            store, cfg.window, cfg.stft, cfg.bands, cfg.channels[0], cfg.apply_car
        )

    subjects = list(cfg.subjects) if cfg.subjects else store.subject_ids()
    known = set(store.subject_ids())
    unknown = [s for s in subjects if s not in known]
    if unknown:
        raise KeyError(f"unknown subject id(s) {unknown}; store has {sorted(known)}")

    tasks = [(dataset, s, cfg) for s in subjects]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_run_one, tasks))
    else:
        rows = [_run_one(t) for t in tasks]
    return EvalReport(classifier=cfg.classifier, rows=rows)
