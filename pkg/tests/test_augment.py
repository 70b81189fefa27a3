import numpy as np
import pytest

from ssvep_bench.augment import (
    AugmentMode,
    MaskVariant,
    apply_mask,
    enumerate_variants,
    expand_dataset,
    mask_values,
)
from ssvep_bench.dataset import NO_MASK, ImageSet
from ssvep_bench.preprocess import Spectrogram


def make_imageset(images):
    images = np.asarray(images, dtype=np.float32)
    n, rows, _ = images.shape
    return ImageSet(
        images=images,
        class_idx=np.arange(n) % 2,
        stimulus_hz=np.where(np.arange(n) % 2 == 0, 12.0, 15.0),
        subject_id=np.ones(n),
        trial_index=np.arange(n),
        start_sample=np.arange(n) * 125,
        row_freqs_hz=np.arange(rows, dtype=np.float32),
    )


class TestEnumeration:
    def test_counts_for_8x3(self):
        assert len(enumerate_variants(8, 3, AugmentMode.FULL)) == 36
        assert len(enumerate_variants(8, 3, AugmentMode.TIME_ONLY)) == 4
        assert len(enumerate_variants(8, 3, AugmentMode.FREQ_ONLY)) == 9
        assert enumerate_variants(8, 3, AugmentMode.NONE) == [MaskVariant(None, None)]

    def test_unmasked_variant_comes_first(self):
        for mode in AugmentMode:
            assert enumerate_variants(8, 3, mode)[0] == MaskVariant(None, None)

    def test_order_time_outer_freq_inner(self):
        variants = enumerate_variants(2, 2, AugmentMode.FULL)
        assert variants == [
            MaskVariant(None, None), MaskVariant(None, 0), MaskVariant(None, 1),
            MaskVariant(0, None), MaskVariant(0, 0), MaskVariant(0, 1),
            MaskVariant(1, None), MaskVariant(1, 0), MaskVariant(1, 1),
        ]

    def test_degenerate_shape_rejected(self):
        with pytest.raises(ValueError):
            enumerate_variants(0, 3, AugmentMode.FULL)


class TestApplyMask:
    def test_no_mask_is_identity(self):
        rng = np.random.default_rng(1)
        values = rng.random((8, 3))
        spec = Spectrogram(values, np.arange(8.0), np.arange(3.0))
        out = apply_mask(spec, MaskVariant(None, None))
        assert np.array_equal(out.values, values)

    def test_constant_image_unchanged_by_any_mask(self):
        values = np.full((4, 3), 2.5)
        for variant in enumerate_variants(4, 3, AugmentMode.FULL):
            assert np.array_equal(mask_values(values, variant), values)

    def test_2x2_time_mask_fills_with_mean(self):
        values = np.array([[0.0, 1.0], [2.0, 3.0]])
        out = mask_values(values, MaskVariant(time_col=0, freq_row=None))
        assert np.array_equal(out, [[1.5, 1.0], [1.5, 3.0]])

    def test_fill_is_premask_mean_for_double_mask(self):
        values = np.array([[0.0, 1.0], [2.0, 3.0]])
        out = mask_values(values, MaskVariant(time_col=1, freq_row=0))
        assert np.array_equal(out, [[1.5, 1.5], [2.0, 1.5]])

    def test_out_of_bounds_rejected(self):
        values = np.zeros((2, 2))
        with pytest.raises(IndexError):
            mask_values(values, MaskVariant(time_col=2, freq_row=None))
        with pytest.raises(IndexError):
            mask_values(values, MaskVariant(time_col=None, freq_row=-1))

    def test_masked_mean_stays_within_value_range(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            values = rng.random((8, 3))
            for variant in enumerate_variants(8, 3, AugmentMode.FULL):
                masked = mask_values(values, variant)
                assert values.min() - 1e-12 <= masked.mean() <= values.max() + 1e-12

    def test_changed_cell_counts_on_distinct_image(self):
        # time mask touches one column (rows cells), frequency mask one row
        # (cols cells), both together rows + cols - 1
        values = np.arange(24, dtype=np.float64).reshape(8, 3)
        changed = lambda v: int((mask_values(values, v) != values).sum())
        assert changed(MaskVariant(time_col=1, freq_row=None)) == 8
        assert changed(MaskVariant(time_col=None, freq_row=5)) == 3
        assert changed(MaskVariant(time_col=1, freq_row=5)) == 8 + 3 - 1


class TestExpandDataset:
    def test_cardinality_law(self):
        rng = np.random.default_rng(3)
        for n in (1, 4, 10):
            images = make_imageset(rng.random((n, 8, 3)))
            for mode in AugmentMode:
                expanded = expand_dataset(images, mode)
                assert len(expanded) == n * len(enumerate_variants(8, 3, mode))

    def test_matches_per_image_mask_oracle(self):
        rng = np.random.default_rng(4)
        images = make_imageset(rng.random((3, 8, 3)))
        expanded = expand_dataset(images, AugmentMode.FULL)
        variants = enumerate_variants(8, 3, AugmentMode.FULL)
        k = len(variants)
        for i in range(3):
            for j, variant in enumerate(variants):
                expect = mask_values(images.images[i], variant)
                assert np.array_equal(expanded.images[i * k + j], expect)

    def test_provenance_and_labels_copied(self):
        rng = np.random.default_rng(5)
        images = make_imageset(rng.random((4, 8, 3)))
        expanded = expand_dataset(images, AugmentMode.TIME_ONLY)
        rep = np.repeat(np.arange(4), 4)
        assert np.array_equal(expanded.class_idx, images.class_idx[rep])
        assert np.array_equal(expanded.subject_id, images.subject_id[rep])
        assert np.array_equal(expanded.start_sample, images.start_sample[rep])

    def test_mask_indices_recorded(self):
        rng = np.random.default_rng(6)
        images = make_imageset(rng.random((2, 8, 3)))
        expanded = expand_dataset(images, AugmentMode.FULL)
        assert expanded.time_mask[0] == NO_MASK and expanded.freq_mask[0] == NO_MASK
        # first block of 36 belongs to image 0; time stays unmasked for the first 9
        assert list(expanded.freq_mask[:9]) == [NO_MASK] + list(range(8))
        assert set(expanded.time_mask[9:18]) == {0}

    def test_unmasked_variant_bit_identical(self):
        rng = np.random.default_rng(7)
        images = make_imageset(rng.random((5, 8, 3)))
        expanded = expand_dataset(images, AugmentMode.FULL)
        assert np.array_equal(expanded.images[::36], images.images)

    def test_empty_input_rejected(self):
        images = make_imageset(np.zeros((1, 8, 3)))
        with pytest.raises(ValueError):
            expand_dataset(images.subset(np.array([], dtype=int)), AugmentMode.FULL)
