"""Tests for photon arrival sampling."""
import numpy as np
import pytest
from scipy.stats import norm

from qdistill.models import ClassicalSource, ObjectMask, Origin, PairSource, PhotonRecords, SceneConfig
from qdistill.optics import (
    expected_photon_image, frame_rng, render_frame_counts, sample_classical, sample_frame, sample_pairs,
    transmit_pair,
)

def _half_mask(size=16):
    t = np.zeros((size, size))
    t[:, : size // 2] = 1.0
    return ObjectMask(t)

def test_frame_rng_is_keyed_by_seed_and_index():
    a = frame_rng(5, 12).random(4)
    assert np.array_equal(a, frame_rng(5, 12).random(4))
    assert not np.array_equal(a, frame_rng(5, 13).random(4))
    assert not np.array_equal(a, frame_rng(6, 12).random(4))

def test_zero_correlation_width_gives_same_pixel_pairs():
    rng = frame_rng(0, 0)
    for _ in range(50):
        first, second = sample_pairs(PairSource(1.0, correlation_width_um=0.0), (8, 8), 16.0, rng)
        assert np.array_equal(first, second)

def test_pair_count_is_poisson():
    rng = np.random.default_rng(11)
    source = PairSource(5.0)
    counts = np.array([len(sample_pairs(source, (4, 4), 16.0, rng)[0]) for _ in range(20000)])
    assert abs(counts.mean() - 5.0) < 0.05
    assert 0.95 < counts.var(ddof=1) / counts.mean() < 1.05

def test_partners_stay_on_grid_and_within_a_pixel_or_so():
    rng = np.random.default_rng(2)
    first, second = sample_pairs(PairSource(50000.0, correlation_width_um=10.0), (12, 12), 16.0, rng)
    assert first.min() >= 0 and second.min() >= 0
    assert first.max() < 12 and second.max() < 12
    offset = np.abs(first - second).max(axis=1)
    assert (offset <= 1).mean() > 0.85
    assert (offset == 0).mean() < 0.9

def test_marginal_profile_restricts_first_photons():
    profile = np.zeros((4, 4))
    profile[1, 2] = 1.0
    first, _ = sample_pairs(PairSource(200.0, 10.0, profile), (4, 4), 16.0, np.random.default_rng(0))
    assert len(first)
    assert np.all(first == [1, 2])

def test_transparent_mask_keeps_both_photons():
    rng = np.random.default_rng(1)
    first, second = sample_pairs(PairSource(30.0), (8, 8), 16.0, rng)
    records = transmit_pair(first, second, ObjectMask.transparent(8, 8), rng)
    assert len(records) == 2 * len(first)
    assert np.all(records.origin == Origin.PAIR_BOTH)

def test_opaque_mask_absorbs_everything():
    rng = np.random.default_rng(1)
    first, second = sample_pairs(PairSource(30.0), (8, 8), 16.0, rng)
    assert len(transmit_pair(first, second, ObjectMask.opaque(8, 8), rng)) == 0

def test_single_survivors_concentrate_at_mask_edge():
    rng = np.random.default_rng(4)
    first, second = sample_pairs(PairSource(200000.0, correlation_width_um=10.0), (16, 16), 16.0, rng)
    singles = transmit_pair(first, second, _half_mask(), rng).select(Origin.PAIR_SINGLE)
    assert len(singles) > 0
    # transparent columns 0..7, edge between 7 and 8
    assert (singles.cols >= 6).mean() > 0.9

def test_single_survivor_rate_matches_partner_loss_across_the_edge():
    sigma_px = 10.0 / 16.0
    rng = np.random.default_rng(21)
    first, second = sample_pairs(PairSource(1e6, correlation_width_um=10.0), (16, 16), 16.0, rng)
    records = transmit_pair(first, second, _half_mask(), rng)
    singles = np.bincount(records.select(Origin.PAIR_SINGLE).cols, minlength=16)
    # photons entering column c from either side of a pair, each losing its partner past x = 8
    per_column = 2 * len(first) / 16
    u = (np.arange(4000) + 0.5) / 4000
    for column, rel in ((7, 0.03), (6, 0.1)):
        expected = per_column * norm.sf((8 - column - u) / sigma_px).mean()
        assert singles[column] == pytest.approx(expected, rel=rel)
    assert not singles[8:].any()

def test_classical_off_is_empty():
    source = ClassicalSource.uniform(4, 4, 0.0)
    assert len(sample_classical(source, ObjectMask.transparent(4, 4), np.random.default_rng(0))) == 0

def test_classical_counts_are_poisson_and_independent():
    rng = np.random.default_rng(9)
    source = ClassicalSource.uniform(1, 2, 2.0)
    mask = ObjectMask.transparent(1, 2)
    n = 20000
    counts = np.array([render_frame_counts(sample_classical(source, mask, rng), (1, 2)).ravel() for _ in range(n)])
    left, right = counts[:, 0], counts[:, 1]
    assert 0.95 < left.var(ddof=1) / left.mean() < 1.05
    assert abs(np.corrcoef(left, right)[0, 1]) < 4.0 / np.sqrt(n)

def test_classical_mask_thins_intensity():
    rng = np.random.default_rng(3)
    source = ClassicalSource.uniform(2, 2, 50.0)
    mask = ObjectMask.from_intensity(np.array([[1.0, 0.0], [0.5, 0.0]]))
    counts = sum(render_frame_counts(sample_classical(source, mask, rng), (2, 2)) for _ in range(200))
    assert counts[0, 1] == 0 and counts[1, 1] == 0
    assert 0.4 < counts[1, 0] / counts[0, 0] < 0.6

def test_render_frame_counts():
    assert np.array_equal(render_frame_counts(PhotonRecords(), (3, 3)), np.zeros((3, 3)))
    records = PhotonRecords(
        rows=np.array([1, 1, 1]), cols=np.array([2, 2, 2]), origin=np.full(3, Origin.CLASSICAL, dtype=np.uint8),
    )
    counts = render_frame_counts(records, (3, 3))
    assert counts[1, 2] == 3
    assert counts.sum() == 3

def test_render_frame_counts_conserves_photons():
    rng = np.random.default_rng(0)
    scene = SceneConfig(width=8, height=6, pair=PairSource(25.0), classical=ClassicalSource.uniform(6, 8, 1.5))
    records = sample_frame(scene, 16.0, rng)
    assert render_frame_counts(records, scene.shape).sum() == len(records)

def test_render_frame_counts_rejects_off_grid():
    records = PhotonRecords(rows=np.array([5]), cols=np.array([0]), origin=np.zeros(1, dtype=np.uint8))
    with pytest.raises(ValueError):
        render_frame_counts(records, (3, 3))

def test_expected_photon_image_of_flat_pair_source():
    scene = SceneConfig(width=4, height=4, pair=PairSource(8.0))
    assert np.allclose(expected_photon_image(scene), 1.0)

def test_mask_validation():
    with pytest.raises(ValueError):
        ObjectMask(np.array([[1.2]]))
    with pytest.raises(ValueError):
        PairSource(0.0)
    with pytest.raises(ValueError):
        SceneConfig(width=4, height=4, pair_mask=ObjectMask.transparent(3, 4))
