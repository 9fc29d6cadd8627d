"""Tests for quantum/classical image distillation."""
import numpy as np
import pytest

from qdistill.camera import simulate_frames
from qdistill.correlator import correlate
from qdistill.distill import (
    classical_image, direct_intensity, distill, edge_distance, pearson, quantum_image, residual_edge_fraction,
    residual_edge_thickness, residual_map, subtraction_scale,
)
from qdistill.models import ClassicalSource, GridMismatchError, ObjectMask, PairSource, SceneConfig

def _stripe_mask(size=16, start=4, stop=12):
    t = np.zeros((size, size))
    t[:, start:stop] = 1.0
    return ObjectMask(t)

def test_direct_intensity_of_noise_floor():
    frames = np.full((6, 3, 4), 167, dtype=np.uint16)
    assert not direct_intensity([frames[:4], frames[4:]], 167.0).any()

def test_direct_intensity_needs_frames():
    with pytest.raises(ValueError):
        direct_intensity([], 167.0)

def test_quantum_image_object_estimate(make_result):
    res = make_result(height=4, width=4)
    t = np.array([1.0, 0.8, 0.5, 0.0])
    res.diagonal[:] = 12.0 * t ** 4
    quantum = quantum_image(res, signal_threshold=0.0)
    assert not quantum.no_quantum_signal
    assert np.allclose(quantum.object_estimate, np.broadcast_to(t, (4, 4)))
    assert np.array_equal(quantum.image, res.diagonal)

def test_quantum_image_keeps_negative_values(make_result):
    res = make_result(height=2, width=2)
    res.diagonal[:] = [[4.0, -1.0], [4.0, 4.0]]
    quantum = quantum_image(res, signal_threshold=0.0)
    assert quantum.image[0, 1] == -1.0
    assert quantum.object_estimate[0, 1] == 0.0

def test_noise_only_diagonal_is_flagged(make_result):
    res = make_result(height=16, width=16)
    res.diagonal[:] = np.random.default_rng(0).normal(0.0, 1.0, (16, 16))
    assert quantum_image(res).no_quantum_signal

def test_non_positive_diagonal_is_flagged(make_result):
    res = make_result()
    res.diagonal[:] = -1.0
    quantum = quantum_image(res)
    assert quantum.no_quantum_signal
    assert not quantum.object_estimate.any()

def test_classical_image_recovers_scale():
    rng = np.random.default_rng(1)
    q = rng.uniform(0.0, 1.0, (8, 8)) ** 2
    truth = np.where(q >= np.quantile(q, 0.75), 0.0, rng.uniform(0.0, 5.0, (8, 8)))
    classical = classical_image(truth + 2.5 * np.sqrt(q), q)
    assert classical.calibrated
    assert classical.scale == pytest.approx(2.5)
    assert np.allclose(classical.image, truth)
    assert classical.calibration_pixels == 16

def test_classical_image_ignores_classical_light_over_the_pair_object():
    rng = np.random.default_rng(6)
    q = np.zeros((16, 16))
    q[4:12, 4:12] = 0.0675 * rng.uniform(0.97, 1.03, (8, 8))
    truth = np.zeros((16, 16))
    truth[2:14, 6:9] = 0.586
    direct = truth + 2.25 * np.sqrt(q) + rng.normal(0.0, 0.005, (16, 16))
    classical = classical_image(direct, q)
    assert classical.scale == pytest.approx(2.25, abs=0.03)
    assert np.allclose(classical.image[4:12, 9:12], 0.0, atol=0.03)
    assert np.allclose(classical.image[4:12, 6:9], 0.586, atol=0.03)

def test_subtraction_scale_prefers_the_clean_cluster():
    footprint = np.full(20, 0.5)
    direct = np.concatenate([np.full(6, 1.0), np.linspace(2.0, 3.0, 14)])
    scale, used = subtraction_scale(direct, footprint)
    assert scale == pytest.approx(2.0)
    assert used == 6

def test_classical_image_without_quantum_signal():
    direct = np.arange(12.0).reshape(3, 4)
    classical = classical_image(direct, np.zeros((3, 4)))
    assert not classical.calibrated
    assert classical.scale == 0.0
    assert np.array_equal(classical.image, direct)
    flagged = classical_image(direct, np.ones((3, 4)), no_quantum_signal=True)
    assert not flagged.calibrated

def test_residual_map():
    c = np.arange(6.0).reshape(2, 3)
    assert not residual_map(c, c.copy()).any()
    with pytest.raises(GridMismatchError):
        residual_map(c, np.zeros((3, 2)))

def test_distill_scores_against_ground_truth(make_result):
    res = make_result(height=8, width=8)
    t = _stripe_mask(8, 2, 6)
    res.diagonal[:] = 9.0 * t.t ** 4
    truth = np.where(t.t > 0, 0.0, np.tile(np.linspace(0.0, 10.0, 8), (8, 1)).T)
    direct = truth + 2.0 * np.sqrt(res.diagonal)
    result = distill(res, direct, classical_truth=truth, object_truth=t)
    assert result.flags == []
    assert result.scores["quantum_pearson"] == pytest.approx(1.0)
    assert result.scores["classical_pearson"] == pytest.approx(1.0)
    assert np.allclose(result.residual, 0.0)

def test_distill_rejects_grid_mismatch(make_result):
    with pytest.raises(GridMismatchError):
        distill(make_result(height=4, width=4), np.zeros((4, 5)))

def test_pearson():
    a = np.arange(10.0)
    assert pearson(a, 2 * a + 1) == pytest.approx(1.0)
    assert pearson(a, -a) == pytest.approx(-1.0)
    assert np.isnan(pearson(a, np.ones(10)))
    where = np.arange(10) < 5
    assert pearson(a, np.where(where, a, 0.0), where) == pytest.approx(1.0)

def test_edge_distance():
    mask = _stripe_mask(8, 0, 4)
    distance = edge_distance(mask)
    assert distance[0].tolist() == [4.0, 3.0, 2.0, 1.0, 1.0, 2.0, 3.0, 4.0]
    assert np.all(np.isinf(edge_distance(ObjectMask.transparent(4, 4))))

def test_residual_edge_scores():
    mask = _stripe_mask(8, 0, 4)
    residual = np.zeros((8, 8))
    residual[:, 3] = 1.0
    assert residual_edge_fraction(residual, mask) == 1.0
    assert residual_edge_thickness(residual, mask) == 1.0
    residual[:, 0] = 1.0
    assert residual_edge_fraction(residual, mask, within=2.0) == 0.5
    assert residual_edge_thickness(residual, mask) == 2.5
    assert residual_edge_fraction(np.zeros((8, 8)), mask) == 0.0

def test_quantum_image_from_simulated_mask(counting_camera):
    mask = _stripe_mask(16, 0, 8)
    scene = SceneConfig(width=16, height=16, pair=PairSource(100.0), pair_mask=mask)
    stack = simulate_frames(scene, counting_camera, 4000, seed=3)
    quantum = quantum_image(correlate(stack.chunks(), window_radius=2))
    assert not quantum.no_quantum_signal
    assert pearson(quantum.image, mask.t ** 4) > 0.8

def test_classical_light_is_invisible_in_quantum_image(counting_camera):
    pair_mask = _stripe_mask(16, 0, 8)
    classical_mask = ObjectMask(np.tile((np.arange(16) < 8).astype(float), (16, 1)).T)
    scene = SceneConfig(
        width=16, height=16, pair=PairSource(100.0), pair_mask=pair_mask,
        classical=ClassicalSource.uniform(16, 16, 0.8), classical_mask=classical_mask,
    )
    stack = simulate_frames(scene, counting_camera, 4000, seed=5)
    q = quantum_image(correlate(stack.chunks(), window_radius=2)).image
    # classical-only region: pair arm opaque (columns >= 8); skip the column next to the pair edge
    region = q[:8, 9:]
    z = region.mean() / (region.std(ddof=1) / np.sqrt(region.size))
    assert abs(z) < 5
    assert q[:, 1:7].mean() > 5 * abs(region.mean())

@pytest.mark.slow
def test_residual_singles_sit_on_mask_edges(counting_camera):
    mask = _stripe_mask(16, 4, 12)
    scene = SceneConfig(width=16, height=16, pair=PairSource(100.0), pair_mask=mask)
    stack = simulate_frames(scene, counting_camera, 40000, seed=8)
    res = correlate(stack.chunks(), window_radius=2)
    direct = direct_intensity(stack.chunks(), counting_camera.noise_mean)
    result = distill(res, direct, classical_truth=np.zeros((16, 16)), object_truth=mask)
    assert result.scores["residual_edge_fraction"] >= 0.7

def _square_mask(size, start, stop):
    t = np.zeros((size, size))
    t[start:stop, start:stop] = 1.0
    return ObjectMask(t)

def _distill_simulated(scene, camera, n_frames, seed, classical_truth, object_truth):
    stack = simulate_frames(scene, camera, n_frames, seed=seed)
    res = correlate(stack.chunks(), window_radius=2)
    direct = direct_intensity(stack.chunks(), camera.noise_mean)
    return distill(res, direct, classical_truth=classical_truth, object_truth=object_truth)

@pytest.mark.slow
@pytest.mark.parametrize("columns", [(26, 30), (12, 20)], ids=["separate", "overlapping"])
def test_classical_image_matches_ground_truth_off_edges(counting_camera, columns):
    pair_mask = _square_mask(32, 8, 24)
    t = np.zeros((32, 32))
    t[4:28, columns[0]:columns[1]] = 1.0
    classical_mask = ObjectMask(t)
    # 300 pairs on 1024 pixels put as much pair light as classical light in each lit pixel
    scene = SceneConfig(
        width=32, height=32, pair=PairSource(300.0), pair_mask=pair_mask,
        classical=ClassicalSource.uniform(32, 32, 0.586), classical_mask=classical_mask,
    )
    truth = 0.586 * classical_mask.transmission
    result = _distill_simulated(scene, counting_camera, 40000, 11, truth, pair_mask)
    assert result.scores["classical_pearson_off_edges"] >= 0.9
    assert abs(result.classical.image[10:22, 20:22].mean()) < 0.05
    assert result.classical.image[10:22, 13:19].mean() == pytest.approx(0.586 if columns[0] == 12 else 0.0, abs=0.05)

@pytest.mark.slow
def test_residual_edge_thickness_grows_with_correlation_width(counting_camera):
    mask = _square_mask(48, 8, 40)
    thickness = []
    # 0.5, 1 and 2 pixels at a 16 um pitch, same frames seed for each width
    for width_um in (8.0, 16.0, 32.0):
        scene = SceneConfig(
            width=48, height=48, pair=PairSource(225.0, correlation_width_um=width_um), pair_mask=mask,
        )
        result = _distill_simulated(scene, counting_camera, 20000, 12, np.zeros((48, 48)), mask)
        thickness.append(result.scores["residual_edge_thickness"])
    assert thickness[0] < thickness[1] < thickness[2]

@pytest.mark.slow
def test_quantum_image_follows_fourth_power_of_gray_mask(counting_camera):
    t = np.ones((24, 24))
    t[:, 8:16] = 0.8
    t[:, 16:] = 0.5
    scene = SceneConfig(width=24, height=24, pair=PairSource(100.0), pair_mask=ObjectMask(t))
    stack = simulate_frames(scene, counting_camera, 40000, seed=4)
    q = quantum_image(correlate(stack.chunks(), window_radius=2)).image
    # band interiors, away from the grid border and from the band to the left
    plateaus = [q[2:22, 2:7].mean(), q[2:22, 10:15].mean(), q[2:22, 18:22].mean()]
    assert plateaus[1] / plateaus[0] == pytest.approx(0.8 ** 4, rel=0.1)
    assert plateaus[2] / plateaus[0] == pytest.approx(0.5 ** 4, rel=0.1)
