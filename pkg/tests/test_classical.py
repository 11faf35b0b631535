import numpy as np
import pytest

from stmdkit.classical import (
    DstmdConfig,
    DstmdDetector,
    EmdConfig,
    EmdDetector,
    EstmdDetector,
    bl_detect,
    dstmd_detect,
    estmd_detect,
    hr_detect,
    hrbl_detect,
    per_frame_op_counts,
)
from stmdkit.frontend import LaminaConfig, RetinaConfig
from stmdkit.grid import FrameRing, OnOffSignals, rectify_pair
from oracles import oracle_bl, oracle_dstmd, oracle_estmd, oracle_hr, oracle_hrbl

RNG = np.random.default_rng(11)


def _luminance_ring(seq):
    ring = FrameRing(len(seq))
    for i, frame in enumerate(seq):
        ring.push(i, frame)
    return ring


def _on_off_ring(on_seq, off_seq):
    ring = FrameRing(len(on_seq))
    for i, (on, off) in enumerate(zip(on_seq, off_seq)):
        ring.push(i, OnOffSignals(on=on, off=off))
    return ring


def _random_seq(frames=8, shape=(6, 6), positive=False):
    if positive:
        return [
            (RNG.random(shape) * 0.9 + 0.1).astype(np.float32) for _ in range(frames)
        ]
    return [RNG.normal(size=shape).astype(np.float32) for _ in range(frames)]


def test_hr_constant_input_squares_interior():
    c = 0.6
    seq = [np.full((5, 7), c, dtype=np.float32)] * 4
    cfg = EmdConfig(delay_tau=2, offset=(1, 0))
    out = hr_detect(_luminance_ring(seq), cfg)
    assert np.allclose(out[:, :-1], c * c, atol=1e-6)
    assert np.allclose(out[:, -1], 0.0)  # shifted sample off the edge reads 0


def test_hr_zero_delayed_frame_nulls_output():
    seq = [np.zeros((4, 4), dtype=np.float32)] + [
        RNG.random((4, 4)).astype(np.float32) for _ in range(2)
    ]
    out = hr_detect(_luminance_ring(seq), EmdConfig(delay_tau=2, offset=(0, 0)))
    assert not out.any()


def test_hr_warmup_returns_zeros():
    seq = _random_seq(frames=2)
    out = hr_detect(_luminance_ring(seq), EmdConfig(delay_tau=4))
    assert not out.any()


def test_hr_moving_edge_strip_matches_oracle():
    # 1px/frame rightward edge on a 1x16 strip, tau=1, offset (-1, 0)
    seq = []
    for t in range(4):
        strip = np.zeros((1, 16), dtype=np.float32)
        strip[0, : 4 + t] = 1.0
        seq.append(strip)
    cfg = EmdConfig(delay_tau=1, offset=(-1, 0))
    out = hr_detect(_luminance_ring(seq), cfg)
    expected = oracle_hr(seq, 3, 1, (-1, 0))
    assert np.allclose(out, expected, rtol=1e-4, atol=1e-7)
    assert out.max() > 0


def test_bl_constant_input_near_one():
    c = 0.9
    seq = [np.full((4, 4), c, dtype=np.float32)] * 3
    cfg = EmdConfig(delay_tau=1, offset=(0, 0), division_guard=1e-3)
    out = bl_detect(_luminance_ring(seq), cfg)
    assert np.allclose(out, 1.0, atol=2e-3)


def test_bl_zero_current_frame_gives_zero():
    seq = [np.full((4, 4), 0.5, dtype=np.float32), np.zeros((4, 4), dtype=np.float32)]
    out = bl_detect(_luminance_ring(seq), EmdConfig(delay_tau=1))
    assert not out.any()


def test_emd_family_matches_scalar_oracles():
    for _ in range(10):
        seq = _random_seq(positive=True)
        ring = _luminance_ring(seq)
        cfg = EmdConfig(
            delay_tau=int(RNG.integers(1, 4)),
            offset=(int(RNG.integers(-2, 3)), int(RNG.integers(-2, 3))),
            second_delay=int(RNG.integers(1, 4)),
            second_offset=(int(RNG.integers(-2, 3)), int(RNG.integers(-2, 3))),
        )
        t = len(seq) - 1
        assert np.allclose(
            hr_detect(ring, cfg),
            oracle_hr(seq, t, cfg.delay_tau, cfg.offset),
            rtol=1e-4, atol=1e-6,
        )
        assert np.allclose(
            bl_detect(ring, cfg),
            oracle_bl(seq, t, cfg.delay_tau, cfg.offset, cfg.division_guard),
            rtol=1e-4, atol=1e-6,
        )
        assert np.allclose(
            hrbl_detect(ring, cfg),
            oracle_hrbl(
                seq, t, cfg.delay_tau, cfg.offset,
                cfg.second_delay, cfg.second_offset, cfg.division_guard,
            ),
            rtol=1e-4, atol=1e-6,
        )


def test_hr_mirror_antisymmetry():
    seq = _random_seq(frames=4, shape=(5, 8))
    mirrored = [f[:, ::-1].copy() for f in seq]
    cfg = EmdConfig(delay_tau=2, offset=(1, 0))
    cfg_m = EmdConfig(delay_tau=2, offset=(-1, 0))
    out = hr_detect(_luminance_ring(seq), cfg)
    out_m = hr_detect(_luminance_ring(mirrored), cfg_m)
    assert np.allclose(out[:, 1:-1], out_m[:, ::-1][:, 1:-1], atol=1e-6)


def test_estmd_single_coincidence():
    h, w, p = 3, 5, (1, 2)
    zeros = np.zeros((h, w), dtype=np.float32)
    a, b, tau = 0.7, 0.4, 2
    on_seq = [zeros, zeros, zeros.copy()]
    off_seq = [zeros.copy(), zeros, zeros]
    off_seq[0][p] = b
    on_seq[2][p] = a
    out = estmd_detect(_on_off_ring(on_seq, off_seq), tau)
    expected = np.zeros((h, w))
    expected[p] = a * b
    assert np.allclose(out, expected, atol=1e-7)


def test_estmd_on_only_sequence_silent():
    on_seq = [RNG.random((4, 4)).astype(np.float32) for _ in range(4)]
    off_seq = [np.zeros((4, 4), dtype=np.float32) for _ in range(4)]
    out = estmd_detect(_on_off_ring(on_seq, off_seq), 2)
    assert not out.any()


def test_estmd_dark_bar_strip_matches_oracle():
    # dark 5px bar crossing a bright 1x32 strip at 1 px/frame, tau = 5
    lum = []
    for t in range(12):
        strip = np.ones((1, 32), dtype=np.float32)
        strip[0, 2 + t : 7 + t] = 0.0
        lum.append(strip)
    on_seq, off_seq = [], []
    prev = lum[0]
    for frame in lum[1:]:
        s = rectify_pair(frame - prev)
        on_seq.append(s.on)
        off_seq.append(s.off)
        prev = frame
    tau = 5
    out = estmd_detect(_on_off_ring(on_seq, off_seq), tau)
    expected = oracle_estmd(on_seq, off_seq, len(on_seq) - 1, tau)
    assert np.allclose(out, expected, rtol=1e-4, atol=1e-7)
    assert out.max() > 0  # trailing-edge response present at the matched delay


def test_estmd_tau_selectivity_on_strip():
    # summed response across the pass peaks at tau within [ceil(l/2v), ceil(2l/v)]
    l, v = 5, 1
    lum = []
    for t in range(30):
        strip = np.ones((1, 40), dtype=np.float32)
        strip[0, 2 + t : 2 + l + t] = 0.0
        lum.append(strip)
    sums = {}
    for tau in range(1, 13):
        ring = FrameRing(tau + 1)
        total = 0.0
        prev = lum[0]
        for i, frame in enumerate(lum[1:]):
            ring.push(i, rectify_pair(frame - prev))
            prev = frame
            total += float(estmd_detect(ring, tau).sum())
        sums[tau] = total
    best = max(sums, key=sums.get)
    assert int(np.ceil(l / (2 * v))) <= best <= int(np.ceil(2 * l / v))


def test_dstmd_zero_on_channel_silences_every_direction():
    on_seq = [np.zeros((5, 5), dtype=np.float32) for _ in range(6)]
    off_seq = [RNG.random((5, 5)).astype(np.float32) for _ in range(6)]
    stack, field = dstmd_detect(_on_off_ring(on_seq, off_seq), DstmdConfig())
    assert not stack.any()
    assert not field.defined_mask.any()
    assert not field.magnitude.any()


def test_dstmd_unit_separation_offsets_are_eight_neighbors():
    cfg = DstmdConfig(directions=8, alpha_sep=1.0)
    offsets = set(cfg.offsets())
    assert offsets == {
        (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
    }


def test_dstmd_matches_scalar_oracle():
    for _ in range(6):
        on_seq = _random_seq(positive=True)
        off_seq = _random_seq(positive=True)
        cfg = DstmdConfig(directions=8, alpha_sep=2.0, tau1=1, tau3=3, delay_tau=2)
        stack, _ = dstmd_detect(_on_off_ring(on_seq, off_seq), cfg)
        expected = oracle_dstmd(
            on_seq, off_seq, len(on_seq) - 1,
            cfg.directions, cfg.alpha_sep, cfg.tau1, cfg.tau3, cfg.delay_tau,
        )
        assert np.allclose(stack, expected, rtol=1e-4, atol=1e-6)
        assert (stack >= 0).all()


def test_dstmd_argmax_points_east_for_rightward_target():
    # dark 5px square moving right at 0.75 px/frame: the off-trace offset
    # l - v*tau3 = 2 px matches the theta=0 directional offset exactly
    from stmdkit.synth import LinearPath, SynthConfig, generate_sequence

    scfg = SynthConfig(
        width=60, height=30, frames=40, seed=2,
        bg_velocity=(0.0, 0.0), bg_texture="stripes",
        target_size=(5, 5), target_luminance=0.1, bg_mean_luminance=0.7,
        path=LinearPath((12.0, 15.0), (0.75, 0.0)),
    )
    frames, _ = generate_sequence(scfg)
    det = DstmdDetector(RetinaConfig(), LaminaConfig(), DstmdConfig())
    result = None
    for f in frames:
        result = det.step(f)
    peak = np.unravel_index(np.argmax(result.response), result.response.shape)
    assert result.direction.defined_mask[peak]
    assert result.direction.angle[peak] == 0.0


def test_op_counters_count_correlations_per_pixel():
    from stmdkit.synth import LinearPath, SynthConfig, generate_sequence

    scfg = SynthConfig(
        width=40, height=24, frames=16, seed=2,
        bg_velocity=(0.0, 0.0), bg_texture="stripes",
        target_size=(4, 4), target_luminance=0.1, bg_mean_luminance=0.7,
        path=LinearPath((10.0, 12.0), (1.0, 0.0)),
    )
    frames, _ = generate_sequence(scfg)
    npix = 40 * 24

    estmd = EstmdDetector(RetinaConfig(), LaminaConfig(), tau=3)
    dstmd = DstmdDetector(RetinaConfig(), LaminaConfig(), DstmdConfig())
    hr = EmdDetector("hr", RetinaConfig(), EmdConfig())
    for det in (estmd, dstmd, hr):
        for f in frames:
            det.step(f)
        det.reset_op_counts()
        for f in frames[:4]:
            det.step(f)
    assert estmd.op_counts["correlations"] == 4 * npix
    assert per_frame_op_counts(estmd, 4)["correlations"] == npix
    assert dstmd.op_counts["directional_correlations"] == 4 * 8 * npix
    assert hr.op_counts["correlations"] == 4 * npix


def test_detector_warmup_frames():
    assert EmdDetector("hr", RetinaConfig(), EmdConfig(delay_tau=3)).warmup_frames == 3
    assert (
        EmdDetector(
            "hrbl", RetinaConfig(), EmdConfig(delay_tau=2, second_delay=5)
        ).warmup_frames == 5
    )
    est = EstmdDetector(RetinaConfig(), LaminaConfig(), tau=4)
    assert est.warmup_frames == 1 + 4


def test_config_validation():
    with pytest.raises(ValueError):
        EmdConfig(delay_tau=0)
    with pytest.raises(ValueError):
        EmdConfig(division_guard=0.0)
    with pytest.raises(ValueError):
        DstmdConfig(directions=1)
    with pytest.raises(ValueError):
        EmdDetector("nope", RetinaConfig(), EmdConfig())
