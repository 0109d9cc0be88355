import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from azil import steering as sg
from azil.targets import BinConfig

FS = 16000.0


def source(n=8000, seed=0):
    return sg.speech_like(n, FS, np.random.default_rng(seed))


def test_wrap_and_angular_error():
    assert sg.wrap_az(190.0) == -170.0 and sg.wrap_az(-180.0) == 180.0
    assert np.allclose(sg.angular_error([170.0, 10.0], [-170.0, -10.0]), [20.0, 20.0])


def test_plane_wave_delays():
    g = sg.ArrayGeometry(np.array([[0.1, 0, 0], [0, 0.1, 0]]))
    assert np.allclose(g.delays(0.0), [-0.1 / 343, 0.0])
    assert np.allclose(g.delays(90.0), [0.0, -0.1 / 343])
    assert g.delays([0.0, 45.0, 90.0]).shape == (3, 2)
    assert abs(g.max_delay() - np.sqrt(2) * 0.1 / 343) < 1e-15


def test_geometry_validation():
    with pytest.raises(ValueError):
        sg.ArrayGeometry(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        sg.ArrayGeometry(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        sg.ArrayGeometry.preset("cube")
    assert sg.ArrayGeometry.preset("glasses").n_mics == 6


def test_fractional_delay_integer_shift_is_roll():
    x = np.random.default_rng(0).normal(size=64)
    assert np.allclose(sg.fractional_delay(x, 3 / FS, FS), np.roll(x, 3), atol=1e-12)
    assert np.allclose(sg.fractional_delay(x, 0.0, FS), x, atol=1e-12)


@given(st.floats(-2e-4, 2e-4), st.floats(-2e-4, 2e-4))
def test_fractional_delays_compose(a, b):
    x = source(512)
    one = sg.fractional_delay(sg.fractional_delay(x, a, FS), b, FS)
    assert np.allclose(one, sg.fractional_delay(x, a + b, FS), atol=1e-9)


def test_speech_like_unit_rms():
    x = source(16000, 3)
    assert abs(np.sqrt(np.mean(x * x)) - 1) < 1e-12


def test_noise_level_gives_requested_snr():
    x = source(16000)
    assert abs(sg.noise_level_for_snr(x, 0.0) - 1.0) < 1e-12
    assert abs(sg.noise_level_for_snr(x, 20.0) - 0.1) < 1e-12


def test_snr_measure():
    g = np.random.default_rng(1)
    c, n = g.normal(size=4000), g.normal(size=4000)
    assert sg.snr_db(c, c, n) == sg.SNR_CAP_DB
    assert sg.snr_db(3 * c, c, n) == sg.SNR_CAP_DB
    expected = 10 * np.log10(np.sum(c**2) / np.sum(n**2))
    assert abs(sg.snr_db(c + n, c, n) - expected) < 1e-9
    assert sg.snr_db(n, np.zeros(4000), n) == -sg.SNR_CAP_DB


def test_delay_and_sum_recovers_noise_free_source():
    geo = sg.ArrayGeometry.glasses()
    x = source()
    scene = sg.synthesize_scene([(35.0, x)], geo, 0.0)
    out = sg.delay_and_sum(scene.frame, geo, 35.0)
    assert np.allclose(out, scene.clean[0], atol=1e-9)
    with pytest.raises(ValueError):
        sg.delay_and_sum(sg.MultichannelFrame(np.zeros((2, 10)), FS), geo, 0.0)


def test_delay_and_sum_averages_white_noise():
    geo = sg.ArrayGeometry.glasses()
    noise = np.random.default_rng(2).normal(size=(6, 32000))
    out = sg.delay_and_sum(sg.MultichannelFrame(noise, FS), geo, 20.0)
    assert abs(np.var(out) - 1 / 6) < 0.01


def test_single_mic_geometry():
    geo = sg.ArrayGeometry(np.zeros((1, 3)))
    frame = sg.MultichannelFrame(source(100)[None], FS)
    assert np.array_equal(sg.delay_and_sum(frame, geo, 40.0), frame.samples[0])
    for method in ("gccphat", "srp", "music"):
        with pytest.raises(ValueError):
            sg.estimate_doa(method, frame, geo)


def test_gcc_phat_integer_delay():
    x = source(4000)
    y = np.roll(x, 5)
    assert abs(sg.gcc_phat(x, y, FS) - 5 / FS) < 1e-6
    assert abs(sg.gcc_phat(y, x, FS) + 5 / FS) < 1e-6


@given(st.floats(-89, 89))
def test_doa_from_tdoa_round_trip(az):
    a, b = np.array([0.0, 0.05, 0]), np.array([0.0, -0.05, 0])
    tdoa = float((-(sg.unit_vector(az) @ b) + (sg.unit_vector(az) @ a)) / sg.SPEED_OF_SOUND)
    assert abs(sg.doa_from_tdoa(tdoa, a, b) - az) < 1e-6


@pytest.mark.parametrize("az", [-80.0, -37.5, 0.0, 12.0, 64.0, 89.0])
@pytest.mark.parametrize("method", ["gccphat", "srp", "music"])
def test_noise_free_doa(method, az):
    geo = sg.ArrayGeometry.glasses()
    scene = sg.synthesize_scene([(az, source(8000, 4))], geo, 0.0)
    est = sg.estimate_doa(method, scene.frame, geo)
    assert sg.angular_error(est[0], az) <= 2.0


def test_music_two_sources():
    geo = sg.ArrayGeometry.glasses()
    scene = sg.synthesize_scene([(-40.0, source(16000, 5)), (50.0, source(16000, 6))], geo, 0.0)
    est = sorted(sg.music(scene.frame, geo, 2))
    assert abs(est[0] + 40) <= 3 and abs(est[1] - 50) <= 3
    assert sg.music(scene.frame, geo, 0) == []
    with pytest.raises(ValueError):
        sg.music(scene.frame, geo, 6)


def test_srp_confidence_flags_noise():
    geo = sg.ArrayGeometry.glasses()
    g = np.random.default_rng(7)
    res = sg.srp_phat(sg.MultichannelFrame(g.normal(size=(6, 16000)), FS), geo)
    clean = sg.srp_phat(sg.synthesize_scene([(10.0, source())], geo, 0.0).frame, geo)
    assert clean.confidence > res.confidence and not clean.low_confidence


def test_steer_from_zones():
    cfg = BinConfig()
    assert sg.steer_from_zones([0, 0, 1, 0, 0, 1], cfg) == [float(cfg.centers[2]), float(cfg.centers[5])]
    assert sg.steer_from_zones([0] * 6, cfg) == [0.0]
    with pytest.raises(ValueError):
        sg.steer_from_zones([1, 0], cfg)


def test_synthesize_scene_validation():
    geo = sg.ArrayGeometry.glasses()
    with pytest.raises(ValueError):
        sg.synthesize_scene([], geo, 0.0)
    with pytest.raises(ValueError):
        sg.synthesize_scene([(0.0, np.ones(10)), (5.0, np.ones(11))], geo, 0.0)
    with pytest.raises(ValueError):
        sg.synthesize_scene([(0.0, np.ones(10))], geo, 1.0)


def test_compare_methods_reference_matches_input_snr():
    geo = sg.ArrayGeometry.glasses()
    g = np.random.default_rng(8)
    x = sg.speech_like(16000, FS, g)
    scene = sg.synthesize_scene([(30.0, x)], geo, sg.noise_level_for_snr(x, 5.0), g)
    res = {r.method: r for r in sg.compare_methods(scene, geo)}
    assert set(res) == set(sg.METHODS)
    assert abs(res["reference"].snr_db - 5.0) < 0.3
    assert res["zones"].snr_db > res["reference"].snr_db
