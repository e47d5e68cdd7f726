import math

import numpy as np
import pytest

import nae


def tiny(seed=0, name="source"):
    cfg = nae.ModelConfig.tiny()
    cfg.seed = seed
    cfg.name = name
    return cfg


def test_encode_shape_and_positivity():
    model = nae.Model(tiny())
    x = np.random.default_rng(0).standard_normal(1000) * 0.1
    h = model.encode(x)
    assert h.shape == (8, math.ceil(1000 / 16))
    assert (h > 0).all()
    y = model.forward(x)
    assert y.shape == x.shape
    assert np.isfinite(y).all()


def test_default_param_arithmetic():
    m = nae.Model(nae.ModelConfig())
    assert nae.inference_param_count(16000, [m], "decoder") == 32000
    assert nae.inference_param_count(16000, [m], "full") == 16000


def test_checkpoint_roundtrip(tmp_path):
    model = nae.Model(tiny(seed=3, name="tonal"))
    path = tmp_path / "m.nae"
    model.save(path)
    again = nae.Model.load(path)
    assert again.config.name == "tonal"
    x = np.sin(np.arange(800) * 0.05)
    np.testing.assert_array_equal(model.forward(x), again.forward(x))


def test_corrupt_checkpoint_raises():
    blob = nae.Model(tiny()).serialize()
    with pytest.raises(nae.FormatError):
        nae.Model.deserialize(blob[: len(blob) // 2])


def test_sisdr_and_ratio():
    rng = np.random.default_rng(1)
    s = rng.standard_normal(512)
    assert nae.sisdr(s, s) == pytest.approx(100.0)
    assert nae.sisdr(3.0 * s, s) == pytest.approx(nae.sisdr(s, s))
    assert nae.sdr_ratio(np.array([3.0, 4.0]), np.array([1.0, 0.0])) == pytest.approx(0.36)


def test_boxplot():
    st = nae.boxplot_stats([1, 2, 3, 4, 5])
    assert (st["median"], st["q25"], st["q75"]) == (3, 2, 4)


def test_mix_at_snr():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal(1000), rng.standard_normal(1000)
    mix, scaled, gains = nae.mix_at_snr([a, b], 3.0)
    snr = 10 * np.log10(np.sum(scaled[0] ** 2) / np.sum(scaled[1] ** 2))
    assert snr == pytest.approx(3.0, abs=1e-9)
    np.testing.assert_allclose(mix, scaled[0] + scaled[1], atol=1e-15)


def test_train_and_separate_runs():
    corpus = nae.synth_corpus("tonal", 8.0, 16000, 1)
    model = nae.Model(tiny(seed=1, name="tonal"))
    tc = nae.TrainConfig()
    tc.epochs = 2
    tc.learning_rate = 3e-3
    init, hist = nae.train_generative(model, corpus, tc)
    assert len(hist) == 2 and all(math.isfinite(h) for h in hist)

    ic = nae.InferenceConfig()
    ic.iterations = 5
    mixture = corpus[0][:8000]
    out = nae.separate(mixture, [model], ic)
    assert out["names"] == ["tonal"]
    assert out["estimates"][0].shape == mixture.shape
    assert len(out["objective_history"]) == 6
    with pytest.raises(nae.ConfigError):
        ic.mode = "sideways"


def test_wav_roundtrip(tmp_path):
    x = np.linspace(-0.5, 0.5, 101)
    nae.write_wav(tmp_path / "a.wav", x, 16000)
    y, rate = nae.read_wav(tmp_path / "a.wav")
    assert rate == 16000
    assert np.max(np.abs(x - y)) <= 1 / 32768
