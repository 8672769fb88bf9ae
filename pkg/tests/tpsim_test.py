import json

import numpy as np
import pytest

from src.errors import ContractError, DataError, FormatError
from src.schemas.pydantic_schemas import SamplerConfig, SamplerKind
from src.tpeval import SampleSet
from src.tpsim import (
    RecurrentSampler,
    constant_velocity,
    cv_gaussian_sample,
    generate_samples,
    load_samples,
    recurrent_gaussian_sample,
    save_samples,
    train_recurrent_sampler,
)


def test_constant_velocity_extrapolates_last_step():
    history = np.stack([np.stack([np.arange(8.0), 2 * np.arange(8.0)], axis=1)])
    future = constant_velocity(history, t_pred=3)
    np.testing.assert_allclose(future[0], [[8, 16], [9, 18], [10, 20]])
    with pytest.raises(ContractError):
        constant_velocity(np.zeros((2, 1, 2)))


def test_cv_gaussian_sample(windows):
    history = windows[0].history
    config = SamplerConfig(num_samples=2000, sigma=0.3, seed=1)
    sample_set = cv_gaussian_sample(history, config)
    assert sample_set.samples.shape == (2000, 3, 12, 2)
    base = constant_velocity(history)
    np.testing.assert_array_equal(sample_set.samples[0], base)
    noise = sample_set.samples[1:] - base
    assert noise.std() == pytest.approx(0.3, rel=0.05)
    assert abs(noise.mean()) < 0.01
    again = cv_gaussian_sample(history, config)
    np.testing.assert_array_equal(again.samples, sample_set.samples)


def test_generate_samples_seed_override(windows):
    config = SamplerConfig(num_samples=5, seed=0)
    a = generate_samples(windows[0].history, config, seed=10)
    b = generate_samples(windows[0].history, config, seed=11)
    assert not np.array_equal(a.samples[1:], b.samples[1:])
    assert a.source == SamplerKind.CV_GAUSSIAN.value


def test_recurrent_sampler(windows):
    config = SamplerConfig(kind=SamplerKind.RECURRENT_GAUSSIAN, num_samples=4, seed=0)
    with pytest.raises(ContractError):
        recurrent_gaussian_sample(windows[0].history, config, RecurrentSampler())
    sampler = train_recurrent_sampler(windows, epochs=1, seed=0, hidden_dim=8, noise_dim=4)
    assert sampler.trained
    sample_set = generate_samples(windows[0].history, config, sampler=sampler, seed=3)
    assert sample_set.samples.shape == (4, 3, 12, 2)
    assert np.isfinite(sample_set.samples).all()
    assert not np.allclose(sample_set.samples[0], sample_set.samples[1])


def test_sample_file_round_trip(tmp_path):
    samples = SampleSet(np.random.default_rng(0).normal(size=(5, 2, 12, 2)), source="cv-gaussian")
    path = save_samples(samples, tmp_path / "window_00000.smp")
    header = json.loads(path.read_bytes().split(b"\n", 1)[0])
    assert header["num_samples"] == 5 and header["format_version"] == 1
    loaded = load_samples(path)
    np.testing.assert_array_equal(loaded.samples, samples.samples)
    assert loaded.source == "cv-gaussian"


def test_sample_file_errors(tmp_path):
    samples = SampleSet(np.zeros((2, 1, 12, 2)))
    path = save_samples(samples, tmp_path / "s.smp")
    raw = path.read_bytes()

    (tmp_path / "short.smp").write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        load_samples(tmp_path / "short.smp")
    (tmp_path / "noheader.smp").write_bytes(b"garbage\n" + raw)
    with pytest.raises(FormatError):
        load_samples(tmp_path / "noheader.smp")
    header, payload = raw.split(b"\n", 1)
    newer = json.dumps({**json.loads(header), "format_version": 2}).encode()
    (tmp_path / "newer.smp").write_bytes(newer + b"\n" + payload)
    with pytest.raises(FormatError):
        load_samples(tmp_path / "newer.smp")
    with pytest.raises(DataError):
        load_samples(tmp_path / "missing.smp")
