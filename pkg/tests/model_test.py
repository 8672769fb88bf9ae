import numpy as np
import pytest
import torch

from src.data import make_negatives
from src.data.synthetic import make_synthetic_windows
from src.errors import ContractError, DecodeError, FormatError
from src.model import (
    SEQUENCE_LENGTH,
    SLOT_OPTION_COUNTS,
    TADModel,
    build,
    decode,
    describe_spec,
    encode,
    iterate_architectures,
    iterate_lambda_settings,
    load_checkpoint,
    make_spec,
    manual_presets,
    parse_sequence,
    save_checkpoint,
)
from src.schemas.pydantic_schemas import COMPONENT_NAMES
from src.search import sample_uniform_sequences

# every slot at its first option, except that the output error also scores
OUT_ONLY = [0] * 15 + [1] + [0] * 7


def test_search_space_cardinality():
    assert SEQUENCE_LENGTH == 23
    assert sum(1 for _ in iterate_architectures()) == 9600
    assert sum(1 for _ in iterate_lambda_settings()) == 49152
    assert int(np.prod(SLOT_OPTION_COUNTS[:7])) == 9600


def test_decode_encode_round_trip_on_masked_sequences():
    for sequence in sample_uniform_sequences(np.random.default_rng(0), 200):
        assert encode(decode(sequence)) == sequence.tolist()


def test_decode_values():
    spec = decode([1, 2, 0, 3, 1, 0, 3] + [2, 1, 0, 0, 3, 0, 0, 0] + [1, 1, 0, 0, 1, 0, 0, 0])
    assert spec.architecture == (2, 3, 1, 4, 2, 1, 4)
    assert spec.lambdas == (1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
    assert spec.gammas == (1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
    assert spec.auxiliaries.memory and spec.auxiliaries.discriminator
    assert not spec.auxiliaries.rsr


def test_decode_coerces_gamma_of_zero_lambda():
    sequence = [0] * 7 + [0] * 8 + [1] * 8
    spec = decode(sequence)
    assert spec.gammas == (0.1,) + (0.0,) * 7
    assert encode(spec) == [0] * 15 + [1] + [0] * 7


@pytest.mark.parametrize(
    "sequence",
    [[0] * 22, [0] * 24, [3] + [0] * 22, [0] * 7 + [3] + [0] * 15, [0] * 22 + [2], [-1] + [0] * 22, [0.5] + [0] * 22],
)
def test_decode_rejects_invalid_sequences(sequence):
    with pytest.raises(DecodeError):
        decode(sequence)


def test_parse_sequence():
    assert parse_sequence(",".join(map(str, OUT_ONLY))) == OUT_ONLY
    with pytest.raises(DecodeError):
        parse_sequence("1,2,x")


def test_presets_share_the_backbone():
    presets = manual_presets()
    assert set(presets) == {"mnad", "pnet", "rsrae", "gepc", "mnad_gepc"}
    assert len({p.architecture for p in presets.values()}) == 1
    assert presets["mnad"].auxiliaries.memory
    assert presets["pnet"].auxiliaries.discriminator
    assert presets["rsrae"].auxiliaries.rsr
    assert presets["gepc"].auxiliaries.clustering
    both = presets["mnad_gepc"]
    assert both.auxiliaries.memory and both.auxiliaries.clustering
    named = dict(zip(COMPONENT_NAMES, zip(both.lambdas, both.gammas)))
    assert all(lam > 0 and gam > 0 for lam, gam in (named["com"], named["clu"]))
    with pytest.raises(DecodeError):
        make_spec((1,) * 7, {"out": 0.5}, {})


def test_describe_spec_names_blocks_and_sequence():
    text = describe_spec(manual_presets()["mnad"])
    assert "FEXM_1ST" in text
    assert "memory" in text
    assert ",".join(str(v) for v in encode(manual_presets()["mnad"])) in text


def _random_specs(count, seed):
    specs = []
    for sequence in sample_uniform_sequences(np.random.default_rng(seed), count * 3):
        spec = decode(sequence)
        if any(spec.gammas):
            specs.append(spec)
    return specs[:count]


@pytest.mark.parametrize("index", range(6))
def test_random_specs_build_and_score(windows, index):
    spec = _random_specs(6, seed=11)[index]
    model = build(spec, hidden_dim=8, seed=0, memory_size=4, n_clusters=3)
    window = windows[0]
    out = model(torch.as_tensor(window.future, dtype=torch.float32), torch.as_tensor(window.history, dtype=torch.float32))
    assert out.predicted.shape == window.history.shape
    scores = model.score(window.future, window.history)
    assert scores.shape == (window.num_pedestrians,)
    assert scores.dtype == np.float64
    assert np.isfinite(scores).all()


def test_score_leaves_parameters_untouched_and_is_deterministic(windows):
    model = build(manual_presets()["mnad"], hidden_dim=8, seed=0, memory_size=4)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    first = model.score_window(windows[0])
    second = model.score_window(windows[0])
    np.testing.assert_array_equal(first, second)
    for key, value in model.state_dict().items():
        assert torch.equal(value, before[key])


def test_score_is_translation_invariant(windows):
    model = build(decode(OUT_ONLY), hidden_dim=8, seed=0)
    window = windows[1]
    shift = np.array([25.0, -40.0])
    np.testing.assert_allclose(
        model.score(window.future + shift, window.history + shift),
        model.score(window.future, window.history),
        rtol=1e-3, atol=1e-3,
    )


def test_score_is_permutation_equivariant(windows):
    model = build(manual_presets()["gepc"], hidden_dim=8, seed=0, n_clusters=3)
    window = windows[2]
    perm = np.array([2, 0, 1])
    np.testing.assert_allclose(
        model.score(window.future[perm], window.history[perm]),
        model.score(window.future, window.history)[perm],
        rtol=1e-4, atol=1e-5,
    )


def test_forward_rejects_mismatched_shapes():
    model = build(decode(OUT_ONLY), hidden_dim=8)
    with pytest.raises(ContractError):
        model(torch.zeros(2, 12, 2), torch.zeros(3, 8, 2))


def test_same_seed_builds_identical_models():
    a = build(manual_presets()["pnet"], hidden_dim=8, seed=3)
    b = build(manual_presets()["pnet"], hidden_dim=8, seed=3)
    for (name, pa), (_, pb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert torch.equal(pa, pb), name


@pytest.mark.parametrize("preset", ["mnad", "pnet", "rsrae", "gepc", "mnad_gepc"])
def test_fit_runs_and_records_history(windows, preset):
    model = build(manual_presets()[preset], hidden_dim=8, seed=0, memory_size=4, n_clusters=3)
    losses = model.fit(windows, epochs=2, lr=1e-3, seed=0)
    assert len(losses) == 2
    assert np.isfinite(losses).all()
    assert model.epochs_trained == 2
    with pytest.raises(ContractError):
        model.fit([], epochs=1)


def test_fit_reduces_output_error(windows):
    model = build(decode(OUT_ONLY), hidden_dim=16, seed=0)
    losses = model.fit(windows, epochs=15, lr=1e-2, seed=0)
    assert losses[-1] < losses[0]


def test_checkpoint_round_trip(tmp_path, windows):
    model = build(manual_presets()["rsrae"], hidden_dim=8, seed=0)
    model.fit(windows[:2], epochs=1)
    path = save_checkpoint(model, tmp_path / "final.pt")
    assert (tmp_path / "final.txt").read_text().startswith("architecture:")
    loaded = load_checkpoint(path)
    assert isinstance(loaded, TADModel)
    assert loaded.epochs_trained == 1
    np.testing.assert_allclose(loaded.score_window(windows[3]), model.score_window(windows[3]))

    (tmp_path / "broken.pt").write_bytes(b"not a checkpoint")
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "broken.pt")


def test_fit_is_deterministic_for_a_seed(windows):
    histories = []
    for _ in range(2):
        model = build(manual_presets()["mnad_gepc"], hidden_dim=8, seed=2, memory_size=4, n_clusters=3)
        histories.append(model.fit(windows, epochs=2, lr=1e-3, seed=5))
    assert histories[0] == histories[1]


def test_fit_with_zero_epochs_changes_nothing(windows):
    model = build(manual_presets()["pnet"], hidden_dim=8, seed=0)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    assert model.fit(windows, epochs=0) == []
    assert model.epochs_trained == 0 and model.loss_history == []
    for key, value in model.state_dict().items():
        assert torch.equal(value, before[key]), key


@pytest.mark.parametrize("fexm", range(1, 6))
@pytest.mark.parametrize("fenm", range(1, 5))
@pytest.mark.parametrize("om", range(1, 5))
def test_every_block_combination_keeps_the_shape_contract(fexm, fenm, om):
    spec = make_spec((3, fexm, fexm, fenm, fenm, 1, om), {"out": 1.0}, {"out": 1.0})
    model = build(spec, hidden_dim=8, seed=0)
    for n in (1, 2, 5):
        window = make_synthetic_windows(1, n_pedestrians=n, seed=n)[0]
        out = model(torch.as_tensor(window.future, dtype=torch.float32), torch.as_tensor(window.history, dtype=torch.float32))
        assert out.predicted.shape == (n, 8, 2)
        scores = model.score_window(window)
        assert scores.shape == (n,)
        assert np.isfinite(scores).all()


@pytest.mark.parametrize("fexm", [2, 4])
def test_pooled_extractor_feeding_lstm_enhancer_builds_no_lstm(fexm):
    model = build(make_spec((1, fexm, 3, 4, 4, 1, 3), {"out": 1.0}, {"out": 1.0}), hidden_dim=8)
    assert model.fenm_1st.lstm is None
    assert model.block_configs["fenm_1st"].keeps_time is False
    assert not any(name.startswith("fenm_1st.") for name, _ in model.named_parameters())
    # the second branch keeps time, so its LSTM is real
    assert model.fenm_2nd.lstm is not None


def test_trained_model_scores_perturbed_futures_higher():
    spec = make_spec((1, 2, 2, 1, 1, 2, 3), {"out": 1.0}, {"out": 1.0})
    train = make_synthetic_windows(48, n_pedestrians=5, seed=21, max_turn=0.0)
    held = make_synthetic_windows(40, n_pedestrians=5, seed=22, max_turn=0.0)
    model = build(spec, hidden_dim=32, seed=0)
    model.fit(train, epochs=40, lr=2e-3, seed=0)

    negatives = make_negatives(held, noise_bound=0.1, seed=3)
    lower = [
        model.score_window(window).mean() < model.score_window(negative).mean()
        for window, negative in zip(held, negatives)
    ]
    assert np.mean(lower) >= 0.65
