import numpy as np
import pytest
import torch

from src.errors import ConfigurationError, ContractError
from src.losses import (
    LossVector,
    anomaly_score,
    cluster_target,
    loss_adv,
    loss_cluster,
    loss_fea,
    loss_memory,
    loss_out,
    loss_rsr,
    training_loss,
)

rng = np.random.default_rng(7)


def _t(*shape, requires_grad=False):
    return torch.tensor(rng.normal(size=shape), requires_grad=requires_grad)


@pytest.fixture(autouse=True, scope="module")
def _double_precision():
    previous = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(previous)


def test_loss_out_matches_direct_formula():
    history, predicted = _t(4, 8, 2), _t(4, 8, 2)
    expected = [np.sqrt(((h - p) ** 2).sum()) for h, p in zip(history.numpy(), predicted.numpy())]
    np.testing.assert_allclose(loss_out(history, predicted).numpy(), expected, atol=1e-9)
    assert torch.equal(loss_out(history, history.clone()), torch.zeros(4))
    with pytest.raises(ContractError):
        loss_out(history, predicted[:, :4])


def test_loss_adv_and_fea():
    prob = torch.tensor([0.25, 0.9, 0.0])
    np.testing.assert_allclose(loss_adv(prob).numpy(), [-np.log(0.25), -np.log(0.9), -np.log(1e-6)], atol=1e-9)
    real, fake = _t(3, 5), _t(3, 5)
    np.testing.assert_allclose(
        loss_fea(real, fake).numpy(), np.linalg.norm(real.numpy() - fake.numpy(), axis=1), atol=1e-9
    )


def test_loss_memory_matches_direct_formula():
    q, p, s = _t(3, 2, 4), _t(3, 2, 4), _t(3, 2, 4)
    compactness, separateness = loss_memory(q, p, s, margin=1.0)
    qn, pn, sn = q.numpy(), p.numpy(), s.numpy()
    d_p = np.linalg.norm(qn - pn, axis=-1)
    d_n = np.linalg.norm(qn - sn, axis=-1)
    np.testing.assert_allclose(compactness.numpy(), ((qn - pn) ** 2).sum(axis=(1, 2)), atol=1e-9)
    np.testing.assert_allclose(separateness.numpy(), np.maximum(d_p - d_n + 1.0, 0).sum(axis=1), atol=1e-9)
    _, raw = loss_memory(q, p, s, hinged=False)
    np.testing.assert_allclose(raw.numpy(), (d_p - d_n).sum(axis=1), atol=1e-9)
    with pytest.raises(ContractError):
        loss_memory(q, p, None)


def test_cluster_loss_matches_kl_and_vanishes_at_fixed_point():
    logits = _t(5, 3)
    b = torch.softmax(logits, dim=1)
    bn = b.numpy()
    weight = bn ** 2 / bn.sum(axis=0, keepdims=True)
    d = weight / weight.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(cluster_target(b).numpy(), d, atol=1e-12)
    np.testing.assert_allclose(loss_cluster(b).numpy(), (bn * np.log(bn / d)).sum(axis=1), atol=1e-9)

    uniform = torch.full((4, 3), 1.0 / 3.0)
    assert torch.allclose(loss_cluster(uniform), torch.zeros(4), atol=1e-12)
    one_hot = torch.eye(3)[[0, 1, 2, 1]]
    assert torch.equal(loss_cluster(one_hot), torch.zeros(4))


def test_rsr_terms():
    fused, matrix = _t(4, 6), _t(3, 6)
    residual, structure = loss_rsr(fused, matrix)
    f, a = fused.numpy(), matrix.numpy()
    np.testing.assert_allclose(residual.numpy(), ((f - f @ a.T @ a) ** 2).sum(axis=1), atol=1e-9)
    np.testing.assert_allclose(structure.numpy(), np.full(4, ((a @ a.T - np.eye(3)) ** 2).sum()), atol=1e-9)

    q, _ = torch.linalg.qr(_t(6, 3))
    orthonormal = q.T
    in_span = _t(4, 3) @ orthonormal
    residual, structure = loss_rsr(in_span, orthonormal)
    assert torch.allclose(residual, torch.zeros(4), atol=1e-12)
    assert torch.allclose(structure, torch.zeros(4), atol=1e-12)
    with pytest.raises(ContractError):
        loss_rsr(fused, _t(3, 5))


@pytest.mark.parametrize(
    "component",
    [
        lambda x, y: loss_out(x, y),
        lambda x, y: loss_fea(x.reshape(4, -1), y.reshape(4, -1)),
        lambda x, y: loss_memory(x, y, y.flip(0))[0],
        lambda x, y: loss_memory(x, y, y.flip(0))[1],
        lambda x, y: loss_cluster(torch.softmax((x + y).reshape(4, -1), dim=1)),
        lambda x, y: loss_rsr(x.reshape(4, -1), y.reshape(4, -1)[:3])[0],
        lambda x, y: loss_rsr(x.reshape(4, -1), y.reshape(4, -1)[:3])[1],
    ],
)
def test_gradients_match_finite_differences(component):
    x, y = _t(4, 3, 2, requires_grad=True), _t(4, 3, 2, requires_grad=True)
    assert torch.autograd.gradcheck(lambda a, b: component(a, b).sum(), (x, y), eps=1e-6, atol=1e-6, rtol=1e-4)


def test_loss_adv_gradient():
    prob = torch.tensor([0.2, 0.5, 0.7], requires_grad=True)
    assert torch.autograd.gradcheck(lambda p: loss_adv(p).sum(), (prob,), eps=1e-6, atol=1e-6, rtol=1e-4)


def test_weighted_combinations_skip_zero_rows():
    components = torch.arange(16, dtype=torch.float64).reshape(8, 2)
    components[3] = float("nan")
    vector = LossVector(components)
    lambdas = [1.0, 0.1, 0, 0, 0, 0, 0, 0.01]
    expected = components[0] + 0.1 * components[1] + 0.01 * components[7]
    assert torch.allclose(anomaly_score(vector, lambdas), expected)
    assert torch.isclose(training_loss(vector, lambdas), expected.mean())
    assert vector.first_non_finite() == "com"
    assert torch.equal(vector.row("adv"), components[1])
    with pytest.raises(ConfigurationError):
        anomaly_score(vector, [0.0] * 8)


def test_zero_weight_terms_are_bit_identical_to_omitted_terms():
    components = _t(8, 5).abs()
    omitted = components.clone()
    omitted[[2, 4, 6]] = 0.0
    weights = [1.0, 0.1, 0.0, 0.01, 0.0, 1.0, 0.0, 0.1]
    for combine in (anomaly_score, training_loss):
        assert torch.equal(combine(LossVector(components), weights), combine(LossVector(omitted), weights))
    direct = 1.0 * components[0] + 0.1 * components[1] + 0.01 * components[3] + 1.0 * components[5] + 0.1 * components[7]
    assert torch.equal(anomaly_score(LossVector(components), weights), direct)


@pytest.mark.parametrize("row", range(8))
def test_anomaly_score_is_monotone_in_each_weighted_component(row):
    components = _t(8, 4).abs()
    gammas = [1.0, 0.1, 0.1, 0.01, 0.0, 1.0, 0.01, 0.1]
    base = anomaly_score(LossVector(components), gammas)
    raised = components.clone()
    raised[row] += torch.tensor([0.5, 1.0, 2.0, 4.0])
    after = anomaly_score(LossVector(raised), gammas)
    if gammas[row] > 0:
        assert (after > base).all()
        assert (torch.diff(after - base) > 0).all()
    else:
        assert torch.equal(after, base)
