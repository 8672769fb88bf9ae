import logging

import pytest
import torch

from src.blocks import (
    FeatureBundle,
    MemoryBank,
    RSRProjection,
    SparseGraphConv,
    SpatioTemporalGCN,
    TemporalLSTM,
    TrajectoryDiscriminator,
    build_fenm,
    build_fexm,
    build_om,
    cluster_assign,
    ffm_apply,
    ffm_width,
    ipm_apply,
    ipm_channels,
    memory_query,
    rsr_project,
)
from src.errors import ContractError
from src.schemas.pydantic_schemas import BlockConfig

H, T_OBS, T_PRED = 8, 8, 12


def _scene(n=4, seed=0):
    torch.manual_seed(seed)
    return torch.randn(n, T_PRED, 2)


def test_ipm_variants():
    future = _scene()
    last = torch.zeros(4, 2)
    assert torch.equal(ipm_apply(1, future), future)
    displacement = ipm_apply(2, future, last)
    assert torch.allclose(displacement[:, 0], future[:, 0])
    assert torch.allclose(displacement[:, 1:], future[:, 1:] - future[:, :-1])
    assert ipm_apply(3, future, last).shape == (4, T_PRED, ipm_channels(3))
    with pytest.raises(ContractError):
        ipm_apply(2, future)


@pytest.mark.parametrize("variant", [1, 2, 3, 4, 5])
def test_fexm_shapes_and_permutation_equivariance(variant):
    torch.manual_seed(variant)
    block = build_fexm(BlockConfig(slot="fexm_1st", variant_id=variant, hidden_dim=H), 2, T_PRED)
    scene = _scene(5)
    out = block(scene)
    expected = (5, T_PRED, H) if block.keeps_time else (5, H)
    assert out.shape == expected

    perm = torch.tensor([3, 0, 4, 1, 2])
    assert torch.allclose(block(scene[perm]), out[perm], atol=1e-5)


@pytest.mark.parametrize("variant", [1, 3, 5])
def test_graph_fexm_handles_a_single_pedestrian(variant):
    block = build_fexm(BlockConfig(slot="fexm_2nd", variant_id=variant, hidden_dim=H), 2, T_PRED)
    assert block(_scene(1)).shape == (1, T_PRED, H)


def test_fexm_rejects_empty_scene():
    with pytest.raises(ContractError):
        SparseGraphConv(2, H)(torch.zeros(0, T_PRED, 2))


def test_sparse_adjacency_rows_are_normalised():
    block = SparseGraphConv(2, H)
    embedded = torch.randn(T_PRED, 4, H)
    adj = block.adjacency(embedded)
    assert torch.allclose(adj.sum(dim=-1), torch.ones(T_PRED, 4))
    assert (adj >= 0).all()


def test_distance_kernel_is_symmetric():
    adj = SpatioTemporalGCN.distance_kernel(torch.randn(T_PRED, 4, 2))
    assert torch.allclose(adj, adj.transpose(1, 2))


@pytest.mark.parametrize("variant", [1, 2, 3, 4])
def test_fenm_preserves_shape(variant):
    block = build_fenm(BlockConfig(slot="fenm_1st", variant_id=variant, hidden_dim=H))
    features = torch.randn(3, T_PRED, H)
    assert block(None, features).shape == features.shape


def test_temporal_lstm_degrades_on_pooled_features(caplog):
    block = TemporalLSTM(H)
    pooled = torch.randn(3, H)
    with caplog.at_level(logging.WARNING):
        out = block(None, pooled)
    assert torch.equal(out, pooled)
    assert block.degraded
    assert "FEnM_4" in caplog.text


def _assert_gradients_flow(block, inputs, output):
    output.square().sum().backward()
    for name, param in block.named_parameters():
        assert param.grad is not None, name
        assert torch.isfinite(param.grad).all(), name
    assert inputs.grad is not None and torch.isfinite(inputs.grad).all()
    assert inputs.grad.abs().sum() > 0


@pytest.mark.parametrize("variant", [1, 2, 3, 4, 5])
def test_gradients_flow_through_every_fexm(variant):
    torch.manual_seed(variant)
    block = build_fexm(BlockConfig(slot="fexm_1st", variant_id=variant, hidden_dim=H), 4, T_PRED)
    processed = torch.randn(4, T_PRED, 4, requires_grad=True)
    _assert_gradients_flow(block, processed, block(processed))


@pytest.mark.parametrize("variant", [1, 2, 3, 4])
@pytest.mark.parametrize("keeps_time", [True, False])
def test_gradients_flow_through_every_fenm(variant, keeps_time):
    torch.manual_seed(variant)
    block = build_fenm(BlockConfig(slot="fenm_1st", variant_id=variant, hidden_dim=H, keeps_time=keeps_time))
    shape = (3, T_PRED, H) if keeps_time else (3, H)
    features = torch.randn(*shape, requires_grad=True)
    _assert_gradients_flow(block, features, block(None, features))


@pytest.mark.parametrize("variant", [1, 2, 3, 4])
def test_gradients_flow_through_every_om(variant):
    torch.manual_seed(variant)
    block = build_om(BlockConfig(slot="om", variant_id=variant, hidden_dim=H), 2 * H, T_OBS)
    fused = torch.randn(3, 2 * H, requires_grad=True)
    _assert_gradients_flow(block, fused, block(fused))


def test_temporal_lstm_told_of_pooled_input_has_no_parameters():
    block = build_fenm(BlockConfig(slot="fenm_2nd", variant_id=4, hidden_dim=H, keeps_time=False))
    assert block.lstm is None and block.degraded
    assert list(block.parameters()) == []
    pooled = torch.randn(2, H)
    assert torch.equal(block(None, pooled), pooled)


def test_ffm_widths_mix_pooled_and_per_frame_features():
    bundle = FeatureBundle(
        first=torch.randn(3, T_PRED, H),
        second=torch.randn(3, H),
        first_enhanced=torch.randn(3, T_PRED, H),
        second_enhanced=torch.randn(3, H),
    )
    assert ffm_apply(1, bundle).shape == (3, ffm_width(1, H))
    assert ffm_apply(2, bundle).shape == (3, ffm_width(2, H))
    assert bundle.is_finite()


@pytest.mark.parametrize("variant", [1, 2, 3, 4])
def test_om_emits_history_shape(variant):
    block = build_om(BlockConfig(slot="om", variant_id=variant, hidden_dim=H), 2 * H, T_OBS)
    assert block(torch.randn(3, 2 * H)).shape == (3, T_OBS, 2)


def test_memory_query_nearest_items():
    items = torch.tensor([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    read = memory_query(torch.tensor([[2.0, 0.1], [0.1, 3.0]]), items)
    assert read.nearest_index.flatten().tolist() == [0, 1]
    assert torch.equal(read.nearest[0, 0], items[0])
    assert read.retrieved.shape == (2, 2)
    with pytest.raises(ContractError):
        memory_query(torch.randn(2, 2), items[:1])


def test_memory_bank_reads_per_frame_queries():
    read = MemoryBank(size=4, dim=H)(torch.randn(3, T_PRED, H))
    assert read.queries.shape == (3, T_PRED, H)
    assert read.retrieved.shape == (3, T_PRED, H)


def test_cluster_assignments_are_distributions():
    b = cluster_assign(torch.randn(5, H), torch.randn(3, H))
    assert torch.allclose(b.sum(dim=1), torch.ones(5))
    assert (b > 0).all()


def test_rsr_projection_is_orthonormal_at_init():
    rsr = RSRProjection(H)
    matrix = rsr.matrix.detach()
    assert matrix.shape == (H // 2, H)
    assert torch.allclose(matrix @ matrix.T, torch.eye(H // 2), atol=1e-5)
    in_span = torch.randn(4, H // 2) @ matrix
    _, reconstructed = rsr_project(in_span, matrix)
    assert torch.allclose(reconstructed, in_span, atol=1e-5)


def test_discriminator_checks_shapes():
    disc = TrajectoryDiscriminator(T_PRED, T_OBS, H)
    prob, feature = disc(torch.randn(3, T_PRED, 2), torch.randn(3, T_OBS, 2))
    assert prob.shape == (3,) and feature.shape == (3, H)
    assert ((prob > 0) & (prob < 1)).all()
    with pytest.raises(ContractError):
        disc(torch.randn(3, T_PRED, 2), torch.randn(3, T_PRED, 2))
