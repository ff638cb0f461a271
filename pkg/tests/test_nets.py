import numpy as np
import pytest
import torch
import torch.nn as nn

from catstyle.config import ExperimentConfig
from catstyle.nets import (
    Critic,
    Discriminator,
    ResBlock,
    arch_hash,
    build_models,
    encode,
    encode_dataset,
    load_checkpoint,
    save_checkpoint,
)


def cfg_for(size, k=10, style_dim=50, seed=0):
    return ExperimentConfig(
        dataset_name="image_folder" if size != 28 else "mnist",
        num_clusters=k,
        style_dim=style_dim,
        image_size=(size, size),
        seed=seed,
    )


def rand_batch(size, m=4, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, size=(m, size, size)).astype(np.float32)


class TestArchitectures:
    def test_28_has_two_stride2_convs_then_dense_1024(self):
        encoder, _, _ = build_models(cfg_for(28))
        convs = [m for m in encoder.conv if isinstance(m, nn.Conv2d)]
        assert len(convs) == 2
        assert all(m.stride == (2, 2) for m in convs)
        assert (convs[0].out_channels, convs[1].out_channels) == (64, 128)
        assert encoder.dense[0].in_features == 128 * 7 * 7
        assert encoder.dense[0].out_features == 1024

    def test_32_has_three_down_blocks_plus_one_plain(self):
        encoder, _, _ = build_models(cfg_for(32))
        downs = list(encoder.down_blocks)
        assert [b.conv2.out_channels for b in downs] == [128, 256, 512]
        assert all(b.down for b in downs)
        assert not encoder.last_block.down
        assert encoder.last_block.conv2.out_channels == 512
        assert encoder.feature_dim == 512 * 4 * 4

    def test_96_feature_width(self):
        encoder, _, _ = build_models(cfg_for(96, k=4, style_dim=6))
        assert len(list(encoder.down_blocks)) == 4
        assert encoder.feature_dim == 512 * 6 * 6
        z_c, z_s, feat = encode(encoder, rand_batch(96, m=2))
        assert z_c.shape == (2, 4)
        assert feat.shape == (2, 512 * 6 * 6)

    def test_critic_input_length_is_k_plus_style(self):
        _, _, critic = build_models(cfg_for(28, k=10, style_dim=50))
        assert critic.net[0].in_features == 60

    def test_discriminator_consumes_features_plus_latent(self):
        encoder, disc, _ = build_models(cfg_for(28, k=10, style_dim=50))
        assert disc.net[0].in_features == encoder.feature_dim + 60

    def test_unsupported_size_rejected(self):
        with pytest.raises(ValueError, match="unsupported image size"):
            build_models(ExperimentConfig(dataset_name="image_folder", image_size=(40, 40)))

    def test_lrelu_slope(self):
        encoder, disc, critic = build_models(cfg_for(28))
        slopes = {m.negative_slope for net in (encoder.conv, disc.net, critic.net)
                  for m in net if isinstance(m, nn.LeakyReLU)}
        assert slopes == {0.2}


class TestEncode:
    @pytest.mark.parametrize("size", [28, 32])
    def test_simplex_rows_and_shapes(self, size):
        encoder, _, _ = build_models(cfg_for(size, k=7, style_dim=9))
        z_c, z_s, feat = encode(encoder, rand_batch(size, m=5))
        assert z_c.shape == (5, 7)
        assert z_s.shape == (5, 9)
        assert feat.shape == (5, encoder.feature_dim)
        assert torch.all(z_c >= 0)
        assert torch.allclose(z_c.sum(dim=1), torch.ones(5), atol=1e-6)

    def test_repeated_call_is_deterministic(self):
        encoder, _, _ = build_models(cfg_for(28))
        batch = rand_batch(28, m=3, seed=1)
        a = encode(encoder, batch)
        b = encode(encoder, batch)
        for x, y in zip(a, b):
            assert torch.equal(x, y)

    def test_style_dim_zero_supported(self):
        encoder, _, critic = build_models(cfg_for(28, k=4, style_dim=0))
        z_c, z_s, _ = encode(encoder, rand_batch(28, m=3))
        assert z_s.shape == (3, 0)
        assert critic.net[0].in_features == 4

    def test_seeded_init_reproducible(self):
        e1, _, _ = build_models(cfg_for(28, seed=11))
        e2, _, _ = build_models(cfg_for(28, seed=11))
        for p1, p2 in zip(e1.parameters(), e2.parameters()):
            assert torch.equal(p1, p2)


class TestHeads:
    def test_discriminator_returns_one_logit_per_pair(self):
        disc = Discriminator(12, 6)
        out = disc(torch.randn(9, 12), torch.randn(9, 6))
        assert out.shape == (9,)

    def test_zeroed_final_layer_gives_zero_logits(self):
        disc = Discriminator(5, 3)
        nn.init.zeros_(disc.net[-1].weight)
        nn.init.zeros_(disc.net[-1].bias)
        out = disc(torch.randn(4, 5), torch.randn(4, 3))
        assert torch.equal(out, torch.zeros(4))

    def test_permuting_pairs_permutes_logits(self):
        torch.manual_seed(0)
        disc = Discriminator(5, 3)
        feats, z = torch.randn(6, 5), torch.randn(6, 3)
        perm = torch.tensor([3, 1, 5, 0, 2, 4])
        assert torch.allclose(disc(feats, z)[perm], disc(feats[perm], z[perm]))

    def test_critic_scalar_per_vector_and_deterministic(self):
        torch.manual_seed(0)
        critic = Critic(8)
        z = torch.randn(7, 8)
        out = critic(z)
        assert out.shape == (7,)
        assert torch.equal(out, critic(z))

    def test_zeroed_final_critic_layer_gives_zeros(self):
        critic = Critic(4)
        nn.init.zeros_(critic.net[-1].weight)
        nn.init.zeros_(critic.net[-1].bias)
        assert torch.equal(critic(torch.randn(5, 4)), torch.zeros(5))


def test_resblock_downsamples_by_two():
    block = ResBlock(3, 8, down=True)
    out = block(torch.randn(2, 3, 16, 16))
    assert out.shape == (2, 8, 8, 8)


def test_gradients_finite_after_one_backward():
    encoder, disc, critic = build_models(cfg_for(28, k=3, style_dim=4))
    z_c, z_s, feat = encode(encoder, rand_batch(28, m=4))
    z = torch.cat([z_c, z_s], dim=1)
    loss = disc(feat, z).mean() + critic(z).mean() + z_c.sum() + z_s.pow(2).sum()
    loss.backward()
    for model in (encoder, disc, critic):
        for name, p in model.named_parameters():
            assert p.grad is not None, name
            assert torch.isfinite(p.grad).all(), name


class TestCheckpoint:
    def test_round_trip_reproduces_eval_outputs_exactly(self, tmp_path):
        config = cfg_for(28, k=3, style_dim=4)
        encoder, disc, critic = build_models(config)
        batch = rand_batch(28, m=6, seed=2)
        encoder.eval()
        before = encode_dataset(encoder, batch)
        save_checkpoint(tmp_path / "ck.pt", config, encoder, disc, critic, step=17)
        payload = load_checkpoint(tmp_path / "ck.pt")
        after = encode_dataset(payload["encoder"], batch)
        assert payload["step"] == 17
        assert payload["config"] == config
        assert np.array_equal(before[0], after[0])
        assert np.array_equal(before[1], after[1])

    def test_arch_hash_tracks_architecture_fields(self):
        assert arch_hash(cfg_for(28, k=3)) != arch_hash(cfg_for(28, k=4))
        assert arch_hash(cfg_for(28, k=3)) == arch_hash(cfg_for(28, k=3, seed=99))
