import numpy as np
import pytest

from mdmf.baselines import (PatchClassifier, VOTING_THRESHOLDS, bce_loss_and_grad,
                            dense_voting_grid, pooled_score, train_patch_classifier,
                            voting_score)
from mdmf.embeddings import EmbeddingDataset, LABEL_GENERATED, LABEL_REAL, PatchEmbeddingField
from mdmf.train import TrainConfig


def logit(p):
    return np.log(p / (1.0 - p))


def separable_pools(rng, n=64, patch_count=4, embed_dim=3, gap=4.0):
    real = rng.standard_normal((n, patch_count, embed_dim))
    fake = rng.standard_normal((n, patch_count, embed_dim))
    fake[:, :, 0] += gap
    return (EmbeddingDataset(real.astype(np.float32), [LABEL_REAL] * n),
            EmbeddingDataset(fake.astype(np.float32), [LABEL_GENERATED] * n))


class TestTraining:
    def test_loss_decreases_on_separable_data(self, rng):
        real, fake = separable_pools(rng)
        all_patches = np.concatenate([real.fields_f64(), fake.fields_f64()]
                                     ).reshape(-1, real.embed_dim)
        targets = np.repeat([0.0, 1.0], real.n_records * real.patch_count)

        losses = []
        for epochs in (1, 3, 6, 10):
            cfg = TrainConfig(epochs=epochs, batch_size=32, learning_rate=0.05, seed=1)
            clf = train_patch_classifier(real, fake, cfg)
            losses.append(bce_loss_and_grad(clf.weight, clf.bias, all_patches,
                                            targets)[0])
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_zero_learning_rate_is_noop(self, rng):
        real, fake = separable_pools(rng)
        cfg = TrainConfig(epochs=2, batch_size=32, learning_rate=0.0, seed=2)
        clf = train_patch_classifier(real, fake, cfg)
        assert np.all(clf.weight == 0.0) and clf.bias == 0.0

    def test_deterministic_under_seed(self, rng):
        real, fake = separable_pools(rng)
        cfg = TrainConfig(epochs=2, batch_size=32, learning_rate=0.05, seed=3)
        a = train_patch_classifier(real, fake, cfg)
        b = train_patch_classifier(real, fake, cfg)
        assert np.array_equal(a.weight, b.weight) and a.bias == b.bias

    def test_bce_gradient_matches_finite_differences(self, rng):
        patches = rng.standard_normal((40, 5))
        targets = rng.integers(0, 2, 40).astype(float)
        weight = rng.standard_normal(5) * 0.3
        bias = 0.1
        _, g_w, g_b = bce_loss_and_grad(weight, bias, patches, targets)
        eps = 1e-6
        for i in range(5):
            up, down = weight.copy(), weight.copy()
            up[i] += eps
            down[i] -= eps
            fd = (bce_loss_and_grad(up, bias, patches, targets)[0]
                  - bce_loss_and_grad(down, bias, patches, targets)[0]) / (2 * eps)
            assert abs(g_w[i] - fd) / max(abs(fd), 1e-6) < 1e-4
        fd_b = (bce_loss_and_grad(weight, bias + eps, patches, targets)[0]
                - bce_loss_and_grad(weight, bias - eps, patches, targets)[0]) / (2 * eps)
        assert abs(g_b - fd_b) / max(abs(fd_b), 1e-6) < 1e-4


class TestVoting:
    def test_threshold_zero_flags_everything(self, rng):
        clf = PatchClassifier(rng.standard_normal(3), 0.0)
        field = PatchEmbeddingField(rng.standard_normal((6, 3)))
        assert voting_score(field, clf, 0.0) == 1.0

    def test_threshold_one_flags_nothing(self, rng):
        clf = PatchClassifier(rng.standard_normal(3), 0.0)
        field = PatchEmbeddingField(rng.standard_normal((6, 3)))
        assert voting_score(field, clf, 1.0) == 0.0

    def test_hand_counted_ratio(self):
        # patch values chosen so sigmoid(logit) hits 0.1/0.3/0.6/0.9 exactly
        clf = PatchClassifier(np.array([1.0]), 0.0)
        field = PatchEmbeddingField(np.array([[logit(p)] for p in (0.1, 0.3, 0.6, 0.9)]))
        assert voting_score(field, clf, 0.5) == 0.5

    def test_non_increasing_in_threshold(self, rng):
        clf = PatchClassifier(rng.standard_normal(3), 0.1)
        field = PatchEmbeddingField(rng.standard_normal((10, 3)))
        ratios = [voting_score(field, clf, t) for t in VOTING_THRESHOLDS]
        assert all(a >= b for a, b in zip(ratios, ratios[1:]))

    def test_dense_grid_covers_standard_thresholds(self):
        grid = dense_voting_grid()
        assert grid[0] == 0.01 and grid[-1] == 0.50
        assert np.allclose(np.diff(grid), 0.01)
        assert set(VOTING_THRESHOLDS) <= set(np.round(grid, 2))


class TestPooling:
    def test_single_patch_all_modes_agree(self, rng):
        clf = PatchClassifier(rng.standard_normal(3), -0.2)
        field = PatchEmbeddingField(rng.standard_normal((1, 3)))
        expected = float(clf.logits(field)[0])
        assert pooled_score(field, clf, "mean") == expected
        assert pooled_score(field, clf, "max") == expected
        assert pooled_score(field, clf, "topk", top_k=1) == expected

    def test_hand_computed_aggregates(self):
        clf = PatchClassifier(np.array([1.0]), 0.0)
        field = PatchEmbeddingField(np.array([[1.0], [2.0], [3.0], [4.0]]))
        assert pooled_score(field, clf, "mean") == 2.5
        assert pooled_score(field, clf, "max") == 4.0
        assert pooled_score(field, clf, "topk", top_k=2) == 3.5

    def test_topk_full_equals_mean(self, rng):
        clf = PatchClassifier(rng.standard_normal(3), 0.0)
        field = PatchEmbeddingField(rng.standard_normal((7, 3)))
        assert pooled_score(field, clf, "topk", top_k=7) == pytest.approx(
            pooled_score(field, clf, "mean"), abs=1e-12)

    def test_mode_ordering_invariant(self, rng):
        clf = PatchClassifier(rng.standard_normal(3), 0.0)
        for _ in range(10):
            field = PatchEmbeddingField(rng.standard_normal((8, 3)))
            mean = pooled_score(field, clf, "mean")
            mx = pooled_score(field, clf, "max")
            for t in (1, 3, 8):
                topk = pooled_score(field, clf, "topk", top_k=t)
                assert mx >= topk - 1e-12
                assert topk >= mean - 1e-12

    def test_topk_out_of_range_rejected(self, rng):
        clf = PatchClassifier(rng.standard_normal(3), 0.0)
        field = PatchEmbeddingField(rng.standard_normal((4, 3)))
        with pytest.raises(ValueError, match="top_k"):
            pooled_score(field, clf, "topk", top_k=5)
