import numpy as np
import pytest

from mdmf.synth import SyntheticConfig, diluted_defect, sample_fake_fields, sample_real_fields


def config(**overrides):
    base = dict(embed_dim=4, patch_count=3, noise_std=1.0, defect_prob=0.5,
                defect_vector=np.array([2.0, 0.0, 0.0, 0.0]), seed=7)
    base.update(overrides)
    return SyntheticConfig(**base)


class TestRealSampling:
    def test_degenerate_noise_collapses_to_zero(self):
        cfg = config(noise_std=1e-12)
        fields = sample_real_fields(cfg, 5)
        for f in fields:
            assert np.max(np.abs(f.patches)) < 1e-9

    def test_component_means_within_clt_band(self):
        cfg = config(embed_dim=4, patch_count=1, noise_std=1.0)
        fields = sample_real_fields(cfg, 10_000)
        stacked = np.stack([f.patches[0] for f in fields])
        bound = 4.0 * cfg.noise_std / np.sqrt(10_000)
        assert np.all(np.abs(stacked.mean(axis=0)) < bound)

    def test_same_seed_is_bitwise_identical(self):
        cfg = config()
        a = sample_real_fields(cfg, 4)
        b = sample_real_fields(cfg, 4)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.patches, fb.patches)

    def test_records_are_schedule_independent(self):
        # field i depends only on (seed, start_index + i)
        cfg = config()
        whole = sample_real_fields(cfg, 6)
        tail = sample_real_fields(cfg, 3, start_index=3)
        for fa, fb in zip(whole[3:], tail):
            assert np.array_equal(fa.patches, fb.patches)


class TestFakeSampling:
    def test_zero_defect_prob_matches_real_exactly(self):
        cfg = config(defect_prob=0.0)
        real = sample_real_fields(cfg, 5)
        fake = sample_fake_fields(cfg, 5)
        for fr, ff in zip(real, fake):
            assert np.array_equal(fr.patches, ff.patches)

    def test_always_defective_with_tiny_noise(self):
        cfg = config(defect_prob=1.0, noise_std=1e-12, embed_dim=2,
                     defect_vector=np.array([3.0, 0.0]), patch_count=100)
        fields = sample_fake_fields(cfg, 100)
        patches = np.concatenate([f.patches for f in fields])
        first = patches[:, 0]
        assert np.all(np.abs(np.abs(first) - 3.0) < 1e-9)
        assert np.all(np.abs(patches[:, 1]) < 1e-9)
        # signs balance to ~50/50: binomial 4-sigma bound on the mean
        positive_fraction = np.mean(first > 0)
        assert abs(positive_fraction - 0.5) < 4.0 * np.sqrt(0.25 / patches.shape[0])

    def test_fake_population_mean_is_zero(self):
        cfg = config(defect_prob=0.5, noise_std=1.0, patch_count=10,
                     defect_vector=np.array([2.0, 0.0, 0.0, 0.0]))
        fields = sample_fake_fields(cfg, 10_000)  # 1e5 patches
        patches = np.concatenate([f.patches for f in fields])
        # per-component variance: noise + defect contribution on the first axis
        comp_var = cfg.noise_std**2 + cfg.defect_prob * 4.0
        band = 4.0 * np.sqrt(comp_var / patches.shape[0])
        assert np.all(np.abs(patches.mean(axis=0)) < band)

    def test_second_moment_lift_matches_defect_energy(self):
        cfg = config(defect_prob=0.3, noise_std=1.0, patch_count=10,
                     defect_vector=np.array([2.0, 0.0, 0.0, 0.0]))
        real = np.concatenate([f.patches for f in sample_real_fields(cfg, 5000)])
        fake = np.concatenate([f.patches for f in sample_fake_fields(cfg, 5000)])
        lift = np.sum(fake**2, axis=1).mean() - np.sum(real**2, axis=1).mean()
        expected = cfg.defect_prob * 4.0  # rho * |mu|^2
        sem = np.sqrt(np.sum(fake**2, axis=1).var() / fake.shape[0]
                      + np.sum(real**2, axis=1).var() / real.shape[0])
        assert abs(lift - expected) < 5.0 * sem

    def test_sign_correlation_mode_is_deterministic_and_valid(self):
        cfg = config(sign_corr=0.8, defect_prob=1.0, noise_std=1e-12,
                     patch_count=50, defect_vector=np.array([1.0, 0.0, 0.0, 0.0]))
        a = sample_fake_fields(cfg, 3)
        b = sample_fake_fields(cfg, 3)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.patches, fb.patches)
        # adjacent signs should mostly agree at corr = 0.8
        signs = np.sign(np.concatenate([f.patches[:, 0] for f in a]))
        agreement = np.mean(signs[:-1] == signs[1:])
        assert agreement > 0.7


class TestDilutedDefect:
    def test_identity_at_one_patch(self):
        nu = np.array([0.0, 1.0])
        assert np.allclose(diluted_defect(1, 2.5, 0.7, nu), 2.5 * nu)

    def test_zero_exponent_ignores_patch_count(self):
        nu = np.array([1.0, 0.0])
        for k in (1, 4, 64):
            assert np.allclose(diluted_defect(k, 3.0, 0.0, nu), 3.0 * nu)

    def test_direct_evaluation(self):
        out = diluted_defect(4, 2.0, 0.5, np.array([1.0, 0.0]))
        assert np.allclose(out, [1.0, 0.0], atol=1e-15)

    def test_non_unit_direction_rejected(self):
        with pytest.raises(ValueError, match="unit-norm"):
            diluted_defect(4, 1.0, 0.5, np.array([1.0, 1.0]))

    def test_config_applies_dilution(self):
        cfg = config(defect_vector=np.array([1.0, 0.0, 0.0, 0.0]),
                     dilution_scale=2.0, dilution_exponent=0.5, patch_count=4)
        assert np.allclose(cfg.effective_defect(), [1.0, 0.0, 0.0, 0.0])


class TestConfigValidation:
    def test_probability_range(self):
        with pytest.raises(ValueError):
            config(defect_prob=1.5)

    def test_noise_positive(self):
        with pytest.raises(ValueError):
            config(noise_std=0.0)

    def test_defect_dimension(self):
        with pytest.raises(ValueError):
            config(defect_vector=np.array([1.0, 0.0]))

    def test_dilution_pairing(self):
        with pytest.raises(ValueError, match="dilution"):
            config(dilution_scale=1.0)
