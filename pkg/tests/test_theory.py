"""Unit-scale tests of the verification harness; the full budgets run in
test_acceptance.py.
"""

import numpy as np
import pytest

from mdmf.synth import SyntheticConfig
from mdmf.theory import (ClosedFormInputs, TheoryReport, concentration_sweep,
                         measure_mixing_attenuation, measure_shift_amplification,
                         population_mmd_closed_form, snr_sweep,
                         surrogate_inputs_from_signatures, verify_population_mmd)


def inputs(**overrides):
    base = dict(gamma=1.0, sigma_z=0.5, patch_count=4, sig_dim=1, delta_norm=1.0)
    base.update(overrides)
    return ClosedFormInputs(**base)


class TestClosedForm:
    def test_zero_shift_gives_zero(self):
        assert population_mmd_closed_form(inputs(delta_norm=0.0)) == 0.0

    def test_point_mass_cross_check(self):
        value = population_mmd_closed_form(inputs(sigma_z=0.0, patch_count=1))
        assert value == pytest.approx(2.0 * (1.0 - np.exp(-0.5)), abs=1e-15)
        assert value == pytest.approx(0.786939, abs=1e-6)

    def test_direct_evaluation(self):
        value = population_mmd_closed_form(inputs(sigma_z=1.0, patch_count=2))
        assert value == pytest.approx((2.0 / 3.0) * (1.0 - np.exp(-1.0 / 3.0)), abs=1e-15)

    def test_monotone_in_shift(self):
        deltas = np.linspace(0.0, 4.0, 30)
        values = [population_mmd_closed_form(inputs(delta_norm=d)) for d in deltas]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert all(v >= 0.0 for v in values)

    def test_doubling_shift_never_decreases(self):
        for d in (0.0, 0.3, 1.0, 2.5):
            low = population_mmd_closed_form(inputs(delta_norm=d))
            high = population_mmd_closed_form(inputs(delta_norm=2 * d))
            assert high >= low


class TestVerifyPopulationMMD:
    def test_point_mass_is_exact(self):
        check = verify_population_mmd(inputs(sigma_z=0.0, patch_count=1), 2000, seed=1)
        assert check.passed
        assert check.measured == pytest.approx(check.predicted, rel=1e-12)

    def test_null_case_within_band(self):
        check = verify_population_mmd(inputs(delta_norm=0.0), 20_000, seed=2)
        assert check.passed
        assert check.predicted == 0.0

    def test_shifted_case_smoke(self):
        check = verify_population_mmd(inputs(), 20_000, seed=3, rel_tol=0.15)
        assert check.passed

    def test_insufficient_samples_rejected(self):
        with pytest.raises(ValueError, match="1e4"):
            verify_population_mmd(inputs(), 500, seed=4)

    def test_deterministic(self):
        a = verify_population_mmd(inputs(), 20_000, seed=5)
        b = verify_population_mmd(inputs(), 20_000, seed=5)
        assert a.measured == b.measured


def shift_config(**overrides):
    base = dict(embed_dim=4, patch_count=1, noise_std=0.01, defect_prob=0.5,
                defect_vector=np.array([1.0, 0.0, 0.0, 0.0]), seed=0)
    base.update(overrides)
    return SyntheticConfig(**base)


class TestShiftAmplification:
    def test_zero_defect_prob_gives_zero_shift(self):
        checks = measure_shift_amplification([4], shift_config(defect_prob=0.0),
                                             50_000, seed=1)
        shift = checks[0]
        assert shift.predicted == 0.0
        assert abs(shift.measured) <= shift.tolerance

    def test_patch_shift_matches_prediction(self):
        checks = measure_shift_amplification([1], shift_config(), 200_000, seed=2)
        shift = checks[0]
        assert shift.passed
        assert shift.predicted == pytest.approx(0.5)

    def test_ratio_tracks_patch_count(self):
        checks = measure_shift_amplification([4, 16], shift_config(), 400_000, seed=3)
        ratios = [c for c in checks if "amplification" in c.check_id]
        assert all(c.passed for c in ratios)

    def test_mixing_mode_rejected(self):
        with pytest.raises(ValueError, match="independent"):
            measure_shift_amplification([4], shift_config(sign_corr=0.5), 1000, seed=4)

    def test_mixing_attenuates_ratio(self):
        check = measure_mixing_attenuation(shift_config(sign_corr=0.6), 16,
                                           400_000, seed=5)
        assert check.passed
        assert check.measured < 16.0


class TestConcentrationSweep:
    def test_structure_and_null_checks(self):
        checks = concentration_sweep([(25, 25), (50, 50), (100, 100)], inputs(),
                                     trials=200, seed=6, ordering_size=(50, 50))
        ids = [c.check_id for c in checks]
        assert any("fluctuation-scaling-r2" in i for i in ids)
        assert any("separation-ordering" in i for i in ids)
        null_checks = [c for c in checks if "null-unbiasedness" in c.check_id]
        assert len(null_checks) == 3
        assert all(c.passed for c in null_checks)
        ordering = next(c for c in checks if "separation-ordering" in c.check_id)
        assert ordering.passed

    def test_too_few_trials_rejected(self):
        with pytest.raises(ValueError, match="200"):
            concentration_sweep([(25, 25)], inputs(), trials=50, seed=7)

    def test_unequal_sizes_supported(self):
        checks = concentration_sweep([(30, 60), (60, 120)], inputs(), trials=200,
                                     seed=8, ordering_size=(30, 60))
        assert all(np.isfinite(c.measured) for c in checks)


class TestSnrSweep:
    def test_no_dilution_is_non_decreasing(self):
        checks = snr_sweep([1, 4, 16], 1.0, 0.0, n_images=100,
                           base_cfg=shift_config(noise_std=1.0), seed=9, resamples=60)
        assert len(checks) == 1
        assert checks[0].passed

    def test_strong_dilution_reports_slope(self):
        checks = snr_sweep([1, 4, 16, 64], 6.0, 0.5, n_images=100,
                           base_cfg=shift_config(noise_std=1.0), seed=10, resamples=60)
        ids = [c.check_id for c in checks]
        assert any("interior-maximum" in i for i in ids)
        assert any("tail-slope" in i for i in ids)

    def test_deterministic(self):
        kwargs = dict(n_images=50, base_cfg=shift_config(noise_std=1.0), seed=11,
                      resamples=30)
        a = snr_sweep([1, 4], 1.0, 0.0, **kwargs)
        b = snr_sweep([1, 4], 1.0, 0.0, **kwargs)
        assert a[0].measured == b[0].measured


class TestSurrogateEstimation:
    def test_recovers_known_surrogate(self, rng):
        # signatures drawn directly from the surrogate model should map back
        # to parameters close to the generating ones
        sigma, shift = 0.4, 0.7
        real = sigma * rng.standard_normal((4000, 3, 2))
        fake = sigma * rng.standard_normal((4000, 3, 2))
        fake[:, :, 0] += shift
        inputs = surrogate_inputs_from_signatures(real, fake, gamma=1.0)
        assert inputs.patch_count == 3 and inputs.sig_dim == 2
        assert inputs.sigma_z == pytest.approx(sigma, rel=0.05)
        assert inputs.delta_norm == pytest.approx(shift, rel=0.05)

    def test_bad_shapes_rejected(self, rng):
        with pytest.raises(ValueError, match="shape"):
            surrogate_inputs_from_signatures(rng.standard_normal((5, 3)),
                                             rng.standard_normal((5, 3)), 1.0)


class TestReport:
    def test_json_and_table_render(self):
        from mdmf.theory import TheoryCheck

        report = TheoryReport([TheoryCheck("demo", 1.0, 1.0, 0.1, True, "note")])
        assert report.passed
        assert '"demo"' in report.to_json()
        assert "PASS" in report.format_table()

    def test_failed_check_fails_report(self):
        from mdmf.theory import TheoryCheck

        report = TheoryReport([TheoryCheck("good", 1.0, 1.0, 0.1, True),
                               TheoryCheck("bad", 9.0, 1.0, 0.1, False)])
        assert not report.passed
