"""Patch-level forensic signatures, deep-kernel MMD testing, and single-sample
detection of AI-generated images, plus the synthetic sparse-defect benchmark
and the Monte-Carlo theory-verification suite."""

from .baselines import (PatchClassifier, VOTING_THRESHOLDS, pooled_score,
                        train_patch_classifier, voting_score)
from .detect import (DetectionReport, ReferenceBank, batch_detect,
                     build_reference_bank, calibrate_threshold_real_only, classify,
                     mdmf_score, score_reference_bank)
from .embeddings import (EmbeddingDataset, EmbeddingFormatError, LABEL_GENERATED,
                         LABEL_REAL, PatchEmbeddingField, TokenGrid, pool_token_grid,
                         read_embedding_bytes, read_embedding_file,
                         write_embedding_bytes, write_embedding_file)
from .kernel_mmd import (KernelMatrixBundle, deep_kernel, kernel_bundle, mmd2_biased,
                         mmd2_unbiased, objective_gradients,
                         objective_value_and_gradients, test_power_objective,
                         variance_h1)
from .metrics import ScoredLabels, auroc, average_precision, best_accuracy
from .pfs import (CheckpointFormatError, PFSGradients, PFSParams, init_params,
                  load_params, pfs_forward, project_batch, save_params)
from .synth import SyntheticConfig, diluted_defect, sample_fake_fields, sample_real_fields
from .theory import (ClosedFormInputs, TheoryCheck, TheoryReport, concentration_sweep,
                     measure_mixing_attenuation, measure_shift_amplification,
                     population_mmd_closed_form, run_all_checks, snr_sweep,
                     surrogate_inputs_from_signatures, verify_population_mmd)
from .train import AdamState, TrainConfig, TrainHistory, TrainStep, train

__version__ = "0.1.0"

__all__ = [
    "AdamState", "ClosedFormInputs", "DetectionReport", "EmbeddingDataset",
    "EmbeddingFormatError", "CheckpointFormatError", "KernelMatrixBundle",
    "LABEL_GENERATED", "LABEL_REAL", "PatchClassifier", "PatchEmbeddingField",
    "PFSGradients", "PFSParams", "ReferenceBank", "ScoredLabels", "SyntheticConfig",
    "TheoryCheck", "TheoryReport", "TokenGrid", "TrainConfig", "TrainHistory",
    "TrainStep", "VOTING_THRESHOLDS", "auroc", "average_precision", "batch_detect",
    "best_accuracy",
    "build_reference_bank", "calibrate_threshold_real_only", "classify",
    "concentration_sweep", "deep_kernel", "diluted_defect", "init_params",
    "kernel_bundle", "load_params", "mdmf_score", "measure_mixing_attenuation",
    "measure_shift_amplification", "mmd2_biased", "mmd2_unbiased",
    "objective_gradients", "objective_value_and_gradients", "pfs_forward",
    "pool_token_grid", "pooled_score", "population_mmd_closed_form", "project_batch",
    "read_embedding_bytes", "read_embedding_file", "run_all_checks",
    "sample_fake_fields", "sample_real_fields", "save_params", "score_reference_bank",
    "snr_sweep", "surrogate_inputs_from_signatures", "test_power_objective",
    "train", "train_patch_classifier",
    "variance_h1", "verify_population_mmd", "voting_score", "write_embedding_bytes",
    "write_embedding_file",
]
