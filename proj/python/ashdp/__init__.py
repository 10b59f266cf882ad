"""Augmented shuffle DP protocol simulator."""

from ashdp._core import (
    CategoricalDataset,
    DummyCountDistribution,
    KVDataset,
    actual_epsilon,
    amplify,
    calibrate_offset,
    certify_dp,
    fme_run,
    fme_variance,
    hypothesis_error_bound,
    kv_run,
    l_policy,
    lnf_error,
    lnf_run,
    load_categorical_csv,
    load_kv_csv,
    make_distribution,
    mse_topk,
    optimal_b,
    pure_grr_run,
    synth_kv,
    synth_zipf,
    true_frequencies,
    true_kv_statistics,
)

__all__ = [
    "CategoricalDataset",
    "DummyCountDistribution",
    "KVDataset",
    "actual_epsilon",
    "amplify",
    "calibrate_offset",
    "certify_dp",
    "fme_run",
    "fme_variance",
    "hypothesis_error_bound",
    "kv_run",
    "l_policy",
    "lnf_error",
    "lnf_run",
    "load_categorical_csv",
    "load_kv_csv",
    "make_distribution",
    "mse_topk",
    "optimal_b",
    "pure_grr_run",
    "synth_kv",
    "synth_zipf",
    "true_frequencies",
    "true_kv_statistics",
]
