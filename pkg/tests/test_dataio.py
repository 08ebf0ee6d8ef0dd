"""Cohort loading/saving, connectivity computation, and the synthetic
generator's statistical contracts."""

import numpy as np
import pytest

from popfuse.dataio import (CohortError, SubjectRecord, SyntheticSpec,
                            generate_synthetic_cohort, load_cohort,
                            pearson_connectivity, save_cohort)
from popfuse.featprep import cohort_feature_matrix, ridge_fit


def _toy_cohort(n=3, r=4):
    rng = np.random.default_rng(0)
    subjects = []
    for i in range(n):
        raw = rng.normal(size=(r, r))
        func = np.clip((raw + raw.T) / 2.0, -1.0, 1.0)
        np.fill_diagonal(func, 1.0)
        raw = rng.normal(size=(r, r))
        struct = (raw + raw.T) / 2.0
        np.fill_diagonal(struct, 1.0)
        subjects.append(SubjectRecord(f"S{i}", i % 2, 10.0 + i, "F" if i % 2 else "M",
                                      f"SITE{i % 2}", func, struct))
    from popfuse.dataio import CohortManifest
    return CohortManifest(subjects, func_regions=r, struct_regions=r)


def test_save_load_round_trip(tmp_path):
    cohort = _toy_cohort()
    manifest = save_cohort(cohort, tmp_path)
    loaded = load_cohort(manifest)
    assert len(loaded.subjects) == 3
    for a, b in zip(cohort.subjects, loaded.subjects):
        assert a.subject_id == b.subject_id
        assert a.label == b.label
        assert a.age == b.age
        assert a.sex == b.sex and a.site == b.site
        assert np.array_equal(a.func_matrix, b.func_matrix)
        assert np.array_equal(a.struct_matrix, b.struct_matrix)


def test_load_accepts_directory_path(tmp_path):
    save_cohort(_toy_cohort(), tmp_path)
    assert len(load_cohort(tmp_path).subjects) == 3


def test_missing_manifest(tmp_path):
    with pytest.raises(CohortError, match="manifest"):
        load_cohort(tmp_path / "nope")


def test_shape_mismatch_names_file(tmp_path):
    cohort = _toy_cohort()
    manifest = save_cohort(cohort, tmp_path)
    np.savetxt(tmp_path / "matrices" / "S1_func.csv", np.eye(6),
               delimiter=",", fmt="%.17g")
    with pytest.raises(CohortError, match="S1_func.csv"):
        load_cohort(manifest)


def test_asymmetric_matrix_rejected(tmp_path):
    cohort = _toy_cohort()
    bad = cohort.subjects[0].func_matrix.copy()
    bad[0, 1], bad[1, 0] = 0.3, 0.9
    cohort.subjects[0].func_matrix = bad
    manifest = save_cohort(cohort, tmp_path)
    with pytest.raises(CohortError, match="asymmetric"):
        load_cohort(manifest)


def test_duplicate_subject_id(tmp_path):
    cohort = _toy_cohort()
    cohort.subjects[1].subject_id = "S0"
    manifest = save_cohort(cohort, tmp_path)
    with pytest.raises(CohortError, match="duplicate"):
        load_cohort(manifest)


def test_bad_label_rejected(tmp_path):
    manifest = save_cohort(_toy_cohort(), tmp_path)
    text = manifest.read_text().replace("S1,1,", "S1,7,")
    manifest.write_text(text)
    with pytest.raises(CohortError, match="label"):
        load_cohort(manifest)


def test_func_range_enforced(tmp_path):
    cohort = _toy_cohort()
    m = cohort.subjects[0].func_matrix.copy()
    m[0, 1] = m[1, 0] = 1.7
    cohort.subjects[0].func_matrix = m
    manifest = save_cohort(cohort, tmp_path)
    with pytest.raises(CohortError, match=r"\[-1, 1\]"):
        load_cohort(manifest)


def test_pearson_identical_columns():
    rng = np.random.default_rng(0)
    col = rng.normal(size=50)
    ts = np.stack([col, col, rng.normal(size=50)], axis=1)
    c = pearson_connectivity(ts)
    assert abs(c[0, 1] - 1.0) < 1e-12


def test_pearson_negated_column():
    rng = np.random.default_rng(1)
    col = rng.normal(size=50)
    c = pearson_connectivity(np.stack([col, -col], axis=1))
    assert abs(c[0, 1] + 1.0) < 1e-12


def test_pearson_white_noise_decorrelated():
    rng = np.random.default_rng(2)
    c = pearson_connectivity(rng.normal(size=(10_000, 3)))
    off = c[np.triu_indices(3, k=1)]
    assert np.all(np.abs(off) < 0.05)


def test_pearson_rejects_constant_region():
    ts = np.ones((10, 2))
    ts[:, 0] = np.arange(10)
    with pytest.raises(CohortError, match="region 1"):
        pearson_connectivity(ts)


def test_pearson_rejects_short_series():
    with pytest.raises(CohortError):
        pearson_connectivity(np.ones((2, 4)))


def test_synthetic_determinism():
    spec = SyntheticSpec(n_subjects=20, n_sites=2, func_regions=8,
                         struct_regions=8, seed=11)
    a = generate_synthetic_cohort(spec)
    b = generate_synthetic_cohort(spec)
    for sa, sb in zip(a.subjects, b.subjects):
        assert sa.subject_id == sb.subject_id and sa.age == sb.age
        assert np.array_equal(sa.func_matrix, sb.func_matrix)
        assert np.array_equal(sa.struct_matrix, sb.struct_matrix)


def test_synthetic_site_balance():
    cohort = generate_synthetic_cohort(
        SyntheticSpec(n_subjects=40, n_sites=4, func_regions=8, struct_regions=8))
    labels = cohort.labels()
    sites = np.array(cohort.sites())
    for site in np.unique(sites):
        members = labels[sites == site]
        assert abs(members.mean() - 0.5) < 0.11  # labels balanced per site


def _ridge_cv_accuracy(cohort, modality, folds=5, alpha=1.0):
    """Simple held-out accuracy of a centered ridge classifier."""
    X = cohort_feature_matrix(cohort.subjects, modality)
    y = np.where(cohort.labels() > 0, 1.0, -1.0)
    n = y.size
    accs = []
    for f in range(folds):
        test = np.arange(f, n, folds)
        train = np.setdiff1d(np.arange(n), test)
        w = ridge_fit(X[train], y[train], alpha)
        scores = (X[test] - X[train].mean(axis=0)) @ w + y[train].mean()
        accs.append((np.sign(scores) == y[test]).mean())
    return float(np.mean(accs))


def test_informativeness_orders_ridge_accuracy():
    spec = SyntheticSpec(n_subjects=200, n_sites=4, class_separation=2.0,
                         func_informativeness=1.0, struct_informativeness=0.5,
                         seed=0)
    cohort = generate_synthetic_cohort(spec)
    func_acc = _ridge_cv_accuracy(cohort, "func")
    struct_acc = _ridge_cv_accuracy(cohort, "struct")
    assert func_acc >= 0.9
    assert 0.6 < struct_acc < func_acc


def test_zero_separation_is_chance_level():
    spec = SyntheticSpec(n_subjects=120, n_sites=4, class_separation=0.0,
                         func_regions=12, struct_regions=12, seed=3)
    cohort = generate_synthetic_cohort(spec)
    assert 0.35 <= _ridge_cv_accuracy(cohort, "func") <= 0.65


def test_synthetic_rejects_tiny_cohort():
    with pytest.raises(CohortError):
        generate_synthetic_cohort(SyntheticSpec(n_subjects=5, n_sites=4))
