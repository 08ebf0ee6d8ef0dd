"""Cohort representation, on-disk CSV formats, and a synthetic generator.

A cohort lives in one directory: ``manifest.csv`` with the header
``subject_id,label,age,sex,site,func_path,struct_path`` plus one plain CSV
file per connectivity matrix (R rows of R comma-separated reals). The
synthetic generator stands in for a real multi-site dataset at desk scale:
class signal on a sparse set of region pairs, additive per-site offsets for
genuine domain shift, balanced-ish labels and sexes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SYMMETRY_TOL = 1e-6


class CohortError(ValueError):
    """A cohort file violates the manifest or matrix contracts."""


@dataclass
class SubjectRecord:
    subject_id: str
    label: int            # 0 = TD, 1 = ASD
    age: float
    sex: str              # "F" or "M"
    site: str
    func_matrix: np.ndarray
    struct_matrix: np.ndarray


@dataclass
class CohortManifest:
    subjects: list[SubjectRecord]
    func_regions: int = 111
    struct_regions: int = 116

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.subjects], dtype=int)

    def sites(self) -> list[str]:
        return [s.site for s in self.subjects]


def _check_matrix(m: np.ndarray, expected_r: int, name: str,
                  unit_range: bool) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise CohortError(f"{name}: matrix is not square, shape {m.shape}")
    if m.shape[0] != expected_r:
        raise CohortError(
            f"{name}: expected {expected_r} regions, file has {m.shape[0]}")
    if not np.all(np.isfinite(m)):
        raise CohortError(f"{name}: non-finite entries")
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > SYMMETRY_TOL:
        raise CohortError(f"{name}: asymmetric matrix (max |M - M^T| = {asym:g})")
    if unit_range and (m.min() < -1 - 1e-9 or m.max() > 1 + 1e-9):
        raise CohortError(f"{name}: functional correlations outside [-1, 1]")


def _read_matrix(path: Path) -> np.ndarray:
    if not path.exists():
        raise CohortError(f"matrix file not found: {path}")
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


def load_cohort(manifest_path: str | Path) -> CohortManifest:
    """Load and fully validate a cohort directory from its manifest CSV."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.csv"
    if not manifest_path.exists():
        raise CohortError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent

    subjects: list[SubjectRecord] = []
    seen_ids: set[str] = set()
    func_r = struct_r = None
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["subject_id", "label", "age", "sex", "site",
                    "func_path", "struct_path"]
        if reader.fieldnames != expected:
            raise CohortError(
                f"manifest header must be {','.join(expected)}")
        for row in reader:
            sid = row["subject_id"]
            if sid in seen_ids:
                raise CohortError(f"duplicate subject_id: {sid}")
            seen_ids.add(sid)
            label = int(row["label"])
            if label not in (0, 1):
                raise CohortError(f"subject {sid}: label must be 0 or 1")
            age = float(row["age"])
            if age <= 0:
                raise CohortError(f"subject {sid}: age must be positive")
            sex = row["sex"]
            if sex not in ("F", "M"):
                raise CohortError(f"subject {sid}: unknown sex code '{sex}'")
            site = row["site"]
            if not site:
                raise CohortError(f"subject {sid}: empty site code")
            func = _read_matrix(base / row["func_path"])
            struct = _read_matrix(base / row["struct_path"])
            if func_r is None:
                func_r, struct_r = func.shape[0], struct.shape[0]
            _check_matrix(func, func_r, f"subject {sid} ({row['func_path']})",
                          unit_range=True)
            _check_matrix(struct, struct_r, f"subject {sid} ({row['struct_path']})",
                          unit_range=False)
            subjects.append(SubjectRecord(sid, label, age, sex, site, func, struct))
    if not subjects:
        raise CohortError("manifest lists no subjects")
    return CohortManifest(subjects, func_regions=func_r, struct_regions=struct_r)


def save_cohort(cohort: CohortManifest, out_dir: str | Path) -> Path:
    """Write a cohort directory; returns the manifest path.

    Matrices are written with %.17g so float64 values round-trip exactly.
    """
    out_dir = Path(out_dir)
    mat_dir = out_dir / "matrices"
    mat_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "label", "age", "sex", "site",
                         "func_path", "struct_path"])
        for s in cohort.subjects:
            fpath = f"matrices/{s.subject_id}_func.csv"
            spath = f"matrices/{s.subject_id}_struct.csv"
            np.savetxt(out_dir / fpath, s.func_matrix, delimiter=",", fmt="%.17g")
            np.savetxt(out_dir / spath, s.struct_matrix, delimiter=",", fmt="%.17g")
            writer.writerow([s.subject_id, s.label, repr(s.age), s.sex, s.site,
                             fpath, spath])
    return manifest


def pearson_connectivity(timeseries: np.ndarray) -> np.ndarray:
    """Pearson correlation matrix of a T x R time-series array."""
    ts = np.asarray(timeseries, dtype=np.float64)
    if ts.ndim != 2 or ts.shape[0] < 3:
        raise CohortError("timeseries must be T x R with T >= 3")
    stds = ts.std(axis=0)
    dead = np.where(stds == 0)[0]
    if dead.size:
        raise CohortError(f"degenerate (constant) series for region {dead[0]}")
    c = np.corrcoef(ts, rowvar=False)
    c = np.clip((c + c.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return c


@dataclass
class SyntheticSpec:
    """Parameters of the synthetic multimodal cohort generator."""

    n_subjects: int = 100
    n_sites: int = 4
    func_regions: int = 20
    struct_regions: int = 24
    class_separation: float = 1.0
    func_informativeness: float = 1.0
    struct_informativeness: float = 1.0
    signature_fraction: float = 0.05
    site_offset_scale: float = 0.08
    noise_scale: float = 0.12
    seed: int = 0


def _signature_matrix(rng: np.random.Generator, r: int, fraction: float,
                      amplitude: float) -> np.ndarray:
    """Symmetric zero-diagonal matrix with +-amplitude/2 on a sparse pair set."""
    n_pairs = r * (r - 1) // 2
    k = max(1, int(round(fraction * n_pairs)))
    chosen = rng.choice(n_pairs, size=k, replace=False)
    signs = rng.choice([-1.0, 1.0], size=k)
    iu = np.triu_indices(r, k=1)
    vec = np.zeros(n_pairs)
    vec[chosen] = signs * amplitude / 2.0
    m = np.zeros((r, r))
    m[iu] = vec
    return m + m.T


def _subject_matrix(rng: np.random.Generator, r: int, class_shift: np.ndarray,
                    site_shift: np.ndarray, noise: float,
                    unit_range: bool) -> np.ndarray:
    raw = rng.normal(scale=noise, size=(r, r))
    m = (raw + raw.T) / 2.0 + class_shift + site_shift
    if unit_range:
        m = np.clip(m, -1.0, 1.0)
    np.fill_diagonal(m, 1.0)
    return m


def generate_synthetic_cohort(spec: SyntheticSpec) -> CohortManifest:
    """Deterministic two-class multimodal cohort with per-site offsets."""
    if spec.n_subjects < 2 * spec.n_sites:
        raise CohortError("need n_subjects >= 2 * n_sites")
    if spec.class_separation < 0 or spec.func_informativeness < 0 \
            or spec.struct_informativeness < 0:
        raise CohortError("separations and informativeness must be >= 0")

    rng = np.random.default_rng(spec.seed)
    # 0.5 calibrates the per-pair effect size so informativeness in [0, 1]
    # sweeps the downstream ridge accuracy between chance and near-perfect
    amp = 0.5 * spec.class_separation * spec.noise_scale
    sig_func = _signature_matrix(rng, spec.func_regions,
                                 spec.signature_fraction,
                                 amp * spec.func_informativeness)
    sig_struct = _signature_matrix(rng, spec.struct_regions,
                                   spec.signature_fraction,
                                   amp * spec.struct_informativeness)

    sites = [f"SITE{i:02d}" for i in range(spec.n_sites)]
    site_func = {s: _sym_offset(rng, spec.func_regions, spec.site_offset_scale)
                 for s in sites}
    site_struct = {s: _sym_offset(rng, spec.struct_regions, spec.site_offset_scale)
                   for s in sites}

    subjects = []
    per_site_count = {s: 0 for s in sites}
    for i in range(spec.n_subjects):
        site = sites[i % spec.n_sites]
        # labels and sexes balanced within each site, so site offsets
        # carry no class information
        k = per_site_count[site]
        per_site_count[site] = k + 1
        label = k % 2
        sex = "F" if (k // 2) % 2 == 0 else "M"
        age = float(rng.uniform(6.0, 40.0))
        sign = 1.0 if label == 1 else -1.0
        func = _subject_matrix(rng, spec.func_regions, sign * sig_func,
                               site_func[site], spec.noise_scale, unit_range=True)
        struct = _subject_matrix(rng, spec.struct_regions, sign * sig_struct,
                                 site_struct[site], spec.noise_scale,
                                 unit_range=False)
        subjects.append(SubjectRecord(f"SUB{i:04d}", label, age, sex, site,
                                      func, struct))
    return CohortManifest(subjects, func_regions=spec.func_regions,
                          struct_regions=spec.struct_regions)


def _sym_offset(rng: np.random.Generator, r: int, scale: float) -> np.ndarray:
    raw = rng.normal(scale=scale, size=(r, r))
    m = (raw + raw.T) / 2.0
    np.fill_diagonal(m, 0.0)
    return m
