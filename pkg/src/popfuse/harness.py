"""Cross-validation harness: splitters, metrics, per-fold training, and
experiment orchestration with on-disk reports and figures."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import featprep, model, popgraph
from .config import ExperimentConfig
from .dataio import CohortManifest
from .fusion import cross_entropy, predict_probabilities
from .model import ModelConfig
from .numcore import AdamState, ParameterError, TrainingError, adam_step, zero_grads


@dataclass
class SplitPlan:
    scheme: str
    folds: list[tuple[np.ndarray, np.ndarray]]   # (train_idx, test_idx)
    site_names: list[str] = field(default_factory=list)  # loso only


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> SplitPlan:
    """Shuffle within class, deal round-robin into k folds."""
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(labels.size, dtype=int)
    for cls in np.unique(labels):
        members = np.where(labels == cls)[0]
        if members.size < k:
            raise ParameterError(
                f"class {cls} has {members.size} members, fewer than k={k}")
        rng.shuffle(members)
        fold_of[members] = np.arange(members.size) % k
    folds = []
    for f in range(k):
        test = np.where(fold_of == f)[0]
        train = np.where(fold_of != f)[0]
        folds.append((train, test))
    return SplitPlan("kfold", folds)


def loso_split(sites: list[str]) -> SplitPlan:
    """One fold per distinct site, ordered lexicographically."""
    names = sorted(set(sites))
    if len(names) < 2:
        raise ParameterError("LOSO needs at least 2 sites")
    arr = np.array(sites)
    folds = []
    for site in names:
        test = np.where(arr == site)[0]
        train = np.where(arr != site)[0]
        folds.append((train, test))
    return SplitPlan("loso", folds, site_names=names)


def confusion_metrics(tp: int, tn: int, fp: int, fn: int) -> dict:
    """Accuracy/sensitivity/specificity/F1; undefined ratios become None."""
    def ratio(num, den):
        return num / den if den > 0 else None

    acc = ratio(tp + tn, tp + tn + fp + fn)
    sens = ratio(tp, tp + fn)
    spec = ratio(tn, tn + fp)
    prec = ratio(tp, tp + fp)
    f1 = None
    if prec is not None and sens is not None and (prec + sens) > 0:
        f1 = 2 * prec * sens / (prec + sens)
    return {"accuracy": acc, "sensitivity": sens, "specificity": spec, "f1": f1}


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> tuple[float | None, list]:
    """Mann-Whitney AUC with tie credit 1/2, plus the ROC point list.

    Points are swept over every distinct score threshold, from (0, 0) to
    (1, 1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None, []
    ranks = rankdata(scores)
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
    points = [(0.0, 0.0)]
    tp = fp = 0
    order = np.argsort(-scores, kind="stable")
    i = 0
    while i < scores.size:
        j = i
        while j < scores.size and scores[order[j]] == scores[order[i]]:
            tp += int(labels[order[j]] == 1)
            fp += int(labels[order[j]] == 0)
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j
    return float(auc), points


def _fold_rngs(seed: int, fold_index: int):
    """Independent, reproducible RNG streams for one fold."""
    ss = np.random.SeedSequence(entropy=[seed, fold_index])
    init_ss, drop_ss, split_ss = ss.spawn(3)
    return (np.random.default_rng(init_ss), np.random.default_rng(drop_ss),
            np.random.default_rng(split_ss))


@dataclass
class FoldResult:
    fold_index: int
    counts: dict
    metrics: dict
    auc: float | None
    roc_points: list
    epoch_losses: list[float]
    predictions: list[dict]
    state_hash: str
    edge_weights: list | None   # (i, j, w) on the evaluation graph
    params: dict | None = None  # trained tensors, not serialized


def _model_config(config: ExperimentConfig) -> ModelConfig:
    return ModelConfig(modality=config.modality, fusion_mode=config.fusion,
                       cheb_order=config.cheb_order,
                       n_gcn_layers=config.n_gcn_layers,
                       hidden_dim=config.hidden_dim,
                       pae_latent_dim=config.pae_latent_dim,
                       n_heads=config.n_heads,
                       ff_expansion=config.ff_expansion,
                       dropout_rate=config.dropout)


def _fit_features(cohort: CohortManifest, train_idx: np.ndarray,
                  config: ExperimentConfig, modality: str):
    subjects = cohort.subjects
    X_all = featprep.cohort_feature_matrix(subjects, modality)
    y_train = cohort.labels()[train_idx]
    pipeline = featprep.fit_pipeline(X_all[train_idx], y_train, modality,
                                     config.target_dim, config.ridge_alpha,
                                     config.rfe_drop_fraction)
    return pipeline, pipeline.transform(X_all)


def train_fold(cohort: CohortManifest, fold: tuple[np.ndarray, np.ndarray],
               config: ExperimentConfig, fold_index: int = 0) -> FoldResult:
    """Fit, train, and evaluate one fold.

    Feature pipelines and the phenotype encoder are fitted on training
    subjects only. Training runs full-batch on the train-only graph;
    inference extends the graph with test nodes through the trained PAE
    (inductive), unless ``transductive`` is set, in which case the full
    graph is used throughout with a train-node loss mask.
    """
    cfg = _model_config(config)
    cfg.validate()
    train_idx, test_idx = fold
    subjects = cohort.subjects
    labels = cohort.labels()
    hasher = hashlib.sha256()

    needs_func = cfg.modality in ("func", "func+pheno", "multimodal")
    needs_struct = cfg.modality in ("struct", "struct+pheno", "multimodal")
    Xf = Xs = None
    func_dim = struct_dim = 0
    if needs_func:
        pipe_f, Xf = _fit_features(cohort, train_idx, config, "func")
        func_dim = Xf.shape[1]
        hasher.update(pipe_f.selected_indices.tobytes())
        hasher.update(pipe_f.means.tobytes())
        hasher.update(pipe_f.stds.tobytes())
    if needs_struct:
        pipe_s, Xs = _fit_features(cohort, train_idx, config, "struct")
        struct_dim = Xs.shape[1]
        hasher.update(pipe_s.selected_indices.tobytes())
        hasher.update(pipe_s.means.tobytes())
        hasher.update(pipe_s.stds.tobytes())

    train_subjects = [subjects[i] for i in train_idx]
    phen_encoder = popgraph.fit_phenotype_encoder(train_subjects)
    hasher.update(repr((phen_encoder.age_mean, phen_encoder.age_std,
                        phen_encoder.site_vocab)).encode())

    init_rng, drop_rng, _ = _fold_rngs(config.seed, fold_index)
    phen_dim = phen_encoder.dim
    params = model.init_params(cfg, func_dim, struct_dim, phen_dim, init_rng)
    state = AdamState(learning_rate=config.learning_rate,
                      weight_decay=config.weight_decay)

    order = np.concatenate([train_idx, test_idx])
    if config.transductive:
        node_idx = order
        loss_mask = np.arange(train_idx.size)
    else:
        node_idx = train_idx
        loss_mask = None
    node_subjects = [subjects[i] for i in node_idx]
    phen = phen_encoder.encode(node_subjects)
    edges = popgraph.build_candidate_edges(node_subjects, config.edge_policy,
                                           config.age_threshold)
    mask = popgraph.edge_mask(len(node_subjects), edges)
    y = labels[node_idx]
    xf = Xf[node_idx] if needs_func else None
    xs = Xs[node_idx] if needs_struct else None

    epoch_losses = []
    for epoch in range(config.epochs):
        zero_grads(params)
        logits, _ = model.forward(params, cfg, xf, xs, phen, mask,
                                  training=True, rng=drop_rng)
        loss = cross_entropy(logits, y, loss_mask)
        loss_val = float(loss.data)
        if not np.isfinite(loss_val):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        epoch_losses.append(loss_val)
        loss.backward()
        adam_step(params, state)
    hasher.update(np.array(epoch_losses).tobytes())
    state_hash = hasher.hexdigest()

    # inference on the train+test graph, dropout disabled
    eval_subjects = [subjects[i] for i in order]
    eval_phen = phen_encoder.encode(eval_subjects)
    eval_edges = popgraph.build_candidate_edges(eval_subjects,
                                                config.edge_policy,
                                                config.age_threshold)
    eval_mask = popgraph.edge_mask(len(eval_subjects), eval_edges)
    xf_eval = Xf[order] if needs_func else None
    xs_eval = Xs[order] if needs_struct else None
    logits, info = model.forward(params, cfg, xf_eval, xs_eval, eval_phen,
                                 eval_mask, training=False, rng=drop_rng)
    probs = predict_probabilities(logits.data)[:, 1]

    test_slice = np.arange(train_idx.size, order.size)
    test_probs = probs[test_slice]
    test_labels = labels[test_idx]
    preds = (test_probs >= 0.5).astype(int)
    tp = int(((preds == 1) & (test_labels == 1)).sum())
    tn = int(((preds == 0) & (test_labels == 0)).sum())
    fp = int(((preds == 1) & (test_labels == 0)).sum())
    fn = int(((preds == 0) & (test_labels == 1)).sum())
    auc, roc_points = roc_auc(test_probs, test_labels)

    edge_rows = None
    if info["edge_weights"] is not None:
        w = info["edge_weights"]
        edge_rows = [(int(i), int(j), float(w[i, j])) for i, j in eval_edges]
    else:
        edge_rows = [(int(i), int(j), 1.0) for i, j in eval_edges]

    predictions = [
        {"subject_id": subjects[idx].subject_id, "label": int(labels[idx]),
         "probability": float(p), "prediction": int(pr)}
        for idx, p, pr in zip(test_idx, test_probs, preds)
    ]
    return FoldResult(fold_index=fold_index,
                      counts={"tp": tp, "tn": tn, "fp": fp, "fn": fn},
                      metrics=confusion_metrics(tp, tn, fp, fn),
                      auc=auc, roc_points=roc_points,
                      epoch_losses=epoch_losses, predictions=predictions,
                      state_hash=state_hash, edge_weights=edge_rows,
                      params=params)


def _aggregate(values: list) -> dict:
    defined = [v for v in values if v is not None]
    if not defined:
        return {"mean": None, "std": None, "n_defined": 0}
    arr = np.array(defined, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()),
            "n_defined": len(defined)}


def build_report(config: ExperimentConfig, plan: SplitPlan,
                 results: list[FoldResult], cohort: CohortManifest) -> dict:
    metric_names = ["accuracy", "sensitivity", "specificity", "f1"]
    per_fold = []
    for r in results:
        row = {"fold": r.fold_index, **r.counts, **r.metrics, "auc": r.auc,
               "final_loss": r.epoch_losses[-1] if r.epoch_losses else None,
               "state_hash": r.state_hash}
        per_fold.append(row)
    aggregate = {name: _aggregate([r.metrics[name] for r in results])
                 for name in metric_names}
    aggregate["auc"] = _aggregate([r.auc for r in results])
    report = {
        "config": vars(config).copy(),
        "scheme": plan.scheme,
        "n_subjects": len(cohort.subjects),
        "per_fold": per_fold,
        "aggregate": aggregate,
        "predictions": [p for r in results for p in r.predictions],
    }
    if plan.scheme == "loso":
        report["per_site"] = [
            {"site": site, "n": int(len(r.predictions)),
             "accuracy": r.metrics["accuracy"]}
            for site, r in zip(plan.site_names, results)
        ]
    return report


def run_experiment(config: ExperimentConfig,
                   cohort: CohortManifest | None = None) -> dict:
    """Run every fold, write report artifacts, return the report dict.

    Writes report.json, metrics.csv, roc_fold{i}.csv, edges.csv, a ROC
    figure, and (for LOSO) site_accuracy.csv plus a site-accuracy figure.
    """
    from .dataio import load_cohort
    from .plots import render_roc_figure, render_site_accuracy_figure

    if cohort is None:
        cohort = load_cohort(config.cohort_dir)
    labels = cohort.labels()
    if config.scheme == "kfold":
        plan = stratified_kfold(labels, config.k, config.seed)
    elif config.scheme == "loso":
        plan = loso_split(cohort.sites())
    else:
        raise ParameterError(f"unknown scheme: {config.scheme}")

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    try:
        for i, fold in enumerate(plan.folds):
            results.append(train_fold(cohort, fold, config, fold_index=i))
    finally:
        # partial results are still flushed if a later fold aborts
        if results:
            _write_artifacts(config, plan, results, cohort, out)

    report = build_report(config, plan, results, cohort)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    render_roc_figure(results, out / "roc.png")
    if plan.scheme == "loso":
        render_site_accuracy_figure(report["per_site"], out / "site_accuracy.png")
    return report


def _write_artifacts(config, plan, results, cohort, out: Path) -> None:
    rows = ["fold,tp,tn,fp,fn,accuracy,sensitivity,specificity,f1,auc"]
    for r in results:
        m = r.metrics

        def fmt(v):
            return "undefined" if v is None else repr(float(v))

        rows.append(",".join([str(r.fold_index), str(r.counts["tp"]),
                              str(r.counts["tn"]), str(r.counts["fp"]),
                              str(r.counts["fn"]), fmt(m["accuracy"]),
                              fmt(m["sensitivity"]), fmt(m["specificity"]),
                              fmt(m["f1"]), fmt(r.auc)]))
    (out / "metrics.csv").write_text("\n".join(rows) + "\n")

    for r in results:
        lines = ["fpr,tpr"] + [f"{fpr!r},{tpr!r}" for fpr, tpr in r.roc_points]
        (out / f"roc_fold{r.fold_index}.csv").write_text("\n".join(lines) + "\n")

    last = results[-1]
    if last.edge_weights is not None:
        lines = ["i,j,w"] + [f"{i},{j},{w!r}" for i, j, w in last.edge_weights]
        (out / "edges.csv").write_text("\n".join(lines) + "\n")

    if plan.scheme == "loso":
        lines = ["site,n,accuracy"]
        accs = []
        for site, r in zip(plan.site_names, results):
            acc = r.metrics["accuracy"]
            accs.append(acc)
            val = "undefined" if acc is None else repr(float(acc))
            lines.append(f"{site},{len(r.predictions)},{val}")
        defined = [a for a in accs if a is not None]
        avg = repr(float(np.mean(defined))) if defined else "undefined"
        lines.append(f"AVERAGE,{len(cohort.subjects)},{avg}")
        (out / "site_accuracy.csv").write_text("\n".join(lines) + "\n")


MODALITY_GRID = ["func", "func+pheno", "struct", "struct+pheno", "multimodal"]
FUSION_GRID = ["concat", "symmetric", "asymmetric"]


def _grid_summary_rows(reports: dict[str, dict]) -> list[str]:
    lines = ["configuration,auc,accuracy,sensitivity,specificity,f1"]
    for name, report in reports.items():
        agg = report["aggregate"]

        def cell(metric):
            mean = agg[metric]["mean"]
            return "undefined" if mean is None else repr(float(mean))

        lines.append(",".join([name, cell("auc"), cell("accuracy"),
                               cell("sensitivity"), cell("specificity"),
                               cell("f1")]))
    return lines


def run_modality_grid(config: ExperimentConfig,
                      cohort: CohortManifest | None = None) -> dict[str, dict]:
    """One experiment per modality mode; summary CSV with one row each."""
    import dataclasses as _dc
    base_out = Path(config.out_dir)
    reports = {}
    for mode in MODALITY_GRID:
        sub = _dc.replace(config, modality=mode,
                          out_dir=str(base_out / mode.replace("+", "_")))
        reports[mode] = run_experiment(sub, cohort)
    base_out.mkdir(parents=True, exist_ok=True)
    (base_out / "modality_summary.csv").write_text(
        "\n".join(_grid_summary_rows(reports)) + "\n")
    return reports


def run_fusion_grid(config: ExperimentConfig,
                    cohort: CohortManifest | None = None) -> dict[str, dict]:
    """One multimodal experiment per fusion strategy."""
    import dataclasses as _dc
    base_out = Path(config.out_dir)
    reports = {}
    for mode in FUSION_GRID:
        sub = _dc.replace(config, modality="multimodal", fusion=mode,
                          out_dir=str(base_out / mode))
        reports[mode] = run_experiment(sub, cohort)
    base_out.mkdir(parents=True, exist_ok=True)
    (base_out / "fusion_summary.csv").write_text(
        "\n".join(_grid_summary_rows(reports)) + "\n")
    return reports
