"""Four-class evaluation metrics.

One-vs-rest per class, unweighted macro averages.  A per-class ratio whose
denominator is zero is excluded from its macro average and the class is
flagged in MetricsReport.undefined rather than silently coerced to 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import NUM_CLASSES

METRIC_KEYS = ("accuracy", "sensitivity", "specificity", "auc",
               "false_positive_rate", "precision", "f1")


@dataclass
class MetricsReport:
    accuracy: float
    sensitivity: float
    specificity: float
    precision: float
    false_positive_rate: float
    f1: float
    auc: float
    confusion: np.ndarray
    per_class: dict[str, np.ndarray] = field(default_factory=dict)
    undefined: dict[str, tuple[int, ...]] = field(default_factory=dict)


def confusion(predictions, labels) -> np.ndarray:
    """counts[actual][predicted] over paired index sequences."""
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.ndim != 1:
        raise ValueError(f"predictions and labels must be equal-length 1-D, "
                         f"got {preds.shape} vs {labs.shape}")
    if preds.size == 0:
        raise ValueError("no samples")
    for name, arr in (("prediction", preds), ("label", labs)):
        if arr.min() < 0 or arr.max() >= NUM_CLASSES:
            raise ValueError(f"{name} index out of range [0, {NUM_CLASSES})")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (labs, preds), 1)
    return counts


def _macro(values: np.ndarray, key: str, undefined: dict) -> float:
    bad = tuple(int(c) for c in range(NUM_CLASSES) if np.isnan(values[c]))
    if bad:
        undefined[key] = bad
    good = values[~np.isnan(values)]
    return float(good.mean()) if good.size else float("nan")


def derive_metrics(conf) -> MetricsReport:
    """All threshold-free metrics from a confusion matrix; auc is nan until
    scores are available (evaluate fills it in)."""
    c = np.asarray(conf)
    if c.shape != (NUM_CLASSES, NUM_CLASSES):
        raise ValueError(f"expected a {NUM_CLASSES}x{NUM_CLASSES} matrix, got {c.shape}")
    if not np.issubdtype(c.dtype, np.integer) or (c < 0).any():
        raise ValueError("confusion counts must be non-negative integers")
    total = int(c.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")

    sens = np.full(NUM_CLASSES, np.nan)
    spec = np.full(NUM_CLASSES, np.nan)
    prec = np.full(NUM_CLASSES, np.nan)
    fpr = np.full(NUM_CLASSES, np.nan)
    f1 = np.full(NUM_CLASSES, np.nan)
    for k in range(NUM_CLASSES):
        tp = int(c[k, k])
        fn = int(c[k].sum()) - tp
        fp = int(c[:, k].sum()) - tp
        tn = total - tp - fn - fp
        if tp + fn > 0:
            sens[k] = tp / (tp + fn)
        if tn + fp > 0:
            spec[k] = tn / (tn + fp)
            # Defined as the complement so fpr + specificity is exactly 1.
            fpr[k] = 1.0 - spec[k]
        if tp + fp > 0:
            prec[k] = tp / (tp + fp)
        if not np.isnan(sens[k]) and not np.isnan(prec[k]) and sens[k] + prec[k] > 0:
            f1[k] = 2.0 * prec[k] * sens[k] / (prec[k] + sens[k])

    undefined: dict[str, tuple[int, ...]] = {}
    report = MetricsReport(
        accuracy=float(np.trace(c) / total),
        sensitivity=_macro(sens, "sensitivity", undefined),
        specificity=_macro(spec, "specificity", undefined),
        precision=_macro(prec, "precision", undefined),
        false_positive_rate=_macro(fpr, "false_positive_rate", undefined),
        f1=_macro(f1, "f1", undefined),
        auc=float("nan"),
        confusion=c.astype(np.int64),
        per_class={"sensitivity": sens, "specificity": spec, "precision": prec,
                   "false_positive_rate": fpr, "f1": f1},
        undefined=undefined,
    )
    return report


def binary_auc(pos_scores, neg_scores) -> float:
    """Pairwise-ranking AUC with ties counted half."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one positive and one negative score")
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(wins / (pos.size * neg.size))


def roc_auc_per_class(scores, labels) -> tuple[np.ndarray, tuple[int, ...]]:
    """One-vs-rest AUC per class.

    Returns (per-class values with nan where skipped, skipped class
    indices).  A class is skipped when it is absent from labels, or when it
    covers all labels and has no rest to rank against.
    """
    sc = np.asarray(scores, dtype=np.float64)
    labs = np.asarray(labels, dtype=np.int64)
    if sc.ndim != 2 or sc.shape[1] != NUM_CLASSES:
        raise ValueError(f"scores must be (n, {NUM_CLASSES}), got {sc.shape}")
    if labs.shape != (sc.shape[0],):
        raise ValueError("labels length must match scores rows")
    if sc.shape[0] == 0:
        raise ValueError("no samples")
    if labs.min() < 0 or labs.max() >= NUM_CLASSES:
        raise ValueError(f"label index out of range [0, {NUM_CLASSES})")
    sums = sc.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-6:
        raise ValueError("score rows must sum to 1 within 1e-6")
    values = np.full(NUM_CLASSES, np.nan)
    skipped = []
    for k in range(NUM_CLASSES):
        mask = labs == k
        if not mask.any() or mask.all():
            skipped.append(k)
            continue
        values[k] = binary_auc(sc[mask, k], sc[~mask, k])
    return values, tuple(skipped)


def roc_auc(scores, labels) -> float:
    """Macro average of the per-class one-vs-rest AUCs over classes present
    in labels."""
    values, _ = roc_auc_per_class(scores, labels)
    good = values[~np.isnan(values)]
    if good.size == 0:
        raise ValueError("no class had both positives and negatives")
    return float(good.mean())


def report_text(report: MetricsReport) -> str:
    """Flat machine-readable block: metric=value lines at 6 decimals, then
    the confusion matrix as 4 rows of 4 integers."""
    lines = [f"{key}={getattr(report, key):.6f}" for key in METRIC_KEYS]
    lines.append("confusion=")
    for row in report.confusion:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"
