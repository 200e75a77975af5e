"""Plain-text report, ROC point files and SVG plots."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .metrics import ConfusionMatrix, RocCurve, roc

ROC_HEADER = ["threshold", "fpr", "tpr"]


def write_roc(curve: RocCurve, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROC_HEADER)
        for t, x, y in zip(curve.thresholds, curve.fpr, curve.tpr):
            w.writerow(["inf" if np.isinf(t) else "%.17g" % t, "%.17g" % x, "%.17g" % y])


def read_roc(path) -> RocCurve:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["threshold"]) for r in rows])
    x = np.array([float(r["fpr"]) for r in rows])
    y = np.array([float(r["tpr"]) for r in rows])
    auc = float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))
    return RocCurve(x, y, t, auc)


def write_scores(labels, scores, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["score", "label"])
        for s, y in zip(scores, labels):
            w.writerow(["%.17g" % s, int(y)])


def roc_svg(curve: RocCurve, title: str = "ROC", size: int = 360) -> str:
    """Minimal standalone SVG: ROC polyline, chance diagonal, AUC caption."""
    pad = 48
    inner = size - 2 * pad

    def px(x, y):
        return pad + x * inner, size - pad - y * inner

    pts = " ".join("%.2f,%.2f" % px(x, y) for x, y in zip(curve.fpr, curve.tpr))
    x0, y0 = px(0, 0)
    x1, y1 = px(1, 1)
    ticks = []
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx, _ = px(v, 0)
        _, ty = px(0, v)
        ticks.append(f'<text x="{tx:.2f}" y="{y0 + 16:.2f}" font-size="10" text-anchor="middle">{v:g}</text>')
        ticks.append(f'<text x="{x0 - 6:.2f}" y="{ty + 3:.2f}" font-size="10" text-anchor="end">{v:g}</text>')
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<text x="{size / 2:.2f}" y="20" font-size="13" text-anchor="middle">{title}</text>',
        f'<text x="{size / 2:.2f}" y="36" font-size="11" text-anchor="middle">AUC = {curve.auc:.4f}</text>',
        f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{inner}" height="{inner}" fill="none" stroke="black"/>',
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="grey" stroke-dasharray="4,4"/>',
        f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{pts}"/>',
        *ticks,
        f'<text x="{size / 2:.2f}" y="{size - 10}" font-size="11" text-anchor="middle">False positive rate</text>',
        f'<text x="14" y="{size / 2:.2f}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 14 {size / 2:.2f})">True positive rate</text>',
        "</svg>",
        "",
    ])


def emit_roc(labels, scores, stem, title: str) -> RocCurve:
    """Write ``<stem>.csv`` and ``<stem>.svg``; returns the curve."""
    curve = roc(labels, scores)
    stem = Path(stem)  # names like roc_esn_a0.05 contain dots, so no with_suffix
    write_roc(curve, stem.parent / f"{stem.name}.csv")
    (stem.parent / f"{stem.name}.svg").write_text(roc_svg(curve, title), encoding="utf-8")
    return curve


def confusion_block(cm: ConfusionMatrix, title: str) -> list[str]:
    return [
        title,
        "            pred 0   pred 1",
        f"  true 0  {cm.tn:7d}  {cm.fp:7d}",
        f"  true 1  {cm.fn:7d}  {cm.tp:7d}",
        f"  accuracy {cm.accuracy:.4f}  sensitivity {cm.sensitivity:.4f}  specificity {cm.specificity:.4f}",
    ]


def _table(header, rows) -> list[str]:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    line = lambda r: "  ".join(str(c).rjust(w) for c, w in zip(r, widths))  # noqa: E731
    return [line(header), "  ".join("-" * w for w in widths)] + [line(r) for r in rows]


def compare_text(results, settings, dataset_desc: str) -> str:
    """Summary laid out like the logistic table, confusion matrix and ESN table."""
    out = [f"dataset: {dataset_desc}", f"{settings.k}-fold cross-validation, seed {settings.seed}, "
           f"threshold {settings.threshold:g}", ""]

    logit = [r for r in results if r.model == "logit"]
    if logit:
        out.append("Logistic regression")
        rows = []
        for r in logit:
            if r.report is None:
                rows.append([r.name, f"{r.n_features:g}", "failed", "", ""])
            else:
                rows.append([r.name, f"{r.n_features:g}", f"{r.report.avg_train_mse:.4f}",
                             f"{r.report.avg_mse:.4f}", f"{100 * r.report.mean_accuracy:.2f} %"])
        out += _table(["Config", "Features", "Training MSE", "Testing MSE", "Predictive Accuracy"], rows)
        out.append("")

    for r in results:
        if r.report is not None:
            fold = r.report.per_fold[settings.holdout_fold % r.report.k]
            out += confusion_block(fold.confusion, f"Confusion matrix, {r.name}, fold {fold.fold}")
            out.append("")

    rows = []
    for r in results:
        if r.report is None:
            rows.append([r.name, f"{r.n_features:g}", 1, "failed", "", "", "", r.ci, ""])
            continue
        rep = r.report
        rows.append([r.name, f"{r.n_features:g}", 1, f"{rep.avg_mse:.4f}", f"{rep.std_dev:.4f}",
                     f"{rep.variance:.4e}", f"{100 * rep.mean_accuracy:.2f} %", r.ci, f"{r.auc:.4f}"])
    out.append("Cross-validated results")
    out += _table(["Config", "Independent variables", "Dependent variable", "Avg MSE",
                   "Standard Deviation", "Variance", "Mean Accuracy", "CI", "AUC"], rows)
    errors = [r for r in results if r.error]
    if errors:
        out.append("")
        out += [f"{r.name}: {r.error}" for r in errors]
    return "\n".join(out) + "\n"
