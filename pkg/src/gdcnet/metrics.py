"""Confusion-matrix metrics on the sarcastic (positive) class, plus report I/O."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import DatasetManifest
from .errors import ComparisonError, ConfigError

HEADLINE = ("accuracy", "precision", "recall", "f1")


def _ratio(num, den):
    return (num / den, False) if den > 0 else (0.0, True)


def _prf(tp, fp, fn):
    p, p_undef = _ratio(tp, tp + fp)
    r, r_undef = _ratio(tp, tp + fn)
    f, f_undef = _ratio(2 * p * r, p + r)
    return p, r, f, p_undef, r_undef, f_undef


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    macro_f1: float
    threshold: float = 0.5
    split: str = "test"
    undefined: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    per_sample: list | None = None

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self, include_samples: bool = False) -> dict:
        d = asdict(self)
        if not include_samples:
            d.pop("per_sample")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        rows = [
            ("split", self.split),
            ("threshold", f"{self.threshold:g}"),
            ("samples", str(self.total)),
            ("tp / fp / tn / fn", f"{self.tp} / {self.fp} / {self.tn} / {self.fn}"),
        ]
        rows += [(k, f"{100 * getattr(self, k):.2f}") for k in HEADLINE + ("macro_f1",)]
        if self.undefined:
            rows.append(("undefined (reported 0)", ", ".join(self.undefined)))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"

    def write_per_sample(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for sid, prob, label in self.per_sample or ():
                fh.write(json.dumps({"id": sid, "p_final": prob, "label": label}) + "\n")


def confusion_counts(pred, labels) -> tuple[int, int, int, int]:
    pred = np.asarray(pred).astype(bool)
    labels = np.asarray(labels).astype(bool)
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    tn = int(np.sum(~pred & ~labels))
    fn = int(np.sum(~pred & labels))
    return tp, fp, tn, fn


def report_from_counts(tp, fp, tn, fn, threshold=0.5, split="test", **extra) -> MetricsReport:
    total = tp + fp + tn + fn
    acc, _ = _ratio(tp + tn, total)
    p, r, f, pu, ru, fu = _prf(tp, fp, fn)
    # negative class treated as positive for the macro average
    _, _, f_neg, *_ = _prf(tn, fn, fp)
    undefined = [name for name, flag in (("precision", pu), ("recall", ru), ("f1", fu)) if flag]
    return MetricsReport(tp, fp, tn, fn, acc, p, r, f, (f + f_neg) / 2, threshold, split, undefined, **extra)


def report_from_predictions(probs, labels, threshold=0.5, split="test", ids=None, config=None) -> MetricsReport:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    counts = confusion_counts(probs >= threshold, labels)
    per_sample = None
    if ids is not None:
        per_sample = [(i, float(p), int(y)) for i, p, y in zip(ids, probs, labels)]
    return report_from_counts(*counts, threshold=threshold, split=split, config=dict(config or {}),
                              per_sample=per_sample)


def evaluate(model, manifest: DatasetManifest, split: str = "test", threshold: float = 0.5,
             batch_size: int = 256) -> MetricsReport:
    """Score every sample of ``split``; predict sarcastic iff ``P_final >= threshold``."""
    samples = manifest.split(split)
    if not samples:
        raise ConfigError(f"split {split!r} is empty")
    probs = []
    for k in range(0, len(samples), batch_size):
        probs.append(model.predict_proba(model.featurize(samples[k : k + batch_size])))
    return report_from_predictions(
        np.concatenate(probs),
        [s.label for s in samples],
        threshold,
        split,
        ids=[s.id for s in samples],
        config=model.config_dict(),
    )


def compare_reports(a: MetricsReport, b: MetricsReport) -> dict[str, float]:
    """Signed per-metric differences ``a - b``."""
    if a.split != b.split or a.threshold != b.threshold:
        raise ComparisonError(
            f"cannot compare reports: split {a.split!r}/{b.split!r}, threshold {a.threshold}/{b.threshold}"
        )
    return {k: getattr(a, k) - getattr(b, k) for k in HEADLINE + ("macro_f1",)}


def format_deltas(deltas: dict[str, float]) -> str:
    width = max(len(k) for k in deltas)
    return "\n".join(f"{k.ljust(width)}  {100 * v:+.2f}" for k, v in deltas.items()) + "\n"
