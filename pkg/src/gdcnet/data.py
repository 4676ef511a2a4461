"""Dataset records, JSON-Lines ingestion, caption attachment and batching."""

from __future__ import annotations

import json
import logging
import math
import time
import urllib.error
import urllib.request
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    IntegrityError,
    ParseError,
    ProtocolError,
    ServiceError,
    TransportError,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")
DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class Sample:
    id: str
    text: str
    label: int
    split: str
    caption: str | None = None
    image_vec: tuple[float, ...] | None = None
    image_path: str | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise DataError("sample id must be a non-empty string")
        if self.label not in (0, 1) or isinstance(self.label, bool):
            raise DataError(f"sample {self.id}: label must be 0 or 1, got {self.label!r}")
        if not isinstance(self.text, str) or not self.text.strip():
            raise DataError(f"sample {self.id}: text is empty")
        if self.split not in SPLITS:
            raise IntegrityError(f"sample {self.id}: unknown split {self.split!r}")
        if (self.image_vec is None) == (self.image_path is None):
            raise DataError(f"sample {self.id}: exactly one of image_vec/image_path is required")
        if self.image_vec is not None:
            vec = tuple(float(v) for v in self.image_vec)
            if not vec or not all(math.isfinite(v) for v in vec):
                raise DataError(f"sample {self.id}: image_vec must be a non-empty finite vector")
            object.__setattr__(self, "image_vec", vec)

    @property
    def has_caption(self) -> bool:
        return bool(self.caption and self.caption.strip())

    def to_json(self) -> dict:
        out = {"id": self.id, "text": self.text}
        if self.image_vec is not None:
            out["image_vec"] = list(self.image_vec)
        else:
            out["image_path"] = self.image_path
        out.update(caption=self.caption, label=self.label, split=self.split)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Sample":
        if not isinstance(obj, dict):
            raise DataError("expected a JSON object")
        missing = [k for k in ("id", "text", "label", "split") if k not in obj]
        if missing:
            raise DataError(f"missing required key(s): {', '.join(missing)}")
        known = {"id", "text", "image_vec", "image_path", "caption", "label", "split"}
        extra = set(obj) - known
        if extra:
            raise DataError(f"unknown key(s): {', '.join(sorted(extra))}")
        caption = obj.get("caption")
        if caption is not None and not isinstance(caption, str):
            raise DataError("caption must be a string or null")
        return cls(
            id=obj["id"],
            text=obj["text"],
            label=obj["label"],
            split=obj["split"],
            caption=caption,
            image_vec=obj.get("image_vec"),
            image_path=obj.get("image_path"),
        )


@dataclass(frozen=True)
class CaptionRecord:
    sample_id: str
    caption: str
    generator_name: str
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "caption": self.caption,
            "generator_name": self.generator_name,
            "created_at": self.created_at.isoformat(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CaptionRecord":
        try:
            created = datetime.fromisoformat(obj["created_at"])
            return cls(obj["sample_id"], obj["caption"], obj["generator_name"], created)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad caption record: {exc}") from exc


def count_classes(samples: Iterable[Sample]) -> dict[str, tuple[int, int]]:
    counts = Counter((s.split, s.label) for s in samples)
    splits = sorted({sp for sp, _ in counts}, key=SPLITS.index)
    return {sp: (counts[(sp, 0)], counts[(sp, 1)]) for sp in splits}


@dataclass(frozen=True)
class DatasetManifest:
    samples: tuple[Sample, ...] = ()
    class_counts: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        dupes = [k for k, n in Counter(s.id for s in self.samples).items() if n > 1]
        if dupes:
            raise IntegrityError(f"duplicate sample id(s): {', '.join(sorted(dupes))}")
        recount = count_classes(self.samples)
        if not self.class_counts:
            object.__setattr__(self, "class_counts", recount)
        elif {k: tuple(v) for k, v in self.class_counts.items()} != recount:
            raise IntegrityError(f"class_counts {self.class_counts} disagree with samples {recount}")

    def __len__(self):
        return len(self.samples)

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}

    def split(self, name: str) -> list[Sample]:
        if name not in SPLITS:
            raise IntegrityError(f"unknown split {name!r}")
        return [s for s in self.samples if s.split == name]


def load_manifest(path) -> DatasetManifest:
    """Read a JSON-Lines dataset file, validating every line.

    Blank lines are skipped. File order is preserved.
    """
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                samples.append(Sample.from_json(obj))
            except IntegrityError as exc:
                raise IntegrityError(f"line {lineno}: {exc}") from exc
            except DataError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return DatasetManifest(samples)


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in manifest.samples:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")


def load_caption_records(path) -> list[CaptionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(CaptionRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, DataError) as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return records


def attach_captions(manifest: DatasetManifest, captions: Sequence[CaptionRecord]) -> DatasetManifest:
    """Return a new manifest with captions applied; latest ``created_at`` wins per sample."""
    ids = manifest.by_id()
    dangling = sorted({r.sample_id for r in captions if r.sample_id not in ids})
    if dangling:
        raise IntegrityError(f"caption records reference unknown sample id(s): {', '.join(dangling)}")
    latest: dict[str, CaptionRecord] = {}
    for rec in captions:
        cur = latest.get(rec.sample_id)
        # ties keep the later record in list order
        if cur is None or rec.created_at >= cur.created_at:
            latest[rec.sample_id] = rec
    samples = [
        replace(s, caption=latest[s.id].caption) if s.id in latest else s for s in manifest.samples
    ]
    return DatasetManifest(samples, schema_version=manifest.schema_version)


@dataclass(frozen=True)
class CaptionServiceConfig:
    endpoint: str
    timeout: float = 10.0
    retries: int = 2
    backoff: float = 0.5


def _post_json(url: str, payload: dict, timeout: float) -> dict:
    req = urllib.request.Request(
        url,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise ServiceError(exc.code, exc.read().decode("utf-8", "replace")) from exc
    except (urllib.error.URLError, OSError) as exc:
        raise TransportError(f"caption service unreachable at {url}: {exc}") from exc
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"caption service sent invalid JSON: {exc.msg}") from exc


def fetch_caption(config: CaptionServiceConfig, sample: Sample) -> CaptionRecord:
    """Ask the external caption service to describe one sample's image.

    Transport failures are retried ``config.retries`` times; HTTP errors are not.
    """
    payload = {"id": sample.id, "image_path": sample.image_path}
    if sample.image_path is None:
        payload["image_vec"] = list(sample.image_vec)
    url = config.endpoint.rstrip("/") + "/caption"
    for attempt in range(config.retries + 1):
        try:
            resp = _post_json(url, payload, config.timeout)
            break
        except TransportError:
            if attempt == config.retries:
                raise
            time.sleep(config.backoff * 2**attempt)
    caption = resp.get("caption") if isinstance(resp, dict) else None
    if not isinstance(caption, str) or not caption.strip():
        raise ProtocolError(f"empty caption for sample {sample.id}")
    generator = resp.get("generator") or "unknown"
    return CaptionRecord(sample.id, caption, str(generator))


def fetch_captions(config: CaptionServiceConfig, samples: Sequence[Sample], workers: int = 4):
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda s: fetch_caption(config, s), samples))


def make_batches(
    manifest: DatasetManifest | Sequence[Sample],
    split: str | None = "train",
    batch_size: int = DEFAULT_BATCH_SIZE,
    seed: int = 0,
    epoch: int = 0,
    shuffle: bool = True,
) -> list[list[Sample]]:
    """Shuffle a split with a (seed, epoch)-keyed generator and cut it into batches.

    The final short batch is kept. Batches of at least two samples are
    required for in-batch contrastive negatives.
    """
    if batch_size < 2:
        raise ConfigError(
            f"batch_size={batch_size}: the contrastive loss needs at least one in-batch negative (batch_size >= 2)"
        )
    if isinstance(manifest, DatasetManifest):
        samples = manifest.split(split)
    else:
        samples = list(manifest)
    if not samples:
        raise ConfigError(f"split {split!r} is empty")
    order = np.arange(len(samples))
    if shuffle:
        order = np.random.default_rng([seed, epoch]).permutation(len(samples))
    return [[samples[i] for i in order[k : k + batch_size]] for k in range(0, len(samples), batch_size)]
