"""Command line: ``gdcnet train|eval|discrepancy|captions-import``.

Exit codes: 0 success, 1 usage/config, 2 data integrity, 3 numeric
failure, 4 caption service.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .data import (
    CaptionServiceConfig,
    attach_captions,
    fetch_captions,
    load_caption_records,
    load_manifest,
    save_manifest,
)
from .embedding import FeatureStore
from .errors import ConfigError, DataError, GDCNetError
from .gdrm import SentimentLexicon
from .metrics import HEADLINE, evaluate
from .model import GDCNet, ModelDims
from .training import TrainConfig, best_epoch, fit, load_checkpoint, save_checkpoint

log = logging.getLogger("gdcnet")

RUN_ROOT_ENV = "GDCNET_RUN_ROOT"

DEFAULT_PATHS = {"dataset": None, "lexicon": None, "features": None, "caption_endpoint": None}


def default_config() -> dict:
    return {
        "run_name": None,
        "train": TrainConfig().to_dict(),
        "dims": asdict(ModelDims()),
        "paths": dict(DEFAULT_PATHS),
    }


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _set_key(cfg: dict, key: str, value) -> None:
    parts = key.split(".")
    if len(parts) == 1:
        owners = [sec for sec, body in cfg.items() if isinstance(body, dict) and key in body]
        if key in cfg and not isinstance(cfg[key], dict):
            owners.append(None)
        if len(owners) != 1:
            raise ConfigError(f"unknown config key {key!r}" if not owners else f"ambiguous config key {key!r}")
        parts = [key] if owners[0] is None else [owners[0], key]
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def resolve_config(user: dict, overrides=()) -> dict:
    """Merge a user config over defaults; unknown keys are rejected, filled defaults logged."""
    cfg = default_config()
    for section, body in user.items():
        if section not in cfg:
            raise ConfigError(f"unknown config key {section!r}")
        if isinstance(cfg[section], dict):
            if not isinstance(body, dict):
                raise ConfigError(f"config section {section!r} must be an object")
            for k, v in body.items():
                if k not in cfg[section]:
                    raise ConfigError(f"unknown config key '{section}.{k}'")
                cfg[section][k] = v
        else:
            cfg[section] = body
    for section, body in default_config().items():
        if isinstance(body, dict):
            for k in body:
                if k not in user.get(section, {}):
                    log.info("config %s.%s not set, using default %r", section, k, body[k])
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, raw = item.split("=", 1)
        _set_key(cfg, k.strip(), _parse_value(raw))
    abl = cfg["train"]["ablation"]
    if isinstance(abl, str):
        abl = [a for a in abl.split(",") if a]
    cfg["train"]["ablation"] = sorted(abl)
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    body = dict(cfg["train"])
    body["ablation"] = frozenset(body["ablation"])
    return TrainConfig.from_dict(body)


def model_dims(cfg: dict) -> ModelDims:
    return ModelDims(**cfg["dims"])


def _rel(base: Path, p):
    if p is None:
        return None
    p = Path(p)
    return p if p.is_absolute() else base / p


def _load_inputs(dataset, features=None, lexicon=None):
    manifest = load_manifest(dataset)
    store = FeatureStore.load(features) if features else None
    lex = SentimentLexicon.load(lexicon) if lexicon else None
    return manifest, store, lex


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_report(report, out_dir: Path, stem: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / f"{stem}.txt").write_text(report.to_text(), encoding="utf-8")
    report.write_per_sample(out_dir / f"{stem}_per_sample.jsonl")


def _run_dir(args, cfg) -> Path:
    if args.run_dir:
        return Path(args.run_dir)
    name = cfg["run_name"]
    if not name:
        digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:10]
        name = f"run-{digest}"
    return Path(os.environ.get(RUN_ROOT_ENV, "runs")) / name


def cmd_train(args) -> int:
    cfg_path = Path(args.config)
    try:
        user = json.loads(cfg_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{cfg_path}: invalid JSON ({exc.msg})") from exc
    cfg = resolve_config(user, args.set or ())
    tc = train_config(cfg)
    dims = model_dims(cfg)
    base = cfg_path.parent
    paths = {k: _rel(base, v) for k, v in cfg["paths"].items() if k != "caption_endpoint"}
    if paths["dataset"] is None:
        raise ConfigError("paths.dataset is required")

    run = _run_dir(args, cfg)
    for sub in ("checkpoints", "metrics", "logs"):
        (run / sub).mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(run / "logs" / "train.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger("gdcnet").addHandler(handler)
    try:
        _write_json(run / "resolved_config.json", cfg)
        manifest, store, lex = _load_inputs(paths["dataset"], paths["features"], paths["lexicon"])
        missing = [s.id for s in manifest.split("train") if not s.has_caption]
        if missing:
            raise DataError(f"train samples without captions: {', '.join(missing[:20])}")
        model = GDCNet(dims, seed=tc.seed, store=store, lexicon=lex)

        epochs_log = run / "metrics" / "epochs.jsonl"
        epochs_log.write_text("", encoding="utf-8")

        def on_epoch(epoch, entry):
            with open(epochs_log, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

        model, history = fit(model, manifest, tc, checkpoint_dir=run / "checkpoints", on_epoch=on_epoch)
        save_checkpoint(run / "checkpoints" / "final.ckpt", model, tc.epochs - 1, tc, history)
        summary = {"epochs": tc.epochs, "best_val_f1_epoch": best_epoch(history)}
        if history:
            summary["final_train_loss"] = history[-1]["mean_loss"]
            summary["final_train_accuracy"] = history[-1]["train_accuracy"]
        if manifest.split("val"):
            report = evaluate(model, manifest, "val")
            _write_report(report, run / "metrics", "val_report")
            summary["val"] = {k: getattr(report, k) for k in HEADLINE}
            print(report.to_text(), end="")
        _write_json(run / "metrics" / "summary.json", summary)
        print(f"run directory: {run}")
    finally:
        logging.getLogger("gdcnet").removeHandler(handler)
        handler.close()
    return 0


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise DataError(f"checkpoint not found: {ckpt}")
    store = FeatureStore.load(args.features) if args.features else None
    lex = SentimentLexicon.load(args.lexicon) if args.lexicon else None
    model, _ = load_checkpoint(ckpt, store=store, lexicon=lex)
    manifest = load_manifest(args.dataset)
    report = evaluate(model, manifest, args.split, args.threshold)
    out = Path(args.out) if args.out else ckpt.parent.parent / "metrics"
    _write_report(report, out, f"eval_{args.split}")
    for k in HEADLINE:
        print(f"{k}: {100 * getattr(report, k):.2f}")
    return 0


def cmd_discrepancy(args) -> int:
    store = FeatureStore.load(args.features) if args.features else None
    lex = SentimentLexicon.load(args.lexicon) if args.lexicon else None
    if args.checkpoint:
        model, _ = load_checkpoint(args.checkpoint, store=store, lexicon=lex)
    else:
        cfg = resolve_config(json.loads(Path(args.config).read_text(encoding="utf-8"))) if args.config else default_config()
        model = GDCNet(model_dims(cfg), seed=cfg["train"]["seed"], store=store, lexicon=lex)
    manifest = load_manifest(args.dataset)
    ready = [s for s in manifest.samples if s.has_caption]
    skipped = [s.id for s in manifest.samples if not s.has_caption]
    rows = np.zeros((0, 3))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        if ready:
            rows = model.discrepancy_triples(model.featurize(ready))
            for s, (d_sem, d_sen, d_fid) in zip(ready, rows):
                line = {"id": s.id, "d_sem": float(d_sem), "d_sen": float(d_sen), "d_fidelity": float(d_fid)}
                fh.write(json.dumps(line) + "\n")
    for j, name in enumerate(("d_sem", "d_sen", "d_fidelity")):
        if len(rows):
            print(f"{name}: mean {rows[:, j].mean():.6f} std {rows[:, j].std():.6f}")
    print(f"wrote {len(ready)} rows to {out}")
    if skipped:
        print(f"skipped (no caption): {', '.join(skipped)}")
        return DataError.exit_code
    return 0


def cmd_captions_import(args) -> int:
    src = Path(args.dataset)
    dst = Path(args.out)
    if dst.resolve() == src.resolve():
        raise ConfigError("--out must differ from --dataset; inputs are never modified in place")
    manifest = load_manifest(src)
    if args.captions:
        records = load_caption_records(args.captions)
    else:
        todo = [s for s in manifest.samples if args.refetch or not s.has_caption]
        svc = CaptionServiceConfig(args.endpoint, timeout=args.timeout, retries=args.retries)
        records = fetch_captions(svc, todo, workers=args.workers)
    updated = attach_captions(manifest, records)
    dst.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dst.parent, suffix=".tmp")
    os.close(fd)
    try:
        save_manifest(updated, tmp)
        os.replace(tmp, dst)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    still_missing = sum(not s.has_caption for s in updated.samples)
    print(f"attached {len(records)} caption(s); {still_missing} sample(s) still without caption -> {dst}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gdcnet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model from a JSON run config")
    t.add_argument("--config", required=True)
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
    t.add_argument("--run-dir", help=f"output directory (default: ${RUN_ROOT_ENV}/<run_name>)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", default="test", choices=("train", "val", "test"))
    e.add_argument("--threshold", type=float, default=0.5)
    e.add_argument("--features")
    e.add_argument("--lexicon")
    e.add_argument("--out", help="report directory (default: <run>/metrics)")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("discrepancy", help="dump the per-sample discrepancy triple")
    d.add_argument("--dataset", required=True)
    d.add_argument("--out", required=True)
    src = d.add_mutually_exclusive_group()
    src.add_argument("--checkpoint")
    src.add_argument("--config")
    d.add_argument("--features")
    d.add_argument("--lexicon")
    d.set_defaults(func=cmd_discrepancy)

    c = sub.add_parser("captions-import", help="attach captions from a file or the caption service")
    c.add_argument("--dataset", required=True)
    c.add_argument("--out", required=True)
    where = c.add_mutually_exclusive_group(required=True)
    where.add_argument("--captions", help="JSON-Lines caption records")
    where.add_argument("--endpoint", help="caption service base URL")
    c.add_argument("--timeout", type=float, default=10.0)
    c.add_argument("--retries", type=int, default=2)
    c.add_argument("--workers", type=int, default=4)
    c.add_argument("--refetch", action="store_true", help="also re-caption samples that already have one")
    c.set_defaults(func=cmd_captions_import)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except GDCNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
