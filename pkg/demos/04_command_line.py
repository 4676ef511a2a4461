"""
Command-line round trip
=======================

Writes a dataset and a run config to a temporary directory, then drives
``gdcnet train``, ``gdcnet eval`` and ``gdcnet discrepancy`` exactly as a
shell user would (through :func:`gdcnet.cli.main`).
"""

import json
import tempfile
from pathlib import Path

from gdcnet.cli import main
from gdcnet.data import save_manifest
from gdcnet.synthetic import make_incongruity_dataset

work = Path(tempfile.mkdtemp(prefix="gdcnet-demo-"))
save_manifest(make_incongruity_dataset(96, d_t=64, d_v=32, seed=1, splits={"train": 0.5, "val": 0.25, "test": 0.25}),
              work / "data.jsonl")
(work / "run.json").write_text(json.dumps({
    "run_name": "demo",
    "train": {"epochs": 10, "seed": 0},
    "dims": {"d_t": 64, "d_v": 32, "d_z": 16, "d_fused": 16},
    "paths": {"dataset": "data.jsonl"},
}, indent=2))

###############################################################################
# ``--set`` overrides any config key; the resolved config is echoed into
# the run directory.

main(["train", "--config", str(work / "run.json"), "--run-dir", str(work / "runs" / "demo")])
main(["eval", "--checkpoint", str(work / "runs" / "demo" / "checkpoints" / "final.ckpt"),
      "--dataset", str(work / "data.jsonl"), "--split", "test"])
main(["discrepancy", "--dataset", str(work / "data.jsonl"), "--out", str(work / "triples.jsonl"),
      "--checkpoint", str(work / "runs" / "demo" / "checkpoints" / "final.ckpt")])
print(f"outputs under {work}")
