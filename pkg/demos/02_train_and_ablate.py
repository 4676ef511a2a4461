"""
Training and the GDRM ablations
===============================

Trains the full model and the three masked variants on a 512-sample
synthetic set, then compares validation metrics. Only the text/caption
comparison carries the label here, so removing the discrepancy path
should fall to chance.
"""

from gdcnet import GDCNet, ModelDims, TrainConfig, compare_reports, evaluate, fit
from gdcnet.metrics import format_deltas
from gdcnet.synthetic import make_incongruity_dataset

dims = ModelDims(d_t=64, d_v=32, d_z=16, d_fused=16)
data = make_incongruity_dataset(512, d_t=64, d_v=32, seed=500, splits={"train": 0.75, "val": 0.25})

###############################################################################
# Default optimisation settings: Adam, 10 epochs, batch 32, lr 5e-4,
# weight decay 0.05, clipping at 5.0, margin 0.2, alpha 0.1.

reports = {}
for name, flags in [("full", ()), ("no_gdrm", ("no_gdrm",)), ("no_semd", ("no_semd",)), ("no_send", ("no_send",))]:
    model, history = fit(GDCNet(dims, seed=0), data, TrainConfig(seed=0, ablation=frozenset(flags)))
    reports[name] = evaluate(model, data, "val")
    print(f"--- {name}: final train loss {history[-1]['mean_loss']:.4f}")
    print(reports[name].to_text())

###############################################################################
# Signed deltas, full minus each variant (percentage points).

for name in ("no_gdrm", "no_semd", "no_send"):
    print(f"full - {name}")
    print(format_deltas(compare_reports(reports["full"], reports[name])))
