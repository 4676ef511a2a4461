"""
Checking the hand-written backward pass
=======================================

Every gradient in the package is derived by hand. Here the joint
objective (BCE plus weighted contrastive hinge) on a 4-sample batch is
compared against central finite differences for every parameter array.
"""

import numpy as np

from gdcnet import GDCNet, ModelDims, TrainConfig
from gdcnet.gradcheck import numerical_grad, relative_error
from gdcnet.synthetic import make_incongruity_dataset
from gdcnet.training import activation_pattern, loss_and_grads

dims = ModelDims(d_t=16, d_v=8, d_z=6, d_fused=5, d_f=7, disc_hidden=6, head_hidden=4)
data = make_incongruity_dataset(4, d_t=16, d_v=8, seed=21)
model = GDCNet(dims, seed=1)
rng = np.random.default_rng(0)
for arr in model.parameters().values():
    arr += rng.normal(0, 0.3, arr.shape)

cfg = TrainConfig(alpha=0.5)
batch = model.featurize(list(data.samples))
parts, grads = loss_and_grads(model, batch, cfg)
print(f"loss: bce {parts['bce']:.5f}  contrastive {parts['contrastive']:.5f}  total {parts['total']:.5f}")

###############################################################################
# Coordinates whose +/- perturbations land on different sides of a
# rectifier or hinge kink are skipped.


def loss():
    return loss_and_grads(model, batch, cfg, need_grads=False)[0]["total"]


def pattern():
    return activation_pattern(model, batch, cfg)


for name, arr in model.parameters().items():
    num = numerical_grad(loss, arr, step=1e-4, pattern=pattern)
    print(f"{name:32s} rel. error {relative_error(grads[name], num):.2e}")
