"""
Loss functions and their gradients
==================================

BCE for classes, CIoU for boxes and DFL for the bin distributions, each with
a closed-form gradient.  The gradients are compared with central differences.
"""

import numpy as np

from yolomu.losses import (
    FlatPredictions,
    assign_targets_center,
    bce_with_logits,
    ciou_loss,
    detection_loss,
    dfl_loss,
)

print("bce(0, 1) =", bce_with_logits(0.0, 1.0))

pred, gt = np.array([12.0, 8.0, 40.0, 30.0]), np.array([10.0, 10.0, 44.0, 38.0])
loss, grad, terms = ciou_loss(pred, gt)
print(f"CIoU {loss:.4f}, IoU {terms.iou:.4f}, rho^2/c^2 {terms.center_dist_sq / terms.enclosing_diag_sq:.4f}")

# central differences with the trade-off alpha held fixed
h = 1e-4
num = np.array([
    (ciou_loss(pred + h * e, gt, terms.tradeoff)[0] - ciou_loss(pred - h * e, gt, terms.tradeoff)[0]) / (2 * h)
    for e in np.eye(4)
])
print("analytic", np.round(grad, 6))
print("numeric ", np.round(num, 6))

# DFL puts the target between two neighbouring bins
print("dfl, uniform logits, target 3.4:", dfl_loss(np.zeros(16), 3.4)[0], "(log 16 =", np.log(16), ")")

# the combined loss on a random 2-level head
rng = np.random.default_rng(0)
maps = [rng.normal(size=(1, 66, 8, 8)).astype(np.float32), rng.normal(size=(1, 66, 4, 4)).astype(np.float32)]
preds = FlatPredictions.from_maps(maps, 2, strides=(8, 16))
assigned = assign_targets_center([(8, 8, 30, 28), (10, 20, 60, 62)], [0, 1], [(8, 8), (4, 4)], (8, 16), (32,))
total, box, cls, dfl = detection_loss(preds, assigned, 2)
print(f"total {total:.3f} = 7.5 * {box:.3f} + 0.5 * {cls:.3f} + 1.5 * {dfl:.3f}")
