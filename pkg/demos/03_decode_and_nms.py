"""
From head outputs to boxes
==========================

Each cell of each grid predicts four 16-bin distance distributions and one
logit per class.  Decoding turns those into pixel boxes; NMS removes
duplicates.
"""

import math

import numpy as np

from yolomu.detect import Box, Detection, decode_predictions, dfl_expectation, iou, nms

# the expected bin under a softmax is the distance, in grid cells
logits = np.full(16, -20.0)
logits[[2, 3]] = 0.0
print("mass split over bins 2 and 3 ->", dfl_expectation(logits))

# one 2x2 grid at stride 8, two classes
m = np.zeros((1, 66, 2, 2), np.float32)
for side in range(4):
    m[0, side * 16 + 1] = 40.0  # every side one cell from the centre
m[0, 64] = -10.0
m[0, 65] = -10.0
m[0, 64, 0, 0] = math.log(9)  # class 0 at cell (0, 0) with p = 0.9
m[0, 65, 1, 1] = 0.0  # class 1 at cell (1, 1) with p = 0.5

for d in decode_predictions([m], 2, conf_threshold=0.25, strides=(8,), image_size=(16, 16)):
    print(f"class {d.class_id} score {d.score:.2f} box {tuple(round(v, 2) for v in d.box)}")

# greedy, class-aware NMS
cands = [
    Detection(Box(10, 10, 50, 50), 0, 0.9),
    Detection(Box(12, 12, 52, 52), 0, 0.8),  # overlaps the first: suppressed
    Detection(Box(12, 12, 52, 52), 1, 0.7),  # other class: kept
    Detection(Box(80, 80, 120, 120), 0, 0.6),
]
print("IoU of the first two:", round(iou(cands[0].box, cands[1].box), 3))
for d in nms(cands, iou_threshold=0.45):
    print("kept", d)
