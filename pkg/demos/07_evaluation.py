"""
Scoring detections
==================

Greedy matching per image and class, 101-point AP, mAP over IoU 0.50:0.95,
and precision/recall at the best-F1 confidence.
"""

from yolomu.metrics import GroundTruth, ImageDetection, evaluate

gts = [
    GroundTruth("a", 0, (10, 10, 50, 50)),
    GroundTruth("a", 1, (60, 60, 100, 90)),
    GroundTruth("b", 0, (0, 0, 30, 40)),
]
dets = [
    ImageDetection("a", 0, 0.95, (11, 10, 50, 52)),  # good hit
    ImageDetection("a", 0, 0.90, (12, 12, 48, 48)),  # duplicate: false positive
    ImageDetection("a", 1, 0.60, (62, 58, 104, 92)),  # looser hit
    ImageDetection("b", 0, 0.40, (2, 4, 30, 36)),
    ImageDetection("b", 1, 0.30, (200, 200, 210, 210)),  # nothing there
]

s = evaluate(dets, gts, num_classes=2)
print("AP50    per class:", [round(v, 3) for v in s.ap50])
print("AP50-95 per class:", [round(v, 3) for v in s.ap50_95])
print(f"mAP50 {s.map50:.3f}  mAP50-95 {s.map50_95:.3f}")
print(f"P {s.precision:.3f}  R {s.recall:.3f}  at conf {s.confidence}")
print("confusion (rows predicted, cols actual, last = background)\n", s.confusion)

# copying the ground truth gives a perfect score
perfect = evaluate([ImageDetection(g.image, g.class_id, 0.9, g.box) for g in gts], gts, 2)
print("perfect detector:", perfect.map50, perfect.map50_95, perfect.precision, perfect.recall)
