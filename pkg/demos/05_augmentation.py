"""
Augmenting a frame
==================

Resize to the network size, maybe drop to grayscale, then jitter hue,
saturation and brightness.  Everything is driven by (master seed, sample
index) so reruns are bit-identical.
"""

import numpy as np

from yolomu.augment import AugmentConfig, adjust_hue, augment_sample, rgb_to_hsv, sample_params, to_grayscale

red = np.array([[[255, 0, 0]]], np.uint8)
print("red in HSV:", rgb_to_hsv(red)[0, 0])
print("hue +0.10 of the wheel:", adjust_hue(red, 0.10)[0, 0])
print("grayscale:", to_grayscale(red)[0, 0])

# a synthetic 4:3 frame with one box
yy, xx = np.mgrid[0:480, 0:640]
frame = np.stack([xx * 255 // 639, yy * 255 // 479, np.full_like(xx, 90)], axis=-1).astype(np.uint8)
boxes = [[0.5, 0.5, 0.3, 0.4]]

cfg = AugmentConfig(master_seed=42)
for i in range(4):
    p = sample_params(cfg, i)
    out, out_boxes = augment_sample(frame, boxes, cfg, i)
    print(f"sample {i}: {out.shape}, gray={p['grayscale']}, hue {p['hue_offset']:+.3f}, "
          f"sat x{p['sat_scale']:.3f}, bright x{p['bright_scale']:.3f}, mean {out.mean():.1f}")

# stretching keeps normalized boxes as they are; letterboxing moves them
_, lb = augment_sample(frame, boxes, AugmentConfig(letterbox=True), 0)
print("boxes after stretch:", out_boxes[0], " after letterbox:", np.round(lb[0], 4))

# about 15% of samples go gray
share = np.mean([sample_params(cfg, i)["grayscale"] for i in range(10_000)])
print(f"grayscale share over 10,000 samples: {share:.3f}")
