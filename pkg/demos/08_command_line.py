"""
The command-line pipeline
=========================

Write a few synthetic frames and labels, then run every subcommand:
augment, detect (seeded random weights), eval and report.  Output goes to a
temporary directory.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from yolomu.cli import main
from yolomu.dataset import write_manifest
from yolomu.imageio import write_image

work = Path(tempfile.mkdtemp(prefix="yolomu_demo_"))
rng = np.random.default_rng(0)
pairs = []
for k in range(3):
    write_image(work / f"f{k}.ppm", rng.integers(0, 256, (96, 128, 3), dtype=np.uint8))
    (work / f"f{k}.txt").write_text(f"{k} 0.5 0.5 0.4 0.6\n")
    pairs.append((f"f{k}.ppm", f"f{k}.txt"))
write_manifest(work / "manifest.tsv", pairs)

main(["build-info", "--img", "320"])

main(["augment", "--manifest", str(work / "manifest.tsv"), "--img", "64", "--seed", "7", "--out", str(work / "aug")])
print("augmented:", sorted(p.name for p in (work / "aug" / "images").iterdir()))

# random weights give random boxes; a small input keeps this quick
main(["detect", "--manifest", str(work / "manifest.tsv"), "--img", "64", "--conf", "0.3",
      "--out", str(work / "dets.jsonl")])
lines = (work / "dets.jsonl").read_text().splitlines()
print(len(lines), "detections, first:", json.loads(lines[0]) if lines else None)

main(["eval", "--detections", str(work / "dets.jsonl"), "--manifest", str(work / "manifest.tsv"),
      "--out", str(work / "metrics")])

(work / "loss.csv").write_text("epoch,box,cls,dfl\n1,1.9,3.1,1.6\n2,1.4,2.2,1.3\n3,1.1,1.5,1.1\n")
main(["report", "--metrics", str(work / "metrics" / "metrics.json"), "--loss-log", str(work / "loss.csv"),
      "--out", str(work / "report")])
print("report files:", sorted(p.name for p in (work / "report").iterdir()))
print("everything is under", work)
