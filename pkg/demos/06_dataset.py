"""
Labels, classes and splits
==========================

YOLO text labels hold one `class cx cy w h` line per object, normalized to
the frame.  This parses a small file, converts to pixels and splits a
60-frame list.
"""

from yolomu.dataset import ClassMap, LabelError, norm_to_pixel, parse_label_file, split_dataset, write_label_file

classes = ClassMap()
text = """0 0.5 0.5 0.25 0.1
2 0.30 0.62 0.20 0.55

3 0.81 0.55 0.12 0.70
"""
anns = parse_label_file(text, num_classes=len(classes))
for a in anns:
    print(f"{classes.names[a.class_id]:<26} ->", tuple(round(v, 1) for v in norm_to_pixel(a[1:], 2560, 1920)))

print(write_label_file(anns), end="")

# bad lines are reported with their line number
try:
    parse_label_file("0 0.5 0.5 0.1 0.1\n4 0.5 0.5 0.1 0.1", num_classes=4)
except LabelError as err:
    print("rejected:", err)

train, val = split_dataset([f"frame_{i:03d}" for i in range(60)], ratio=0.8, seed=0)
print(len(train), "train /", len(val), "val; first val frames:", val[:3])
