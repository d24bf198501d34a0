"""
Inspecting the detector graph
=============================

Build the 4-class model, print its layer table, and look at how the
numbers move with the class count and the input size.
"""

from yolomu.graph import build_yolov5mu, estimate_flops, infer_shapes, layer_table, module_count, param_count

graph = build_yolov5mu(num_classes=4)

# one row per block: backbone, SPPF, PAN neck, then the detect head
for row in layer_table(graph, (640, 640)):
    print(f"{row.id:>2} {row.name:<9} {row.params:>10,}  {row.flops:7.3f} GFLOPs  {row.out_shape}")

rows, total = param_count(graph)
print(f"\n{total:,} parameters, {estimate_flops(graph):.1f} GFLOPs (2 x MACs) at 640x640")
print(f"{len(rows)} table rows, {module_count(graph)} modules when every conv/bn/act is counted")

# only the three class convs depend on the class count
_, one_class = param_count(build_yolov5mu(1))
print(f"single-class model: {one_class:,} parameters ({total - one_class:,} fewer)")

# the three output grids at a smaller input
shapes = infer_shapes(graph, (320, 320))
print("detect grids at 320x320:", [s[1:] for s in shapes[graph.detect.id]])
