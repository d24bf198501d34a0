"""Declarative YOLOv5mu layer graph with shape, parameter and FLOP accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

IMAGE = -1  # pseudo layer id for the network input

KINDS = ("Conv", "C3", "SPPF", "Upsample", "Concat", "Detect")


@dataclass(frozen=True)
class LayerSpec:
    id: int
    name: str
    kind: str
    in_channels: Tuple[int, ...]
    out_channels: int
    inputs: Tuple[int, ...]
    kernel: int = 1
    stride: int = 1
    padding: int = 0
    bottlenecks: int = 0
    shortcut: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if any(src >= self.id for src in self.inputs):
            raise ValueError(f"layer {self.id} reads from a later layer: {self.inputs}")
        if self.kind == "Concat" and len(self.inputs) < 2:
            raise ValueError("Concat needs at least two inputs")
        if self.kind == "Detect" and len(self.inputs) != 3:
            raise ValueError("Detect consumes exactly three feature maps")
        if self.kind not in ("Concat", "Detect") and len(self.inputs) != 1:
            raise ValueError(f"{self.kind} takes exactly one input")


@dataclass(frozen=True)
class ModelGraph:
    layers: Tuple[LayerSpec, ...]
    num_classes: int
    strides: Tuple[int, ...] = (8, 16, 32)
    reg_max: int = 16

    def __post_init__(self):
        detects = [layer for layer in self.layers if layer.kind == "Detect"]
        if len(detects) != 1:
            raise ValueError("graph must contain exactly one Detect layer")

    @property
    def detect(self) -> LayerSpec:
        return self.layers[-1]

    @property
    def box_hidden(self) -> int:
        return max(16, self.detect.in_channels[0] // 4, 4 * self.reg_max)

    @property
    def cls_hidden(self) -> int:
        return max(self.detect.in_channels[0], min(self.num_classes, 100))

    @property
    def outputs_per_cell(self) -> int:
        return 4 * self.reg_max + self.num_classes


def build_yolov5mu(num_classes: int = 4) -> ModelGraph:
    """Build the YOLOv5mu graph: CSP backbone, SPPF, PAN neck, anchor-free head."""
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")
    layers: List[LayerSpec] = []
    width: Dict[int, int] = {IMAGE: 3}

    def add(name, kind, out, inputs=None, **kw):
        lid = len(layers)
        inputs = tuple(inputs) if inputs is not None else (lid - 1 if lid else IMAGE,)
        in_ch = tuple(width[i] for i in inputs)
        if kind == "Concat":
            out = sum(in_ch)
        elif kind in ("Upsample",):
            out = in_ch[0]
        layers.append(LayerSpec(lid, name, kind, in_ch, out, inputs, **kw))
        width[lid] = out
        return lid

    def conv(name, out, k, s, inputs=None):
        pad = 2 if k == 6 else k // 2
        return add(name, "Conv", out, inputs, kernel=k, stride=s, padding=pad)

    def c3(name, out, n, shortcut, inputs=None):
        return add(name, "C3", out, inputs, bottlenecks=n, shortcut=shortcut)

    # backbone
    conv("Conv1", 48, 6, 2)
    conv("Conv2", 96, 3, 2)
    c3("C3-1", 96, 2, True)
    conv("Conv3", 192, 3, 2)
    p3 = c3("C3-2", 192, 4, True)
    conv("Conv4", 384, 3, 2)
    p4 = c3("C3-3", 384, 6, True)
    conv("Conv5", 768, 3, 2)
    c3("C3-4", 768, 2, True)
    add("SPPF", "SPPF", 768, kernel=5)
    # top-down path
    h5 = conv("Conv6", 384, 1, 1)
    add("Upsample", "Upsample", 0, kernel=2)
    add("Concat", "Concat", 0, inputs=(len(layers) - 1, p4))
    c3("C3-5", 384, 2, False)
    h4 = conv("Conv7", 192, 1, 1)
    add("Upsample", "Upsample", 0, kernel=2)
    add("Concat", "Concat", 0, inputs=(len(layers) - 1, p3))
    out3 = c3("C3-6", 192, 2, False)
    # bottom-up path
    conv("Conv8", 192, 3, 2)
    add("Concat", "Concat", 0, inputs=(len(layers) - 1, h4))
    out4 = c3("C3-7", 384, 2, False)
    conv("Conv9", 384, 3, 2)
    add("Concat", "Concat", 0, inputs=(len(layers) - 1, h5))
    out5 = c3("C3-8", 768, 2, False)
    add("Detect", "Detect", 4 * 16 + num_classes, inputs=(out3, out4, out5))
    return ModelGraph(tuple(layers), num_classes)


# ---------------------------------------------------------------------------
# parameter enumeration


@dataclass(frozen=True)
class TensorSpec:
    """One stored tensor. ``trainable`` is False for batch-norm running stats."""

    name: str
    layer: int
    shape: Tuple[int, ...]
    trainable: bool = True

    @property
    def size(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


def _conv_block(prefix: str, lid: int, c1: int, c2: int, k: int) -> Iterator[TensorSpec]:
    yield TensorSpec(f"{prefix}.conv.weight", lid, (c2, c1, k, k))
    yield TensorSpec(f"{prefix}.bn.gamma", lid, (c2,))
    yield TensorSpec(f"{prefix}.bn.beta", lid, (c2,))
    yield TensorSpec(f"{prefix}.bn.mean", lid, (c2,), trainable=False)
    yield TensorSpec(f"{prefix}.bn.var", lid, (c2,), trainable=False)


def layer_tensors(graph: ModelGraph, layer: LayerSpec) -> Iterator[TensorSpec]:
    p = f"layer{layer.id}"
    lid = layer.id
    c1 = layer.in_channels[0]
    c2 = layer.out_channels
    if layer.kind == "Conv":
        yield from _conv_block(p, lid, c1, c2, layer.kernel)
    elif layer.kind == "C3":
        h = c2 // 2
        yield from _conv_block(f"{p}.cv1", lid, c1, h, 1)
        yield from _conv_block(f"{p}.cv2", lid, c1, h, 1)
        yield from _conv_block(f"{p}.cv3", lid, 2 * h, c2, 1)
        for b in range(layer.bottlenecks):
            yield from _conv_block(f"{p}.m{b}.cv1", lid, h, h, 1)
            yield from _conv_block(f"{p}.m{b}.cv2", lid, h, h, 3)
    elif layer.kind == "SPPF":
        h = c1 // 2
        yield from _conv_block(f"{p}.cv1", lid, c1, h, 1)
        yield from _conv_block(f"{p}.cv2", lid, 4 * h, c2, 1)
    elif layer.kind == "Detect":
        cb, cc, nc = graph.box_hidden, graph.cls_hidden, graph.num_classes
        nbox = 4 * graph.reg_max
        for lvl, ch in enumerate(layer.in_channels):
            yield from _conv_block(f"{p}.box{lvl}.0", lid, ch, cb, 3)
            yield from _conv_block(f"{p}.box{lvl}.1", lid, cb, cb, 3)
            yield TensorSpec(f"{p}.box{lvl}.2.weight", lid, (nbox, cb, 1, 1))
            yield TensorSpec(f"{p}.box{lvl}.2.bias", lid, (nbox,))
            yield from _conv_block(f"{p}.cls{lvl}.0", lid, ch, cc, 3)
            yield from _conv_block(f"{p}.cls{lvl}.1", lid, cc, cc, 3)
            yield TensorSpec(f"{p}.cls{lvl}.2.weight", lid, (nc, cc, 1, 1))
            yield TensorSpec(f"{p}.cls{lvl}.2.bias", lid, (nc,))
        # fixed projection 0..reg_max-1; counted as a parameter, never trained
        yield TensorSpec(f"{p}.dfl.weight", lid, (1, graph.reg_max, 1, 1))


def tensor_specs(graph: ModelGraph) -> List[TensorSpec]:
    return [t for layer in graph.layers for t in layer_tensors(graph, layer)]


@dataclass
class LayerRow:
    """One line of the per-layer inspection table."""

    id: int
    name: str
    kind: str
    in_channels: Tuple[int, ...]
    out_channels: int
    params: int
    out_shape: Optional[Tuple[int, ...]] = None
    flops: Optional[float] = None
    detail: str = ""


def param_count(graph: ModelGraph) -> Tuple[List[LayerRow], int]:
    """Per-layer parameter counts (running statistics excluded) and the total."""
    rows = []
    for layer in graph.layers:
        n = sum(t.size for t in layer_tensors(graph, layer) if t.trainable)
        rows.append(LayerRow(layer.id, layer.name, layer.kind, layer.in_channels, layer.out_channels, n,
                             detail=_describe(layer)))
    return rows, sum(r.params for r in rows)


def _describe(layer: LayerSpec) -> str:
    if layer.kind == "Conv":
        return f"k{layer.kernel} s{layer.stride} p{layer.padding}"
    if layer.kind == "C3":
        return f"n={layer.bottlenecks}" + ("" if layer.shortcut else " no-shortcut")
    if layer.kind == "SPPF":
        return f"{layer.kernel}x{layer.kernel} pooling"
    if layer.kind == "Upsample":
        return f"nearest x{layer.kernel}"
    if layer.kind == "Detect":
        return "anchor-free, reg_max=16"
    return ""


# ---------------------------------------------------------------------------
# shapes and FLOPs


def _check_hw(input_hw: Tuple[int, int]) -> Tuple[int, int]:
    h, w = (int(v) for v in input_hw)
    if h <= 0 or w <= 0 or h % 32 or w % 32:
        raise ValueError(f"input size {h}x{w} must be positive multiples of 32")
    return h, w


def infer_shapes(graph: ModelGraph, input_hw: Tuple[int, int] = (640, 640)) -> List[Tuple[Tuple[int, int, int], ...]]:
    """Output (C, H, W) per layer. Detect returns one shape per level."""
    h, w = _check_hw(input_hw)
    shapes: Dict[int, Tuple[int, int, int]] = {IMAGE: (3, h, w)}
    table = []
    for layer in graph.layers:
        src = [shapes[i] for i in layer.inputs]
        c, ih, iw = src[0]
        if layer.kind == "Conv":
            k, s, p = layer.kernel, layer.stride, layer.padding
            out = (layer.out_channels, (ih + 2 * p - k) // s + 1, (iw + 2 * p - k) // s + 1)
        elif layer.kind in ("C3", "SPPF"):
            out = (layer.out_channels, ih, iw)
        elif layer.kind == "Upsample":
            out = (c, ih * layer.kernel, iw * layer.kernel)
        elif layer.kind == "Concat":
            if any(sh[1:] != (ih, iw) for sh in src):
                raise ValueError(f"spatial mismatch at {layer.name}: {src}")
            out = (sum(sh[0] for sh in src), ih, iw)
        else:  # Detect
            per_level = tuple((graph.outputs_per_cell, sh[1], sh[2]) for sh in src)
            shapes[layer.id] = per_level[0]
            table.append(per_level)
            continue
        shapes[layer.id] = out
        table.append((out,))
    return table


def _conv_macs(c1: int, c2: int, k: int, hw: Tuple[int, int]) -> int:
    return c1 * c2 * k * k * hw[0] * hw[1]


def layer_macs(graph: ModelGraph, input_hw: Tuple[int, int] = (640, 640)) -> List[int]:
    """Multiply-accumulates per layer; only convolutions contribute."""
    shapes = infer_shapes(graph, input_hw)
    macs = []
    for layer, out in zip(graph.layers, shapes):
        hw = out[0][1:]
        c1, c2 = layer.in_channels[0], layer.out_channels
        if layer.kind == "Conv":
            m = _conv_macs(c1, c2, layer.kernel, hw)
        elif layer.kind == "C3":
            h = c2 // 2
            m = 2 * _conv_macs(c1, h, 1, hw) + _conv_macs(2 * h, c2, 1, hw)
            m += layer.bottlenecks * (_conv_macs(h, h, 1, hw) + _conv_macs(h, h, 3, hw))
        elif layer.kind == "SPPF":
            h = c1 // 2
            m = _conv_macs(c1, h, 1, hw) + _conv_macs(4 * h, c2, 1, hw)
        elif layer.kind == "Detect":
            cb, cc = graph.box_hidden, graph.cls_hidden
            m = 0
            for ch, lvl in zip(layer.in_channels, out):
                lhw = lvl[1:]
                m += _conv_macs(ch, cb, 3, lhw) + _conv_macs(cb, cb, 3, lhw) + _conv_macs(cb, 4 * graph.reg_max, 1, lhw)
                m += _conv_macs(ch, cc, 3, lhw) + _conv_macs(cc, cc, 3, lhw) + _conv_macs(cc, graph.num_classes, 1, lhw)
                m += 4 * graph.reg_max * lhw[0] * lhw[1]  # DFL projection
        else:
            m = 0
        macs.append(m)
    return macs


def estimate_flops(graph: ModelGraph, input_hw: Tuple[int, int] = (640, 640)) -> float:
    """GFLOPs as 2 x multiply-accumulates over all convolutions."""
    return 2 * sum(layer_macs(graph, input_hw)) / 1e9


def layer_table(graph: ModelGraph, input_hw: Tuple[int, int] = (640, 640)) -> List[LayerRow]:
    rows, _ = param_count(graph)
    shapes = infer_shapes(graph, input_hw)
    for row, out, m in zip(rows, shapes, layer_macs(graph, input_hw)):
        row.out_shape = out[0] if len(out) == 1 else tuple(out)
        row.flops = 2 * m / 1e9
    return rows


def module_count(graph: ModelGraph) -> int:
    """Number of leaf modules (conv, bn, activation, pool, ...) in the unfused network.

    Reported for inspection; no particular counting convention is claimed.
    """
    n = 0
    for layer in graph.layers:
        if layer.kind == "Conv":
            n += 3
        elif layer.kind == "C3":
            n += 3 * 3 + layer.bottlenecks * 2 * 3
        elif layer.kind == "SPPF":
            n += 2 * 3 + 1
        elif layer.kind == "Detect":
            n += len(layer.in_channels) * 2 * (2 * 3 + 1) + 1
        else:
            n += 1
    return n
