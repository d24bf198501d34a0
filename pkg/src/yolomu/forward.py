"""Network execution over a ModelGraph and WeightStore."""

from __future__ import annotations

from typing import Dict, List

import numpy as np

from . import tensor as T
from .graph import IMAGE, LayerSpec, ModelGraph
from .weights import WeightStore

BN_EPS = 1e-3


def _conv_block(w: WeightStore, prefix: str, x: np.ndarray, stride: int = 1) -> np.ndarray:
    weight = w[f"{prefix}.conv.weight"]
    k = weight.shape[-1]
    pad = 2 if k == 6 else k // 2
    y = T.conv2d(x, weight, stride=stride, padding=pad)
    y = T.batch_norm(
        y, w[f"{prefix}.bn.gamma"], w[f"{prefix}.bn.beta"], w[f"{prefix}.bn.mean"], w[f"{prefix}.bn.var"], BN_EPS
    )
    return T.silu(y)


def _c3(w: WeightStore, p: str, layer: LayerSpec, x: np.ndarray) -> np.ndarray:
    a = _conv_block(w, f"{p}.cv1", x)
    for b in range(layer.bottlenecks):
        y = _conv_block(w, f"{p}.m{b}.cv2", _conv_block(w, f"{p}.m{b}.cv1", a))
        a = (a.astype(np.float64) + y).astype(np.float32) if layer.shortcut else y
    return _conv_block(w, f"{p}.cv3", T.concat([a, _conv_block(w, f"{p}.cv2", x)]))


def _sppf(w: WeightStore, p: str, layer: LayerSpec, x: np.ndarray) -> np.ndarray:
    y = [_conv_block(w, f"{p}.cv1", x)]
    for _ in range(3):
        y.append(T.max_pool2d(y[-1], layer.kernel, 1, layer.kernel // 2))
    return _conv_block(w, f"{p}.cv2", T.concat(y))


def _detect(graph: ModelGraph, w: WeightStore, p: str, feats: List[np.ndarray]) -> List[np.ndarray]:
    outs = []
    for lvl, x in enumerate(feats):
        branches = []
        for head in ("box", "cls"):
            h = _conv_block(w, f"{p}.{head}{lvl}.0", x)
            h = _conv_block(w, f"{p}.{head}{lvl}.1", h)
            branches.append(T.conv2d(h, w[f"{p}.{head}{lvl}.2.weight"], w[f"{p}.{head}{lvl}.2.bias"]))
        outs.append(T.concat(branches))
    return outs


def forward(graph: ModelGraph, weights: WeightStore, image: np.ndarray) -> List[np.ndarray]:
    """Run the network on a (1, 3, H, W) float image scaled to [0, 1].

    Returns three raw prediction maps of shape (1, 4*reg_max + nc, H/s, W/s)
    for strides 8, 16 and 32: box-distribution logits first, class logits last.
    """
    x = T.as_tensor(image)
    if x.shape[0] != 1 or x.shape[1] != 3 or x.shape[2] % 32 or x.shape[3] % 32:
        raise T.ShapeError(f"expected (1, 3, H, W) with H, W multiples of 32, got {x.shape}")
    weights.validate(graph)
    acts: Dict[int, np.ndarray] = {IMAGE: x}
    for layer in graph.layers:
        p = f"layer{layer.id}"
        src = [acts[i] for i in layer.inputs]
        if layer.kind == "Conv":
            out = _conv_block(weights, p, src[0], layer.stride)
        elif layer.kind == "C3":
            out = _c3(weights, p, layer, src[0])
        elif layer.kind == "SPPF":
            out = _sppf(weights, p, layer, src[0])
        elif layer.kind == "Upsample":
            out = T.upsample_nearest(src[0], layer.kernel)
        elif layer.kind == "Concat":
            out = T.concat(src)
        else:
            return _detect(graph, weights, p, src)
        acts[layer.id] = out
    raise AssertionError("graph has no Detect layer")
