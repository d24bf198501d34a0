import re

import numpy as np
import pytest

from yolomu.forward import forward
from yolomu.graph import (
    LayerSpec,
    build_yolov5mu,
    estimate_flops,
    infer_shapes,
    layer_macs,
    param_count,
    tensor_specs,
)
from yolomu.weights import (
    WeightFormatError,
    expected_file_size,
    init_weights,
    load_weights,
    save_weights,
)

# Parameter column of the published architecture table, in row order.
TABLE_PARAMS = [
    ("Conv1", 5280), ("Conv2", 41664), ("C3-1", 65280), ("Conv3", 166272), ("C3-2", 444672),
    ("Conv4", 664320), ("C3-3", 2512896), ("Conv5", 2655744), ("C3-4", 4134912), ("SPPF", 1476864),
    ("Conv6", 295680), ("Upsample", 0), ("Concat", 0), ("C3-5", 1182720), ("Conv7", 74112),
    ("Upsample", 0), ("Concat", 0), ("C3-6", 296448), ("Conv8", 332160), ("Concat", 0),
    ("C3-7", 1035264), ("Conv9", 1327872), ("Concat", 0), ("C3-8", 4134912), ("Detect", 4220380),
]


@pytest.fixture(scope="module")
def graph():
    return build_yolov5mu(4)


class TestBuild:
    def test_rows_and_detect_inputs(self, graph):
        assert len(graph.layers) == 25
        assert graph.detect.in_channels == (192, 384, 768)
        assert [layer.name for layer in graph.layers] == [name for name, _ in TABLE_PARAMS]

    def test_bottleneck_counts(self, graph):
        c3 = [layer for layer in graph.layers if layer.kind == "C3"]
        assert [layer.bottlenecks for layer in c3] == [2, 4, 6, 2, 2, 2, 2, 2]
        assert [layer.shortcut for layer in c3] == [True] * 4 + [False] * 4

    def test_topological(self, graph):
        for layer in graph.layers:
            assert all(src < layer.id for src in layer.inputs)

    def test_layer_spec_rejects_forward_edges(self):
        with pytest.raises(ValueError):
            LayerSpec(3, "x", "Conv", (3,), 8, (4,))
        with pytest.raises(ValueError):
            LayerSpec(3, "x", "Concat", (3,), 8, (1,))

    def test_invalid_num_classes(self):
        with pytest.raises(ValueError):
            build_yolov5mu(0)


class TestParams:
    def test_rows_match_table(self, graph):
        rows, total = param_count(graph)
        assert [(r.name, r.params) for r in rows] == TABLE_PARAMS
        assert total == 25_067_452

    def test_single_class_delta(self):
        _, t4 = param_count(build_yolov5mu(4))
        rows1, t1 = param_count(build_yolov5mu(1))
        # only the three final class convs shrink: 3 levels x (192 weights + 1 bias) per class
        assert t4 - t1 == 3 * (192 + 1) * (4 - 1)
        assert [r.params for r in rows1[:-1]] == [p for _, p in TABLE_PARAMS[:-1]]

    def test_num_classes_only_touches_class_branch(self):
        a = {t.name: t.shape for t in tensor_specs(build_yolov5mu(4))}
        b = {t.name: t.shape for t in tensor_specs(build_yolov5mu(7))}
        changed = {n for n in a if a[n] != b[n]}
        assert changed and all(re.search(r"cls\d\.2\.", n) for n in changed)


class TestShapes:
    def test_pyramid_640(self, graph):
        shapes = infer_shapes(graph, (640, 640))
        assert shapes[9] == ((768, 20, 20),)
        assert [s[1:] for s in shapes[-1]] == [(80, 80), (40, 40), (20, 20)]
        src = [shapes[i][0] for i in graph.detect.inputs]
        assert src == [(192, 80, 80), (384, 40, 40), (768, 20, 20)]

    def test_pyramid_320(self, graph):
        assert [s[1:] for s in infer_shapes(graph, (320, 320))[-1]] == [(40, 40), (20, 20), (10, 10)]

    def test_neck_concat_widths(self, graph):
        shapes = infer_shapes(graph)
        assert shapes[11] == ((384, 40, 40),)
        assert shapes[12] == ((768, 40, 40),)

    def test_indivisible(self, graph):
        with pytest.raises(ValueError):
            infer_shapes(graph, (641, 640))


class TestFlops:
    def test_conv1(self, graph):
        assert 2 * layer_macs(graph)[0] == 2 * 320 * 320 * 48 * 108
        assert abs(2 * layer_macs(graph)[0] / 1e9 - 1.062) < 1e-3

    def test_total(self, graph):
        assert abs(estimate_flops(graph) - 64.0) <= 6.4

    def test_quadratic_scaling(self, graph):
        full, quarter = estimate_flops(graph, (640, 640)), estimate_flops(graph, (320, 320))
        assert abs(quarter * 4 - full) <= 1e-6 * full


class TestWeights:
    def test_deterministic(self, graph):
        assert init_weights(graph, 3) == init_weights(graph, 3)
        assert init_weights(graph, 3) != init_weights(graph, 4)

    def test_parameter_elements(self, graph):
        store = init_weights(graph, 0)
        trainable = {t.name for t in tensor_specs(graph) if t.trainable}
        assert sum(store[n].size for n in trainable) == 25_067_452
        for spec in tensor_specs(graph):
            assert store[spec.name].shape == spec.shape

    def test_init_ranges(self, graph):
        store = init_weights(graph, 0)
        w = store["layer0.conv.weight"]
        assert np.abs(w).max() <= 1 / np.sqrt(3 * 36)
        assert np.all(store["layer0.bn.gamma"] == 1) and np.all(store["layer0.bn.var"] == 1)
        assert np.all(store["layer0.bn.beta"] == 0) and np.all(store["layer0.bn.mean"] == 0)
        assert store["layer24.dfl.weight"].ravel().tolist() == list(range(16))

    def test_round_trip(self, graph, tmp_path):
        store = init_weights(graph, 11)
        path = tmp_path / "w.bin"
        save_weights(store, path)
        loaded = load_weights(path, graph)
        assert loaded == store
        assert path.stat().st_size == expected_file_size(store)

    def test_file_size_from_format(self, tmp_path):
        from yolomu.weights import WeightStore

        store = WeightStore(2, {"layer0.a": np.ones((2, 3), np.float32), "layer1.b": np.zeros(5, np.float32)})
        save_weights(store, tmp_path / "w.bin")
        # 16 header + (2 + 8 + 1 + 8 + 24) + (2 + 8 + 1 + 4 + 20)
        assert (tmp_path / "w.bin").stat().st_size == 16 + 43 + 35

    def test_bad_magic(self, graph, tmp_path):
        path = tmp_path / "w.bin"
        save_weights(init_weights(graph, 0), path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(WeightFormatError, match="magic"):
            load_weights(path)

    def test_truncated(self, graph, tmp_path):
        path = tmp_path / "w.bin"
        save_weights(init_weights(graph, 0), path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(WeightFormatError, match="truncated"):
            load_weights(path)

    def test_shape_mismatch(self, tmp_path):
        path = tmp_path / "w.bin"
        save_weights(init_weights(build_yolov5mu(3), 0), path)
        with pytest.raises(WeightFormatError):
            load_weights(path, build_yolov5mu(4))


@pytest.fixture(scope="module")
def store(graph):
    return init_weights(graph, 5)


class TestForward:
    def test_output_shapes(self, graph, store):
        x = np.random.default_rng(0).random((1, 3, 64, 96), dtype=np.float32)
        maps = forward(graph, store, x)
        assert [m.shape for m in maps] == [(1, 68, 8, 12), (1, 68, 4, 6), (1, 68, 2, 3)]

    def test_deterministic(self, graph, store):
        x = np.random.default_rng(1).random((1, 3, 64, 64), dtype=np.float32)
        a, b = forward(graph, store, x), forward(graph, store, x)
        for m, n in zip(a, b):
            assert m.tobytes() == n.tobytes()

    def test_zero_network(self, graph, store):
        zero = init_weights(graph, 5)
        for name, t in zero.tensors.items():
            if name.endswith("conv.weight") or name.endswith("bn.gamma") or name.endswith("2.weight"):
                zero.tensors[name] = np.zeros_like(t)
        x = np.random.default_rng(2).random((1, 3, 64, 64), dtype=np.float32)
        for lvl, m in enumerate(forward(graph, zero, x)):
            bias = zero[f"layer24.cls{lvl}.2.bias"]
            assert np.all(m[0, 64:] == bias[:, None, None])

    def test_bad_inputs(self, graph, store):
        with pytest.raises(ValueError):
            forward(graph, store, np.zeros((1, 3, 60, 64), np.float32))
        broken = init_weights(graph, 0)
        del broken.tensors["layer3.conv.weight"]
        with pytest.raises(WeightFormatError):
            forward(graph, broken, np.zeros((1, 3, 64, 64), np.float32))

    def test_translation_by_one_stride32_cell(self, graph):
        # Weights with compact spatial support: centre-tap 3x3 kernels in the
        # bottlenecks and head, SPPF reads only its unpooled branch.  The
        # response to one pixel then stays inside the frame, so shifting the
        # pixel by 32 px must shift the stride-32 map by one cell exactly.
        w = init_weights(graph, 1)
        for name, t in w.tensors.items():
            if name.endswith("bn.gamma"):
                w.tensors[name] = t * 3
            elif re.search(r"(\.m\d+\.cv2|\.(box|cls)\d\.[01])\.conv\.weight$", name):
                c = np.zeros_like(t)
                c[:, :, 1, 1] = t[:, :, 1, 1]
                w.tensors[name] = c
        sppf = w.tensors["layer9.cv2.conv.weight"].copy()
        sppf[:, sppf.shape[1] // 4 :] = 0
        w.tensors["layer9.cv2.conv.weight"] = sppf

        a = np.zeros((1, 3, 384, 384), np.float32)
        b = a.copy()
        a[0, :, 150, 170] = 20.0
        b[0, :, 182, 202] = 20.0
        ma, mb = forward(graph, w, a)[2][0], forward(graph, w, b)[2][0]
        assert np.abs(ma - ma[:, :1, :1]).max() > 1e-4  # the pixel is visible
        np.testing.assert_array_equal(ma[:, 1:-2, 1:-2], mb[:, 2:-1, 2:-1])
