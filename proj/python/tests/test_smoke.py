# Copyright (c) 2026 The trans2seg Authors. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import numpy as np
import pytest

import trans2seg as t2s


def tiny_config():
    cfg = t2s.ModelConfig()
    cfg.embed_dim = 16
    cfg.heads = 2
    cfg.num_classes = 4
    cfg.input_size = 32
    cfg.stage_channels = [4, 8, 8, 16]
    cfg.head_hidden = 8
    cfg.validate()
    return cfg


def test_forward_and_trace_shapes():
    model = t2s.Model(tiny_config(), seed=1)
    image = np.random.default_rng(0).random((3, 32, 32), dtype=np.float32)
    assert model.forward(image).shape == (4, 8, 8)
    trace = model.trace(image)
    assert trace["attn"].shape == (4, 2, 4)
    assert trace["encoded"].shape == (4, 16)
    mask = model.predict(image)
    assert mask.shape == (32, 32)
    assert mask.max() < 4


def test_attention_rows_sum_to_one():
    cfg = tiny_config()
    model = t2s.Model(cfg, seed=2)
    image = np.random.default_rng(1).random((3, 32, 32), dtype=np.float32)
    logits = model.trace(image)["attn"].astype(np.float64)
    weights = np.exp(logits - logits.max(axis=-1, keepdims=True))
    weights /= weights.sum(axis=-1, keepdims=True)
    np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-6)


def test_wrong_input_size_raises():
    model = t2s.Model(tiny_config())
    with pytest.raises(t2s.DimensionError):
        model.forward(np.zeros((3, 48, 48), dtype=np.float32))


def test_checkpoint_round_trip(tmp_path):
    a = t2s.Model(tiny_config(), seed=3)
    b = t2s.Model(tiny_config(), seed=4)
    path = str(tmp_path / "m.t2sg")
    a.save(path)
    b.load(path)
    image = np.random.default_rng(2).random((3, 32, 32), dtype=np.float32)
    assert np.array_equal(a.forward(image), b.forward(image))


def test_metrics_match_numpy():
    rng = np.random.default_rng(3)
    truth = rng.integers(0, 3, size=(8, 8)).astype(np.uint8)
    pred = rng.integers(0, 3, size=(8, 8)).astype(np.uint8)
    cm = t2s.confusion_matrix(pred, truth, 3)
    expected = np.zeros((3, 3), dtype=np.uint64)
    np.add.at(expected, (truth.ravel(), pred.ravel()), 1)
    assert np.array_equal(cm, expected)
    scores = t2s.segmentation_scores(pred, truth, 3)
    assert scores["accuracy"] == pytest.approx(np.mean(truth == pred))
    blob = np.zeros((5, 5), dtype=np.uint8)
    blob[0, 0] = blob[1, 1] = blob[4, 4] = 1
    assert t2s.count_components(blob, 1) == 2
    assert t2s.cmcc([blob, blob], 1) == pytest.approx(2.0)


def test_short_training_run_is_deterministic():
    data = t2s.synth_dataset(5, 6, 32, 4)
    cfg = t2s.TrainConfig()
    cfg.epochs = 2
    cfg.lr = 1e-3
    cfg.checkpoint_every = 0
    logs = []
    for _ in range(2):
        model = t2s.Model(tiny_config(), seed=0)
        logs.append(t2s.train(model, data[:4], data[4:], cfg))
    assert logs[0] == logs[1]
    assert [e[0] for e in logs[0]] == [1, 2]
    assert t2s.poly_lr(1.0, 5, 10, 1.0) == pytest.approx(0.5)


def test_cli_entry_point():
    code, out, _ = t2s.run_cli(["flops"])
    assert code == 0
    assert "total" in out
    code, _, err = t2s.run_cli(["train", "--config", "/nonexistent.ini"])
    assert code == 2
