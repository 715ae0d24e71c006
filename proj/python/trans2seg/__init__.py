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

"""Hybrid CNN-Transformer segmentation of transparent objects."""

from ._core import (
    ConfigError,
    DataError,
    DimensionError,
    Error,
    Model,
    ModelConfig,
    NumericalError,
    Sample,
    Scale,
    StateError,
    TrainConfig,
    Variant,
    cmcc,
    confusion_matrix,
    count_components,
    gradcheck,
    pixel_ratio,
    poly_lr,
    run_cli,
    segmentation_scores,
    synth_dataset,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "Error",
    "Model",
    "ModelConfig",
    "NumericalError",
    "Sample",
    "Scale",
    "StateError",
    "TrainConfig",
    "Variant",
    "cmcc",
    "confusion_matrix",
    "count_components",
    "gradcheck",
    "pixel_ratio",
    "poly_lr",
    "run_cli",
    "segmentation_scores",
    "synth_dataset",
    "train",
]
