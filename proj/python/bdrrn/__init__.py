# Copyright 2026 The bdrrn Authors. All Rights Reserved.
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

"""Mask-guided recursive residual network for compressed-video enhancement."""

from ._core import (
    Error,
    InputError,
    Model,
    bd_rate,
    gradient_check,
    mean_mask,
    param_count,
    psnr,
    random_quadtree,
    synth_degrade,
    validate_tiling,
    __version__,
)

__all__ = [
    "Error",
    "InputError",
    "Model",
    "bd_rate",
    "gradient_check",
    "mean_mask",
    "param_count",
    "psnr",
    "random_quadtree",
    "synth_degrade",
    "validate_tiling",
    "__version__",
]
